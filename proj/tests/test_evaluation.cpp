#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "quadrl/errors.hpp"
#include "quadrl/evaluation.hpp"
#include "support/oracles.hpp"

using namespace quadrl;

namespace {

RecoveryConfig few(int episodes, double altitude) {
  RecoveryConfig c;
  c.episodes = episodes;
  c.altitude = altitude;
  c.duration = 2.0;
  return c;
}

}  // namespace

TEST(Recovery, ZeroEpisodesGiveEmptyReport) {
  const auto r = run_recovery(pd_only_policy({18, 64, 64, 4}), TaskConfig{}, few(0, 2.0), 1);
  EXPECT_EQ(r.episodes, 0);
  EXPECT_EQ(r.failures, 0);
  EXPECT_EQ(r.failure_rate(), 0.0);
  EXPECT_TRUE(r.failed.empty());
}

TEST(Recovery, LowerAltitudeNeverFailsLess) {
  const Mlp stub = pd_only_policy({18, 64, 64, 4});
  const TaskConfig task;
  int previous = -1;
  std::vector<bool> previous_failed;
  for (double altitude : {4.0, 2.0, 1.0, 0.5, 0.1}) {
    const auto r = run_recovery(stub, task, few(30, altitude), 1);
    EXPECT_GE(r.failures, previous) << "altitude " << altitude;
    if (!previous_failed.empty()) {
      for (std::size_t i = 0; i < r.failed.size(); ++i)
        if (previous_failed[i]) EXPECT_TRUE(r.failed[i]) << "episode " << i;
    }
    previous = r.failures;
    previous_failed = r.failed;
  }
}

TEST(Recovery, StartsAreSeededAndAltitudeFree) {
  const TaskConfig task;
  const auto a = recovery_starts(task, few(5, 2.0));
  const auto b = recovery_starts(task, few(5, 7.0));
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  RecoveryConfig other = few(5, 2.0);
  other.seed = 2;
  EXPECT_FALSE(recovery_starts(task, other)[0] == a[0]);
  for (const auto& s : a) EXPECT_LE(s.position.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Recovery, WritesOneCsvPerEpisode) {
  const auto dir = std::filesystem::temp_directory_path() / "quadrl_test_recovery";
  std::filesystem::remove_all(dir);
  std::vector<std::filesystem::path> written;
  run_recovery(pd_only_policy({18, 64, 64, 4}), TaskConfig{}, few(3, 2.0), 1, dir, &written);
  ASSERT_EQ(written.size(), 3u);
  std::ifstream in(written[0]);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("t,px,py,pz,", 0), 0u);
  std::filesystem::remove_all(dir);
}

TEST(Waypoint, StubTracksSomewhatAndReportsErrors) {
  const auto r = run_waypoint(pd_only_policy({18, 64, 64, 4}), TaskConfig{}, WaypointConfig{});
  EXPECT_FALSE(r.diverged);
  EXPECT_GT(r.mean_error, 0.0);
  EXPECT_GE(r.max_error, r.steady_state_error);
  // The untrained policy never moves, so after a 1 m step it is 1 m (or the diagonal) away.
  EXPECT_NEAR(r.max_error, std::sqrt(2.0), 1e-9);
}

TEST(PolicyShape, RejectsWrongNetworks) {
  EXPECT_NO_THROW(check_policy_shape(Mlp({18, 64, 64, 4})));
  EXPECT_THROW(check_policy_shape(Mlp({18, 64, 1})), DimensionError);
  EXPECT_THROW(check_policy_shape(Mlp({17, 4})), DimensionError);
}

TEST(SolverBench, ResidualsAndAgreement) {
  const auto r = bench_solvers(5636, Mat4::Identity() * 0.1089, 3, 1, 10, 1);
  EXPECT_EQ(r.problems, 3);
  EXPECT_LE(r.svd_max_residual, 1e-8);
  EXPECT_LE(r.max_disagreement, 1e-6);
  EXPECT_GT(r.svd_ms, 0.0);
}

TEST(InferenceTiming, ReportsOrderedStatistics) {
  std::mt19937_64 rng(1);
  const auto r = time_inference(quadrl::testing::random_mlp({18, 64, 64, 4}, rng, 0.2), 2000, 1);
  EXPECT_EQ(r.repetitions, 2000);
  EXPECT_GT(r.median_us, 0.0);
  EXPECT_GE(r.p99_us, r.median_us);
}
