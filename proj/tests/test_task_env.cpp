#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "quadrl/errors.hpp"
#include "quadrl/so3.hpp"
#include "quadrl/task_env.hpp"

using namespace quadrl;

namespace {

// Haar rotation from a normalized Gaussian quaternion, independent of the
// production sampler.
Mat3 reference_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace

TEST(Observe, IdentityAtWaypoint) {
  QuadState s;
  s.position = Vec3(1, 2, 3);
  const Observation o = observe(s, Vec3(1, 2, 3), ObservationScales{});
  Observation expected = Observation::Zero();
  expected[0] = expected[4] = expected[8] = 1.0;
  EXPECT_EQ(o, expected);
}

TEST(Observe, TranslationInvariant) {
  QuadState s;
  s.position = Vec3(0.3, -1.0, 2.0);
  s.rotation = rot_y(0.5);
  s.velocity = Vec3(1, 2, 3);
  s.angular_velocity = Vec3(-1, 0, 1);
  const Vec3 wp(0.5, 0.5, 0.0);
  QuadState shifted = s;
  shifted.position += Vec3(4, -7, 1);
  EXPECT_LE((observe(s, wp, {}) - observe(shifted, wp + Vec3(4, -7, 1), {})).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Observe, ScalesAndLayout) {
  QuadState s;
  s.position = Vec3(2, 0, 0);
  s.velocity = Vec3(0, 4, 0);
  s.angular_velocity = Vec3(0, 0, 10);
  s.rotation = rot_z(0.3);
  ObservationScales scales;
  scales.position = 0.5;
  const Observation o = observe(s, Vec3(1, 0, 0), scales);
  EXPECT_EQ(o.segment<3>(9), Vec3(0.5, 0, 0));
  EXPECT_DOUBLE_EQ(o[13], 4.0 * scales.velocity);
  EXPECT_DOUBLE_EQ(o[17], 10.0 * scales.angular_velocity);
  // Rotation block is R row-major.
  EXPECT_EQ(o[1], s.rotation(0, 1));
  EXPECT_EQ(o[3], s.rotation(1, 0));
}

TEST(Observe, RotationBlockStaysOrthonormal) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    QuadState s;
    s.rotation = uniform_rotation(rng);
    const Observation o = observe(s, Vec3::Zero(), {});
    Mat3 r;
    r << o[0], o[1], o[2], o[3], o[4], o[5], o[6], o[7], o[8];
    ASSERT_LE(orthonormality_error(r), 1e-9);
    ASSERT_LE(o.head<9>().cwiseAbs().maxCoeff(), 1.0 + 1e-15);
  }
}

TEST(Cost, Examples) {
  const CostWeights w;
  EXPECT_EQ(cost(QuadState{}, Action::Zero(), w), 0.0);
  QuadState s;
  s.position = Vec3(1, 0, 0);
  EXPECT_DOUBLE_EQ(cost(s, Action::Zero(), w), 0.004);
  s.position = Vec3(3, 4, 0);
  s.velocity = Vec3(0, 0, 2);
  EXPECT_NEAR(cost(s, Action::Zero(), w), 0.021, 1e-15);
  QuadState a;
  EXPECT_NEAR(cost(a, Action(0, 3, 4, 0), w), 2e-4 * 5.0, 1e-18);
  a.angular_velocity = Vec3(0, 0, -2);
  EXPECT_NEAR(cost(a, Action::Zero(), w), 3e-4 * 2.0, 1e-18);
}

TEST(Cost, DefaultsAndValidation) {
  CostWeights w;
  EXPECT_EQ(w.position, 4e-3);
  EXPECT_EQ(w.action, 2e-4);
  EXPECT_EQ(w.angular_velocity, 3e-4);
  EXPECT_EQ(w.velocity, 5e-4);
  EXPECT_EQ(w.discount, 0.99);
  w.discount = 1.0;
  EXPECT_THROW(w.validate(), ConfigError);
  w = CostWeights{};
  w.velocity = -1.0;
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(StepCost, ZeroAtUndisturbedHover) {
  const TaskConfig task;
  const QuadState s;
  EXPECT_EQ(step_cost(s, act(Action::Zero(), s, task), task), 0.0);
}

TEST(StepCost, UsesDeviationFromHover) {
  const TaskConfig task;
  QuadState s;
  s.position = Vec3(1, 0, 0);
  const Vec4 thrust = Vec4::Constant(hover_thrust(task.quad)) + Vec4(0.3, 0, 0, 0.4);
  EXPECT_NEAR(step_cost(s, thrust, task), 0.004 + 2e-4 * 0.5, 1e-15);
}

TEST(SampleInitial, DegenerateBoundsOnlyRotate) {
  InitDistribution d;
  d.position_bound = d.velocity_bound = d.angular_velocity_bound = 0.0;
  d.center = Vec3(0, 0, 2);
  std::mt19937_64 rng(2);
  const QuadState s = sample_initial(d, rng);
  EXPECT_EQ(s.position, Vec3(0, 0, 2));
  EXPECT_EQ(s.velocity, Vec3::Zero());
  EXPECT_EQ(s.angular_velocity, Vec3::Zero());
  EXPECT_LE(orthonormality_error(s.rotation), 1e-12);
  EXPECT_NEAR(s.rotation.determinant(), 1.0, 1e-12);
}

TEST(SampleInitial, TranslationalMomentsMatchUniform) {
  const InitDistribution d;
  std::mt19937_64 rng(3);
  const int n = 100000;
  Eigen::Matrix<double, 9, 1> sum = Eigen::Matrix<double, 9, 1>::Zero();
  Eigen::Matrix<double, 9, 1> max_abs = Eigen::Matrix<double, 9, 1>::Zero();
  for (int i = 0; i < n; ++i) {
    const QuadState s = sample_initial(d, rng);
    Eigen::Matrix<double, 9, 1> x;
    x << s.position, s.velocity, s.angular_velocity;
    sum += x;
    max_abs = max_abs.cwiseMax(x.cwiseAbs());
  }
  // Uniform on [-1, 1]: sd 1/sqrt(3), standard error sd/sqrt(n).
  const double se = 1.0 / std::sqrt(3.0) / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < 9; ++k) {
    EXPECT_LE(std::abs(sum[k] / n), 3.0 * se) << "component " << k;
    EXPECT_LE(max_abs[k], 1.0);
  }
}

TEST(SampleInitial, RotationsAreHaarDistributed) {
  std::mt19937_64 rng(4), ref_rng(5);
  const int n = 100000;
  double tr = 0.0, tr2 = 0.0, ref_tr2 = 0.0;
  Mat3 mean = Mat3::Zero();
  for (int i = 0; i < n; ++i) {
    const Mat3 r = uniform_rotation(rng);
    const double t = r.trace();
    tr += t;
    tr2 += t * t;
    mean += r;
    const double rt = reference_rotation(ref_rng).trace();
    ref_tr2 += rt * rt;
  }
  tr /= n;
  tr2 /= n;
  ref_tr2 /= n;
  mean /= n;
  // Haar measure: E[tr R] = 0, Var[tr R] = E[tr^2] = 1.
  EXPECT_LE(std::abs(tr), 3.0 / std::sqrt(static_cast<double>(n)));
  // Entries: mean 0, variance 1/3.
  EXPECT_LE(mean.cwiseAbs().maxCoeff(), 3.0 * std::sqrt(1.0 / 3.0 / n));
  // Second moment agrees with the reference sampler; E[tr^4] = 3 so Var(tr^2) = 2.
  EXPECT_LE(std::abs(tr2 - ref_tr2), 3.0 * std::sqrt(4.0 / n));
  EXPECT_LE(std::abs(tr2 - 1.0), 3.0 * std::sqrt(2.0 / n));
}

TEST(Act, ZeroPolicyAtHoverGivesHoverThrust) {
  const TaskConfig task;
  const Vec4 t = act(Action::Zero(), QuadState{}, task);
  EXPECT_EQ(t, Vec4::Constant(hover_thrust(task.quad)));
}

TEST(Act, TiltedStateIsPdThroughAllocationInverse) {
  const TaskConfig task;
  QuadState s;
  s.rotation = rot_x(0.3) * rot_y(-0.2);
  s.angular_velocity = Vec3(0.1, -0.4, 0.2);
  const Vec3 tau = pd_attitude(s, task.gains);
  const Mat4 inv = allocation_matrix(task.quad).inverse();
  const Vec4 expected = Vec4::Constant(hover_thrust(task.quad)) + inv * Vec4(0, tau.x(), tau.y(), tau.z());
  EXPECT_LE((act(Action::Zero(), s, task) - threshold(expected)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Act, PolicyOutputAddsScaledThrust) {
  TaskConfig task;
  task.action_scale = 0.25;
  QuadState s;
  s.rotation = rot_z(0.1);
  const Vec4 base = act(Action::Zero(), s, task);
  EXPECT_LE((act(Action::Ones(), s, task) - (base + Vec4::Constant(0.25))).cwiseAbs().maxCoeff(), 1e-15);
  // Large negative outputs are clipped at zero thrust.
  EXPECT_EQ(act(Action::Constant(-100.0), s, task), Vec4::Zero());
}

TEST(ClosedLoop, HoverIsAFixedPoint) {
  const TaskConfig task;
  QuadState s;
  s.position = Vec3(0.5, -0.5, 2.0);
  const Vec3 start = s.position;
  for (int i = 0; i < 1000; ++i) s = step(s, act(Action::Zero(), s, task), task.quad);
  EXPECT_LE((s.position - start).norm(), 1e-6);
}

TEST(ClosedLoop, PdStabilizesAttitude) {
  const TaskConfig task;
  QuadState s;
  s.rotation = rot_x(0.6) * rot_y(0.4);
  for (int i = 0; i < 600; ++i) s = step(s, act(Action::Zero(), s, task), task.quad);
  EXPECT_LE(so3_log(s.rotation).norm(), 0.05);
}
