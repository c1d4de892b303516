#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "quadrl/config.hpp"
#include "quadrl/errors.hpp"

using namespace quadrl;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ConfigEcho, DefaultsCarryPublishedConstants) {
  const RunConfig c;
  EXPECT_EQ(config_value(c, "quad.mass"), "0.665");
  EXPECT_EQ(config_value(c, "quad.dt"), "0.01");
  EXPECT_EQ(config_value(c, "rollout.initial_count"), "512");
  EXPECT_EQ(config_value(c, "rollout.branch_count"), "1024");
  EXPECT_EQ(config_value(c, "rollout.noise_depth"), "2");
  EXPECT_EQ(config_value(c, "cost.discount"), "0.99");
  EXPECT_EQ(config_value(c, "cost.position"), "0.004");
  EXPECT_EQ(config_value(c, "value.max_iterations"), "200");
  EXPECT_EQ(config_value(c, "value.loss_threshold"), "1e-04");
  EXPECT_EQ(config_value(c, "policy.cg_iterations"), "10");
  EXPECT_EQ(config_value(c, "control.kp"), "[-0.2, -0.2, -0.03333333333333333]");
  EXPECT_EQ(config_value(c, "network.policy_hidden"), "[64, 64]");
  EXPECT_EQ(config_value(c, "train.eval_rollouts"), "100");
}

TEST(ConfigEcho, EveryKeyIsListedOnce) {
  std::set<std::string> seen;
  for (const auto& k : config_keys()) {
    EXPECT_TRUE(seen.insert(k.name).second) << k.name;
    EXPECT_NE(k.name.find('.'), std::string::npos);
  }
  EXPECT_GT(seen.size(), 40u);
}

TEST(ConfigEcho, RoundTripIsExact) {
  RunConfig c;
  apply_override(c, "quad.mass=0.7123456789012345");
  apply_override(c, "rollout.noise_covariance=[0.1,0,0,0, 0,0.2,0,0, 0,0,0.3,0, 0,0,0,0.4]");
  apply_override(c, "policy.solver=cg");
  apply_override(c, "train.output_dir=some dir");
  const std::string text = to_config_text(c);
  RunConfig back;
  apply_config_text(back, text);
  EXPECT_EQ(to_config_text(back), text);
  EXPECT_EQ(back.train.task.quad.mass, 0.7123456789012345);
  EXPECT_EQ(back.train.rollout.noise.covariance(2, 2), 0.3);
  EXPECT_EQ(back.train.policy.solver, NaturalGradientSolver::conjugate_gradient);
  EXPECT_EQ(back.output_dir, "some dir");
}

TEST(ConfigText, ParsesSectionsCommentsAndArrays) {
  RunConfig c;
  apply_config_text(c, R"(
# comment line
[rollout]
initial_count = 8   # trailing comment
branch_count = 16
[network]
policy_hidden = [32, 16]
[train]
output_dir = "runs/with # hash"
)");
  EXPECT_EQ(c.train.rollout.initial_count, 8);
  EXPECT_EQ(c.train.rollout.branch_count, 16);
  EXPECT_EQ(c.train.policy_layers, (std::vector<int>{18, 32, 16, 4}));
  EXPECT_EQ(c.output_dir, "runs/with # hash");
}

TEST(ConfigText, UnknownKeyIsNamed) {
  RunConfig c;
  const auto msg = message_of([&] { apply_config_text(c, "[quad]\nmas = 1\n", "x.toml"); });
  EXPECT_NE(msg.find("quad.mas"), std::string::npos) << msg;
  EXPECT_NE(msg.find("x.toml:2"), std::string::npos) << msg;
  EXPECT_NE(message_of([&] { apply_override(c, "nosuch.key=1"); }).find("nosuch.key"), std::string::npos);
}

TEST(ConfigText, BadValuesAreRejected) {
  RunConfig c;
  EXPECT_THROW(apply_override(c, "quad.mass=heavy"), ConfigError);
  EXPECT_THROW(apply_override(c, "rollout.initial_count=1.5"), ConfigError);
  EXPECT_THROW(apply_override(c, "control.kp=[1, 2]"), ConfigError);
  EXPECT_THROW(apply_override(c, "policy.solver=lu"), ConfigError);
  EXPECT_THROW(apply_override(c, "quad.mass"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "[quad\nmass = 1\n"), ConfigError);
}

TEST(ConfigFile, MissingFileNamesPath) {
  const auto msg = message_of([] { load_config("/nonexistent/dir/smoke.toml"); });
  EXPECT_NE(msg.find("/nonexistent/dir/smoke.toml"), std::string::npos) << msg;
}

TEST(ConfigFile, SaveThenLoad) {
  RunConfig c;
  apply_override(c, "train.seed=17");
  const auto path = std::filesystem::temp_directory_path() / "quadrl_test_config.toml";
  save_config(path, c);
  const RunConfig back = load_config(path);
  EXPECT_EQ(back.train.seed, 17u);
  EXPECT_EQ(to_config_text(back), to_config_text(c));
  std::filesystem::remove(path);
}

TEST(ConfigFile, ShippedConfigsLoad) {
  const std::filesystem::path dir = QUADRL_SOURCE_DIR "/configs";
  const RunConfig def = load_config(dir / "default.toml");
  EXPECT_EQ(to_config_text(def), to_config_text(RunConfig{}));
  const RunConfig smoke = load_config(dir / "smoke.toml");
  EXPECT_EQ(smoke.train.rollout.initial_count, 8);
  EXPECT_EQ(smoke.train.rollout.branch_count, 16);
  EXPECT_EQ(smoke.train.rollout.initial_length, 100);
  EXPECT_EQ(smoke.train.rollout.branch_length, 100);
  EXPECT_EQ(smoke.train.iterations, 20);
}
