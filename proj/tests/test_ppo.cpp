#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "heatplan/baseline.hpp"
#include "heatplan/ppo.hpp"

using namespace heatplan;

namespace {

Observation random_obs(Rng& rng) {
  return {rng.uniform(10, 90), rng.uniform(40, 80), 20.0, static_cast<int>(rng.below(91))};
}

/// Batch of `n` samples whose stored log-probs are perturbed from the
/// current policy so that some ratios fall outside the clip range.
RolloutBatch random_batch(const PolicyNet& net, Rng& rng, int n) {
  RolloutBatch b;
  b.resize(n);
  b.advantages.resize(n);
  b.returns.resize(n);
  for (int i = 0; i < n; ++i) {
    const Observation o = random_obs(rng);
    const PolicyOutput po = policy_forward(o, net);
    const int a = rng.coin() ? 1 : 0;
    b.observations.col(i) = net.encode(o);
    b.actions[static_cast<std::size_t>(i)] = a;
    b.log_probs[i] = po.log_probs[static_cast<std::size_t>(a)] + rng.uniform(-0.5, 0.5);
    b.values[i] = po.value;
    b.rewards[i] = 0.0;
    b.advantages[i] = rng.normal();
    b.returns[i] = rng.normal();
  }
  return b;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("heatplan_test_ppo_" + name);
}

}  // namespace

TEST(PolicyForward, ZeroLogitLayerGivesUniformPolicy) {
  Rng rng(1);
  PolicyNet net = make_policy_net(rng);
  net.policy.back().weights.setZero();
  net.policy.back().bias.setZero();
  const auto out = policy_forward({20, 60, 20, 60}, net);
  EXPECT_EQ(out.probs[0], 0.5);
  EXPECT_EQ(out.probs[1], 0.5);
  EXPECT_EQ(greedy_action(net, {20, 60, 20, 60}), Action::Off);  // ties go to Off
}

TEST(PolicyForward, ProbabilitiesSumToOne) {
  Rng rng(2);
  const PolicyNet net = make_policy_net(rng);
  for (int i = 0; i < 200; ++i) {
    const auto out = policy_forward(random_obs(rng), net);
    EXPECT_NEAR(out.probs[0] + out.probs[1], 1.0, 1e-9);
    EXPECT_NEAR(std::log(out.probs[1]), out.log_probs[1], 1e-12);
  }
}

TEST(PolicyForward, NonFiniteParametersFault) {
  Rng rng(3);
  PolicyNet net = make_policy_net(rng);
  net.value.back().bias[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(policy_forward({20, 60, 20, 60}, net), NumericFault);
}

TEST(PolicyNet, ShapesAndOrthogonalInit) {
  Rng rng(4);
  const PolicyNet net = make_policy_net(rng);
  ASSERT_EQ(net.policy.size(), 3u);
  ASSERT_EQ(net.value.size(), 3u);
  EXPECT_EQ(net.policy[0].weights.rows(), 64);
  EXPECT_EQ(net.policy[0].weights.cols(), kObsDim);
  EXPECT_EQ(net.policy[2].weights.rows(), kNumActions);
  EXPECT_EQ(net.value[2].weights.rows(), 1);
  const std::size_t per_stack_hidden = 4 * 64 + 64 + 64 * 64 + 64;
  EXPECT_EQ(net.parameter_count(), 2 * per_stack_hidden + (64 * 2 + 2) + (64 + 1));

  const Eigen::MatrixXd& w0 = net.policy[0].weights;  // 64 x 4: orthonormal columns
  EXPECT_TRUE((w0.transpose() * w0).isApprox(2.0 * Eigen::MatrixXd::Identity(4, 4), 1e-10));
  const Eigen::MatrixXd& w1 = net.value[1].weights;
  EXPECT_TRUE((w1 * w1.transpose()).isApprox(2.0 * Eigen::MatrixXd::Identity(64, 64), 1e-10));
  const Eigen::MatrixXd& head = net.policy[2].weights;  // 2 x 64: orthonormal rows
  EXPECT_TRUE((head * head.transpose()).isApprox(1e-4 * Eigen::MatrixXd::Identity(2, 2), 1e-10));
  EXPECT_EQ(net.policy[0].bias.squaredNorm(), 0.0);

  PolicyNet copy = net.zeros_like();
  unflatten(flatten(net), copy);
  EXPECT_EQ(copy, net);
}

TEST(Gae, SingleTerminalStep) {
  RolloutBatch b;
  b.resize(1);
  b.rewards[0] = -0.0134;
  b.values[0] = 0.0;
  b.dones[0] = 1;
  b.last_value = 0.0;
  EXPECT_NEAR(gae_advantages(b, 1.0, 1.0)[0], -0.0134, 1e-15);
}

TEST(Gae, ZeroRewardsAndValues) {
  RolloutBatch b;
  b.resize(5);
  b.rewards.setZero();
  b.values.setZero();
  EXPECT_EQ(gae_advantages(b, 0.99, 0.95).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gae, ThreeStepHandCase) {
  RolloutBatch b;
  b.resize(3);
  b.rewards << 0.0, 0.0, -0.06;
  b.values.setZero();
  b.dones = {0, 0, 1};
  const Eigen::VectorXd adv = gae_advantages(b, 0.99, 0.95);
  EXPECT_NEAR(adv[0], std::pow(0.99 * 0.95, 2) * -0.06, 1e-12);
  EXPECT_NEAR(adv[0], -0.05307, 1e-5);
  EXPECT_NEAR(adv[2], -0.06, 1e-15);
}

TEST(Gae, EpisodeBoundaryStopsBootstrap) {
  RolloutBatch b;
  b.resize(2);
  b.rewards << 1.0, 0.0;
  b.values << 0.0, 5.0;
  b.dones = {1, 0};
  b.last_value = 2.0;
  const Eigen::VectorXd adv = gae_advantages(b, 0.9, 0.8);
  EXPECT_NEAR(adv[0], 1.0, 1e-15);                   // next value ignored across the boundary
  EXPECT_NEAR(adv[1], 0.0 + 0.9 * 2.0 - 5.0, 1e-15);  // bootstraps from last_value
}

TEST(FinalizeBatch, NormalizesAdvantages) {
  Rng rng(5);
  RolloutBatch b;
  b.resize(256);
  for (int i = 0; i < 256; ++i) {
    b.rewards[i] = rng.normal();
    b.values[i] = rng.normal();
    b.dones[static_cast<std::size_t>(i)] = rng.below(10) == 0;
  }
  finalize_batch(b, 0.99, 0.95);
  EXPECT_NEAR(b.advantages.mean(), 0.0, 1e-12);
  EXPECT_NEAR(std::sqrt((b.advantages.array() - b.advantages.mean()).square().mean()), 1.0, 1e-6);
  const Eigen::VectorXd raw = gae_advantages(b, 0.99, 0.95);
  EXPECT_TRUE(b.returns.isApprox(raw + b.values, 1e-14));
}

TEST(ClippedSurrogate, Cases) {
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, 1.0, 0.2), 0.5);
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, -1.0, 0.2), -1.5);
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.0, 2.0, 0.2), 2.0);
}

TEST(PpoLoss, AnalyticGradientMatchesFiniteDifferences) {
  Rng rng(6);
  const PolicyNet net = make_policy_net(rng, 16);
  const RolloutBatch batch = random_batch(net, rng, 10);
  PpoConfig cfg;
  cfg.entropy_coef = 0.01;  // exercise the entropy path too
  std::vector<Eigen::Index> idx(10);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});

  PolicyNet grad = net.zeros_like();
  ppo_loss(net, batch, idx, cfg, &grad);
  const Eigen::VectorXd analytic = flatten(grad);

  const Eigen::VectorXd theta = flatten(net);
  Eigen::VectorXd numeric(theta.size());
  PolicyNet probe = net;
  const double h = 1e-5;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd t = theta;
    t[k] += h;
    unflatten(t, probe);
    const double up = ppo_loss(probe, batch, idx, cfg, nullptr).total;
    t[k] -= 2 * h;
    unflatten(t, probe);
    const double down = ppo_loss(probe, batch, idx, cfg, nullptr).total;
    numeric[k] = (up - down) / (2 * h);
  }
  const double rel = (analytic - numeric).norm() / (analytic.norm() + numeric.norm());
  EXPECT_LT(rel, 1e-4);
}

TEST(PpoUpdate, ReducesValueLossOnAFixedBatch) {
  Rng rng(7);
  PolicyNet net = make_policy_net(rng, 32);
  const RolloutBatch batch = random_batch(net, rng, 128);
  PpoConfig cfg;
  cfg.epochs_per_batch = 20;
  cfg.learning_rate = 1e-3;
  std::vector<Eigen::Index> idx(128);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const double before = ppo_loss(net, batch, idx, cfg, nullptr).value;
  AdamState adam;
  const UpdateStats stats = ppo_update(net, batch, cfg, adam, rng);
  EXPECT_EQ(stats.minibatches, 20 * 2);
  EXPECT_EQ(adam.step, 40);
  EXPECT_LT(ppo_loss(net, batch, idx, cfg, nullptr).value, before);
}

TEST(PpoConfig, Validation) {
  EXPECT_NO_THROW(PpoConfig{}.validate());
  PpoConfig c;
  c.minibatch = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PpoConfig{};
  c.clip_ratio = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PpoConfig{};
  c.gamma = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(PolicyFile, RoundTripIsExact) {
  Rng rng(8);
  const PolicyNet net = make_policy_net(rng);
  const auto path = temp_file("roundtrip.json");
  save_policy(net, path.string());
  const PolicyNet loaded = load_policy(path.string());
  EXPECT_EQ(loaded, net);
  for (int i = 0; i < 100; ++i) {
    const Observation o = random_obs(rng);
    const auto a = policy_forward(o, net);
    const auto b = policy_forward(o, loaded);
    EXPECT_EQ(a.probs, b.probs);
    EXPECT_EQ(a.value, b.value);
  }
  EXPECT_EQ(policy_to_json(loaded), policy_to_json(net));
  std::filesystem::remove(path);
}

TEST(PolicyFile, LoadErrors) {
  Rng rng(9);
  const std::string text = policy_to_json(make_policy_net(rng, 8));
  EXPECT_THROW(policy_from_json(text.substr(0, text.size() / 2)), PolicyLoadError);
  std::string wrong_magic = text;
  wrong_magic.replace(wrong_magic.find(kPolicyFormat), std::string(kPolicyFormat).size(), "heatplan-ppo-v0");
  EXPECT_THROW(policy_from_json(wrong_magic), PolicyLoadError);
  EXPECT_THROW(policy_from_json("[]"), PolicyLoadError);
  EXPECT_THROW(load_policy("/nonexistent/heatplan/policy.json"), PolicyLoadError);

  auto j = nlohmann::json::parse(text);
  j["layers"][0]["rows"] = 9;  // declared shape disagrees with the data
  EXPECT_THROW(policy_from_json(j.dump()), PolicyLoadError);
  j = nlohmann::json::parse(text);
  j["layers"].erase(0);  // broken layer chain
  EXPECT_THROW(policy_from_json(j.dump()), PolicyLoadError);
  // Load errors are configuration errors.
  EXPECT_THROW(policy_from_json("{"), ConfigError);
}

TEST(Train, CurveRowsAndDeterminism) {
  PpoConfig cfg;
  cfg.total_steps = 3000;
  cfg.steps_per_batch = 1024;
  cfg.epochs_per_batch = 2;
  cfg.hidden = 16;
  cfg.rng_seed = 3;
  const TrainResult a = train(cfg);
  const TrainResult b = train(cfg);
  ASSERT_EQ(a.curve.size(), 3u);  // ceil(3000 / 1024)
  EXPECT_EQ(a.curve.back().env_steps, 3072);
  EXPECT_EQ(policy_to_json(a.net), policy_to_json(b.net));
  for (const auto& p : a.curve) EXPECT_GT(p.episodes, 0);

  std::ostringstream os;
  write_curve_csv(os, a.curve);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "env_steps,mean_return,mean_energy_wh");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);

  cfg.rng_seed = 4;
  EXPECT_NE(policy_to_json(train(cfg).net), policy_to_json(a.net));
}

TEST(Train, OneBatchGivesOneCurveRow) {
  PpoConfig cfg;
  cfg.total_steps = 2048;
  cfg.epochs_per_batch = 1;
  EXPECT_EQ(train(cfg).curve.size(), 1u);
}

TEST(Controllers, GreedyAndSampledAdaptors) {
  Rng rng(10);
  const PolicyNet net = make_policy_net(rng);
  EpisodeSpec spec;
  spec.deadline_steps = 30;
  const auto g1 = run_controller(spec, GreedyPolicy{&net});
  const auto g2 = run_controller(spec, GreedyPolicy{&net});
  EXPECT_EQ(g1, g2);
  const auto s1 = run_controller(spec, SampledPolicy{&net, Rng(1)});
  const auto s2 = run_controller(spec, SampledPolicy{&net, Rng(1)});
  EXPECT_EQ(s1, s2);
}
