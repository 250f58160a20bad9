#pragma once

// Clipped-surrogate policy gradient (PPO) for the heater episode.
//
// Separate policy and value MLPs (4 -> 64 -> 64 -> {2 logits | 1 value}, tanh
// hidden units), Adam, GAE(lambda) advantages and global-norm gradient
// clipping. Everything runs in double precision on one thread, so a seed fully
// determines the learned parameters.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "heatplan/env.hpp"
#include "heatplan/error.hpp"
#include "heatplan/rng.hpp"

namespace heatplan {

inline constexpr const char* kPolicyFormat = "heatplan-ppo-v1";
inline constexpr int kObsDim = 4;
inline constexpr int kNumActions = 2;

struct DenseLayer {
  Eigen::MatrixXd weights;  // rows = outputs, cols = inputs
  Eigen::VectorXd bias;

  bool operator==(const DenseLayer& o) const { return weights == o.weights && bias == o.bias; }
};

/// Input scaling stored with the policy so evaluation sees what training saw.
struct ObsNorm {
  double temp_scale = 100.0;
  double time_scale = 100.0;

  bool operator==(const ObsNorm&) const = default;
};

struct PolicyNet {
  std::vector<DenseLayer> policy;  // last layer emits logits over {Off, On}
  std::vector<DenseLayer> value;   // last layer emits the state value
  ObsNorm norm;

  Eigen::Vector4d encode(const Observation& o) const {
    return {o.t_c / norm.temp_scale, o.t_target_c / norm.temp_scale, o.t_ambient_c / norm.temp_scale,
            static_cast<double>(o.steps_remaining) / norm.time_scale};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* stack : {&policy, &value})
      for (const auto& l : *stack) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

  /// Zero-valued network with the same shapes.
  PolicyNet zeros_like() const {
    PolicyNet z = *this;
    for (auto* stack : {&z.policy, &z.value})
      for (auto& l : *stack) {
        l.weights.setZero();
        l.bias.setZero();
      }
    return z;
  }

  bool operator==(const PolicyNet&) const = default;
};

/// Parameters flattened layer by layer (policy stack, then value stack), each
/// layer as row-major weights followed by bias.
inline Eigen::VectorXd flatten(const PolicyNet& net) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(net.parameter_count()));
  Eigen::Index k = 0;
  for (const auto* stack : {&net.policy, &net.value})
    for (const auto& l : *stack) {
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c) out[k++] = l.weights(r, c);
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) out[k++] = l.bias[r];
    }
  return out;
}

inline void unflatten(const Eigen::VectorXd& flat, PolicyNet& net) {
  if (flat.size() != static_cast<Eigen::Index>(net.parameter_count()))
    throw UsageError("unflatten: parameter count mismatch");
  Eigen::Index k = 0;
  for (auto* stack : {&net.policy, &net.value})
    for (auto& l : *stack) {
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = flat[k++];
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[k++];
    }
}

namespace detail {

/// Orthogonal matrix scaled by `gain` (QR of a Gaussian matrix, sign-fixed).
inline Eigen::MatrixXd orthogonal(Eigen::Index rows, Eigen::Index cols, double gain, Rng& rng) {
  const bool wide = rows < cols;
  const Eigen::Index m = wide ? cols : rows;
  const Eigen::Index n = wide ? rows : cols;
  Eigen::MatrixXd g(m, n);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < n; ++c) g(r, c) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, n);
  const Eigen::MatrixXd rmat = qr.matrixQR().topLeftCorner(n, n).triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < n; ++c)
    if (rmat(c, c) < 0.0) q.col(c) *= -1.0;
  q *= gain;
  return wide ? Eigen::MatrixXd(q.transpose()) : q;
}

inline std::vector<DenseLayer> make_stack(const std::vector<int>& widths, double out_gain, Rng& rng) {
  std::vector<DenseLayer> stack;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    DenseLayer l;
    l.weights = orthogonal(widths[i + 1], widths[i], last ? out_gain : std::sqrt(2.0), rng);
    l.bias = Eigen::VectorXd::Zero(widths[i + 1]);
    stack.push_back(std::move(l));
  }
  return stack;
}

/// Forward pass over a batch (columns are samples). `acts` receives the
/// input followed by every layer output; hidden outputs are post-tanh.
inline Eigen::MatrixXd mlp_forward(const std::vector<DenseLayer>& stack, const Eigen::MatrixXd& x,
                                   std::vector<Eigen::MatrixXd>* acts = nullptr) {
  Eigen::MatrixXd h = x;
  if (acts) {
    acts->clear();
    acts->push_back(h);
  }
  for (std::size_t i = 0; i < stack.size(); ++i) {
    Eigen::MatrixXd z = stack[i].weights * h;
    z.colwise() += stack[i].bias;
    if (i + 1 < stack.size()) z = z.array().tanh().matrix();
    h = std::move(z);
    if (acts) acts->push_back(h);
  }
  return h;
}

/// Accumulates parameter gradients given dL/d(output).
inline void mlp_backward(const std::vector<DenseLayer>& stack, const std::vector<Eigen::MatrixXd>& acts,
                         Eigen::MatrixXd d_out, std::vector<DenseLayer>& grad) {
  for (std::size_t i = stack.size(); i-- > 0;) {
    grad[i].weights.noalias() += d_out * acts[i].transpose();
    grad[i].bias += d_out.rowwise().sum();
    if (i == 0) break;
    Eigen::MatrixXd d_in = stack[i].weights.transpose() * d_out;
    d_out = (d_in.array() * (1.0 - acts[i].array().square())).matrix();
  }
}

inline bool all_finite(const PolicyNet& net) { return flatten(net).allFinite(); }

}  // namespace detail

/// Fresh network: orthogonal init, gain sqrt(2) on hidden layers, 0.01 on the
/// logit layer and 1 on the value layer, zero biases.
inline PolicyNet make_policy_net(Rng& rng, int hidden = 64) {
  PolicyNet net;
  net.policy = detail::make_stack({kObsDim, hidden, hidden, kNumActions}, 0.01, rng);
  net.value = detail::make_stack({kObsDim, hidden, hidden, 1}, 1.0, rng);
  return net;
}

/// Row-wise log-softmax of a 2 x B logit matrix.
inline Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    const double lse = m + std::log((logits.col(c).array() - m).exp().sum());
    out.col(c) = logits.col(c).array() - lse;
  }
  return out;
}

struct PolicyOutput {
  std::array<double, 2> probs{0.5, 0.5};
  std::array<double, 2> log_probs{0.0, 0.0};
  double value = 0.0;
};

inline PolicyOutput policy_forward(const Observation& obs, const PolicyNet& net) {
  const Eigen::MatrixXd x = net.encode(obs);
  const Eigen::MatrixXd logits = detail::mlp_forward(net.policy, x);
  const Eigen::MatrixXd v = detail::mlp_forward(net.value, x);
  const Eigen::MatrixXd lp = log_softmax(logits);
  PolicyOutput out;
  for (int a = 0; a < kNumActions; ++a) {
    out.log_probs[static_cast<std::size_t>(a)] = lp(a, 0);
    out.probs[static_cast<std::size_t>(a)] = std::exp(lp(a, 0));
  }
  out.value = v(0, 0);
  if (!std::isfinite(out.value) || !std::isfinite(out.log_probs[0]) || !std::isfinite(out.log_probs[1]))
    throw NumericFault("policy_forward: non-finite network output");
  return out;
}

/// Deterministic evaluation action: argmax probability, ties to Off.
inline Action greedy_action(const PolicyNet& net, const Observation& obs) {
  const PolicyOutput out = policy_forward(obs, net);
  return out.probs[1] > out.probs[0] ? Action::On : Action::Off;
}

struct PpoConfig {
  long total_steps = 500000;
  int steps_per_batch = 2048;
  int minibatch = 64;
  int epochs_per_batch = 10;
  double learning_rate = 3e-4;
  double clip_ratio = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double grad_clip_norm = 0.5;
  double adam_eps = 1e-5;
  int hidden = 64;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (total_steps < 1 || steps_per_batch < 1 || minibatch < 1 || epochs_per_batch < 1 || hidden < 1)
      throw ConfigError("PpoConfig: counts must be >= 1");
    if (!(clip_ratio > 0.0 && clip_ratio < 1.0)) throw ConfigError("PpoConfig: clip_ratio must lie in (0, 1)");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("PpoConfig: gamma must lie in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("PpoConfig: gae_lambda must lie in [0, 1]");
    if (!(learning_rate > 0.0)) throw ConfigError("PpoConfig: learning_rate must be > 0");
    if (!(grad_clip_norm > 0.0)) throw ConfigError("PpoConfig: grad_clip_norm must be > 0");
  }
};

/// On-policy samples of one collection phase. All per-step arrays share one length.
struct RolloutBatch {
  Eigen::MatrixXd observations;  // kObsDim x N, already normalized
  std::vector<int> actions;
  Eigen::VectorXd log_probs;
  Eigen::VectorXd rewards;
  Eigen::VectorXd values;
  std::vector<std::uint8_t> dones;  // 1 when the episode ended at this step
  double last_value = 0.0;          // V of the state after the final step (0 if it was terminal)
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  Eigen::Index size() const { return rewards.size(); }

  void resize(Eigen::Index n) {
    observations.resize(kObsDim, n);
    actions.assign(static_cast<std::size_t>(n), 0);
    log_probs.resize(n);
    rewards.resize(n);
    values.resize(n);
    dones.assign(static_cast<std::size_t>(n), 0);
  }
};

/// GAE(lambda) by backward recursion:
///   delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t
///   A_t     = delta_t + gamma lambda (1 - done_t) A_{t+1}
inline Eigen::VectorXd gae_advantages(const RolloutBatch& batch, double gamma, double lambda) {
  const Eigen::Index n = batch.size();
  Eigen::VectorXd adv(n);
  double next_adv = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double nonterminal = batch.dones[static_cast<std::size_t>(t)] ? 0.0 : 1.0;
    const double next_value = t + 1 < n ? batch.values[t + 1] : batch.last_value;
    const double delta = batch.rewards[t] + gamma * next_value * nonterminal - batch.values[t];
    next_adv = delta + gamma * lambda * nonterminal * next_adv;
    adv[t] = next_adv;
  }
  return adv;
}

/// Fills advantages (normalized to zero mean, unit variance, eps 1e-8) and return targets.
inline void finalize_batch(RolloutBatch& batch, double gamma, double lambda) {
  const Eigen::VectorXd raw = gae_advantages(batch, gamma, lambda);
  batch.returns = raw + batch.values;
  const double mean = raw.mean();
  const double var = (raw.array() - mean).square().mean();
  batch.advantages = (raw.array() - mean) / (std::sqrt(var) + 1e-8);
}

/// Clipped surrogate objective of one sample: min(rho A, clip(rho, 1-eps, 1+eps) A).
inline double clipped_surrogate(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

/// PPO loss over the batch columns `idx`. When `grad` is non-null it receives
/// dLoss/dparams (it must be shaped like `net`; it is overwritten).
///
///   L = -mean(min(rho A, clip(rho) A)) + c_v mean((V - R)^2) - c_e mean(H)
inline LossTerms ppo_loss(const PolicyNet& net, const RolloutBatch& batch, std::span<const Eigen::Index> idx,
                          const PpoConfig& cfg, PolicyNet* grad) {
  const auto b = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd x(kObsDim, b);
  for (Eigen::Index j = 0; j < b; ++j) x.col(j) = batch.observations.col(idx[static_cast<std::size_t>(j)]);

  std::vector<Eigen::MatrixXd> pacts, vacts;
  const Eigen::MatrixXd logits = detail::mlp_forward(net.policy, x, &pacts);
  const Eigen::MatrixXd values = detail::mlp_forward(net.value, x, &vacts);
  const Eigen::MatrixXd logp = log_softmax(logits);
  const Eigen::MatrixXd prob = logp.array().exp().matrix();

  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(kNumActions, b);
  Eigen::MatrixXd d_values = Eigen::MatrixXd::Zero(1, b);
  LossTerms lt;
  const double inv_b = 1.0 / static_cast<double>(b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const Eigen::Index i = idx[static_cast<std::size_t>(j)];
    const int a = batch.actions[static_cast<std::size_t>(i)];
    const double adv = batch.advantages[i];
    const double log_ratio = logp(a, j) - batch.log_probs[i];
    const double ratio = std::exp(log_ratio);
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio) * adv;
    lt.policy -= std::min(unclipped, clipped) * inv_b;
    lt.approx_kl += ((ratio - 1.0) - log_ratio) * inv_b;
    if (std::abs(ratio - 1.0) > cfg.clip_ratio) lt.clip_fraction += inv_b;

    // d(-min)/dlogp_a is -rho A while the unclipped branch is active, else 0.
    const double d_logp_a = unclipped <= clipped ? -adv * ratio * inv_b : 0.0;
    double entropy = 0.0;
    for (int k = 0; k < kNumActions; ++k) entropy -= prob(k, j) * logp(k, j);
    lt.entropy += entropy * inv_b;
    for (int k = 0; k < kNumActions; ++k) {
      // dlogp_a/dz_k = [k == a] - p_k ; dH/dz_k = -p_k (logp_k + H)
      const double dlogp = (k == a ? 1.0 : 0.0) - prob(k, j);
      const double dent = -prob(k, j) * (logp(k, j) + entropy);
      d_logits(k, j) = d_logp_a * dlogp - cfg.entropy_coef * inv_b * dent;
    }

    const double err = values(0, j) - batch.returns[i];
    lt.value += err * err * inv_b;
    d_values(0, j) = cfg.value_coef * 2.0 * err * inv_b;
  }
  lt.total = lt.policy + cfg.value_coef * lt.value - cfg.entropy_coef * lt.entropy;

  if (grad) {
    *grad = net.zeros_like();
    detail::mlp_backward(net.policy, pacts, std::move(d_logits), grad->policy);
    detail::mlp_backward(net.value, vacts, std::move(d_values), grad->value);
  }
  return lt;
}

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

struct UpdateStats {
  LossTerms mean_loss;  // averaged over all minibatches of the update
  double mean_grad_norm = 0.0;
  int minibatches = 0;
};

/// Epochs of shuffled minibatch Adam steps on the clipped objective.
inline UpdateStats ppo_update(PolicyNet& net, const RolloutBatch& batch, const PpoConfig& cfg, AdamState& adam,
                              Rng& rng) {
  const Eigen::Index n = batch.size();
  if (adam.m.size() == 0) {
    adam.m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.parameter_count()));
    adam.v = adam.m;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  UpdateStats stats;
  PolicyNet grad = net.zeros_like();
  Eigen::VectorXd params = flatten(net);
  for (int epoch = 0; epoch < cfg.epochs_per_batch; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (Eigen::Index start = 0; start < n; start += cfg.minibatch) {
      const auto len = static_cast<std::size_t>(std::min<Eigen::Index>(cfg.minibatch, n - start));
      const std::span<const Eigen::Index> mb(order.data() + start, len);
      const LossTerms lt = ppo_loss(net, batch, mb, cfg, &grad);
      if (!std::isfinite(lt.total)) {
        std::ostringstream msg;
        msg << "ppo_update: non-finite loss (policy=" << lt.policy << ", value=" << lt.value << ") at epoch "
            << epoch;
        throw NumericFault(msg.str());
      }
      Eigen::VectorXd g = flatten(grad);
      const double norm = g.norm();
      if (norm > cfg.grad_clip_norm) g *= cfg.grad_clip_norm / (norm + 1e-6);

      ++adam.step;
      adam.m = adam.beta1 * adam.m + (1.0 - adam.beta1) * g;
      adam.v = adam.beta2 * adam.v + (1.0 - adam.beta2) * g.cwiseProduct(g);
      const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
      const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
      const double step_size = cfg.learning_rate / bc1;
      params.array() -= step_size * adam.m.array() / ((adam.v.array() / bc2).sqrt() + cfg.adam_eps);
      unflatten(params, net);

      stats.mean_loss.total += lt.total;
      stats.mean_loss.policy += lt.policy;
      stats.mean_loss.value += lt.value;
      stats.mean_loss.entropy += lt.entropy;
      stats.mean_loss.approx_kl += lt.approx_kl;
      stats.mean_loss.clip_fraction += lt.clip_fraction;
      stats.mean_grad_norm += norm;
      ++stats.minibatches;
    }
  }
  if (!params.allFinite()) throw NumericFault("ppo_update: non-finite parameters after update");
  if (stats.minibatches > 0) {
    const double k = 1.0 / stats.minibatches;
    auto& l = stats.mean_loss;
    l.total *= k;
    l.policy *= k;
    l.value *= k;
    l.entropy *= k;
    l.approx_kl *= k;
    l.clip_fraction *= k;
    stats.mean_grad_norm *= k;
  }
  return stats;
}

using SpecSampler = std::function<EpisodeSpec(Rng&)>;

/// Training start-state distribution: T0 ~ U[10, 30], target ~ U[40, 80], D ~ U{30..90}.
inline EpisodeSpec default_spec_sampler(Rng& rng) {
  EpisodeSpec s;
  s.t0_c = rng.uniform(10.0, 30.0);
  s.t_target_c = rng.uniform(40.0, 80.0);
  s.deadline_steps = 30 + static_cast<int>(rng.below(61));
  return s;
}

struct CurvePoint {
  long env_steps = 0;
  double mean_return = std::numeric_limits<double>::quiet_NaN();  // episodes finished in this batch
  double mean_energy_wh = std::numeric_limits<double>::quiet_NaN();
  int episodes = 0;
};

struct TrainResult {
  PolicyNet net;
  std::vector<CurvePoint> curve;
};

using TrainProgress = std::function<void(const CurvePoint&, const UpdateStats&)>;

/// Collect / update loop for ceil(total_steps / steps_per_batch) iterations.
inline TrainResult train(const PpoConfig& cfg, const SpecSampler& sampler = default_spec_sampler,
                         const RewardParams& rp = {}, const TrainProgress& progress = {}) {
  cfg.validate();
  Rng rng(cfg.rng_seed);
  TrainResult out;
  out.net = make_policy_net(rng, cfg.hidden);
  AdamState adam;

  HeaterEnv env(rp);
  Observation obs = env.reset(sampler(rng));
  double ep_return = 0.0;
  double ep_energy_wh = 0.0;

  const long iterations = (cfg.total_steps + cfg.steps_per_batch - 1) / cfg.steps_per_batch;
  RolloutBatch batch;
  long env_steps = 0;
  for (long it = 0; it < iterations; ++it) {
    batch.resize(cfg.steps_per_batch);
    CurvePoint point;
    double sum_return = 0.0, sum_energy = 0.0;
    for (int t = 0; t < cfg.steps_per_batch; ++t) {
      const PolicyOutput po = policy_forward(obs, out.net);
      const Action a = rng.uniform() < po.probs[1] ? Action::On : Action::Off;
      const auto ai = static_cast<std::size_t>(a);
      batch.observations.col(t) = out.net.encode(obs);
      batch.actions[static_cast<std::size_t>(t)] = static_cast<int>(a);
      batch.log_probs[t] = po.log_probs[ai];
      batch.values[t] = po.value;

      const StepOutcome so = env.step(a);
      batch.rewards[t] = so.reward;
      batch.dones[static_cast<std::size_t>(t)] = so.done ? 1 : 0;
      ep_return += so.reward;
      ep_energy_wh += so.energy_j / 3600.0;
      ++env_steps;
      if (so.done) {
        sum_return += ep_return;
        sum_energy += ep_energy_wh;
        ++point.episodes;
        ep_return = 0.0;
        ep_energy_wh = 0.0;
        obs = env.reset(sampler(rng));
      } else {
        obs = so.obs;
      }
    }
    batch.last_value = batch.dones.back() ? 0.0 : policy_forward(obs, out.net).value;
    finalize_batch(batch, cfg.gamma, cfg.gae_lambda);
    const UpdateStats stats = ppo_update(out.net, batch, cfg, adam, rng);

    point.env_steps = env_steps;
    if (point.episodes > 0) {
      point.mean_return = sum_return / point.episodes;
      point.mean_energy_wh = sum_energy / point.episodes;
    }
    out.curve.push_back(point);
    if (progress) progress(point, stats);
  }
  return out;
}

/// Controller adaptor for run_controller: greedy evaluation.
struct GreedyPolicy {
  const PolicyNet* net;
  Action operator()(const Observation& obs) const { return greedy_action(*net, obs); }
};

/// Controller adaptor for stochastic evaluation with its own RNG stream.
struct SampledPolicy {
  const PolicyNet* net;
  Rng rng;
  Action operator()(const Observation& obs) {
    return rng.uniform() < policy_forward(obs, *net).probs[1] ? Action::On : Action::Off;
  }
};

// ---------------------------------------------------------------------------
// Policy file (JSON)

class PolicyLoadError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

namespace detail {

inline nlohmann::json layer_to_json(const DenseLayer& l, const char* role) {
  nlohmann::json j;
  j["role"] = role;
  j["rows"] = l.weights.rows();
  j["cols"] = l.weights.cols();
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(l.weights.size()));
  for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
  j["weights"] = std::move(w);
  j["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
  return j;
}

inline DenseLayer layer_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto w = j.at("weights").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (rows < 1 || cols < 1 || static_cast<Eigen::Index>(w.size()) != rows * cols ||
      static_cast<Eigen::Index>(b.size()) != rows)
    throw PolicyLoadError("policy file: layer shape does not match its data");
  DenseLayer l;
  l.weights.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) l.weights(r, c) = w[static_cast<std::size_t>(r * cols + c)];
  l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
  return l;
}

inline void check_stack(const std::vector<DenseLayer>& s, int out_dim, const char* role) {
  if (s.empty()) throw PolicyLoadError(std::string("policy file: no ") + role + " layers");
  Eigen::Index in = kObsDim;
  for (const auto& l : s) {
    if (l.weights.cols() != in) throw PolicyLoadError(std::string("policy file: ") + role + " layer shapes do not chain");
    in = l.weights.rows();
  }
  if (in != out_dim) throw PolicyLoadError(std::string("policy file: wrong ") + role + " output width");
}

}  // namespace detail

/// JSON: {format, layers: [{role, rows, cols, weights (row-major), bias}], obs_norm}.
/// Policy layers come first, then value layers. Doubles are written with
/// round-trip precision so load(save(net)) == net bit for bit.
inline std::string policy_to_json(const PolicyNet& net) {
  nlohmann::json j;
  j["format"] = kPolicyFormat;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.policy) layers.push_back(detail::layer_to_json(l, "policy"));
  for (const auto& l : net.value) layers.push_back(detail::layer_to_json(l, "value"));
  j["layers"] = std::move(layers);
  j["obs_norm"] = {{"temp_scale", net.norm.temp_scale}, {"time_scale", net.norm.time_scale}};
  return j.dump(1);
}

inline PolicyNet policy_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw PolicyLoadError(std::string("policy file: malformed JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || !j.contains("format") || j.at("format") != kPolicyFormat)
      throw PolicyLoadError(std::string("policy file: unsupported format, expected ") + kPolicyFormat);
    PolicyNet net;
    for (const auto& lj : j.at("layers")) {
      const auto role = lj.at("role").get<std::string>();
      if (role == "policy")
        net.policy.push_back(detail::layer_from_json(lj));
      else if (role == "value")
        net.value.push_back(detail::layer_from_json(lj));
      else
        throw PolicyLoadError("policy file: unknown layer role '" + role + "'");
    }
    detail::check_stack(net.policy, kNumActions, "policy");
    detail::check_stack(net.value, 1, "value");
    net.norm.temp_scale = j.at("obs_norm").at("temp_scale").get<double>();
    net.norm.time_scale = j.at("obs_norm").at("time_scale").get<double>();
    if (!(net.norm.temp_scale > 0.0) || !(net.norm.time_scale > 0.0))
      throw PolicyLoadError("policy file: obs_norm scales must be > 0");
    if (!detail::all_finite(net)) throw PolicyLoadError("policy file: non-finite parameters");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw PolicyLoadError(std::string("policy file: ") + e.what());
  }
}

inline void save_policy(const PolicyNet& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << policy_to_json(net) << '\n';
  if (!os) throw IoError("failed writing '" + path + "'");
}

inline PolicyNet load_policy(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw PolicyLoadError("cannot open policy file '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return policy_from_json(ss.str());
}

/// Learning curve CSV: `env_steps,mean_return,mean_energy_wh`.
inline void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& curve) {
  os << "env_steps,mean_return,mean_energy_wh\n";
  os << std::setprecision(10);
  for (const auto& p : curve) os << p.env_steps << ',' << p.mean_return << ',' << p.mean_energy_wh << '\n';
}

}  // namespace heatplan
