#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "env.hpp"
#include "nn.hpp"
#include "random.hpp"

namespace sliceran {

/// Anything with the reset/step contract of SlicingEnv.
template <typename E>
concept DiscreteEnv = requires(E& e, std::uint64_t seed, std::size_t action) {
  { e.reset(seed) } -> std::convertible_to<Observation>;
  { e.step(action) } -> std::same_as<StepResult>;
  { e.observation_size() } -> std::convertible_to<std::size_t>;
  { e.action_count() } -> std::convertible_to<std::size_t>;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PPOConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_ratio = 0.2;
  int epochs = 4;
  int minibatch_size = 256;
  double learning_rate = 3e-4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int rollout_len = 2048;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  // Rewards are multiplied by this before GAE so value targets stay O(1).
  double return_scale = 0.01;
  std::vector<std::size_t> hidden{128, 128};
  bool operator==(const PPOConfig&) const = default;
};

inline std::vector<std::string> validate(const PPOConfig& c) {
  std::vector<std::string> out;
  if (!(c.gamma >= 0 && c.gamma <= 1)) out.emplace_back("ppo.gamma: outside [0,1]");
  if (!(c.gae_lambda >= 0 && c.gae_lambda <= 1)) out.emplace_back("ppo.gae_lambda: outside [0,1]");
  if (!(c.clip_ratio > 0)) out.emplace_back("ppo.clip_ratio: must be positive");
  if (c.epochs <= 0) out.emplace_back("ppo.epochs: must be positive");
  if (c.minibatch_size <= 0) out.emplace_back("ppo.minibatch_size: must be positive");
  if (!(c.learning_rate > 0)) out.emplace_back("ppo.learning_rate: must be positive");
  if (!(c.value_coef >= 0)) out.emplace_back("ppo.value_coef: must be nonnegative");
  if (!(c.entropy_coef >= 0)) out.emplace_back("ppo.entropy_coef: must be nonnegative");
  if (c.rollout_len <= 0) out.emplace_back("ppo.rollout_len: must be positive");
  if (!(c.max_grad_norm >= 0)) out.emplace_back("ppo.max_grad_norm: must be nonnegative");
  if (!(c.return_scale > 0)) out.emplace_back("ppo.return_scale: must be positive");
  for (auto h : c.hidden) {
    if (h == 0) out.emplace_back("ppo.hidden: layer widths must be positive");
  }
  return out;
}

inline json to_json(const PPOConfig& c) {
  return json{{"gamma", c.gamma},
              {"gae_lambda", c.gae_lambda},
              {"clip_ratio", c.clip_ratio},
              {"epochs", c.epochs},
              {"minibatch_size", c.minibatch_size},
              {"learning_rate", c.learning_rate},
              {"value_coef", c.value_coef},
              {"entropy_coef", c.entropy_coef},
              {"rollout_len", c.rollout_len},
              {"max_grad_norm", c.max_grad_norm},
              {"normalize_advantages", c.normalize_advantages},
              {"return_scale", c.return_scale},
              {"hidden", c.hidden}};
}

namespace detail {

inline std::vector<std::size_t> read_hidden(const json& obj, const std::string& path, std::vector<std::size_t> fallback) {
  const auto it = obj.find("hidden");
  if (it == obj.end()) return fallback;
  if (!it->is_array()) throw ConfigError(path, path + ": expected an array of layer widths");
  std::vector<std::size_t> out;
  for (const auto& v : *it) {
    if (!v.is_number_unsigned()) throw ConfigError(path, path + ": layer widths must be positive integers");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

}  // namespace detail

inline PPOConfig ppo_from_json(const json& obj) {
  detail::require_object(obj, "ppo");
  detail::reject_unknown(obj, {"gamma", "gae_lambda", "clip_ratio", "epochs", "minibatch_size", "learning_rate", "value_coef",
                               "entropy_coef", "rollout_len", "max_grad_norm", "normalize_advantages", "return_scale", "hidden"},
                         "ppo");
  PPOConfig c;
  detail::read_field(obj, "gamma", c.gamma, "ppo");
  detail::read_field(obj, "gae_lambda", c.gae_lambda, "ppo");
  detail::read_field(obj, "clip_ratio", c.clip_ratio, "ppo");
  detail::read_field(obj, "epochs", c.epochs, "ppo");
  detail::read_field(obj, "minibatch_size", c.minibatch_size, "ppo");
  detail::read_field(obj, "learning_rate", c.learning_rate, "ppo");
  detail::read_field(obj, "value_coef", c.value_coef, "ppo");
  detail::read_field(obj, "entropy_coef", c.entropy_coef, "ppo");
  detail::read_field(obj, "rollout_len", c.rollout_len, "ppo");
  detail::read_field(obj, "max_grad_norm", c.max_grad_norm, "ppo");
  detail::read_field(obj, "normalize_advantages", c.normalize_advantages, "ppo");
  detail::read_field(obj, "return_scale", c.return_scale, "ppo");
  c.hidden = detail::read_hidden(obj, "ppo.hidden", c.hidden);
  return c;
}

/// Softmax over the policy network's logits for one observation.
inline std::vector<double> policy_distribution(const nn::Mlp& policy, std::span<const double> obs) {
  const auto logits = policy.forward(obs);
  for (double z : logits) {
    if (!std::isfinite(z)) throw TrainingError("policy produced non-finite logits");
  }
  const nn::Vector p = nn::softmax(Eigen::Map<const nn::Vector>(logits.data(), static_cast<Eigen::Index>(logits.size())));
  return {p.data(), p.data() + p.size()};
}

/// Inverse-CDF draw from a discrete distribution.
inline std::size_t sample_index(std::span<const double> probs, RandomSource& rng) {
  const double u = rng.uniform();
  double acc = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding left the cumulative sum just below 1; fall back to the last
  // action with positive mass.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0) return i;
  }
  return 0;
}

/// One rollout segment. `bootstrap_value` is V(s_T) for the state after the
/// last step, ignored when that step ended an episode.
struct Trajectory {
  std::vector<Observation> observations;
  std::vector<std::size_t> actions;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;
  double bootstrap_value = 0;

  std::size_t size() const { return rewards.size(); }
  void clear() { *this = Trajectory{}; }
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalized advantage estimation, swept backwards over the segment.
inline GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const std::uint8_t> dones,
                             double bootstrap_value, double gamma, double lambda) {
  const auto n = rewards.size();
  if (values.size() != n || dones.size() != n) throw std::invalid_argument("compute_gae: length mismatch");
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double next_value = bootstrap_value;
  double next_adv = 0;
  for (std::size_t t = n; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[t] = next_adv;
    out.returns[t] = next_adv + values[t];
    next_value = values[t];
  }
  return out;
}

inline GaeResult compute_gae(const Trajectory& traj, double gamma, double lambda) {
  if (traj.size() == 0) throw std::invalid_argument("compute_gae: empty trajectory");
  if (traj.values.size() != traj.size() || traj.dones.size() != traj.size()) throw std::invalid_argument("compute_gae: length mismatch");
  return compute_gae(traj.rewards, traj.values, traj.dones, traj.bootstrap_value, gamma, lambda);
}

struct PpoDiagnostics {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
};

/// Per-sample clipped-surrogate terms; exposed for testing.
struct SurrogateTerm {
  double objective = 0;     // min(rho*A, clip(rho)*A)
  double ratio_grad = 0;    // d objective / d log pi(a)
  bool clipped = false;     // |rho - 1| > eps
};

inline SurrogateTerm clipped_surrogate(double log_prob, double old_log_prob, double advantage, double eps) {
  const double ratio = std::exp(log_prob - old_log_prob);
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
  SurrogateTerm t;
  t.clipped = std::abs(ratio - 1.0) > eps;
  if (unclipped <= clipped) {
    t.objective = unclipped;
    t.ratio_grad = unclipped;
  } else {
    t.objective = clipped;
  }
  return t;
}

struct PpoNets {
  nn::Mlp policy;
  nn::Mlp value;
};

inline PpoNets make_ppo_nets(std::size_t obs_size, std::size_t n_actions, const PPOConfig& cfg, RandomSource& rng) {
  std::vector<std::size_t> ps{obs_size};
  ps.insert(ps.end(), cfg.hidden.begin(), cfg.hidden.end());
  auto vs = ps;
  ps.push_back(n_actions);
  vs.push_back(1);
  PpoNets nets{nn::Mlp(ps, nn::Activation::Tanh), nn::Mlp(vs, nn::Activation::Tanh)};
  nets.policy.initialize(rng, 0.01);
  nets.value.initialize(rng, 1.0);
  return nets;
}

/// Clipped-surrogate learner: owns the networks and their optimizer state.
class PpoLearner {
 public:
  PpoLearner(PpoNets nets, const PPOConfig& cfg, std::uint64_t shuffle_seed)
      : nets_(std::move(nets)),
        cfg_(cfg),
        policy_opt_(nets_.policy.parameter_count(), cfg.learning_rate),
        value_opt_(nets_.value.parameter_count(), cfg.learning_rate),
        rng_(shuffle_seed) {}

  const PpoNets& nets() const { return nets_; }
  PpoNets& nets() { return nets_; }
  const PPOConfig& config() const { return cfg_; }

  /// Minibatch gradient steps over `traj` for the configured epochs.
  PpoDiagnostics update(const Trajectory& traj, const GaeResult& gae) {
    const auto n = traj.size();
    if (n == 0) return {};
    if (gae.advantages.size() != n || gae.returns.size() != n || traj.actions.size() != n || traj.log_probs.size() != n ||
        traj.observations.size() != n) {
      throw std::invalid_argument("ppo update: length mismatch");
    }
    std::vector<double> adv = gae.advantages;
    if (cfg_.normalize_advantages && n > 1) {
      double mean = 0;
      for (double a : adv) mean += a;
      mean /= static_cast<double>(n);
      double var = 0;
      for (double a : adv) var += (a - mean) * (a - mean);
      const double sd = std::sqrt(var / static_cast<double>(n));
      for (double& a : adv) a = (a - mean) / (sd + 1e-8);
    }

    const auto obs_dim = static_cast<Eigen::Index>(nets_.policy.input_size());
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const auto mb = static_cast<std::size_t>(cfg_.minibatch_size);

    PpoDiagnostics diag;
    int batches = 0;
    std::vector<double> pgrad(nets_.policy.parameter_count());
    std::vector<double> vgrad(nets_.value.parameter_count());
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng_.uniform_int(0, i - 1)]);
      for (std::size_t start = 0; start < n; start += mb) {
        const std::size_t end = std::min(n, start + mb);
        const auto b = static_cast<Eigen::Index>(end - start);
        nn::Matrix x(obs_dim, b);
        for (Eigen::Index j = 0; j < b; ++j) {
          const auto& o = traj.observations[order[start + static_cast<std::size_t>(j)]];
          x.col(j) = Eigen::Map<const nn::Vector>(o.data(), obs_dim);
        }
        const auto d = minibatch_step(x, order, start, end, traj, adv, gae.returns, pgrad, vgrad);
        diag.policy_loss += d.policy_loss;
        diag.value_loss += d.value_loss;
        diag.entropy += d.entropy;
        diag.clip_fraction += d.clip_fraction;
        ++batches;
      }
    }
    if (batches > 0) {
      diag.policy_loss /= batches;
      diag.value_loss /= batches;
      diag.entropy /= batches;
      diag.clip_fraction /= batches;
    }
    return diag;
  }

 private:
  PpoDiagnostics minibatch_step(const nn::Matrix& x, const std::vector<std::size_t>& order, std::size_t start, std::size_t end,
                                const Trajectory& traj, const std::vector<double>& adv, const std::vector<double>& returns,
                                std::vector<double>& pgrad, std::vector<double>& vgrad) {
    const auto b = static_cast<double>(end - start);
    nn::ForwardCache pcache, vcache;
    const nn::Matrix logits = nets_.policy.forward_batch(x, &pcache);
    const nn::Matrix values = nets_.value.forward_batch(x, &vcache);
    nn::Matrix dlogits(logits.rows(), logits.cols());
    nn::Matrix dvalues(1, values.cols());

    PpoDiagnostics d;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const std::size_t k = order[start + static_cast<std::size_t>(j)];
      const nn::Vector logp = nn::log_softmax(logits.col(j));
      if (!logp.allFinite()) throw TrainingError("ppo update: non-finite log-probabilities");
      const nn::Vector p = logp.array().exp();
      const double entropy = -(p.array() * logp.array()).sum();
      const auto a = static_cast<Eigen::Index>(traj.actions[k]);
      const auto term = clipped_surrogate(logp(a), traj.log_probs[k], adv[k], cfg_.clip_ratio);

      // Loss = -surrogate - c_e * H, averaged over the minibatch.
      auto col = dlogits.col(j);
      col = (term.ratio_grad / b) * p;
      col(a) -= term.ratio_grad / b;
      col.array() += (cfg_.entropy_coef / b) * p.array() * (logp.array() + entropy);

      const double err = values(0, j) - returns[k];
      dvalues(0, j) = 2.0 * cfg_.value_coef * err / b;

      d.policy_loss -= term.objective / b;
      d.value_loss += err * err / b;
      d.entropy += entropy / b;
      d.clip_fraction += (term.clipped ? 1.0 : 0.0) / b;
    }
    if (!std::isfinite(d.policy_loss) || !std::isfinite(d.value_loss)) {
      throw TrainingError("ppo update: non-finite loss (policy " + std::to_string(d.policy_loss) + ", value " +
                          std::to_string(d.value_loss) + ")");
    }

    std::fill(pgrad.begin(), pgrad.end(), 0.0);
    std::fill(vgrad.begin(), vgrad.end(), 0.0);
    nets_.policy.backward_batch(pcache, dlogits, pgrad);
    nets_.value.backward_batch(vcache, dvalues, vgrad);
    nn::clip_grad_norm(pgrad, cfg_.max_grad_norm);
    nn::clip_grad_norm(vgrad, cfg_.max_grad_norm);
    policy_opt_.step(nets_.policy.parameters(), pgrad);
    value_opt_.step(nets_.value.parameters(), vgrad);
    return d;
  }

  PpoNets nets_;
  PPOConfig cfg_;
  nn::Adam policy_opt_;
  nn::Adam value_opt_;
  RandomSource rng_;
};

struct TrainLogRow {
  std::uint64_t step = 0;
  double mean_reward = 0;
  double r_u = 0;
  double r_e = 0;
  double r_m = 0;
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  bool operator==(const TrainLogRow&) const = default;
};

/// Running means of the reward and its components over a window of steps.
struct RewardWindow {
  double reward = 0, r_u = 0, r_e = 0, r_m = 0;
  std::uint64_t n = 0;

  void add(const StepResult& s) {
    reward += s.reward;
    r_u += s.record.r_u;
    r_e += s.record.r_e;
    r_m += s.record.r_m;
    ++n;
  }
  TrainLogRow row(std::uint64_t step) const {
    const double k = n > 0 ? static_cast<double>(n) : 1.0;
    return {step, reward / k, r_u / k, r_e / k, r_m / k, 0, 0, 0};
  }
};

/// Hooks for progress reporting; `on_checkpoint` fires every
/// `checkpoint_every` environment steps (0 disables) and once at the end.
template <typename Params>
struct TrainHooks {
  std::uint64_t checkpoint_every = 0;
  std::function<void(const TrainLogRow&)> on_log;
  std::function<void(const Params&, std::uint64_t step)> on_checkpoint;
};

struct PpoTrainResult {
  PpoNets nets;
  std::vector<TrainLogRow> log;
};

inline constexpr std::uint64_t kEpisodeSeedStream = 1000;

/// Seeded rollout/update cycles. Episode k is reset with
/// derive_seed(seed, kEpisodeSeedStream + k).
template <DiscreteEnv E>
PpoTrainResult train_ppo(E& env, const PPOConfig& cfg, std::uint64_t seed, std::uint64_t total_steps,
                         const TrainHooks<PpoNets>& hooks = {}) {
  detail::throw_if_invalid(validate(cfg));
  RandomSource init_rng(derive_seed(seed, 1));
  RandomSource act_rng(derive_seed(seed, 2));
  PpoLearner learner(make_ppo_nets(env.observation_size(), env.action_count(), cfg, init_rng), cfg, derive_seed(seed, 3));

  PpoTrainResult result;
  std::uint64_t steps = 0;
  std::uint64_t episode = 0;
  std::uint64_t next_checkpoint = hooks.checkpoint_every;
  Observation obs;
  bool need_reset = true;

  while (steps < total_steps) {
    Trajectory traj;
    RewardWindow window;
    const auto len = std::min<std::uint64_t>(static_cast<std::uint64_t>(cfg.rollout_len), total_steps - steps);
    for (std::uint64_t t = 0; t < len; ++t) {
      if (need_reset) {
        obs = env.reset(derive_seed(seed, kEpisodeSeedStream + episode++));
        need_reset = false;
      }
      const auto probs = policy_distribution(learner.nets().policy, obs);
      const auto action = sample_index(probs, act_rng);
      const double value = learner.nets().value.forward(obs)[0];
      StepResult res = env.step(action);
      window.add(res);
      traj.observations.push_back(std::move(obs));
      traj.actions.push_back(action);
      traj.log_probs.push_back(std::log(probs[action]));
      traj.values.push_back(value);
      traj.rewards.push_back(res.reward * cfg.return_scale);
      traj.dones.push_back(res.done ? 1 : 0);
      obs = std::move(res.observation);
      need_reset = res.done;
    }
    steps += len;
    traj.bootstrap_value = need_reset ? 0.0 : learner.nets().value.forward(obs)[0];
    const auto gae = compute_gae(traj, cfg.gamma, cfg.gae_lambda);
    const auto diag = learner.update(traj, gae);

    TrainLogRow row = window.row(steps);
    row.policy_loss = diag.policy_loss;
    row.value_loss = diag.value_loss;
    row.entropy = diag.entropy;
    result.log.push_back(row);
    if (hooks.on_log) hooks.on_log(row);
    if (hooks.checkpoint_every > 0 && steps >= next_checkpoint && steps < total_steps) {
      if (hooks.on_checkpoint) hooks.on_checkpoint(learner.nets(), steps);
      while (next_checkpoint <= steps) next_checkpoint += hooks.checkpoint_every;
    }
  }
  result.nets = learner.nets();
  if (hooks.on_checkpoint) hooks.on_checkpoint(result.nets, steps);
  return result;
}

}  // namespace sliceran
