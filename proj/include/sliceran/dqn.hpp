#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "env.hpp"
#include "nn.hpp"
#include "ppo.hpp"
#include "random.hpp"

namespace sliceran {

struct DQNConfig {
  double gamma = 0.99;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::uint64_t epsilon_decay_steps = 50000;
  std::uint64_t target_sync_every = 1000;  // in updates
  std::uint64_t buffer_capacity = 100000;
  int batch_size = 64;
  double learning_rate = 1e-4;
  std::uint64_t learning_starts = 1000;    // env steps before the first update
  int train_every = 4;                     // env steps per update
  double max_grad_norm = 10.0;
  std::vector<std::size_t> hidden{128, 128};
  bool operator==(const DQNConfig&) const = default;
};

inline std::vector<std::string> validate(const DQNConfig& c) {
  std::vector<std::string> out;
  if (!(c.gamma >= 0 && c.gamma <= 1)) out.emplace_back("dqn.gamma: outside [0,1]");
  if (!(c.epsilon_start >= 0 && c.epsilon_start <= 1)) out.emplace_back("dqn.epsilon_start: outside [0,1]");
  if (!(c.epsilon_end >= 0 && c.epsilon_end <= 1)) out.emplace_back("dqn.epsilon_end: outside [0,1]");
  if (c.target_sync_every == 0) out.emplace_back("dqn.target_sync_every: must be positive");
  if (c.buffer_capacity == 0) out.emplace_back("dqn.buffer_capacity: must be positive");
  if (c.batch_size <= 0) out.emplace_back("dqn.batch_size: must be positive");
  if (static_cast<std::uint64_t>(std::max(c.batch_size, 0)) > c.buffer_capacity) out.emplace_back("dqn.batch_size: exceeds buffer capacity");
  if (!(c.learning_rate > 0)) out.emplace_back("dqn.learning_rate: must be positive");
  if (c.train_every <= 0) out.emplace_back("dqn.train_every: must be positive");
  for (auto h : c.hidden) {
    if (h == 0) out.emplace_back("dqn.hidden: layer widths must be positive");
  }
  return out;
}

inline json to_json(const DQNConfig& c) {
  return json{{"gamma", c.gamma},
              {"epsilon_start", c.epsilon_start},
              {"epsilon_end", c.epsilon_end},
              {"epsilon_decay_steps", c.epsilon_decay_steps},
              {"target_sync_every", c.target_sync_every},
              {"buffer_capacity", c.buffer_capacity},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"learning_starts", c.learning_starts},
              {"train_every", c.train_every},
              {"max_grad_norm", c.max_grad_norm},
              {"hidden", c.hidden}};
}

inline DQNConfig dqn_from_json(const json& obj) {
  detail::require_object(obj, "dqn");
  detail::reject_unknown(obj, {"gamma", "epsilon_start", "epsilon_end", "epsilon_decay_steps", "target_sync_every", "buffer_capacity",
                               "batch_size", "learning_rate", "learning_starts", "train_every", "max_grad_norm", "hidden"},
                         "dqn");
  DQNConfig c;
  detail::read_field(obj, "gamma", c.gamma, "dqn");
  detail::read_field(obj, "epsilon_start", c.epsilon_start, "dqn");
  detail::read_field(obj, "epsilon_end", c.epsilon_end, "dqn");
  detail::read_field(obj, "epsilon_decay_steps", c.epsilon_decay_steps, "dqn");
  detail::read_field(obj, "target_sync_every", c.target_sync_every, "dqn");
  detail::read_field(obj, "buffer_capacity", c.buffer_capacity, "dqn");
  detail::read_field(obj, "batch_size", c.batch_size, "dqn");
  detail::read_field(obj, "learning_rate", c.learning_rate, "dqn");
  detail::read_field(obj, "learning_starts", c.learning_starts, "dqn");
  detail::read_field(obj, "train_every", c.train_every, "dqn");
  detail::read_field(obj, "max_grad_norm", c.max_grad_norm, "dqn");
  c.hidden = detail::read_hidden(obj, "dqn.hidden", c.hidden);
  return c;
}

/// Linear decay from epsilon_start to epsilon_end over epsilon_decay_steps.
inline double epsilon_at(const DQNConfig& c, std::uint64_t step) {
  if (c.epsilon_decay_steps == 0 || step >= c.epsilon_decay_steps) return c.epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(c.epsilon_decay_steps);
  return c.epsilon_start + frac * (c.epsilon_end - c.epsilon_start);
}

struct Transition {
  Observation obs;
  std::size_t action = 0;
  double reward = 0;
  Observation next_obs;
  bool done = false;
};

/// Fixed-capacity ring of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
    data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t cursor() const { return cursor_; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

  /// `count` distinct indices, uniformly (Floyd's algorithm).
  std::vector<std::size_t> sample_indices(std::size_t count, RandomSource& rng) const {
    if (count > data_.size()) throw std::invalid_argument("cannot sample more transitions than stored");
    std::vector<std::size_t> out;
    out.reserve(count);
    const std::size_t n = data_.size();
    for (std::size_t j = n - count; j < n; ++j) {
      const auto t = static_cast<std::size_t>(rng.uniform_int(0, j));
      if (std::find(out.begin(), out.end(), t) == out.end()) {
        out.push_back(t);
      } else {
        out.push_back(j);
      }
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> data_;
};

inline nn::Mlp make_q_net(std::size_t obs_size, std::size_t n_actions, const std::vector<std::size_t>& hidden, RandomSource& rng) {
  std::vector<std::size_t> sizes{obs_size};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(n_actions);
  nn::Mlp q(sizes, nn::Activation::Tanh);
  q.initialize(rng, 1.0);
  return q;
}

/// Q-network, target network, replay and optimizer state.
class DqnLearner {
 public:
  DqnLearner(nn::Mlp q, const DQNConfig& cfg, std::uint64_t sample_seed)
      : q_(std::move(q)), target_(q_), cfg_(cfg), opt_(q_.parameter_count(), cfg.learning_rate), buffer_(cfg.buffer_capacity), rng_(sample_seed) {}

  const nn::Mlp& q() const { return q_; }
  const nn::Mlp& target() const { return target_; }
  nn::Mlp& q() { return q_; }
  nn::Mlp& target() { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  const DQNConfig& config() const { return cfg_; }
  std::uint64_t updates() const { return updates_; }

  /// TD targets r + gamma * (1 - done) * max_a' Q_target(s', a') for the given batch.
  std::vector<double> td_targets(const std::vector<std::size_t>& idx) const {
    const auto obs_dim = static_cast<Eigen::Index>(q_.input_size());
    const auto b = static_cast<Eigen::Index>(idx.size());
    nn::Matrix next(obs_dim, b);
    for (Eigen::Index j = 0; j < b; ++j) {
      const auto& t = buffer_[idx[static_cast<std::size_t>(j)]];
      next.col(j) = Eigen::Map<const nn::Vector>(t.next_obs.data(), obs_dim);
    }
    const nn::Matrix qn = target_.forward_batch(next);
    std::vector<double> y(idx.size());
    for (Eigen::Index j = 0; j < b; ++j) {
      const auto& t = buffer_[idx[static_cast<std::size_t>(j)]];
      y[static_cast<std::size_t>(j)] = t.reward + (t.done ? 0.0 : cfg_.gamma * qn.col(j).maxCoeff());
    }
    return y;
  }

  /// One squared-TD-error gradient step on a sampled batch; syncs the target
  /// network every target_sync_every updates. Returns the batch loss.
  double update() {
    const auto bs = static_cast<std::size_t>(cfg_.batch_size);
    if (buffer_.size() < bs) throw std::logic_error("dqn update: buffer smaller than batch size");
    const auto idx = buffer_.sample_indices(bs, rng_);
    const auto y = td_targets(idx);

    const auto obs_dim = static_cast<Eigen::Index>(q_.input_size());
    const auto b = static_cast<Eigen::Index>(bs);
    nn::Matrix x(obs_dim, b);
    std::vector<std::size_t> actions(bs);
    for (Eigen::Index j = 0; j < b; ++j) {
      const auto& t = buffer_[idx[static_cast<std::size_t>(j)]];
      x.col(j) = Eigen::Map<const nn::Vector>(t.obs.data(), obs_dim);
      actions[static_cast<std::size_t>(j)] = t.action;
    }
    // Only Q(s, a) of the stored action enters the loss.
    nn::ForwardCache cache;
    const auto qa = q_.forward_selected(x, actions, cache);
    std::vector<double> upstream(bs);
    double loss = 0;
    for (std::size_t j = 0; j < bs; ++j) {
      const double err = qa[j] - y[j];
      loss += err * err / static_cast<double>(bs);
      upstream[j] = 2.0 * err / static_cast<double>(bs);
    }
    if (!std::isfinite(loss)) throw TrainingError("dqn update: non-finite loss");
    grad_.assign(q_.parameter_count(), 0.0);
    q_.backward_selected(cache, actions, upstream, grad_);
    nn::clip_grad_norm(grad_, cfg_.max_grad_norm);
    opt_.step(q_.parameters(), grad_);
    ++updates_;
    if (updates_ % cfg_.target_sync_every == 0) target_ = q_;
    return loss;
  }

 private:
  nn::Mlp q_;
  nn::Mlp target_;
  DQNConfig cfg_;
  nn::Adam opt_;
  ReplayBuffer buffer_;
  RandomSource rng_;
  std::uint64_t updates_ = 0;
  std::vector<double> grad_;
};

/// Uniform action with probability epsilon, else argmax Q (lowest index on ties).
inline std::size_t epsilon_greedy(const nn::Mlp& q, std::span<const double> obs, double epsilon, RandomSource& rng) {
  const bool explore = rng.uniform() < epsilon;
  if (explore) return static_cast<std::size_t>(rng.uniform_int(0, q.output_size() - 1));
  const auto values = q.forward(obs);
  return nn::argmax(values);
}

struct DqnTrainResult {
  nn::Mlp q;
  std::vector<TrainLogRow> log;
};

/// Epsilon-greedy collection with one update every `train_every` steps once
/// `learning_starts` steps are stored. Log rows are emitted every
/// `log_every` env steps; value_loss carries the mean TD loss.
template <DiscreteEnv E>
DqnTrainResult train_dqn(E& env, const DQNConfig& cfg, std::uint64_t seed, std::uint64_t total_steps,
                         const TrainHooks<nn::Mlp>& hooks = {}, std::uint64_t log_every = 2048) {
  detail::throw_if_invalid(validate(cfg));
  RandomSource init_rng(derive_seed(seed, 1));
  RandomSource act_rng(derive_seed(seed, 2));
  DqnLearner learner(make_q_net(env.observation_size(), env.action_count(), cfg.hidden, init_rng), cfg, derive_seed(seed, 3));

  DqnTrainResult result;
  std::uint64_t episode = 0;
  std::uint64_t next_checkpoint = hooks.checkpoint_every;
  Observation obs;
  bool need_reset = true;
  RewardWindow window;
  double loss_sum = 0;
  std::uint64_t loss_n = 0;

  for (std::uint64_t step = 0; step < total_steps; ++step) {
    if (need_reset) {
      obs = env.reset(derive_seed(seed, kEpisodeSeedStream + episode++));
      need_reset = false;
    }
    const auto action = epsilon_greedy(learner.q(), obs, epsilon_at(cfg, step), act_rng);
    StepResult res = env.step(action);
    window.add(res);
    learner.buffer().push({obs, action, res.reward, res.observation, res.done});
    obs = std::move(res.observation);
    need_reset = res.done;

    const std::uint64_t done_steps = step + 1;
    if (done_steps >= cfg.learning_starts && done_steps % static_cast<std::uint64_t>(cfg.train_every) == 0 &&
        learner.buffer().size() >= static_cast<std::size_t>(cfg.batch_size)) {
      loss_sum += learner.update();
      ++loss_n;
    }
    if (done_steps % log_every == 0 || done_steps == total_steps) {
      TrainLogRow row = window.row(done_steps);
      row.value_loss = loss_n > 0 ? loss_sum / static_cast<double>(loss_n) : 0.0;
      result.log.push_back(row);
      if (hooks.on_log) hooks.on_log(row);
      window = {};
      loss_sum = 0;
      loss_n = 0;
    }
    if (hooks.checkpoint_every > 0 && done_steps >= next_checkpoint && done_steps < total_steps) {
      if (hooks.on_checkpoint) hooks.on_checkpoint(learner.q(), done_steps);
      next_checkpoint += hooks.checkpoint_every;
    }
  }
  result.q = learner.q();
  if (hooks.on_checkpoint) hooks.on_checkpoint(result.q, total_steps);
  return result;
}

}  // namespace sliceran
