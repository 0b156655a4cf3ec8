#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "baselines.hpp"
#include "dqn.hpp"
#include "nn.hpp"
#include "ppo.hpp"
#include "scenario.hpp"

namespace sliceran {

/// Trained parameters of a learned policy. PPO stores (policy, value); DQN
/// stores the online Q-network.
struct PolicyParams {
  PolicyKind kind = PolicyKind::PPO;
  std::uint64_t scenario_hash = 0;
  std::vector<nn::Mlp> nets;

  const nn::Mlp& actor() const {
    if (nets.empty()) throw std::logic_error("policy parameters hold no network");
    return nets.front();
  }
  bool operator==(const PolicyParams&) const = default;
};

enum class ActMode { Stochastic, Greedy };

/// PPO: sample / argmax of the softmax. DQN: epsilon-greedy / argmax Q.
/// Greedy ties resolve to the lowest index.
inline std::size_t act(const PolicyParams& params, std::span<const double> obs, ActMode mode, RandomSource* rng = nullptr,
                       double epsilon = 0.0) {
  if (params.kind == PolicyKind::PPO) {
    const auto probs = policy_distribution(params.actor(), obs);
    if (mode == ActMode::Greedy) return nn::argmax(probs);
    if (!rng) throw std::invalid_argument("stochastic action needs a random source");
    return sample_index(probs, *rng);
  }
  if (params.kind == PolicyKind::DQN) {
    if (mode == ActMode::Greedy) return nn::argmax(params.actor().forward(obs));
    if (!rng) throw std::invalid_argument("stochastic action needs a random source");
    return epsilon_greedy(params.actor(), obs, epsilon, *rng);
  }
  throw std::invalid_argument(std::string(policy_name(params.kind)) + " has no learned parameters");
}

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<char, 8> kCheckpointMagic{'S', 'L', 'I', 'C', 'E', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& out, T value) {
  std::uint64_t bits = 0;
  if constexpr (std::is_same_v<T, double>) {
    std::memcpy(&bits, &value, sizeof bits);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::istream& in) {
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw CheckpointError("checkpoint truncated");
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  if constexpr (std::is_same_v<T, double>) {
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace detail

/// Layout (all integers and floats little-endian):
///   magic[8] | u32 version | u64 scenario hash | u32 policy kind | u32 net count
///   per net: u32 activation | u32 layer-size count | u64 sizes[] | u64 param count | f64 params[]
inline void write_checkpoint(const PolicyParams& p, std::ostream& out) {
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, p.scenario_hash);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.kind));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.nets.size()));
  for (const auto& net : p.nets) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.hidden_activation()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.sizes().size()));
    for (auto s : net.sizes()) detail::put_le<std::uint64_t>(out, s);
    detail::put_le<std::uint64_t>(out, net.parameter_count());
    for (double v : net.parameters()) detail::put_le<double>(out, v);
  }
}

inline PolicyParams read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) throw CheckpointError("not a policy checkpoint (bad magic)");
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  PolicyParams p;
  p.scenario_hash = detail::get_le<std::uint64_t>(in);
  const auto kind = detail::get_le<std::uint32_t>(in);
  if (kind > static_cast<std::uint32_t>(PolicyKind::DQN)) throw CheckpointError("unknown policy kind in checkpoint");
  p.kind = static_cast<PolicyKind>(kind);
  const auto n_nets = detail::get_le<std::uint32_t>(in);
  if (n_nets > 16) throw CheckpointError("implausible network count in checkpoint");
  for (std::uint32_t k = 0; k < n_nets; ++k) {
    const auto act_kind = detail::get_le<std::uint32_t>(in);
    if (act_kind > static_cast<std::uint32_t>(nn::Activation::Relu)) throw CheckpointError("unknown activation in checkpoint");
    const auto n_sizes = detail::get_le<std::uint32_t>(in);
    if (n_sizes < 2 || n_sizes > 64) throw CheckpointError("implausible layer count in checkpoint");
    std::vector<std::size_t> sizes;
    for (std::uint32_t i = 0; i < n_sizes; ++i) {
      const auto s = detail::get_le<std::uint64_t>(in);
      if (s == 0 || s > (1u << 24)) throw CheckpointError("implausible layer size in checkpoint");
      sizes.push_back(static_cast<std::size_t>(s));
    }
    nn::Mlp net(sizes, static_cast<nn::Activation>(act_kind));
    const auto count = detail::get_le<std::uint64_t>(in);
    if (count != net.parameter_count()) throw CheckpointError("parameter count does not match layer shapes");
    for (double& v : net.parameters()) v = detail::get_le<double>(in);
    p.nets.push_back(std::move(net));
  }
  return p;
}

inline void save_checkpoint(const PolicyParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  write_checkpoint(p, out);
  if (!out) throw CheckpointError("write failed for '" + path + "'");
}

inline PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("missing checkpoint '" + path + "'");
  return read_checkpoint(in);
}

/// Offline training environment: the lookup-table channel, no perturbation.
inline SlicingEnv make_offline_env(const NetworkConfig& cfg, std::shared_ptr<const ThroughputTable> table) {
  return SlicingEnv(cfg, ChannelModel(cfg, std::move(table)));
}

/// Evaluation environment: same MDP with fading, measurement noise and
/// cross-slice contention.
inline SlicingEnv make_online_env(const NetworkConfig& cfg, const NoiseConfig& noise, std::shared_ptr<const ThroughputTable> table) {
  return wrap_env(make_offline_env(cfg, std::move(table)), noise);
}

struct TrainOptions {
  std::uint64_t checkpoint_every = 0;
  std::function<void(const TrainLogRow&)> on_log;
  std::function<void(const PolicyParams&, std::uint64_t step)> on_checkpoint;
};

struct TrainResult {
  PolicyParams params;
  std::vector<TrainLogRow> log;
};

/// Trains a learned policy on the offline environment of `scenario`.
inline TrainResult train(const Scenario& scenario, std::shared_ptr<const ThroughputTable> table, PolicyKind kind,
                         std::uint64_t seed, std::uint64_t total_steps, const TrainOptions& options = {}) {
  SlicingEnv env = make_offline_env(scenario.network, std::move(table));
  const auto hash = scenario_hash(scenario);
  TrainResult out;
  out.params.kind = kind;
  out.params.scenario_hash = hash;
  if (kind == PolicyKind::PPO) {
    TrainHooks<PpoNets> hooks;
    hooks.checkpoint_every = options.checkpoint_every;
    hooks.on_log = options.on_log;
    if (options.on_checkpoint) {
      hooks.on_checkpoint = [&](const PpoNets& nets, std::uint64_t step) {
        options.on_checkpoint(PolicyParams{kind, hash, {nets.policy, nets.value}}, step);
      };
    }
    auto res = train_ppo(env, scenario.ppo, seed, total_steps, hooks);
    out.params.nets = {std::move(res.nets.policy), std::move(res.nets.value)};
    out.log = std::move(res.log);
  } else if (kind == PolicyKind::DQN) {
    TrainHooks<nn::Mlp> hooks;
    hooks.checkpoint_every = options.checkpoint_every;
    hooks.on_log = options.on_log;
    if (options.on_checkpoint) {
      hooks.on_checkpoint = [&](const nn::Mlp& q, std::uint64_t step) { options.on_checkpoint(PolicyParams{kind, hash, {q}}, step); };
    }
    auto res = train_dqn(env, scenario.dqn, seed, total_steps, hooks);
    out.params.nets = {std::move(res.q)};
    out.log = std::move(res.log);
  } else {
    throw std::invalid_argument(std::string(policy_name(kind)) + " is not a learned policy");
  }
  return out;
}

inline constexpr const char* kTrainLogHeader = "step,mean_reward,r_u,r_e,r_m,policy_loss,value_loss,entropy";

inline void write_train_log_row(std::ostream& out, const TrainLogRow& r) {
  out << r.step << ',' << format_double(r.mean_reward) << ',' << format_double(r.r_u) << ',' << format_double(r.r_e) << ','
      << format_double(r.r_m) << ',' << format_double(r.policy_loss) << ',' << format_double(r.value_loss) << ','
      << format_double(r.entropy) << '\n';
}

inline void write_train_log(std::ostream& out, const std::vector<TrainLogRow>& log) {
  out << kTrainLogHeader << '\n';
  for (const auto& r : log) write_train_log_row(out, r);
}

}  // namespace sliceran
