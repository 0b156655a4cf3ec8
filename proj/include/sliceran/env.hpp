#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "channel.hpp"
#include "config.hpp"
#include "random.hpp"
#include "traffic.hpp"

namespace sliceran {

/// Slice-level PRB split; the controller's action.
struct SliceAllocation {
  int urllc = 0;
  int embb = 0;
  int mmtc = 0;

  int total() const { return urllc + embb + mmtc; }
  bool valid(const NetworkConfig& cfg) const {
    const int m = cfg.min_prb_per_slice;
    return urllc >= m && embb >= m && mmtc >= m && total() == cfg.n_prb;
  }
  bool operator==(const SliceAllocation&) const = default;
};

class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All valid allocations in lexicographic (urllc, embb) order.
class ActionSpace {
 public:
  explicit ActionSpace(const NetworkConfig& cfg) : n_prb_(cfg.n_prb), min_(cfg.min_prb_per_slice) {
    for (int u = min_; u <= n_prb_ - 2 * min_; ++u) {
      for (int e = min_; e <= n_prb_ - u - min_; ++e) actions_.push_back({u, e, n_prb_ - u - e});
    }
  }

  std::size_t size() const { return actions_.size(); }
  const std::vector<SliceAllocation>& all() const { return actions_; }

  const SliceAllocation& decode(std::size_t index) const {
    if (index >= actions_.size()) throw EnvError("action index " + std::to_string(index) + " out of range");
    return actions_[index];
  }

  /// Closed-form inverse of the enumeration order.
  std::size_t encode(const SliceAllocation& a) const {
    if (a.urllc < min_ || a.embb < min_ || a.mmtc < min_ || a.total() != n_prb_) {
      throw EnvError("allocation is not a valid action");
    }
    // Row u holds (n - u - 2m + 1) entries.
    std::size_t offset = 0;
    for (int u = min_; u < a.urllc; ++u) offset += static_cast<std::size_t>(n_prb_ - u - 2 * min_ + 1);
    return offset + static_cast<std::size_t>(a.embb - min_);
  }

 private:
  int n_prb_;
  int min_;
  std::vector<SliceAllocation> actions_;
};

inline std::vector<SliceAllocation> enumerate_actions(const NetworkConfig& cfg) { return ActionSpace(cfg).all(); }

using Observation = std::vector<double>;

struct EmbbSample {
  double requested_mbps = 0;
  double achieved_mbps = 0;
  bool operator==(const EmbbSample&) const = default;
};

struct StepRecord {
  int step = 0;
  SliceAllocation action{};
  std::vector<double> latencies_ms;    // packets completed this epoch, per UE in FIFO order
  std::vector<EmbbSample> embb;        // one per eMBB UE
  std::vector<int> ue_prbs;            // per observed UE (URLLC then eMBB)
  std::vector<bool> ue_active;
  int mmtc_serviced = 0;
  double r_u = 0;
  double r_e = 0;
  double r_m = 0;
  double reward = 0;
  std::optional<double> mean_latency_ms;
  double mean_embb_mbps = 0;
  bool contention = false;
  bool operator==(const StepRecord&) const = default;
};

struct StepResult {
  Observation observation;
  double reward = 0;
  bool done = false;
  StepRecord record;
};

struct RoundRobinResult {
  std::vector<int> counts;  // aligned with the active id list
  int cursor = 0;           // id of the UE that receives the next PRB
};

/// Deals `prbs` blocks one at a time over `active_ids` (ascending), starting
/// at the first active id >= `cursor` and wrapping. With no active UE the
/// blocks lapse and the cursor is unchanged.
inline RoundRobinResult round_robin_assign(int prbs, const std::vector<int>& active_ids, int cursor) {
  RoundRobinResult out{std::vector<int>(active_ids.size(), 0), cursor};
  const auto k = active_ids.size();
  if (k == 0 || prbs <= 0) return out;
  std::size_t start = 0;
  while (start < k && active_ids[start] < cursor) ++start;
  if (start == k) start = 0;
  const auto n = static_cast<std::size_t>(prbs);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t offset = (i + k - start) % k;
    out.counts[i] = static_cast<int>(n / k + (offset < n % k ? 1 : 0));
  }
  out.cursor = active_ids[(start + n) % k];
  return out;
}

inline int mmtc_serviced(int prb_mmtc, const NetworkConfig& cfg) {
  if (prb_mmtc <= 0) return 0;
  return std::min(prb_mmtc / cfg.mmtc_prb_per_device, cfg.n_mmtc);
}

/// Drains the FIFO with `budget_bits`; returns latencies (ms) of packets that
/// completed during `step`.
inline std::vector<double> serve_queue(UEState& ue, double budget_bits, int step, const NetworkConfig& cfg) {
  std::vector<double> latencies;
  while (!ue.queue.empty() && budget_bits > 0) {
    Packet& head = ue.queue.front();
    if (budget_bits >= head.remaining_bits) {
      budget_bits -= head.remaining_bits;
      latencies.push_back(static_cast<double>(step - head.arrival_step + 1) * cfg.epoch_ms);
      ue.queue.pop_front();
    } else {
      head.remaining_bits -= budget_bits;
      budget_bits = 0;
    }
  }
  return latencies;
}

/// Bits deliverable in one epoch at `rate_mbps`.
inline double epoch_budget_bits(double rate_mbps, const NetworkConfig& cfg) { return rate_mbps * cfg.epoch_ms * 1000.0; }

inline std::vector<double> serve_urllc(UEState& ue, int prbs, const ChannelModel& channel, const NetworkConfig& cfg, int step) {
  return serve_queue(ue, epoch_budget_bits(channel.throughput(ue.pathloss_db, prbs), cfg), step, cfg);
}

inline double clamp_penalty(double x) { return std::max(-1.0, std::min(0.0, x)); }

/// Zero while the mean latency is within target, down to -1 at twice the target.
inline double reward_urllc(std::optional<double> mean_latency_ms, const NetworkConfig& cfg) {
  if (!mean_latency_ms) return 0.0;
  return clamp_penalty((cfg.latency_sla_ms - *mean_latency_ms) / cfg.latency_sla_ms);
}

inline double reward_embb(double mean_throughput_mbps, const NetworkConfig& cfg) {
  return clamp_penalty((mean_throughput_mbps - cfg.throughput_sla_mbps) / cfg.throughput_sla_mbps);
}

inline double reward_mmtc(int n_serv, const NetworkConfig& cfg) {
  return -1.0 + static_cast<double>(n_serv) / static_cast<double>(cfg.n_mmtc);
}

inline double total_reward(double r_u, double r_e, double r_m, const NetworkConfig& cfg) {
  const auto& w = cfg.reward_weights;
  return w.urllc * r_u + w.embb * r_e + w.mmtc * r_m;
}

/// Observation layout: (s, r, p) per observed UE, URLLC first, ids ascending.
inline Observation build_observation(const std::vector<UEState>& ues, const NetworkConfig& cfg) {
  Observation obs;
  obs.reserve(static_cast<std::size_t>(3 * cfg.n_observed()));
  const double max_packet_bits = cfg.urllc_pkt_kbits.max * 1000.0;
  for (SliceKind kind : {SliceKind::URLLC, SliceKind::EMBB}) {
    for (const auto& ue : ues) {
      if (ue.slice != kind) continue;
      double r = 0;
      if (kind == SliceKind::URLLC) {
        r = max_packet_bits > 0 ? ue.queued_bits() / max_packet_bits : 0.0;
      } else {
        r = ue.demand_mbps / (2.0 * cfg.throughput_sla_mbps);
      }
      obs.push_back(kind == SliceKind::URLLC ? 0.0 : 1.0);
      obs.push_back(std::clamp(r, 0.0, 1.0));
      obs.push_back(normalize_pathloss(ue.pathloss_db, cfg));
    }
  }
  return obs;
}

/// Hooks through which an evaluation environment injects stochasticity the
/// offline table does not model. The base environment runs without one.
class EnvPerturbation {
 public:
  virtual ~EnvPerturbation() = default;
  virtual void reseed(std::uint64_t seed) = 0;
  /// Multiplicative gain on one link's realized throughput for this epoch.
  virtual double link_gain() = 0;
  /// Capacity scale applied when every slice is demand-saturated.
  virtual double contention_scale() const = 0;
  /// Perturbs one normalized pathloss entry of the observation.
  virtual double observe_pathloss(double normalized) = 0;
};

/// Slice-level PRB allocation MDP for a single cell.
class SlicingEnv {
 public:
  SlicingEnv(const NetworkConfig& cfg, ChannelModel channel)
      : cfg_(cfg), channel_(std::move(channel)), actions_(cfg), rng_(0) {
    detail::throw_if_invalid(validate(cfg_));
  }

  explicit SlicingEnv(const NetworkConfig& cfg) : SlicingEnv(cfg, ChannelModel(cfg)) {}

  const NetworkConfig& config() const { return cfg_; }
  const ChannelModel& channel() const { return channel_; }
  const ActionSpace& actions() const { return actions_; }
  const std::vector<UEState>& ues() const { return ues_; }
  int step_index() const { return step_; }
  bool done() const { return step_ >= cfg_.episode_len; }
  std::size_t observation_size() const { return static_cast<std::size_t>(3 * cfg_.n_observed()); }
  std::size_t action_count() const { return actions_.size(); }

  void set_perturbation(std::unique_ptr<EnvPerturbation> p) { perturbation_ = std::move(p); }
  const EnvPerturbation* perturbation() const { return perturbation_.get(); }

  Observation reset(std::uint64_t seed) {
    rng_ = RandomSource(seed);
    if (perturbation_) perturbation_->reseed(derive_seed(seed, 1));
    ues_ = init_population(rng_, cfg_);
    step_ = 0;
    urllc_cursor_ = 0;
    embb_cursor_ = 0;
    started_ = true;
    return observe();
  }

  StepResult step(std::size_t action_index) {
    if (!started_) throw EnvError("step called before reset");
    if (done()) throw EnvError("episode already finished");
    const SliceAllocation action = actions_.decode(action_index);

    StepRecord rec;
    rec.step = step_;
    rec.action = action;

    // Arrivals and demands for this epoch.
    for (auto& ue : ues_) {
      if (ue.slice == SliceKind::URLLC) {
        if (auto pkt = draw_urllc_arrival(rng_, cfg_, step_)) ue.queue.push_back(*pkt);
      } else if (ue.slice == SliceKind::EMBB) {
        ue.demand_mbps = draw_embb_demand(rng_, cfg_);
      }
    }

    // Intra-slice round robin.
    std::vector<int> urllc_active, embb_active;
    for (const auto& ue : ues_) {
      if (ue.slice == SliceKind::URLLC && !ue.queue.empty()) urllc_active.push_back(ue.id);
      if (ue.slice == SliceKind::EMBB && ue.demand_mbps > 0) embb_active.push_back(ue.id);
    }
    const auto urllc_rr = round_robin_assign(action.urllc, urllc_active, urllc_cursor_);
    const auto embb_rr = round_robin_assign(action.embb, embb_active, embb_cursor_);
    urllc_cursor_ = urllc_rr.cursor;
    embb_cursor_ = embb_rr.cursor;

    std::vector<int> prbs(ues_.size(), 0);
    for (std::size_t i = 0; i < urllc_active.size(); ++i) prbs[static_cast<std::size_t>(urllc_active[i])] = urllc_rr.counts[i];
    for (std::size_t i = 0; i < embb_active.size(); ++i) prbs[static_cast<std::size_t>(embb_active[i])] = embb_rr.counts[i];

    // Realized link rates; fading applies per observed UE per epoch.
    std::vector<double> rate(ues_.size(), 0.0);
    for (const auto& ue : ues_) {
      if (ue.slice == SliceKind::MMTC) continue;
      const auto i = static_cast<std::size_t>(ue.id);
      rate[i] = channel_.throughput(ue.pathloss_db, prbs[i]);
      if (perturbation_) rate[i] *= perturbation_->link_gain();
    }
    if (perturbation_) {
      double urllc_queued = 0, urllc_budget = 0, embb_demand = 0, embb_capacity = 0;
      for (const auto& ue : ues_) {
        const auto i = static_cast<std::size_t>(ue.id);
        if (ue.slice == SliceKind::URLLC) {
          urllc_queued += ue.queued_bits();
          urllc_budget += epoch_budget_bits(rate[i], cfg_);
        } else if (ue.slice == SliceKind::EMBB) {
          embb_demand += ue.demand_mbps;
          embb_capacity += rate[i];
        }
      }
      const bool mmtc_saturated = cfg_.n_mmtc * cfg_.mmtc_prb_per_device > action.mmtc;
      const double scale = perturbation_->contention_scale();
      rec.contention = scale != 1.0 && urllc_queued > urllc_budget && embb_demand > embb_capacity && mmtc_saturated;
      if (rec.contention) {
        for (auto& r : rate) r *= scale;
      }
    }

    // Service.
    double embb_sum = 0;
    for (auto& ue : ues_) {
      const auto i = static_cast<std::size_t>(ue.id);
      if (ue.slice == SliceKind::URLLC) {
        auto done_lat = serve_queue(ue, epoch_budget_bits(rate[i], cfg_), step_, cfg_);
        rec.latencies_ms.insert(rec.latencies_ms.end(), done_lat.begin(), done_lat.end());
      } else if (ue.slice == SliceKind::EMBB) {
        const double achieved = std::min(rate[i], ue.demand_mbps);
        rec.embb.push_back({ue.demand_mbps, achieved});
        embb_sum += achieved;
      }
    }
    for (const auto& ue : ues_) {
      if (ue.slice == SliceKind::MMTC) continue;
      rec.ue_prbs.push_back(prbs[static_cast<std::size_t>(ue.id)]);
      rec.ue_active.push_back(ue.slice == SliceKind::URLLC ? contains(urllc_active, ue.id) : contains(embb_active, ue.id));
    }
    rec.mmtc_serviced = mmtc_serviced(action.mmtc, cfg_);

    // Rewards.
    rec.mean_latency_ms = mean_latency();
    if (!rec.latencies_ms.empty()) {
      double s = 0;
      for (double l : rec.latencies_ms) s += l;
      rec.mean_latency_ms = s / static_cast<double>(rec.latencies_ms.size());
    }
    rec.mean_embb_mbps = rec.embb.empty() ? 0.0 : embb_sum / static_cast<double>(rec.embb.size());
    rec.r_u = reward_urllc(rec.mean_latency_ms, cfg_);
    rec.r_e = reward_embb(rec.mean_embb_mbps, cfg_);
    rec.r_m = reward_mmtc(rec.mmtc_serviced, cfg_);
    rec.reward = total_reward(rec.r_u, rec.r_e, rec.r_m, cfg_);

    // Mobility.
    for (auto& ue : ues_) {
      if (ue.slice == SliceKind::MMTC) continue;
      ue.position = random_walk(ue.position, rng_, cfg_);
      ue.pathloss_db = pathloss_db(distance_to_center(ue.position, cfg_), cfg_);
    }

    ++step_;
    StepResult out;
    out.reward = rec.reward;
    out.done = done();
    out.record = std::move(rec);
    out.observation = observe();
    return out;
  }

 private:
  static bool contains(const std::vector<int>& ids, int id) { return std::find(ids.begin(), ids.end(), id) != ids.end(); }

  /// Head-of-line age of the backlog, used only when no packet completed.
  std::optional<double> mean_latency() const {
    double sum = 0;
    int n = 0;
    for (const auto& ue : ues_) {
      if (ue.slice != SliceKind::URLLC || ue.queue.empty()) continue;
      sum += static_cast<double>(step_ - ue.queue.front().arrival_step + 1) * cfg_.epoch_ms;
      ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / n;
  }

  Observation observe() {
    Observation obs = build_observation(ues_, cfg_);
    if (perturbation_) {
      for (std::size_t i = 2; i < obs.size(); i += 3) obs[i] = perturbation_->observe_pathloss(obs[i]);
    }
    return obs;
  }

  NetworkConfig cfg_;
  ChannelModel channel_;
  ActionSpace actions_;
  RandomSource rng_;
  std::unique_ptr<EnvPerturbation> perturbation_;
  std::vector<UEState> ues_;
  int step_ = 0;
  int urllc_cursor_ = 0;
  int embb_cursor_ = 0;
  bool started_ = false;
};

}  // namespace sliceran
