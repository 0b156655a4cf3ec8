#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "channel.hpp"
#include "config.hpp"
#include "env.hpp"
#include "traffic.hpp"

namespace sliceran {

enum class PolicyKind { HardSlicing, PriorityBased, FairActiveUser, PPO, DQN };

inline constexpr std::array<PolicyKind, 5> kAllPolicies{PolicyKind::HardSlicing, PolicyKind::PriorityBased,
                                                        PolicyKind::FairActiveUser, PolicyKind::PPO, PolicyKind::DQN};

constexpr std::string_view policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::HardSlicing: return "hard-slicing";
    case PolicyKind::PriorityBased: return "priority";
    case PolicyKind::FairActiveUser: return "fair";
    case PolicyKind::PPO: return "ppo";
    case PolicyKind::DQN: return "dqn";
  }
  return "?";
}

inline PolicyKind parse_policy(std::string_view name) {
  for (auto kind : kAllPolicies) {
    if (policy_name(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown policy '" + std::string(name) + "'");
}

constexpr bool is_learned(PolicyKind kind) { return kind == PolicyKind::PPO || kind == PolicyKind::DQN; }

/// Tops up every component below the slice floor by taking from the largest
/// component, so that any proposal becomes a valid action.
inline SliceAllocation clamp_to_floor(SliceAllocation a, const NetworkConfig& cfg) {
  const int floor = cfg.min_prb_per_slice;
  // Unplaced PRBs go to mMTC first.
  a.mmtc += cfg.n_prb - a.total();
  std::array<int*, 3> parts{&a.urllc, &a.embb, &a.mmtc};
  for (int* p : parts) {
    while (*p < floor) {
      int* largest = *std::max_element(parts.begin(), parts.end(), [](int* x, int* y) { return *x < *y; });
      const int take = std::min(floor - *p, *largest - floor);
      if (take <= 0) throw std::logic_error("PRB budget cannot satisfy slice floors");
      *largest -= take;
      *p += take;
    }
  }
  return a;
}

/// Fixed 40/40/20 split.
inline SliceAllocation hard_slicing(const NetworkConfig& cfg) {
  const int share = static_cast<int>(0.4 * cfg.n_prb);
  return clamp_to_floor({share, share, cfg.n_prb - 2 * share}, cfg);
}

/// Smallest PRB count on the channel's grid whose rate satisfies `rate_mbps`;
/// the grid maximum when none does.
inline int prbs_for_rate(double rate_mbps, double pl_db, const ChannelModel& channel) {
  if (rate_mbps <= 0) return 0;
  const auto grid = channel.prb_grid();
  for (int n : grid) {
    if (channel.throughput(pl_db, n) >= rate_mbps) return n;
  }
  return grid.back();
}

/// PRBs needed to clear `queued_bits` within the latency target.
inline int prbs_for_latency_sla(double queued_bits, double pl_db, const ChannelModel& channel, const NetworkConfig& cfg) {
  if (queued_bits <= 0) return 0;
  const double rate_mbps = queued_bits / cfg.latency_sla_ms / 1000.0;
  return prbs_for_rate(rate_mbps, pl_db, channel);
}

/// URLLC first, then eMBB, residual to mMTC.
inline SliceAllocation priority_allocate(const std::vector<UEState>& ues, const ChannelModel& channel, const NetworkConfig& cfg) {
  int urllc = 0;
  for (const auto& ue : ues) {
    if (ue.slice == SliceKind::URLLC && !ue.queue.empty()) urllc += prbs_for_latency_sla(ue.queued_bits(), ue.pathloss_db, channel, cfg);
  }
  urllc = std::min(urllc, cfg.n_prb);
  int embb = 0;
  for (const auto& ue : ues) {
    if (ue.slice == SliceKind::EMBB && ue.demand_mbps > 0) embb += prbs_for_rate(ue.demand_mbps, ue.pathloss_db, channel);
  }
  embb = std::min(embb, cfg.n_prb - urllc);
  return clamp_to_floor({urllc, embb, cfg.n_prb - urllc - embb}, cfg);
}

struct FairShares {
  SliceAllocation allocation;
  std::vector<int> per_ue;  // per observed UE (URLLC then eMBB), zero when inactive
};

/// Equal split of the non-mMTC budget across active UEs; leftovers go one
/// each to active UEs in id order.
inline FairShares fair_shares(const std::vector<UEState>& ues, const NetworkConfig& cfg) {
  const int mmtc = std::min(cfg.n_prb / 3, cfg.n_mmtc * cfg.mmtc_prb_per_device);
  const int pool = cfg.n_prb - mmtc;
  std::vector<const UEState*> observed;
  for (const auto& ue : ues) {
    if (ue.slice == SliceKind::URLLC) observed.push_back(&ue);
  }
  for (const auto& ue : ues) {
    if (ue.slice == SliceKind::EMBB) observed.push_back(&ue);
  }
  auto active = [](const UEState& ue) { return ue.slice == SliceKind::URLLC ? !ue.queue.empty() : ue.demand_mbps > 0; };
  int n_active = 0;
  for (const auto* ue : observed) n_active += active(*ue) ? 1 : 0;

  FairShares out;
  out.per_ue.assign(observed.size(), 0);
  SliceAllocation a{0, 0, mmtc};
  if (n_active > 0) {
    int leftover = pool % n_active;
    for (std::size_t i = 0; i < observed.size(); ++i) {
      if (!active(*observed[i])) continue;
      int share = pool / n_active;
      if (leftover > 0) {
        ++share;
        --leftover;
      }
      out.per_ue[i] = share;
      (observed[i]->slice == SliceKind::URLLC ? a.urllc : a.embb) += share;
    }
  }
  out.allocation = clamp_to_floor(a, cfg);
  return out;
}

inline SliceAllocation fair_allocate(const std::vector<UEState>& ues, const NetworkConfig& cfg) {
  return fair_shares(ues, cfg).allocation;
}

/// Dispatches a non-learning policy on the environment's current state.
inline SliceAllocation baseline_allocate(PolicyKind kind, const SlicingEnv& env) {
  switch (kind) {
    case PolicyKind::HardSlicing: return hard_slicing(env.config());
    case PolicyKind::PriorityBased: return priority_allocate(env.ues(), env.channel(), env.config());
    case PolicyKind::FairActiveUser: return fair_allocate(env.ues(), env.config());
    default: throw std::invalid_argument(std::string(policy_name(kind)) + " is not a baseline policy");
  }
}

}  // namespace sliceran
