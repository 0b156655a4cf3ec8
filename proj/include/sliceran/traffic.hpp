#pragma once

#include <cmath>
#include <deque>
#include <numbers>
#include <optional>
#include <vector>

#include "channel.hpp"
#include "config.hpp"
#include "random.hpp"

namespace sliceran {

struct Packet {
  double size_bits = 0;
  int arrival_step = 0;
  double remaining_bits = 0;
  bool operator==(const Packet&) const = default;
};

struct Position {
  double x = 0;
  double y = 0;
  bool operator==(const Position&) const = default;
};

struct UEState {
  int id = 0;
  SliceKind slice = SliceKind::URLLC;
  Position position{};
  std::deque<Packet> queue;  // URLLC only
  double demand_mbps = 0;    // eMBB only, redrawn every epoch
  double pathloss_db = 0;    // cached for the current epoch

  double queued_bits() const {
    double total = 0;
    for (const auto& p : queue) total += p.remaining_bits;
    return total;
  }
  bool operator==(const UEState&) const = default;
};

inline Position cell_center(const NetworkConfig& cfg) { return {cfg.area_side_m / 2, cfg.area_side_m / 2}; }

inline double distance_to_center(Position p, const NetworkConfig& cfg) {
  const auto c = cell_center(cfg);
  return std::hypot(p.x - c.x, p.y - c.y);
}

/// Bernoulli arrival with a uniformly sized packet. Both draws are consumed
/// on every call so the stream position does not depend on the outcome.
inline std::optional<Packet> draw_urllc_arrival(RandomSource& rng, const NetworkConfig& cfg, int step) {
  const bool arrives = rng.bernoulli(cfg.urllc_arrival_p);
  const double bits = rng.uniform(cfg.urllc_pkt_kbits.min, cfg.urllc_pkt_kbits.max) * 1000.0;
  if (!arrives) return std::nullopt;
  return Packet{bits, step, bits};
}

inline double draw_embb_demand(RandomSource& rng, const NetworkConfig& cfg) {
  return std::max(0.0, rng.gaussian(cfg.embb_mean_mbps, cfg.embb_std_mbps));
}

namespace detail {

/// Folds a coordinate back into [0, side] by mirror reflection.
inline double reflect(double v, double side) {
  if (side <= 0) return 0;
  const double period = 2 * side;
  v = std::fmod(v, period);
  if (v < 0) v += period;
  return v > side ? period - v : v;
}

}  // namespace detail

/// One random-walk epoch: fixed step length, uniform heading, mirror
/// reflection at the area boundary.
inline Position random_walk(Position p, RandomSource& rng, const NetworkConfig& cfg) {
  const double heading = rng.uniform(0.0, 2 * std::numbers::pi);
  if (cfg.mobility_step_m == 0) return p;
  const double side = cfg.area_side_m;
  return {detail::reflect(p.x + cfg.mobility_step_m * std::cos(heading), side),
          detail::reflect(p.y + cfg.mobility_step_m * std::sin(heading), side)};
}

/// URLLC UEs first, then eMBB, then the static mMTC devices; ids are indices
/// into the returned vector. The gNB sits at the area centre.
inline std::vector<UEState> init_population(RandomSource& rng, const NetworkConfig& cfg) {
  std::vector<UEState> ues;
  ues.reserve(static_cast<std::size_t>(cfg.n_urllc + cfg.n_embb + cfg.n_mmtc));
  auto add = [&](SliceKind kind, int count) {
    for (int i = 0; i < count; ++i) {
      UEState ue;
      ue.id = static_cast<int>(ues.size());
      ue.slice = kind;
      if (kind != SliceKind::MMTC) {
        ue.position.x = rng.uniform(0.0, cfg.area_side_m);
        ue.position.y = rng.uniform(0.0, cfg.area_side_m);
        ue.pathloss_db = pathloss_db(distance_to_center(ue.position, cfg), cfg);
      } else {
        // Channels of mMTC devices are not simulated.
        ue.position = cell_center(cfg);
      }
      ues.push_back(std::move(ue));
    }
  };
  add(SliceKind::URLLC, cfg.n_urllc);
  add(SliceKind::EMBB, cfg.n_embb);
  add(SliceKind::MMTC, cfg.n_mmtc);
  return ues;
}

}  // namespace sliceran
