#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace sliceran {

using json = nlohmann::json;

enum class SliceKind { URLLC, EMBB, MMTC };

inline constexpr std::array<SliceKind, 3> kAllSlices{SliceKind::URLLC, SliceKind::EMBB, SliceKind::MMTC};

/// URLLC and eMBB UEs appear individually in observations; mMTC is aggregate-only.
constexpr bool is_observed(SliceKind kind) { return kind != SliceKind::MMTC; }

constexpr std::string_view slice_name(SliceKind kind) {
  switch (kind) {
    case SliceKind::URLLC: return "urllc";
    case SliceKind::EMBB: return "embb";
    case SliceKind::MMTC: return "mmtc";
  }
  return "?";
}

/// Raised for malformed documents and invariant violations. `key()` names the
/// offending field (dotted path for nested values), empty for parse errors.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

struct RewardWeights {
  double urllc = 0.5;
  double embb = 0.4;
  double mmtc = 0.1;
  bool operator==(const RewardWeights&) const = default;
};

struct KbitInterval {
  double min = 1500.0;
  double max = 4000.0;
  bool operator==(const KbitInterval&) const = default;
};

/// Scenario constants for one cell. Immutable once loaded.
struct NetworkConfig {
  int n_prb = 106;
  int n_urllc = 2;
  int n_embb = 2;
  int n_mmtc = 10;
  double area_side_m = 1500.0;
  double carrier_freq_mhz = 3500.0;
  double cal_offset_db = 83.84;
  double latency_sla_ms = 400.0;
  double throughput_sla_mbps = 7.0;
  RewardWeights reward_weights{};
  double urllc_arrival_p = 0.9;
  KbitInterval urllc_pkt_kbits{};
  double embb_mean_mbps = 7.0;
  double embb_std_mbps = 0.7;
  int mmtc_prb_per_device = 5;
  int episode_len = 256;
  double epoch_ms = 100.0;
  double eta = 0.7;
  double prb_bw_khz = 360.0;
  int min_prb_per_slice = 10;
  double link_budget_db = 190.0;
  double sinr_cap_db = 30.0;
  double sinr_floor_db = -5.0;
  double mobility_step_m = 15.0;
  double d_min_m = 10.0;

  int n_observed() const { return n_urllc + n_embb; }
  bool operator==(const NetworkConfig&) const = default;
};

/// Every violated invariant, in declaration order. Empty means valid.
inline std::vector<std::string> validate(const NetworkConfig& c) {
  std::vector<std::string> out;
  auto check = [&](bool ok, const char* msg) {
    if (!ok) out.emplace_back(msg);
  };
  check(c.n_prb > 0, "n_prb: must be positive");
  check(c.n_urllc > 0, "n_urllc: must be positive");
  check(c.n_embb > 0, "n_embb: must be positive");
  check(c.n_mmtc > 0, "n_mmtc: must be positive");
  check(c.min_prb_per_slice > 0, "min_prb_per_slice: must be positive");
  check(c.n_prb >= 3 * c.min_prb_per_slice, "n_prb: budget below 3 x min_prb_per_slice");
  check(c.area_side_m > 0, "area_side_m: must be positive");
  check(c.carrier_freq_mhz > 0, "carrier_freq_mhz: must be positive");
  check(c.latency_sla_ms > 0, "latency_sla_ms: must be positive");
  check(c.throughput_sla_mbps > 0, "throughput_sla_mbps: must be positive");
  const auto& w = c.reward_weights;
  check(w.urllc >= 0 && w.embb >= 0 && w.mmtc >= 0, "reward_weights: weights must be nonnegative");
  check(std::abs(w.urllc + w.embb + w.mmtc - 1.0) <= 1e-9, "reward_weights: weights sum != 1");
  check(c.urllc_arrival_p >= 0 && c.urllc_arrival_p <= 1, "urllc_arrival_p: probability outside [0,1]");
  check(c.urllc_pkt_kbits.min >= 0, "urllc_pkt_kbits: negative packet size");
  check(c.urllc_pkt_kbits.min <= c.urllc_pkt_kbits.max, "urllc_pkt_kbits: empty interval");
  check(c.embb_std_mbps >= 0, "embb_std_mbps: must be nonnegative");
  check(c.mmtc_prb_per_device > 0, "mmtc_prb_per_device: must be positive");
  check(c.episode_len > 0, "episode_len: must be positive");
  check(c.epoch_ms > 0, "epoch_ms: must be positive");
  check(c.eta > 0, "eta: must be positive");
  check(c.prb_bw_khz > 0, "prb_bw_khz: must be positive");
  check(c.sinr_floor_db <= c.sinr_cap_db, "sinr_floor_db: floor above cap");
  check(c.mobility_step_m >= 0, "mobility_step_m: must be nonnegative");
  check(c.d_min_m > 0, "d_min_m: must be positive");
  return out;
}

namespace detail {

/// Reads `key` from `obj` into `field` when present; rejects wrong types.
template <typename T>
void read_field(const json& obj, const std::string& key, T& field, const std::string& prefix = {}) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::string path = prefix.empty() ? key : prefix + "." + key;
  if constexpr (std::is_same_v<T, int>) {
    if (!it->is_number_integer()) throw ConfigError(path, path + ": expected an integer");
    const auto v = it->get<std::int64_t>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      throw ConfigError(path, path + ": integer out of range");
    }
    field = static_cast<int>(v);
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) throw ConfigError(path, path + ": expected a boolean");
    field = it->get<bool>();
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!it->is_number_unsigned()) throw ConfigError(path, path + ": expected a nonnegative integer");
    field = it->get<std::uint64_t>();
  } else {
    if (!it->is_number()) throw ConfigError(path, path + ": expected a number");
    field = it->get<T>();
  }
}

inline void reject_unknown(const json& obj, std::span<const std::string_view> allowed,
                           const std::string& prefix = {}) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || item.key() == a;
    if (!known) {
      const std::string path = prefix.empty() ? item.key() : prefix + "." + item.key();
      throw ConfigError(path, "unknown key '" + path + "'");
    }
  }
}

inline void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                           const std::string& prefix = {}) {
  reject_unknown(obj, std::span<const std::string_view>(allowed.begin(), allowed.size()), prefix);
}

inline const json& require_object(const json& obj, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, path.empty() ? "document must be an object" : path + ": expected an object");
  return obj;
}

inline json parse_document(std::string_view text) {
  bool blank = true;
  for (char ch : text) blank = blank && (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r');
  if (blank) return json::object();
  try {
    return require_object(json::parse(text), {});
  } catch (const json::parse_error& e) {
    throw ConfigError({}, std::string("parse error: ") + e.what());
  }
}

// Sections parsed by the scenario loader; tolerated by load_config.
inline constexpr std::array<std::string_view, 28> kNetworkKeys{
    "n_prb", "n_urllc", "n_embb", "n_mmtc", "area_side_m", "carrier_freq_mhz", "cal_offset_db",
    "latency_sla_ms", "throughput_sla_mbps", "reward_weights", "urllc_arrival_p", "urllc_pkt_kbits",
    "embb_mean_mbps", "embb_std_mbps", "mmtc_prb_per_device", "episode_len", "epoch_ms", "eta",
    "prb_bw_khz", "min_prb_per_slice", "link_budget_db", "sinr_cap_db", "sinr_floor_db",
    "mobility_step_m", "d_min_m", "noise", "ppo", "dqn"};

inline NetworkConfig network_from_json(const json& doc) {
  reject_unknown(doc, kNetworkKeys);
  NetworkConfig c;
  read_field(doc, "n_prb", c.n_prb);
  read_field(doc, "n_urllc", c.n_urllc);
  read_field(doc, "n_embb", c.n_embb);
  read_field(doc, "n_mmtc", c.n_mmtc);
  read_field(doc, "area_side_m", c.area_side_m);
  read_field(doc, "carrier_freq_mhz", c.carrier_freq_mhz);
  read_field(doc, "cal_offset_db", c.cal_offset_db);
  read_field(doc, "latency_sla_ms", c.latency_sla_ms);
  read_field(doc, "throughput_sla_mbps", c.throughput_sla_mbps);
  if (const auto it = doc.find("reward_weights"); it != doc.end()) {
    require_object(*it, "reward_weights");
    reject_unknown(*it, {"urllc", "embb", "mmtc"}, "reward_weights");
    read_field(*it, "urllc", c.reward_weights.urllc, "reward_weights");
    read_field(*it, "embb", c.reward_weights.embb, "reward_weights");
    read_field(*it, "mmtc", c.reward_weights.mmtc, "reward_weights");
  }
  read_field(doc, "urllc_arrival_p", c.urllc_arrival_p);
  if (const auto it = doc.find("urllc_pkt_kbits"); it != doc.end()) {
    require_object(*it, "urllc_pkt_kbits");
    reject_unknown(*it, {"min", "max"}, "urllc_pkt_kbits");
    read_field(*it, "min", c.urllc_pkt_kbits.min, "urllc_pkt_kbits");
    read_field(*it, "max", c.urllc_pkt_kbits.max, "urllc_pkt_kbits");
  }
  read_field(doc, "embb_mean_mbps", c.embb_mean_mbps);
  read_field(doc, "embb_std_mbps", c.embb_std_mbps);
  read_field(doc, "mmtc_prb_per_device", c.mmtc_prb_per_device);
  read_field(doc, "episode_len", c.episode_len);
  read_field(doc, "epoch_ms", c.epoch_ms);
  read_field(doc, "eta", c.eta);
  read_field(doc, "prb_bw_khz", c.prb_bw_khz);
  read_field(doc, "min_prb_per_slice", c.min_prb_per_slice);
  read_field(doc, "link_budget_db", c.link_budget_db);
  read_field(doc, "sinr_cap_db", c.sinr_cap_db);
  read_field(doc, "sinr_floor_db", c.sinr_floor_db);
  read_field(doc, "mobility_step_m", c.mobility_step_m);
  read_field(doc, "d_min_m", c.d_min_m);
  return c;
}

inline void throw_if_invalid(const std::vector<std::string>& violations) {
  if (violations.empty()) return;
  const auto& first = violations.front();
  std::string what = "validation error: " + first;
  for (std::size_t i = 1; i < violations.size(); ++i) what += "; " + violations[i];
  throw ConfigError(first.substr(0, first.find(':')), what);
}

}  // namespace detail

inline json to_json(const NetworkConfig& c) {
  return json{
      {"n_prb", c.n_prb},
      {"n_urllc", c.n_urllc},
      {"n_embb", c.n_embb},
      {"n_mmtc", c.n_mmtc},
      {"area_side_m", c.area_side_m},
      {"carrier_freq_mhz", c.carrier_freq_mhz},
      {"cal_offset_db", c.cal_offset_db},
      {"latency_sla_ms", c.latency_sla_ms},
      {"throughput_sla_mbps", c.throughput_sla_mbps},
      {"reward_weights", {{"urllc", c.reward_weights.urllc}, {"embb", c.reward_weights.embb}, {"mmtc", c.reward_weights.mmtc}}},
      {"urllc_arrival_p", c.urllc_arrival_p},
      {"urllc_pkt_kbits", {{"min", c.urllc_pkt_kbits.min}, {"max", c.urllc_pkt_kbits.max}}},
      {"embb_mean_mbps", c.embb_mean_mbps},
      {"embb_std_mbps", c.embb_std_mbps},
      {"mmtc_prb_per_device", c.mmtc_prb_per_device},
      {"episode_len", c.episode_len},
      {"epoch_ms", c.epoch_ms},
      {"eta", c.eta},
      {"prb_bw_khz", c.prb_bw_khz},
      {"min_prb_per_slice", c.min_prb_per_slice},
      {"link_budget_db", c.link_budget_db},
      {"sinr_cap_db", c.sinr_cap_db},
      {"sinr_floor_db", c.sinr_floor_db},
      {"mobility_step_m", c.mobility_step_m},
      {"d_min_m", c.d_min_m},
  };
}

/// Parses a JSON document into a validated NetworkConfig. Absent keys keep
/// their defaults; an empty document yields the default scenario.
inline NetworkConfig load_config(std::string_view text) {
  const json doc = detail::parse_document(text);
  NetworkConfig c = detail::network_from_json(doc);
  detail::throw_if_invalid(validate(c));
  return c;
}

inline std::string serialize(const NetworkConfig& c) { return to_json(c).dump(2); }

/// FNV-1a over a canonical text form.
constexpr std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sliceran
