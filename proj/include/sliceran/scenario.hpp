#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "dqn.hpp"
#include "noise_env.hpp"
#include "ppo.hpp"

namespace sliceran {

/// Everything a config document can carry: the cell scenario at top level,
/// plus optional "noise", "ppo" and "dqn" sections.
struct Scenario {
  NetworkConfig network{};
  NoiseConfig noise{};
  PPOConfig ppo{};
  DQNConfig dqn{};
  bool operator==(const Scenario&) const = default;
};

inline std::vector<std::string> validate(const Scenario& s) {
  auto out = validate(s.network);
  for (auto& v : validate(s.noise)) out.push_back(std::move(v));
  for (auto& v : validate(s.ppo)) out.push_back(std::move(v));
  for (auto& v : validate(s.dqn)) out.push_back(std::move(v));
  return out;
}

inline json to_json(const Scenario& s) {
  json doc = to_json(s.network);
  doc["noise"] = to_json(s.noise);
  doc["ppo"] = to_json(s.ppo);
  doc["dqn"] = to_json(s.dqn);
  return doc;
}

inline std::string serialize(const Scenario& s) { return to_json(s).dump(2); }

inline Scenario load_scenario(std::string_view text) {
  const json doc = detail::parse_document(text);
  Scenario s;
  s.network = detail::network_from_json(doc);
  if (const auto it = doc.find("noise"); it != doc.end()) s.noise = noise_from_json(*it);
  if (const auto it = doc.find("ppo"); it != doc.end()) s.ppo = ppo_from_json(*it);
  if (const auto it = doc.find("dqn"); it != doc.end()) s.dqn = dqn_from_json(*it);
  detail::throw_if_invalid(validate(s));
  return s;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline Scenario load_scenario_file(const std::string& path) { return load_scenario(read_text_file(path)); }

/// Digest of the canonical cell + noise description; training
/// hyperparameters are not part of it.
inline std::uint64_t scenario_hash(const NetworkConfig& network, const NoiseConfig& noise) {
  const json canon{{"network", to_json(network)}, {"noise", to_json(noise)}};
  return fnv1a(canon.dump());
}

inline std::uint64_t scenario_hash(const Scenario& s) { return scenario_hash(s.network, s.noise); }

inline std::string hash_hex(std::uint64_t h) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xF];
  return out;
}

}  // namespace sliceran
