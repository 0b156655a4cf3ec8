#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "baselines.hpp"
#include "channel.hpp"
#include "policy.hpp"
#include "scenario.hpp"

namespace sliceran {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CdfPoint {
  double value = 0;
  double fraction = 0;
  bool operator==(const CdfPoint&) const = default;
};

/// Sorted unique values with right-continuous step fractions k/n.
inline std::vector<CdfPoint> empirical_cdf(std::vector<double> samples) {
  if (samples.empty()) throw EvalError("empirical_cdf: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  std::vector<CdfPoint> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i + 1 < samples.size() && samples[i + 1] == samples[i]) continue;
    out.push_back({samples[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

/// Fraction of samples strictly above the threshold; an empty list has none.
inline double sla_violation_rate(const std::vector<double>& latencies_ms, double threshold_ms) {
  if (latencies_ms.empty()) return 0.0;
  const auto bad = std::count_if(latencies_ms.begin(), latencies_ms.end(), [&](double l) { return l > threshold_ms; });
  return static_cast<double>(bad) / static_cast<double>(latencies_ms.size());
}

/// eMBB samples are (achieved - requested); a negative gap is a violation.
inline double throughput_violation_rate(const std::vector<double>& deltas_mbps) {
  if (deltas_mbps.empty()) return 0.0;
  const auto bad = std::count_if(deltas_mbps.begin(), deltas_mbps.end(), [](double d) { return d < 0.0; });
  return static_cast<double>(bad) / static_cast<double>(deltas_mbps.size());
}

enum class EnvKind { Offline, Online };

inline const char* env_kind_name(EnvKind k) { return k == EnvKind::Offline ? "offline" : "online"; }

inline EnvKind parse_env_kind(std::string_view s) {
  if (s == "offline") return EnvKind::Offline;
  if (s == "online") return EnvKind::Online;
  throw std::invalid_argument("unknown env kind '" + std::string(s) + "' (expected offline or online)");
}

struct MetricSummary {
  std::vector<double> samples;
  std::vector<CdfPoint> cdf;
  double mean = 0;
  double std = 0;
  double violation_rate = 0;
  bool operator==(const MetricSummary&) const = default;
};

inline constexpr int kReportVersion = 1;

struct EvalReport {
  std::string policy;
  EnvKind env = EnvKind::Online;
  std::uint64_t scenario_hash = 0;
  std::uint64_t seed = 0;
  int episodes = 0;
  std::uint64_t steps = 0;
  MetricSummary urllc_latency_ms;
  MetricSummary embb_delta_mbps;
  MetricSummary mmtc_serviced;
  double mean_reward = 0;
  double mean_r_u = 0;
  double mean_r_e = 0;
  double mean_r_m = 0;
  bool operator==(const EvalReport&) const = default;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double sum = 0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double sq = 0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(v.size()))};
}

inline MetricSummary summarize(std::vector<double> samples, double violation_rate) {
  MetricSummary m;
  std::tie(m.mean, m.std) = mean_std(samples);
  if (!samples.empty()) m.cdf = empirical_cdf(samples);
  m.violation_rate = violation_rate;
  m.samples = std::move(samples);
  return m;
}

}  // namespace detail

struct TraceRow {
  std::uint64_t step = 0;
  SliceAllocation action{};
  std::vector<double> latencies_ms;
  double reward = 0;
  bool operator==(const TraceRow&) const = default;
};

/// Greedy rollouts of one policy. Episode e resets with derive_seed(seed, e).
/// `params` is required for learned policies and ignored otherwise.
inline EvalReport evaluate(const Scenario& scenario, std::shared_ptr<const ThroughputTable> table, PolicyKind kind,
                           const PolicyParams* params, EnvKind env_kind, int episodes, std::uint64_t seed,
                           std::vector<TraceRow>* trace = nullptr) {
  if (episodes <= 0) throw EvalError("episodes must be positive");
  const auto hash = scenario_hash(scenario);
  if (is_learned(kind)) {
    if (!params) throw EvalError(std::string(policy_name(kind)) + " needs a checkpoint");
    if (params->kind != kind) throw EvalError("checkpoint holds a " + std::string(policy_name(params->kind)) + " policy");
    if (params->scenario_hash != hash) {
      throw EvalError("scenario hash mismatch: checkpoint " + hash_hex(params->scenario_hash) + ", config " + hash_hex(hash));
    }
  }

  std::vector<double> latencies, deltas, mmtc;
  double reward = 0, r_u = 0, r_e = 0, r_m = 0;
  std::uint64_t steps = 0;
  for (int e = 0; e < episodes; ++e) {
    SlicingEnv env = env_kind == EnvKind::Offline ? make_offline_env(scenario.network, table)
                                                  : make_online_env(scenario.network, scenario.noise, table);
    Observation obs = env.reset(derive_seed(seed, static_cast<std::uint64_t>(e)));
    while (!env.done()) {
      const std::size_t a = is_learned(kind) ? act(*params, obs, ActMode::Greedy)
                                             : env.actions().encode(baseline_allocate(kind, env));
      StepResult res = env.step(a);
      const StepRecord& rec = res.record;
      latencies.insert(latencies.end(), rec.latencies_ms.begin(), rec.latencies_ms.end());
      for (const auto& s : rec.embb) deltas.push_back(s.achieved_mbps - s.requested_mbps);
      mmtc.push_back(rec.mmtc_serviced);
      reward += rec.reward;
      r_u += rec.r_u;
      r_e += rec.r_e;
      r_m += rec.r_m;
      if (trace) trace->push_back({steps, rec.action, rec.latencies_ms, rec.reward});
      ++steps;
      obs = std::move(res.observation);
    }
  }

  EvalReport r;
  r.policy = std::string(policy_name(kind));
  r.env = env_kind;
  r.scenario_hash = hash;
  r.seed = seed;
  r.episodes = episodes;
  r.steps = steps;
  const double n = steps ? static_cast<double>(steps) : 1.0;
  r.mean_reward = reward / n;
  r.mean_r_u = r_u / n;
  r.mean_r_e = r_e / n;
  r.mean_r_m = r_m / n;
  const double l_viol = sla_violation_rate(latencies, scenario.network.latency_sla_ms);
  const double e_viol = throughput_violation_rate(deltas);
  r.urllc_latency_ms = detail::summarize(std::move(latencies), l_viol);
  r.embb_delta_mbps = detail::summarize(std::move(deltas), e_viol);
  r.mmtc_serviced = detail::summarize(std::move(mmtc), 0.0);
  return r;
}

// ---- report JSON ----------------------------------------------------------

namespace detail {

inline json metric_json(const MetricSummary& m) {
  json cdf = json::array();
  for (const auto& p : m.cdf) cdf.push_back({p.value, p.fraction});
  return json{{"mean", m.mean}, {"std", m.std}, {"violation_rate", m.violation_rate}, {"samples", m.samples}, {"cdf", cdf}};
}

inline MetricSummary metric_from_json(const json& j, const std::string& key) {
  try {
    MetricSummary m;
    m.mean = j.at("mean").get<double>();
    m.std = j.at("std").get<double>();
    m.violation_rate = j.at("violation_rate").get<double>();
    m.samples = j.at("samples").get<std::vector<double>>();
    for (const auto& p : j.at("cdf")) m.cdf.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return m;
  } catch (const json::exception& e) {
    throw EvalError("report field '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline json to_json(const EvalReport& r) {
  return json{{"version", kReportVersion},
              {"policy", r.policy},
              {"env", env_kind_name(r.env)},
              {"scenario_hash", hash_hex(r.scenario_hash)},
              {"seed", r.seed},
              {"episodes", r.episodes},
              {"steps", r.steps},
              {"reward", {{"mean", r.mean_reward}, {"r_u", r.mean_r_u}, {"r_e", r.mean_r_e}, {"r_m", r.mean_r_m}}},
              {"urllc_latency_ms", detail::metric_json(r.urllc_latency_ms)},
              {"embb_delta_mbps", detail::metric_json(r.embb_delta_mbps)},
              {"mmtc_serviced", detail::metric_json(r.mmtc_serviced)}};
}

inline std::string serialize(const EvalReport& r) { return to_json(r).dump(2) + "\n"; }

inline EvalReport report_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kReportVersion) throw EvalError("unsupported report version");
    EvalReport r;
    r.policy = j.at("policy").get<std::string>();
    r.env = parse_env_kind(j.at("env").get<std::string>());
    r.scenario_hash = std::stoull(j.at("scenario_hash").get<std::string>(), nullptr, 16);
    r.seed = j.at("seed").get<std::uint64_t>();
    r.episodes = j.at("episodes").get<int>();
    r.steps = j.at("steps").get<std::uint64_t>();
    const auto& rw = j.at("reward");
    r.mean_reward = rw.at("mean").get<double>();
    r.mean_r_u = rw.at("r_u").get<double>();
    r.mean_r_e = rw.at("r_e").get<double>();
    r.mean_r_m = rw.at("r_m").get<double>();
    r.urllc_latency_ms = detail::metric_from_json(j.at("urllc_latency_ms"), "urllc_latency_ms");
    r.embb_delta_mbps = detail::metric_from_json(j.at("embb_delta_mbps"), "embb_delta_mbps");
    r.mmtc_serviced = detail::metric_from_json(j.at("mmtc_serviced"), "mmtc_serviced");
    return r;
  } catch (const json::exception& e) {
    throw EvalError(std::string("malformed report: ") + e.what());
  } catch (const std::logic_error& e) {
    throw EvalError(std::string("malformed report: ") + e.what());
  }
}

inline EvalReport load_report(const std::string& path) {
  const auto text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw EvalError("'" + path + "' is not JSON: " + e.what());
  }
  return report_from_json(j);
}

// ---- CSV ------------------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T csv_number(std::string_view field, std::size_t line_no) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw EvalError("line " + std::to_string(line_no) + ": malformed number '" + std::string(field) + "'");
  }
  return value;
}

inline void expect_header(std::istream& in, std::string_view header) {
  std::string line;
  if (!std::getline(in, line) || line != header) throw EvalError("missing or wrong header, expected '" + std::string(header) + "'");
}

}  // namespace detail

inline constexpr std::string_view kCdfHeader = "policy,metric,value,cum_fraction";
inline constexpr std::string_view kTraceHeader = "step,action_u,action_e,action_m,latency_ms,reward";
inline constexpr std::string_view kComparisonHeader = "policy,metric,value,delta";

struct CdfRow {
  std::string policy;
  std::string metric;
  double value = 0;
  double fraction = 0;
  bool operator==(const CdfRow&) const = default;
};

inline std::vector<CdfRow> cdf_rows(const EvalReport& r) {
  std::vector<CdfRow> out;
  const std::pair<const char*, const MetricSummary*> metrics[] = {
      {"urllc_latency_ms", &r.urllc_latency_ms}, {"embb_delta_mbps", &r.embb_delta_mbps}, {"mmtc_serviced", &r.mmtc_serviced}};
  for (const auto& [name, m] : metrics) {
    for (const auto& p : m->cdf) out.push_back({r.policy, name, p.value, p.fraction});
  }
  return out;
}

inline void write_cdf_csv(std::ostream& out, const std::vector<CdfRow>& rows) {
  out << kCdfHeader << '\n';
  for (const auto& r : rows) out << r.policy << ',' << r.metric << ',' << format_double(r.value) << ',' << format_double(r.fraction) << '\n';
}

inline std::vector<CdfRow> read_cdf_csv(std::istream& in) {
  detail::expect_header(in, kCdfHeader);
  std::vector<CdfRow> rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 4) throw EvalError("line " + std::to_string(line_no) + ": expected 4 fields");
    rows.push_back({std::string(f[0]), std::string(f[1]), detail::csv_number<double>(f[2], line_no),
                    detail::csv_number<double>(f[3], line_no)});
  }
  return rows;
}

/// Latencies of the packets completed in a step are joined with ';'.
inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kTraceHeader << '\n';
  for (const auto& r : rows) {
    out << r.step << ',' << r.action.urllc << ',' << r.action.embb << ',' << r.action.mmtc << ',';
    for (std::size_t i = 0; i < r.latencies_ms.size(); ++i) out << (i ? ";" : "") << format_double(r.latencies_ms[i]);
    out << ',' << format_double(r.reward) << '\n';
  }
}

inline std::vector<TraceRow> read_trace_csv(std::istream& in) {
  detail::expect_header(in, kTraceHeader);
  std::vector<TraceRow> rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 6) throw EvalError("line " + std::to_string(line_no) + ": expected 6 fields");
    TraceRow r;
    r.step = detail::csv_number<std::uint64_t>(f[0], line_no);
    r.action = {detail::csv_number<int>(f[1], line_no), detail::csv_number<int>(f[2], line_no), detail::csv_number<int>(f[3], line_no)};
    if (!f[4].empty()) {
      for (auto part : detail::split(f[4], ';')) r.latencies_ms.push_back(detail::csv_number<double>(part, line_no));
    }
    r.reward = detail::csv_number<double>(f[5], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<TrainLogRow> read_train_log(std::istream& in) {
  detail::expect_header(in, kTrainLogHeader);
  std::vector<TrainLogRow> rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 8) throw EvalError("line " + std::to_string(line_no) + ": expected 8 fields");
    TrainLogRow r;
    r.step = detail::csv_number<std::uint64_t>(f[0], line_no);
    r.mean_reward = detail::csv_number<double>(f[1], line_no);
    r.r_u = detail::csv_number<double>(f[2], line_no);
    r.r_e = detail::csv_number<double>(f[3], line_no);
    r.r_m = detail::csv_number<double>(f[4], line_no);
    r.policy_loss = detail::csv_number<double>(f[5], line_no);
    r.value_loss = detail::csv_number<double>(f[6], line_no);
    r.entropy = detail::csv_number<double>(f[7], line_no);
    rows.push_back(r);
  }
  return rows;
}

// ---- comparison -----------------------------------------------------------

struct ComparisonRow {
  std::string policy;
  std::string metric;
  double value = 0;
  double delta = 0;  // value minus the first report's value for the same metric
};

struct Comparison {
  std::vector<ComparisonRow> table;
  std::vector<CdfRow> cdf;
};

inline std::vector<std::pair<std::string, double>> headline_metrics(const EvalReport& r) {
  return {{"mean_reward", r.mean_reward},
          {"r_u", r.mean_r_u},
          {"r_e", r.mean_r_e},
          {"r_m", r.mean_r_m},
          {"urllc_violation_rate", r.urllc_latency_ms.violation_rate},
          {"urllc_mean_latency_ms", r.urllc_latency_ms.mean},
          {"embb_violation_rate", r.embb_delta_mbps.violation_rate},
          {"embb_mean_delta_mbps", r.embb_delta_mbps.mean},
          {"mmtc_serviced_mean", r.mmtc_serviced.mean},
          {"mmtc_serviced_std", r.mmtc_serviced.std}};
}

inline Comparison compare(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) throw EvalError("compare needs at least two reports");
  for (const auto& r : reports) {
    if (r.scenario_hash != reports.front().scenario_hash) {
      throw EvalError("scenario mismatch: " + r.policy + " was evaluated on " + hash_hex(r.scenario_hash) + ", " +
                      reports.front().policy + " on " + hash_hex(reports.front().scenario_hash));
    }
  }
  Comparison out;
  const auto base = headline_metrics(reports.front());
  for (const auto& r : reports) {
    const auto m = headline_metrics(r);
    for (std::size_t i = 0; i < m.size(); ++i) out.table.push_back({r.policy, m[i].first, m[i].second, m[i].second - base[i].second});
    auto rows = cdf_rows(r);
    out.cdf.insert(out.cdf.end(), rows.begin(), rows.end());
  }
  return out;
}

inline void write_comparison_csv(std::ostream& out, const Comparison& c) {
  out << kComparisonHeader << '\n';
  for (const auto& r : c.table) out << r.policy << ',' << r.metric << ',' << format_double(r.value) << ',' << format_double(r.delta) << '\n';
}

}  // namespace sliceran
