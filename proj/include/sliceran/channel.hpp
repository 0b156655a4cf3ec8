#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "config.hpp"

namespace sliceran {

/// Free-space pathloss with calibration offset. Distance is clamped below to
/// d_min_m and converted to km; carrier frequency is taken in MHz.
inline double pathloss_db(double distance_m, const NetworkConfig& cfg) {
  const double d_km = std::max(distance_m, cfg.d_min_m) / 1000.0;
  return 20.0 * std::log10(d_km) + 20.0 * std::log10(cfg.carrier_freq_mhz) + 32.44 + cfg.cal_offset_db;
}

/// Farthest distance from the cell centre inside the square area.
inline double max_distance_m(const NetworkConfig& cfg) { return cfg.area_side_m * std::sqrt(0.5); }

/// Maps [PL(d_min), PL(d_max)] linearly onto [0, 1], clamped.
inline double normalize_pathloss(double pl_db, const NetworkConfig& cfg) {
  const double lo = pathloss_db(cfg.d_min_m, cfg);
  const double hi = pathloss_db(max_distance_m(cfg), cfg);
  if (!(hi > lo)) return 0.0;
  return std::clamp((pl_db - lo) / (hi - lo), 0.0, 1.0);
}

/// Shannon-bound throughput in Mbps for `n_prb` blocks at the given pathloss.
inline double shannon_throughput(double pl_db, int n_prb, const NetworkConfig& cfg) {
  if (n_prb <= 0) return 0.0;
  const double sinr_db = std::clamp(cfg.link_budget_db - pl_db, cfg.sinr_floor_db, cfg.sinr_cap_db);
  if (sinr_db <= cfg.sinr_floor_db) return 0.0;
  const double bw_hz = static_cast<double>(n_prb) * cfg.prb_bw_khz * 1e3;
  return cfg.eta * bw_hz * std::log2(1.0 + std::pow(10.0, sinr_db / 10.0)) / 1e6;
}

class TableError : public std::runtime_error {
 public:
  enum class Kind { Io, Schema, Invariant, UnknownColumn, InvalidGrid };
  TableError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

enum class TableProvenance { Synthetic, Imported };

/// Dense (pathloss, PRB count) -> Mbps grid. Rows follow the pathloss grid,
/// columns the PRB grid; storage is row-major.
class ThroughputTable {
 public:
  ThroughputTable(std::vector<double> pl_grid, std::vector<int> prb_grid, std::vector<double> values,
                  TableProvenance provenance)
      : pl_grid_(std::move(pl_grid)),
        prb_grid_(std::move(prb_grid)),
        values_(std::move(values)),
        provenance_(provenance) {
    check_invariants();
  }

  const std::vector<double>& pl_grid() const { return pl_grid_; }
  const std::vector<int>& prb_grid() const { return prb_grid_; }
  const std::vector<double>& values() const { return values_; }
  TableProvenance provenance() const { return provenance_; }

  std::size_t rows() const { return pl_grid_.size(); }
  std::size_t cols() const { return prb_grid_.size(); }
  double at(std::size_t row, std::size_t col) const { return values_[row * cols() + col]; }

  std::optional<std::size_t> column_of(int n_prb) const {
    const auto it = std::lower_bound(prb_grid_.begin(), prb_grid_.end(), n_prb);
    if (it == prb_grid_.end() || *it != n_prb) return std::nullopt;
    return static_cast<std::size_t>(it - prb_grid_.begin());
  }

  /// Grid values and cells compared exactly; provenance is metadata.
  bool same_cells(const ThroughputTable& other) const {
    return pl_grid_ == other.pl_grid_ && prb_grid_ == other.prb_grid_ && values_ == other.values_;
  }

 private:
  void check_invariants() const {
    using K = TableError::Kind;
    if (pl_grid_.empty() || prb_grid_.empty()) throw TableError(K::InvalidGrid, "table grids must be nonempty");
    if (values_.size() != pl_grid_.size() * prb_grid_.size()) {
      throw TableError(K::InvalidGrid, "table dimensions do not match grid lengths");
    }
    for (std::size_t i = 1; i < pl_grid_.size(); ++i) {
      if (!(pl_grid_[i] > pl_grid_[i - 1])) throw TableError(K::Schema, "pathloss grid not strictly increasing");
    }
    for (std::size_t j = 1; j < prb_grid_.size(); ++j) {
      if (prb_grid_[j] <= prb_grid_[j - 1]) throw TableError(K::Schema, "PRB grid not strictly increasing");
    }
    if (prb_grid_.front() < 0) throw TableError(K::Schema, "negative PRB count in grid");
    auto cell = [&](std::size_t r, std::size_t c) {
      std::ostringstream os;
      os << "(pl_db=" << pl_grid_[r] << ", n_prb=" << prb_grid_[c] << ")";
      return os.str();
    };
    for (std::size_t r = 0; r < rows(); ++r) {
      for (std::size_t c = 0; c < cols(); ++c) {
        const double v = at(r, c);
        if (!std::isfinite(v) || v < 0) throw TableError(K::Invariant, "negative or non-finite throughput at " + cell(r, c));
        if (prb_grid_[c] == 0 && v != 0) throw TableError(K::Invariant, "nonzero throughput for 0 PRBs at " + cell(r, c));
        if (r > 0 && v > at(r - 1, c)) throw TableError(K::Invariant, "throughput increases with pathloss at " + cell(r, c));
        if (c > 0 && v < at(r, c - 1)) throw TableError(K::Invariant, "throughput decreases with PRB count at " + cell(r, c));
      }
    }
  }

  std::vector<double> pl_grid_;
  std::vector<int> prb_grid_;
  std::vector<double> values_;
  TableProvenance provenance_;
};

/// Linear interpolation along pathloss, exact match on PRB count, clamped at
/// the grid ends. Grid hits return the stored cell unchanged.
inline double lookup_throughput(const ThroughputTable& table, double pl_db, int n_prb) {
  const auto col = table.column_of(n_prb);
  if (!col) {
    throw TableError(TableError::Kind::UnknownColumn, "n_prb=" + std::to_string(n_prb) + " not in table PRB grid");
  }
  const auto& pl = table.pl_grid();
  if (pl_db <= pl.front()) return table.at(0, *col);
  if (pl_db >= pl.back()) return table.at(pl.size() - 1, *col);
  const auto upper = static_cast<std::size_t>(std::upper_bound(pl.begin(), pl.end(), pl_db) - pl.begin());
  const std::size_t lower = upper - 1;
  if (pl[lower] == pl_db) return table.at(lower, *col);
  const double t = (pl_db - pl[lower]) / (pl[upper] - pl[lower]);
  const double a = table.at(lower, *col);
  const double b = table.at(upper, *col);
  return a + t * (b - a);
}

/// Synthetic stand-in for a measured table: every cell is the Shannon-fallback
/// value. Pathloss rows are integer multiples of `pl_grid_step_db` spanning the
/// cell's pathloss range.
inline ThroughputTable generate_table(const NetworkConfig& cfg, double pl_grid_step_db, const std::vector<int>& prb_values) {
  using K = TableError::Kind;
  if (!(pl_grid_step_db > 0) || !std::isfinite(pl_grid_step_db)) throw TableError(K::InvalidGrid, "pl_grid_step_db must be positive");
  if (prb_values.empty()) throw TableError(K::InvalidGrid, "prb_values must be nonempty");
  for (std::size_t j = 1; j < prb_values.size(); ++j) {
    if (prb_values[j] <= prb_values[j - 1]) throw TableError(K::InvalidGrid, "prb_values must be strictly increasing");
  }
  if (prb_values.front() < 0) throw TableError(K::InvalidGrid, "prb_values must be nonnegative");

  const auto k_lo = static_cast<long long>(std::floor(pathloss_db(cfg.d_min_m, cfg) / pl_grid_step_db));
  const auto k_hi = static_cast<long long>(std::ceil(pathloss_db(max_distance_m(cfg), cfg) / pl_grid_step_db));
  std::vector<double> pl_grid;
  for (long long k = k_lo; k <= k_hi; ++k) pl_grid.push_back(static_cast<double>(k) * pl_grid_step_db);

  std::vector<double> values;
  values.reserve(pl_grid.size() * prb_values.size());
  for (double pl : pl_grid) {
    for (int n : prb_values) values.push_back(shannon_throughput(pl, n, cfg));
  }
  return ThroughputTable(std::move(pl_grid), prb_values, std::move(values), TableProvenance::Synthetic);
}

/// One column per PRB count 0..n_prb.
inline ThroughputTable generate_table(const NetworkConfig& cfg, double pl_grid_step_db = 0.5) {
  std::vector<int> prbs(static_cast<std::size_t>(cfg.n_prb) + 1);
  for (int n = 0; n <= cfg.n_prb; ++n) prbs[static_cast<std::size_t>(n)] = n;
  return generate_table(cfg, pl_grid_step_db, prbs);
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline const char* kTableHeader = "pl_db,n_prb,throughput_mbps";

inline void write_table_csv(const ThroughputTable& table, std::ostream& out) {
  out << kTableHeader << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
      out << format_double(table.pl_grid()[r]) << ',' << table.prb_grid()[c] << ',' << format_double(table.at(r, c)) << '\n';
    }
  }
}

inline void export_table(const ThroughputTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TableError(TableError::Kind::Io, "cannot open '" + path + "' for writing");
  write_table_csv(table, out);
  if (!out) throw TableError(TableError::Kind::Io, "write failed for '" + path + "'");
}

namespace detail {

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw TableError(TableError::Kind::Schema, "line " + std::to_string(line_no) + ": malformed number '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace detail

/// Parses the lookup-table CSV. Rows must be sorted by (pl_db, n_prb) and
/// cover the full grid; cell invariants are enforced on construction.
inline ThroughputTable read_table_csv(std::istream& in) {
  using K = TableError::Kind;
  std::string line;
  if (!std::getline(in, line) || line != kTableHeader) {
    throw TableError(K::Schema, std::string("missing or wrong header, expected '") + kTableHeader + "'");
  }
  std::vector<double> pl_grid;
  std::vector<int> prb_grid;
  std::vector<double> values;
  std::size_t col = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string_view sv(line);
    const auto c1 = sv.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : sv.find(',', c1 + 1);
    if (c2 == std::string_view::npos || sv.find(',', c2 + 1) != std::string_view::npos) {
      throw TableError(K::Schema, "line " + std::to_string(line_no) + ": expected 3 fields");
    }
    const double pl = detail::parse_number<double>(sv.substr(0, c1), line_no);
    const int prb = detail::parse_number<int>(sv.substr(c1 + 1, c2 - c1 - 1), line_no);
    const double v = detail::parse_number<double>(sv.substr(c2 + 1), line_no);

    if (pl_grid.empty() || pl != pl_grid.back()) {
      if (!pl_grid.empty()) {
        if (pl < pl_grid.back()) throw TableError(K::Schema, "line " + std::to_string(line_no) + ": pathloss grid not sorted");
        if (col != prb_grid.size()) throw TableError(K::Schema, "line " + std::to_string(line_no) + ": incomplete PRB row");
      }
      pl_grid.push_back(pl);
      col = 0;
    }
    if (pl_grid.size() == 1) {
      if (!prb_grid.empty() && prb <= prb_grid.back()) {
        throw TableError(K::Schema, "line " + std::to_string(line_no) + ": PRB grid not sorted");
      }
      prb_grid.push_back(prb);
    } else if (col >= prb_grid.size() || prb_grid[col] != prb) {
      throw TableError(K::Schema, "line " + std::to_string(line_no) + ": PRB column does not match grid");
    }
    ++col;
    values.push_back(v);
  }
  if (pl_grid.empty()) throw TableError(K::Schema, "table has no rows");
  if (col != prb_grid.size()) throw TableError(K::Schema, "incomplete final PRB row");
  try {
    return ThroughputTable(std::move(pl_grid), std::move(prb_grid), std::move(values), TableProvenance::Imported);
  } catch (const TableError& e) {
    if (e.kind() == K::Invariant) throw;
    throw TableError(K::Schema, e.what());
  }
}

inline ThroughputTable import_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TableError(TableError::Kind::Io, "cannot open '" + path + "'");
  return read_table_csv(in);
}

/// Throughput oracle used by the environment: the lookup table when one is
/// attached and covers the PRB count, otherwise the Shannon fallback.
class ChannelModel {
 public:
  explicit ChannelModel(const NetworkConfig& cfg, std::shared_ptr<const ThroughputTable> table = nullptr)
      : cfg_(cfg), table_(std::move(table)) {}

  double throughput(double pl_db, int n_prb) const {
    if (n_prb <= 0) return 0.0;
    if (table_ && table_->column_of(n_prb)) return lookup_throughput(*table_, pl_db, n_prb);
    return shannon_throughput(pl_db, n_prb, cfg_);
  }

  /// PRB counts a demand-driven allocator may choose between.
  std::vector<int> prb_grid() const {
    if (table_) return table_->prb_grid();
    std::vector<int> grid(static_cast<std::size_t>(cfg_.n_prb) + 1);
    for (int n = 0; n <= cfg_.n_prb; ++n) grid[static_cast<std::size_t>(n)] = n;
    return grid;
  }

  const NetworkConfig& config() const { return cfg_; }
  const ThroughputTable* table() const { return table_.get(); }

 private:
  NetworkConfig cfg_;
  std::shared_ptr<const ThroughputTable> table_;
};

}  // namespace sliceran
