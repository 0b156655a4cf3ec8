// Command-line front end: gen-table, train, evaluate, compare, validate.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sliceran/harness.hpp"

namespace fs = std::filesystem;
using namespace sliceran;

namespace {

struct ConfigSource {
  std::string path;
  std::string inline_json;

  void attach(CLI::App* cmd) {
    auto* file = cmd->add_option("--config", path, "scenario config file (JSON)");
    auto* text = cmd->add_option("--config-json", inline_json, "scenario config as an inline JSON string");
    file->excludes(text);
  }

  Scenario load() const {
    if (!path.empty()) return load_scenario_file(path);
    return load_scenario(inline_json);
  }
};

// Relative output paths land under $SLICERAN_OUT_DIR when it is set.
std::string output_path(const std::string& p) {
  const char* dir = std::getenv("SLICERAN_OUT_DIR");
  if (!dir || !*dir || fs::path(p).is_absolute()) return p;
  fs::create_directories(dir);
  return (fs::path(dir) / p).string();
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, mode | std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

std::shared_ptr<const ThroughputTable> table_for(const Scenario& s, const std::string& table_path) {
  if (!table_path.empty()) return std::make_shared<const ThroughputTable>(import_table(table_path));
  return std::make_shared<const ThroughputTable>(generate_table(s.network));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PRB slicing simulator, trainer and evaluation harness", "sliceran"};
  app.require_subcommand(1);

  ConfigSource cfg_src;
  std::string table_path, out_path, seed_text = "0", log_path, checkpoint_path, env_name = "online", cdf_path, trace_path;
  std::string policy_name_arg;
  double pl_step = 0.5;
  std::uint64_t steps = 0, checkpoint_every = 0;
  int episodes = 20;
  std::vector<std::string> report_paths;

  auto* gen = app.add_subcommand("gen-table", "write the (pathloss, PRB) -> throughput lookup CSV");
  cfg_src.attach(gen);
  gen->add_option("--out", out_path, "output CSV")->required();
  gen->add_option("--pl-step", pl_step, "pathloss grid step in dB")->check(CLI::PositiveNumber);

  auto* trn = app.add_subcommand("train", "train ppo or dqn on the lookup-table environment");
  cfg_src.attach(trn);
  trn->add_option("--policy", policy_name_arg, "ppo | dqn")->required();
  trn->add_option("--seed", seed_text, "64-bit seed, decimal or 0x-hex");
  trn->add_option("--steps", steps, "environment steps")->required();
  trn->add_option("--out", out_path, "checkpoint path")->required();
  trn->add_option("--log", log_path, "training log CSV");
  trn->add_option("--table", table_path, "lookup CSV (generated from the config when omitted)");
  trn->add_option("--checkpoint-every", checkpoint_every, "also write <out>.<step> every N steps");

  auto* ev = app.add_subcommand("evaluate", "greedy rollouts of one policy into a report");
  cfg_src.attach(ev);
  ev->add_option("--policy", policy_name_arg, "hard-slicing | priority | fair | ppo | dqn")->required();
  ev->add_option("--checkpoint", checkpoint_path, "checkpoint for ppo / dqn");
  ev->add_option("--env", env_name, "offline | online")->check(CLI::IsMember({"offline", "online"}));
  ev->add_option("--episodes", episodes, "episodes")->check(CLI::PositiveNumber);
  ev->add_option("--seed", seed_text, "64-bit seed, decimal or 0x-hex");
  ev->add_option("--out", out_path, "report JSON")->required();
  ev->add_option("--cdf", cdf_path, "per-metric CDF CSV");
  ev->add_option("--trace", trace_path, "step trace CSV");
  ev->add_option("--table", table_path, "lookup CSV (generated from the config when omitted)");

  auto* cmp = app.add_subcommand("compare", "side-by-side table and merged CDF of several reports");
  cmp->add_option("reports", report_paths, "report JSON files")->required()->expected(2, -1);
  cmp->add_option("--out", out_path, "comparison table CSV")->required();
  cmp->add_option("--cdf", cdf_path, "merged CDF CSV");

  auto* val = app.add_subcommand("validate", "check a config document");
  cfg_src.attach(val);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "sliceran: error: " << e.what() << '\n';
    return e.get_exit_code() ? e.get_exit_code() : 2;
  }

  try {
    if (*val) {
      const Scenario s = cfg_src.load();
      std::cout << "ok " << hash_hex(scenario_hash(s)) << '\n';
    } else if (*gen) {
      const Scenario s = cfg_src.load();
      std::vector<int> prbs;
      for (int n = 0; n <= s.network.n_prb; ++n) prbs.push_back(n);
      export_table(generate_table(s.network, pl_step, prbs), output_path(out_path));
    } else if (*trn) {
      const Scenario s = cfg_src.load();
      const PolicyKind kind = parse_policy(policy_name_arg);
      if (!is_learned(kind)) throw std::invalid_argument(policy_name_arg + " is not trainable");
      const std::string ckpt = output_path(out_path);
      std::optional<std::ofstream> log;
      if (!log_path.empty()) {
        log.emplace(open_out(output_path(log_path)));
        *log << kTrainLogHeader << '\n';
      }
      TrainOptions opts;
      opts.checkpoint_every = checkpoint_every;
      if (log) opts.on_log = [&](const TrainLogRow& r) { write_train_log_row(*log, r); };
      opts.on_checkpoint = [&](const PolicyParams& p, std::uint64_t step) {
        if (step < steps) save_checkpoint(p, ckpt + "." + std::to_string(step));
      };
      auto res = train(s, table_for(s, table_path), kind, parse_seed(seed_text), steps, opts);
      if (fs::path(ckpt).has_parent_path()) fs::create_directories(fs::path(ckpt).parent_path());
      save_checkpoint(res.params, ckpt);
      if (log && !*log) throw std::runtime_error("write failed for '" + log_path + "'");
    } else if (*ev) {
      const Scenario s = cfg_src.load();
      const PolicyKind kind = parse_policy(policy_name_arg);
      std::optional<PolicyParams> params;
      if (is_learned(kind)) {
        if (checkpoint_path.empty()) throw std::invalid_argument(policy_name_arg + " needs --checkpoint");
        params = load_checkpoint(checkpoint_path);
      }
      std::vector<TraceRow> trace;
      const EvalReport report = evaluate(s, table_for(s, table_path), kind, params ? &*params : nullptr, parse_env_kind(env_name),
                                         episodes, parse_seed(seed_text), trace_path.empty() ? nullptr : &trace);
      open_out(output_path(out_path)) << serialize(report);
      if (!cdf_path.empty()) {
        auto out = open_out(output_path(cdf_path));
        write_cdf_csv(out, cdf_rows(report));
      }
      if (!trace_path.empty()) {
        auto out = open_out(output_path(trace_path));
        write_trace_csv(out, trace);
      }
    } else if (*cmp) {
      std::vector<EvalReport> reports;
      for (const auto& p : report_paths) reports.push_back(load_report(p));
      const Comparison c = compare(reports);
      {
        auto out = open_out(output_path(out_path));
        write_comparison_csv(out, c);
      }
      if (!cdf_path.empty()) {
        auto out = open_out(output_path(cdf_path));
        write_cdf_csv(out, c.cdf);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "sliceran: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
