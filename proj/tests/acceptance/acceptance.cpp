// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sliceran/harness.hpp"
#include "sliceran/policy.hpp"

using namespace sliceran;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const NetworkConfig kDefault{};

std::shared_ptr<const ThroughputTable> default_table() {
  static const auto t = std::make_shared<const ThroughputTable>(generate_table(kDefault));
  return t;
}

Verdict action_space() {
  Verdict v;
  const ActionSpace space(kDefault);
  v.require(space.size() == 3003, "cardinality " + std::to_string(space.size()));
  std::set<std::tuple<int, int, int>> distinct;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& a = space.decode(i);
    if (a.total() != 106 || a.urllc < 10 || a.embb < 10 || a.mmtc < 10) v.require(false, "bad tuple at " + std::to_string(i));
    if (space.encode(a) != i) v.require(false, "encode(decode(" + std::to_string(i) + ")) differs");
    distinct.insert({a.urllc, a.embb, a.mmtc});
  }
  v.require(distinct.size() == space.size(), "duplicate tuples");
  if (v.pass) v.detail = "3003 distinct tuples, bijective";
  return v;
}

Verdict reward_bounds() {
  Verdict v;
  const auto in_range = [](double x) { return x >= -1.0 && x <= 0.0; };
  SlicingEnv offline = make_offline_env(kDefault, default_table());
  SlicingEnv online = make_online_env(kDefault, NoiseConfig{}, default_table());
  RandomSource pick(2024);
  std::uint64_t steps = 0, bad = 0;
  for (std::uint64_t ep = 0; steps < 100000; ++ep) {
    SlicingEnv& env = ep % 2 ? online : offline;
    env.reset(derive_seed(99, ep));
    while (!env.done() && steps < 100000) {
      const auto r = env.step(static_cast<std::size_t>(pick.uniform_int(0, 3002))).record;
      if (!in_range(r.r_u) || !in_range(r.r_e) || !in_range(r.r_m) || !in_range(r.reward)) ++bad;
      ++steps;
    }
  }
  v.require(bad == 0, std::to_string(bad) + " out-of-range steps");
  v.require(std::abs(reward_urllc(600.0, kDefault) + 0.5) <= 1e-12, "R_U(600)");
  v.require(std::abs(reward_embb(3.5, kDefault) + 0.5) <= 1e-12, "R_E(3.5)");
  v.require(std::abs(reward_mmtc(4, kDefault) + 0.6) <= 1e-12, "R_M(4)");
  v.require(std::abs(total_reward(-0.5, 0.0, -0.6, kDefault) + 0.31) <= 1e-12, "weighted total");
  if (v.pass) v.detail = std::to_string(steps) + " random steps in [-1,0], tabulated values exact";
  return v;
}

// Deals `pool` blocks one at a time over `n` active UEs in id order.
std::vector<int> deal(int pool, int n) {
  std::vector<int> out(static_cast<std::size_t>(n), 0);
  for (int p = 0; p < pool; ++p) ++out[static_cast<std::size_t>(p % n)];
  return out;
}

Verdict baselines() {
  Verdict v;
  const SliceAllocation hard = hard_slicing(kDefault);
  const int share = static_cast<int>(std::floor(0.4 * 106));
  v.require(hard == SliceAllocation{share, share, 106 - 2 * share} && hard == SliceAllocation{42, 42, 22}, "hard slicing split");
  v.require(mmtc_serviced(hard.mmtc, kDefault) == 22 / 5, "hard slicing mMTC");

  RandomSource rng(1);
  auto ues = init_population(rng, kDefault);
  for (auto& ue : ues) {
    if (ue.slice == SliceKind::URLLC) ue.queue.push_back({2e6, 0, 2e6});
    if (ue.slice == SliceKind::EMBB) ue.demand_mbps = 7.0;
  }
  const auto fair = fair_shares(ues, kDefault);
  const int mmtc = std::min(106 / 3, 10 * 5);
  const auto dealt = deal(106 - mmtc, 4);
  v.require(fair.per_ue == dealt, "fair per-UE shares differ from the deal oracle");
  v.require(fair.allocation == SliceAllocation{dealt[0] + dealt[1], dealt[2] + dealt[3], mmtc}, "fair totals vs oracle");
  v.require(fair.allocation == SliceAllocation{36, 35, 35}, "fair totals");
  v.require(mmtc_serviced(fair.allocation.mmtc, kDefault) == 7, "fair mMTC");
  if (v.pass) v.detail = "hard (42,42,22) mMTC 4; fair (36,35,35) mMTC 7";
  return v;
}

Verdict intra_slice_fairness() {
  Verdict v;
  SlicingEnv env = make_offline_env(kDefault, default_table());
  RandomSource pick(77);
  std::uint64_t steps = 0, spread = 0, sums = 0;
  for (std::uint64_t ep = 0; steps < 10000; ++ep) {
    env.reset(derive_seed(5, ep));
    while (!env.done() && steps < 10000) {
      const auto r = env.step(static_cast<std::size_t>(pick.uniform_int(0, 3002))).record;
      ++steps;
      const int n_u = kDefault.n_urllc;
      const std::pair<int, int> slices[] = {{0, n_u}, {n_u, n_u + kDefault.n_embb}};
      const int alloc[] = {r.action.urllc, r.action.embb};
      for (int s = 0; s < 2; ++s) {
        int lo = 1 << 30, hi = -1, sum = 0, active = 0;
        for (int i = slices[s].first; i < slices[s].second; ++i) {
          const auto k = static_cast<std::size_t>(i);
          if (!r.ue_active[k]) continue;
          ++active;
          lo = std::min(lo, r.ue_prbs[k]);
          hi = std::max(hi, r.ue_prbs[k]);
          sum += r.ue_prbs[k];
        }
        if (active > 0 && hi - lo > 1) ++spread;
        if (active > 0 && sum != alloc[s]) ++sums;
      }
    }
  }
  v.require(spread == 0, std::to_string(spread) + " slices with spread > 1");
  v.require(sums == 0, std::to_string(sums) + " slices whose sum differs from the allocation");
  if (v.pass) v.detail = std::to_string(steps) + " steps, spread <= 1 and sums exact";
  return v;
}

Verdict gradient_fidelity() {
  Verdict v;
  RandomSource rng(31);
  double worst = 0;
  for (int pair = 0; pair < 20; ++pair) {
    const auto width = static_cast<std::size_t>(rng.uniform_int(4, 24));
    nn::Mlp net({12, width, width, static_cast<std::size_t>(rng.uniform_int(2, 12))}, nn::Activation::Tanh);
    net.initialize(rng);
    std::vector<double> x(12), u(net.output_size());
    for (auto& e : x) e = rng.uniform(0, 1);
    for (auto& e : u) e = rng.uniform(-1, 1);
    const auto g = net.gradient(x, u);
    auto p = net.parameters();
    const auto objective = [&] {
      const auto y = net.forward(x);
      double s = 0;
      for (std::size_t i = 0; i < y.size(); ++i) s += u[i] * y[i];
      return s;
    };
    const double h = 1e-6;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double saved = p[k];
      p[k] = saved + h;
      const double plus = objective();
      p[k] = saved - h;
      const double minus = objective();
      p[k] = saved;
      const double fd = (plus - minus) / (2 * h);
      const double rel = std::abs(g[k] - fd) / std::max({std::abs(g[k]), std::abs(fd), 1e-3});
      worst = std::max(worst, rel);
    }
  }
  v.require(worst <= 1e-5, fmt("worst relative error %.3g", worst));
  if (v.pass) v.detail = fmt("20 pairs, worst relative error %.3g", worst);
  return v;
}

/// Constant observation, one-step episodes; arm 2 pays 0, the others -1.
class Bandit {
 public:
  Observation reset(std::uint64_t) { return {1.0}; }
  StepResult step(std::size_t a) {
    StepResult r;
    r.reward = a == 2 ? 0.0 : -1.0;
    r.done = true;
    r.observation = {1.0};
    return r;
  }
  std::size_t observation_size() const { return 1; }
  std::size_t action_count() const { return 5; }
};

Verdict learning_sanity() {
  Verdict v;
  Bandit bandit;
  PPOConfig cfg;
  cfg.hidden = {16};
  cfg.rollout_len = 64;
  cfg.minibatch_size = 32;
  cfg.learning_rate = 3e-3;
  cfg.return_scale = 1.0;
  const int rollouts = 300;
  const int updates = rollouts * cfg.epochs * (cfg.rollout_len / cfg.minibatch_size);
  const auto ppo = train_ppo(bandit, cfg, 1, static_cast<std::uint64_t>(rollouts * cfg.rollout_len));
  const auto probs = policy_distribution(ppo.nets.policy, std::vector<double>{1.0});
  v.require(updates <= 5000, "update budget exceeded");
  v.require(nn::argmax(probs) == 2 && probs[2] > 0.9, fmt("PPO p(best) %.3f", probs[2]));

  // Action a moves to state a; VI reference for gamma 0.5.
  const double r[2][2] = {{1.0, 0.0}, {0.0, 2.0}};
  const double gamma = 0.5;
  double q_star[2][2] = {};
  for (int it = 0; it < 200; ++it) {
    double next[2][2];
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) next[s][a] = r[s][a] + gamma * std::max(q_star[a][0], q_star[a][1]);
    }
    std::copy(&next[0][0], &next[0][0] + 4, &q_star[0][0]);
  }
  DQNConfig dq;
  dq.gamma = gamma;
  dq.hidden = {16};
  dq.batch_size = 4;
  dq.buffer_capacity = 4;
  dq.learning_rate = 1e-2;
  dq.target_sync_every = 25;
  RandomSource init(3);
  DqnLearner learner(make_q_net(2, 2, dq.hidden, init), dq, 4);
  const auto one_hot = [](std::size_t s) { return s == 0 ? Observation{1.0, 0.0} : Observation{0.0, 1.0}; };
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t a = 0; a < 2; ++a) learner.buffer().push({one_hot(s), a, r[s][a], one_hot(a), false});
  }
  for (int i = 0; i < 6000; ++i) learner.update();
  double worst = 0;
  for (std::size_t s = 0; s < 2; ++s) {
    const auto q = learner.q().forward(one_hot(s));
    for (std::size_t a = 0; a < 2; ++a) worst = std::max(worst, std::abs(q[a] - q_star[s][a]));
  }
  v.require(worst <= 0.05, fmt("DQN max |Q - Q*| %.4f", worst));
  if (v.pass) v.detail = fmt("PPO p(best) %.3f after ", probs[2]) + std::to_string(updates) + fmt(" updates; DQN max |Q - Q*| %.4f", worst);
  return v;
}

std::string line_for(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s R=%.4f mmtc=%.3f urllc_viol=%.4f", r.policy.c_str(), r.mean_reward, r.mmtc_serviced.mean,
                r.urllc_latency_ms.violation_rate);
  return buf;
}

Verdict directional() {
  Verdict v;
  const Scenario scenario = load_scenario("{}");
  const std::uint64_t train_steps = 200000;
  const std::uint64_t train_seed = 1;
  const std::uint64_t eval_seed = 7;
  const int episodes = 20;

  const auto ppo = train(scenario, default_table(), PolicyKind::PPO, train_seed, train_steps);
  const auto dqn = train(scenario, default_table(), PolicyKind::DQN, train_seed, train_steps);

  std::vector<EvalReport> reports;
  for (auto kind : {PolicyKind::HardSlicing, PolicyKind::PriorityBased, PolicyKind::FairActiveUser}) {
    reports.push_back(evaluate(scenario, default_table(), kind, nullptr, EnvKind::Online, episodes, eval_seed));
  }
  reports.push_back(evaluate(scenario, default_table(), PolicyKind::PPO, &ppo.params, EnvKind::Online, episodes, eval_seed));
  reports.push_back(evaluate(scenario, default_table(), PolicyKind::DQN, &dqn.params, EnvKind::Online, episodes, eval_seed));
  for (const auto& r : reports) std::printf("  criterion 7 | %s\n", line_for(r).c_str());
  const EvalReport& hard = reports[0];
  const EvalReport& p = reports[3];
  const EvalReport& d = reports[4];

  bool a = true, b = true;
  for (std::size_t i = 0; i < 3; ++i) a = a && p.mean_reward >= reports[i].mean_reward;
  for (std::size_t i = 1; i < reports.size(); ++i) b = b && hard.mmtc_serviced.mean <= reports[i].mmtc_serviced.mean;
  const bool c = p.urllc_latency_ms.violation_rate <= d.urllc_latency_ms.violation_rate;
  std::printf("  criterion 7a %s: PPO mean reward >= every baseline\n", a ? "PASS" : "FAIL");
  std::printf("  criterion 7b %s: hard slicing has the lowest mMTC serviced mean\n", b ? "PASS" : "FAIL");
  std::printf("  criterion 7c %s: PPO URLLC violation rate <= DQN\n", c ? "PASS" : "FAIL");
  v.require(a, "7a");
  v.require(b, "7b");
  v.require(c, "7c");
  if (v.pass) v.detail = "7a, 7b, 7c hold";
  else v.detail = "failed: " + v.detail;
  return v;
}

std::string checkpoint_bytes(const PolicyParams& p) {
  std::ostringstream os(std::ios::binary);
  write_checkpoint(p, os);
  return os.str();
}

std::string log_text(const std::vector<TrainLogRow>& log) {
  std::ostringstream os;
  write_train_log(os, log);
  return os.str();
}

Verdict determinism() {
  Verdict v;
  const Scenario scenario = load_scenario(R"({"dqn": {"learning_starts": 500}})");
  for (auto kind : {PolicyKind::PPO, PolicyKind::DQN}) {
    const std::uint64_t steps = kind == PolicyKind::PPO ? 4096 : 3000;
    const auto first = train(scenario, default_table(), kind, 42, steps);
    const auto second = train(scenario, default_table(), kind, 42, steps);
    const std::string name(policy_name(kind));
    v.require(log_text(first.log) == log_text(second.log), name + " training log differs");
    v.require(checkpoint_bytes(first.params) == checkpoint_bytes(second.params), name + " checkpoint differs");
    const auto r1 = evaluate(scenario, default_table(), kind, &first.params, EnvKind::Online, 2, 9);
    const auto r2 = evaluate(scenario, default_table(), kind, &second.params, EnvKind::Online, 2, 9);
    v.require(serialize(r1) == serialize(r2), name + " report differs");
  }
  const auto h1 = evaluate(scenario, default_table(), PolicyKind::PriorityBased, nullptr, EnvKind::Online, 3, 9);
  const auto h2 = evaluate(scenario, default_table(), PolicyKind::PriorityBased, nullptr, EnvKind::Online, 3, 9);
  v.require(serialize(h1) == serialize(h2), "baseline report differs");
  if (v.pass) v.detail = "logs, checkpoints and reports byte-identical";
  return v;
}

Verdict table_and_cdf_oracles() {
  Verdict v;
  const auto& t = *default_table();
  std::uint64_t breaks = 0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      if (r > 0 && t.at(r, c) > t.at(r - 1, c)) ++breaks;
      if (c > 0 && t.at(r, c) < t.at(r, c - 1)) ++breaks;
    }
  }
  v.require(breaks == 0, std::to_string(breaks) + " monotonicity breaks");

  RandomSource rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> xs(1000);
    for (auto& x : xs) x = std::round(rng.uniform(0, 900));
    const auto cdf = empirical_cdf(xs);
    std::set<double> unique(xs.begin(), xs.end());
    if (cdf.size() != unique.size()) v.require(false, "CDF support size");
    for (const auto& p : cdf) {
      const auto le = std::count_if(xs.begin(), xs.end(), [&](double x) { return x <= p.value; });
      if (p.fraction != static_cast<double>(le) / 1000.0) {
        v.require(false, "CDF fraction at " + fmt("%g", p.value));
        break;
      }
    }
    const double thr = std::round(rng.uniform(0, 900));
    const auto over = std::count_if(xs.begin(), xs.end(), [&](double x) { return x > thr; });
    if (sla_violation_rate(xs, thr) != static_cast<double>(over) / 1000.0) v.require(false, "violation rate");
  }
  if (v.pass) v.detail = std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + " table monotone; 20 CDF/violation oracles exact";
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"action space cardinality and bijectivity", action_space},
      {"reward bounds and fixed points", reward_bounds},
      {"baseline arithmetic", baselines},
      {"intra-slice fairness", intra_slice_fairness},
      {"gradient fidelity", gradient_fidelity},
      {"learning sanity", learning_sanity},
      {"directional ordering after offline training", directional},
      {"determinism", determinism},
      {"table and CDF oracles", table_and_cdf_oracles},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += v.pass ? 0 : 1;
    std::printf("criterion %zu %s: %s (%s) [%.1fs]\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first, v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
