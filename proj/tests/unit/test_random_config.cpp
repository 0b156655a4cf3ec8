#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "sliceran/config.hpp"
#include "sliceran/random.hpp"
#include "sliceran/scenario.hpp"

using namespace sliceran;

namespace {

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST(RandomSource, EqualSeedsGiveEqualStreamsForEveryDrawKind) {
  RandomSource a(12345), b(12345);
  for (int i = 0; i < 10000; ++i) {
    ASSERT_EQ(a.next_u64(), b.next_u64());
    ASSERT_EQ(a.uniform(), b.uniform());
    ASSERT_EQ(a.uniform_int(3, 17), b.uniform_int(3, 17));
    ASSERT_EQ(a.bernoulli(0.3), b.bernoulli(0.3));
    ASSERT_EQ(a.gaussian(1.0, 2.0), b.gaussian(1.0, 2.0));
  }
}

TEST(RandomSource, EngineMatchesTheStandardReferenceOutput) {
  // mt19937_64 default-seeded 10000th output, fixed by the C++ standard.
  RandomSource r(5489);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = r.next_u64();
  EXPECT_EQ(x, 9981545732273789042ULL);
}

TEST(RandomSource, UniformIntStaysInClosedRange) {
  RandomSource r(1);
  bool lo = false, hi = false;
  for (int i = 0; i < 5000; ++i) {
    const auto v = r.uniform_int(2, 5);
    ASSERT_GE(v, 2u);
    ASSERT_LE(v, 5u);
    lo = lo || v == 2;
    hi = hi || v == 5;
  }
  EXPECT_TRUE(lo && hi);
  EXPECT_THROW(r.uniform_int(5, 2), std::invalid_argument);
}

TEST(RandomSource, GaussianMoments) {
  RandomSource r(99);
  const int n = 100000;
  double s = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double g = r.gaussian(3.0, 0.5);
    s += g;
    sq += g * g;
  }
  const double mean = s / n;
  EXPECT_NEAR(mean, 3.0, 0.01);
  EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 0.5, 0.01);
}

TEST(Seeds, DecimalAndHexParse) {
  EXPECT_EQ(parse_seed("42"), 42u);
  EXPECT_EQ(parse_seed("0x2A"), 42u);
  EXPECT_EQ(parse_seed("0xffffffffffffffff"), ~0ULL);
  EXPECT_THROW(parse_seed(""), std::invalid_argument);
  EXPECT_THROW(parse_seed("12a"), std::invalid_argument);
  EXPECT_THROW(parse_seed("-1"), std::invalid_argument);
}

TEST(Seeds, DerivedStreamsDiffer) {
  EXPECT_NE(derive_seed(7, 0), derive_seed(7, 1));
  EXPECT_NE(derive_seed(7, 0), derive_seed(8, 0));
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

TEST(LoadConfig, EmptyDocumentIsAllDefaults) {
  const auto c = load_config("");
  EXPECT_EQ(c.n_prb, 106);
  EXPECT_EQ(c, NetworkConfig{});
  EXPECT_EQ(load_config("{}"), NetworkConfig{});
}

TEST(LoadConfig, SingleOverride) {
  const auto c = load_config(R"({"episode_len": 128})");
  NetworkConfig expected;
  expected.episode_len = 128;
  EXPECT_EQ(c, expected);
}

TEST(LoadConfig, BudgetBelowFloorsNamesTheKey) {
  try {
    load_config(R"({"n_prb": 9, "min_prb_per_slice": 10})");
    FAIL() << "expected a validation error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "n_prb");
  }
}

TEST(LoadConfig, RejectsUnknownKeysAndWrongTypes) {
  try {
    load_config(R"({"n_prbs": 100})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "n_prbs");
  }
  try {
    load_config(R"({"reward_weights": {"urllc": 0.5, "embb": 0.4, "mtc": 0.1}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "reward_weights.mtc");
  }
  try {
    load_config(R"({"n_prb": 10.5})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "n_prb");
  }
  EXPECT_THROW(load_config("{not json"), ConfigError);
  EXPECT_THROW(load_config("[1, 2]"), ConfigError);
}

TEST(Validate, DefaultIsOk) { EXPECT_TRUE(validate(NetworkConfig{}).empty()); }

TEST(Validate, WeightSumViolation) {
  NetworkConfig c;
  c.reward_weights = {0.5, 0.4, 0.2};
  const auto v = validate(c);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(mentions(v, "weights sum != 1"));
}

TEST(Validate, EmptyPacketInterval) {
  NetworkConfig c;
  c.urllc_pkt_kbits = {4000, 1500};
  EXPECT_TRUE(mentions(validate(c), "empty interval"));
}

TEST(Validate, ReportsEveryViolation) {
  NetworkConfig c;
  c.reward_weights = {0.5, 0.4, 0.2};
  c.urllc_pkt_kbits = {4000, 1500};
  c.urllc_arrival_p = 1.5;
  c.embb_std_mbps = -1;
  EXPECT_EQ(validate(c).size(), 4u);
}

TEST(LoadConfig, SerializeRoundTrip) {
  NetworkConfig c;
  c.n_prb = 120;
  c.carrier_freq_mhz = 3612.123456789;
  c.reward_weights = {0.25, 0.25, 0.5};
  c.urllc_pkt_kbits = {1000.5, 2000.25};
  c.link_budget_db = 187.3;
  EXPECT_EQ(load_config(serialize(c)), c);
  EXPECT_EQ(load_config(serialize(NetworkConfig{})), NetworkConfig{});
}

TEST(Scenario, SectionsLoadAndRoundTrip) {
  const auto s = load_scenario(R"({"n_urllc": 3, "noise": {"fading_std_db": 1.5}, "ppo": {"epochs": 2}, "dqn": {"batch_size": 32}})");
  EXPECT_EQ(s.network.n_urllc, 3);
  EXPECT_EQ(s.noise.fading_std_db, 1.5);
  EXPECT_EQ(s.ppo.epochs, 2);
  EXPECT_EQ(s.dqn.batch_size, 32);
  EXPECT_EQ(load_scenario(serialize(s)), s);
}

TEST(Scenario, SectionErrorsCarryDottedKeys) {
  try {
    load_scenario(R"({"ppo": {"clip": 0.2}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "ppo.clip");
  }
  try {
    load_scenario(R"({"noise": {"fading_std_db": -1}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "noise.fading_std_db");
  }
}

TEST(Scenario, HashIgnoresTrainingSectionsButNotTheCell) {
  const auto a = load_scenario("{}");
  const auto b = load_scenario(R"({"ppo": {"epochs": 8}})");
  const auto c = load_scenario(R"({"n_prb": 107})");
  const auto d = load_scenario(R"({"noise": {"contention_loss_frac": 0.1}})");
  EXPECT_EQ(scenario_hash(a), scenario_hash(b));
  EXPECT_NE(scenario_hash(a), scenario_hash(c));
  EXPECT_NE(scenario_hash(a), scenario_hash(d));
  EXPECT_EQ(hash_hex(0x1f), "000000000000001f");
}
