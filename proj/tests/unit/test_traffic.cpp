#include <gtest/gtest.h>

#include <cmath>

#include "sliceran/traffic.hpp"

using namespace sliceran;

TEST(UrllcArrival, DegenerateProbabilities) {
  NetworkConfig c;
  RandomSource rng(1);
  c.urllc_arrival_p = 1.0;
  for (int i = 0; i < 1000; ++i) ASSERT_TRUE(draw_urllc_arrival(rng, c, i).has_value());
  c.urllc_arrival_p = 0.0;
  for (int i = 0; i < 1000; ++i) ASSERT_FALSE(draw_urllc_arrival(rng, c, i).has_value());
}

TEST(UrllcArrival, FrequencyAndSizeRange) {
  NetworkConfig c;
  RandomSource rng(2);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    if (auto p = draw_urllc_arrival(rng, c, 17)) {
      ++hits;
      ASSERT_GE(p->size_bits, 1.5e6);
      ASSERT_LE(p->size_bits, 4.0e6);
      ASSERT_EQ(p->remaining_bits, p->size_bits);
      ASSERT_EQ(p->arrival_step, 17);
    }
  }
  EXPECT_NEAR(static_cast<double>(hits) / n, 0.9, 0.01);
}

TEST(EmbbDemand, DegenerateAndClamped) {
  NetworkConfig c;
  RandomSource rng(3);
  c.embb_std_mbps = 0;
  for (int i = 0; i < 100; ++i) ASSERT_EQ(draw_embb_demand(rng, c), 7.0);
  c.embb_mean_mbps = -5;
  for (int i = 0; i < 100; ++i) ASSERT_EQ(draw_embb_demand(rng, c), 0.0);
}

TEST(EmbbDemand, MonteCarloMoments) {
  NetworkConfig c;
  RandomSource rng(4);
  const int n = 100000;
  double s = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double d = draw_embb_demand(rng, c);
    s += d;
    sq += d * d;
  }
  const double mean = s / n;
  EXPECT_NEAR(mean, 7.0, 0.02);
  EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 0.7, 0.02);
}

TEST(RandomWalk, ZeroStepKeepsPosition) {
  NetworkConfig c;
  c.mobility_step_m = 0;
  RandomSource rng(5);
  const Position p{123.0, 456.0};
  EXPECT_EQ(random_walk(p, rng, c), p);
}

TEST(RandomWalk, InteriorStepHasExactLength) {
  NetworkConfig c;
  RandomSource rng(6);
  const Position p{750.0, 750.0};
  for (int i = 0; i < 100; ++i) {
    const auto q = random_walk(p, rng, c);
    EXPECT_NEAR(std::hypot(q.x - p.x, q.y - p.y), 15.0, 1e-9);
  }
}

TEST(RandomWalk, LongWalkStaysInsideArea) {
  NetworkConfig c;
  RandomSource rng(7);
  Position p{3.0, 1497.0};
  for (int i = 0; i < 10000; ++i) {
    p = random_walk(p, rng, c);
    ASSERT_GE(p.x, 0.0);
    ASSERT_LE(p.x, 1500.0);
    ASSERT_GE(p.y, 0.0);
    ASSERT_LE(p.y, 1500.0);
  }
}

TEST(RandomWalk, ReflectionMirrorsAtWalls) {
  EXPECT_DOUBLE_EQ(detail::reflect(-4.0, 1500.0), 4.0);
  EXPECT_DOUBLE_EQ(detail::reflect(1506.0, 1500.0), 1494.0);
  EXPECT_DOUBLE_EQ(detail::reflect(700.0, 1500.0), 700.0);
}

TEST(Population, DefaultComposition) {
  NetworkConfig c;
  RandomSource rng(8);
  const auto ues = init_population(rng, c);
  ASSERT_EQ(ues.size(), 14u);
  int u = 0, e = 0, m = 0;
  for (std::size_t i = 0; i < ues.size(); ++i) {
    EXPECT_EQ(ues[i].id, static_cast<int>(i));
    EXPECT_TRUE(ues[i].queue.empty());
    EXPECT_EQ(ues[i].demand_mbps, 0.0);
    switch (ues[i].slice) {
      case SliceKind::URLLC: ++u; break;
      case SliceKind::EMBB: ++e; break;
      case SliceKind::MMTC: ++m; break;
    }
  }
  EXPECT_EQ(u, 2);
  EXPECT_EQ(e, 2);
  EXPECT_EQ(m, 10);
  EXPECT_EQ(ues[0].slice, SliceKind::URLLC);
  EXPECT_EQ(ues[2].slice, SliceKind::EMBB);
  EXPECT_EQ(ues[4].slice, SliceKind::MMTC);
}

TEST(Population, Deterministic) {
  NetworkConfig c;
  RandomSource a(9), b(9);
  EXPECT_EQ(init_population(a, c), init_population(b, c));
}

TEST(Population, PositionsUniformOverArea) {
  NetworkConfig c;
  c.n_urllc = 5000;
  c.n_embb = 5000;
  RandomSource rng(10);
  const auto ues = init_population(rng, c);
  double sx = 0, sy = 0;
  int n = 0;
  for (const auto& ue : ues) {
    if (ue.slice == SliceKind::MMTC) continue;
    ASSERT_GE(ue.position.x, 0.0);
    ASSERT_LE(ue.position.x, 1500.0);
    sx += ue.position.x;
    sy += ue.position.y;
    ++n;
    ASSERT_EQ(ue.pathloss_db, pathloss_db(distance_to_center(ue.position, c), c));
  }
  EXPECT_NEAR(sx / n, 750.0, 10.0);
  EXPECT_NEAR(sy / n, 750.0, 10.0);
}
