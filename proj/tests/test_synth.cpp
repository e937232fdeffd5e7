#include "tscluster/features.hpp"
#include "tscluster/synth.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace tscluster;

namespace {

std::string serialise(const EventLog& log) {
  std::ostringstream out;
  write_event_log(out, log);
  return out.str();
}

} // namespace

TEST(Synth, ReferenceScheduleWithoutNoise) {
  const auto c = generate_cohort({{"plain", 0.0, 0.0, 0.0, 0, 0.0, 4, true}}, 12, 26.0, 1);
  TrajectoryOptions o;
  o.course_end = 26.0;
  for (const auto& t : build_trajectories(c.log, c.catalog, o))
    for (std::size_t k = 0; k < 12; ++k) EXPECT_DOUBLE_EQ(t.values[k], 2.0 * static_cast<double>(k + 1));
}

TEST(Synth, EarlyBirdOffset) {
  const auto c = generate_cohort({{"early", -10.0, 0.0, 0.0, 0, 0.0, 4, true}}, 30, 100.0, 1);
  TrajectoryOptions o;
  o.course_end = 100.0;
  for (const auto& t : build_trajectories(c.log, c.catalog, o)) {
    // Tasks due before day 10 clamp at day 0; the rest shift by exactly ten days.
    for (std::size_t k = 0; k < 30; ++k) {
      const double ref = reference_time(k, 30, 100.0);
      if (ref >= 10.0) EXPECT_NEAR(ref - t.values[k], 10.0, 1e-12);
      else EXPECT_EQ(t.values[k], 0.0);
    }
  }
}

TEST(Synth, CrammersProduceMassedSessions) {
  const auto c = generate_cohort({{"crammer", 0.0, 1.0, 0.0, 8, 2.0, 6, true}}, 64, 60.0, 4);
  TrajectoryOptions o;
  o.course_end = 60.0;
  for (const auto& t : build_trajectories(c.log, c.catalog, o))
    EXPECT_GE(massed_sessions(t).mean_massed_length, 4.0);
}

TEST(Synth, DeterministicBytes) {
  const auto a = generate_cohort(four_archetype_preset(5), 40, 50.0, 77);
  const auto b = generate_cohort(four_archetype_preset(5), 40, 50.0, 77);
  const auto c = generate_cohort(four_archetype_preset(5), 40, 50.0, 78);
  EXPECT_EQ(serialise(a.log), serialise(b.log));
  EXPECT_NE(serialise(a.log), serialise(c.log));
}

TEST(Synth, UnorderedArchetypesKeepDisorder) {
  const auto c = generate_cohort({{"sporadic", 0.0, 8.0, 0.0, 0, 0.0, 4, false}}, 50, 50.0, 3);
  TrajectoryOptions o;
  o.course_end = 50.0;
  int inversions = 0;
  for (const auto& t : build_trajectories(c.log, c.catalog, o))
    for (std::size_t k = 1; k < t.size(); ++k) inversions += t.values[k] < t.values[k - 1];
  EXPECT_GT(inversions, 0);
}

TEST(Synth, InvalidSpecs) {
  EXPECT_THROW(generate_cohort({{"x", 0, 0, 1.5, 0, 0, 5, true}}, 20, 10.0, 1), InvalidInput);
  EXPECT_THROW(generate_cohort({{"x", 0, 0, 0, 0, 0, -1, true}}, 20, 10.0, 1), InvalidInput);
  EXPECT_THROW(generate_cohort({{"x", std::nan(""), 0, 0, 0, 0, 5, true}}, 20, 10.0, 1), InvalidInput);
  EXPECT_THROW(generate_cohort({{"x", 0, 0, 0, 0, 0, 3, true}}, 20, 10.0, 1), InvalidInput);
  EXPECT_THROW(generate_cohort({{"x", 0, 0, 0, 0, 0, 5, true}}, 9, 10.0, 1), InvalidInput);
}

TEST(Recovery, HandValues) {
  const Partition planted({0, 0, 1, 1});
  const auto same = recovery_score(planted, planted);
  EXPECT_EQ(same.ari, 1.0);
  EXPECT_EQ(same.vi, 0.0);
  EXPECT_NEAR(recovery_score(Partition::singletons(4), planted).vi, 0.5, 1e-12);
  EXPECT_THROW(recovery_score(Partition::singletons(3), planted), InvalidInput);
}

TEST(Recovery, AriMatchesPairCountingDefinition) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng() % 30;
    std::vector<int> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng() % 4);
      b[i] = static_cast<int>(rng() % 3);
    }
    // Rand-style pair counts.
    double both = 0, in_a = 0, in_b = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const bool sa = a[i] == a[j], sb = b[i] == b[j];
        both += sa && sb;
        in_a += sa;
        in_b += sb;
        pairs += 1;
      }
    const double expected = in_a * in_b / pairs;
    const double ari = (both - expected) / (0.5 * (in_a + in_b) - expected);
    EXPECT_NEAR(adjusted_rand_index(Partition(a), Partition(b)), ari, 1e-12);
  }
}

TEST(Recovery, RandomLabelsHaveNearZeroAri) {
  int small = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::vector<int> a(200), b(200);
    for (int i = 0; i < 200; ++i) {
      a[static_cast<std::size_t>(i)] = static_cast<int>(uniform_index(rng, 4));
      b[static_cast<std::size_t>(i)] = static_cast<int>(uniform_index(rng, 4));
    }
    small += std::abs(adjusted_rand_index(Partition(a), Partition(b))) < 0.1;
  }
  EXPECT_GE(small, 95);
}
