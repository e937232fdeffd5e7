#include "oracles.hpp"

#include "tscluster/features.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

using namespace tscluster;

TEST(Isotonic, HandValues) {
  auto f = isotonic_fit(std::vector<double>{1, 2, 3});
  EXPECT_EQ(f.fitted, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(f.sse, 0.0);
  f = isotonic_fit(std::vector<double>{3, 1, 2});
  EXPECT_EQ(f.fitted, (std::vector<double>{2, 2, 2}));
  EXPECT_NEAR(f.sse, 2.0, 1e-15);
  f = isotonic_fit(std::vector<double>{1, 3, 2});
  EXPECT_EQ(f.fitted, (std::vector<double>{1, 2.5, 2.5}));
  EXPECT_NEAR(f.sse, 0.5, 1e-15);
  ASSERT_EQ(f.runs.size(), 2u);
  EXPECT_EQ(f.runs[1].start, 1u);
  EXPECT_EQ(f.runs[1].length, 2u);
}

TEST(Isotonic, MatchesMinMaxOracle) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = z(rng) + 0.3 * static_cast<double>(i);
    const auto fit = isotonic_fit(y);
    const auto ref = oracle::isotonic(y);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(fit.fitted[i], ref[i], 1e-8);
    for (std::size_t i = 1; i < n; ++i) EXPECT_LE(fit.fitted[i - 1], fit.fitted[i]);
    // Mean preservation.
    EXPECT_NEAR(std::accumulate(fit.fitted.begin(), fit.fitted.end(), 0.0),
                std::accumulate(y.begin(), y.end(), 0.0), 1e-9);
    // Idempotence.
    EXPECT_EQ(isotonic_fit(fit.fitted).fitted, fit.fitted);
  }
}

TEST(Isotonic, RejectsBadInput) {
  EXPECT_THROW(isotonic_fit(std::vector<double>{}), InvalidInput);
  EXPECT_THROW(isotonic_fit(std::vector<double>{1.0, std::nan("")}), InvalidInput);
}

TEST(Sessions, HandCases) {
  auto s = sessions_from_fitted(std::vector<double>{1, 2, 3, 4}, 0.0);
  EXPECT_EQ(s.mean_massed_length, 1.0);
  s = sessions_from_fitted(std::vector<double>(10, 50.0), 0.5);
  EXPECT_EQ(s.lengths, (std::vector<std::size_t>{10}));
  EXPECT_EQ(s.mean_massed_length, 10.0);
  s = sessions_from_fitted(std::vector<double>{1, 1, 1, 5, 9, 9}, 0.0);
  EXPECT_EQ(s.lengths, (std::vector<std::size_t>{3, 1, 2}));
  EXPECT_EQ(s.mean_massed_length, 2.5);
  EXPECT_THROW(sessions_from_fitted(std::vector<double>{}, 0.5), InvalidInput);
  EXPECT_THROW(sessions_from_fitted(std::vector<double>{1}, -1.0), InvalidInput);
}

TEST(Sessions, LengthsPartitionTheTaskRange) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> t(1 + rng() % 80);
    for (double& v : t) v = u(rng);
    const auto s = massed_sessions(t, 0.5);
    EXPECT_EQ(std::accumulate(s.lengths.begin(), s.lengths.end(), std::size_t{0}), t.size());
    EXPECT_GE(s.mean_massed_length, 1.0);
  }
}

TEST(Completion, Percentages) {
  std::istringstream in("learner_id,task_id,timestamp\nA,T1,1\nA,T2,1\nA,T3,2\nA,T4,3\nB,T2,5\nB,X,6\n");
  const auto log = parse_event_log(in);
  const TaskCatalog catalog({"T1", "T2", "T3", "T4"});
  EXPECT_EQ(completion_percentage(log, catalog, "A"), 100.0);
  EXPECT_EQ(completion_percentage(log, catalog, "B"), 25.0);
  EXPECT_THROW(completion_percentage(log, catalog, "C"), InvalidInput);

  const auto a = learner_stats(log, catalog, "A", 0.5);
  EXPECT_EQ(a.mean_massed_session_length, 2.0); // T1, T2 on day 1
  const auto b = learner_stats(log, catalog, "B", 0.5);
  EXPECT_EQ(b.completion_pct, 25.0);
  EXPECT_EQ(b.mean_massed_session_length, 1.0);
}
