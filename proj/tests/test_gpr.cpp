#include "oracles.hpp"

#include "tscluster/gpr.hpp"
#include "tscluster/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace tscluster;

namespace {

Trajectory traj(const std::string& id, const std::vector<double>& v) {
  return {id, v, std::vector<bool>(v.size(), true)};
}

} // namespace

TEST(GpLikelihood, MatchesDenseFormulaWithReplicates) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> grid(0, 14);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng() % 120;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = 0.5 * grid(rng); // many repeated inputs
      y[i] = std::sin(x[i]) + 0.3 * z(rng);
    }
    const GpHyper h{0.5 + trial * 0.05, 0.7 + 0.1 * (trial % 5), 0.05 + 0.02 * (trial % 4)};
    const double mean = 0.1 * (trial % 3);
    EXPECT_NEAR(gp_log_marginal_likelihood(x, y, h, mean),
                oracle::gp_lml(x, y, h.signal_variance, h.length_scale, h.noise_variance, mean), 1e-8);
  }
}

TEST(GpLikelihood, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x, y;
    for (int i = 0; i < 40; ++i) {
      const double xi = trial % 2 ? std::round(u(rng)) : u(rng);
      x.push_back(xi);
      y.push_back(std::cos(0.7 * xi) + 0.2 * z(rng));
    }
    const GpHyper h{1.0 + 0.1 * trial, 1.5, 0.08};
    LmlGradient g{};
    gp_log_marginal_likelihood(x, y, h, 0.0, &g);
    const double eps = 1e-5;
    for (int k = 0; k < 3; ++k) {
      auto shifted = [&](double delta) {
        GpHyper s = h;
        double* p = k == 0 ? &s.signal_variance : (k == 1 ? &s.length_scale : &s.noise_variance);
        *p *= std::exp(delta);
        return gp_log_marginal_likelihood(x, y, s, 0.0);
      };
      const double fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
      EXPECT_LE(std::abs(g[static_cast<std::size_t>(k)] - fd), 1e-5 * std::max(1.0, std::abs(fd)))
          << "component " << k;
    }
  }
}

TEST(GpLikelihood, RejectsBadArguments) {
  const std::vector<double> x{1, 2}, y{1, 2};
  EXPECT_THROW(gp_log_marginal_likelihood(x, std::vector<double>{1}, GpHyper{}), InvalidInput);
  EXPECT_THROW(gp_log_marginal_likelihood(x, y, GpHyper{0.0, 1.0, 1.0}), InvalidInput);
  EXPECT_THROW(GpModel::fit(std::vector<double>{1}, std::vector<double>{1}), InvalidInput);
}

TEST(GpModel, FitImprovesLikelihoodAndFactorizationReproducesKernel) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  std::vector<double> x, y;
  for (int i = 0; i < 60; ++i) {
    x.push_back(0.25 * i);
    y.push_back(2.0 * std::sin(0.8 * x.back()) + 0.1 * z(rng));
  }
  const auto model = GpModel::fit(x, y);
  const auto initial = GpModel::with_hyper(x, y, GpHyper{1.0, 1.0, 0.1});
  EXPECT_GT(model.log_marginal_likelihood(), initial.log_marginal_likelihood());
  EXPECT_NEAR(model.hyper().noise_variance, 0.01, 0.01);

  const Eigen::MatrixXd l = model.cholesky_factor();
  Eigen::MatrixXd k = model.kernel_matrix();
  k.diagonal().array() += model.jitter();
  EXPECT_LT((l * l.transpose() - k).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(k, k.transpose());
}

TEST(GpModel, HeldOutPointsWithinTwoSigma) {
  std::vector<double> x, y, xq;
  for (int i = 0; i <= 40; ++i) {
    x.push_back(0.2 * i);
    y.push_back(std::sin(x.back()) + 0.5 * x.back());
  }
  for (int i = 0; i < 40; ++i) xq.push_back(0.2 * i + 0.1);
  const auto model = GpModel::fit(x, y);
  const auto pred = model.predict(xq);
  int inside = 0;
  for (std::size_t i = 0; i < xq.size(); ++i) {
    const double truth = std::sin(xq[i]) + 0.5 * xq[i];
    if (std::abs(pred.mean[i] - truth) <= 2.0 * std::sqrt(pred.variance[i]) + 1e-6) ++inside;
  }
  EXPECT_GE(inside, 38);
}

TEST(GpModel, ZeroTargets) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6}, y(6, 0.0);
  const auto model = GpModel::fit(x, y);
  for (double m : model.predict(std::vector<double>{1.5, 3.5, 10.0}).mean) EXPECT_NEAR(m, 0.0, 1e-12);
}

TEST(ClusterCurve, SingleNoiselessLearnerIsInterpolated) {
  std::vector<double> v;
  for (int k = 0; k < 30; ++k) v.push_back(2.0 * k + 0.05 * k * k);
  const auto curve = cluster_mean_trajectory(std::vector<Trajectory>{traj("a", v)});
  ASSERT_EQ(curve.grid.size(), 30u);
  for (std::size_t k = 0; k < 30; ++k) EXPECT_NEAR(curve.mean[k], v[k], 1e-2);
}

TEST(ClusterCurve, DuplicatedLearnerGivesTheSameCurve) {
  std::vector<double> v;
  for (int k = 0; k < 30; ++k) v.push_back(1.5 * k + 3.0 * std::sin(0.3 * k));
  const auto one = cluster_mean_trajectory(std::vector<Trajectory>{traj("a", v)});
  const auto two = cluster_mean_trajectory(std::vector<Trajectory>{traj("a", v), traj("b", v)});
  for (std::size_t k = 0; k < 30; ++k) EXPECT_NEAR(one.mean[k], two.mean[k], 1e-2);
}

TEST(ClusterCurve, EarlyBirdsRunTenDaysAhead) {
  const std::vector<ArchetypeSpec> specs{{"early_bird", -10.0, 1.0, 0.0, 0, 0.0, 10, true},
                                         {"on_time", 0.0, 1.0, 0.0, 0, 0.0, 10, true}};
  const auto c = generate_cohort(specs, 120, 70.0, 5);
  TrajectoryOptions o;
  o.course_end = 70.0;
  const auto ts = build_trajectories(c.log, c.catalog, o);
  std::vector<Trajectory> early(ts.begin(), ts.begin() + 10), on_time(ts.begin() + 10, ts.end());
  const auto a = cluster_mean_trajectory(early);
  const auto b = cluster_mean_trajectory(on_time);
  // Interior tasks, away from the clamp at day 0.
  for (std::size_t k = 30; k < 110; ++k) EXPECT_NEAR(b.mean[k] - a.mean[k], 10.0, 2.0) << "task " << k + 1;
}

TEST(BayesFactor, OneClusterIsZeroAndRelabelInvariant) {
  const auto c = generate_cohort(four_archetype_preset(4), 40, 50.0, 3);
  TrajectoryOptions o;
  o.course_end = 50.0;
  const auto ts = build_trajectories(c.log, c.catalog, o);
  const CurveOptions opts;
  EXPECT_EQ(bayes_factor(Partition::all_in_one(ts.size()), ts, opts).log_k, 0.0);

  const Partition planted(c.labels);
  std::vector<int> relabelled = c.labels;
  for (int& l : relabelled) l = 3 - l;
  const auto a = bayes_factor(planted, ts, opts);
  const auto b = bayes_factor(Partition(relabelled), ts, opts);
  EXPECT_NEAR(a.log_k, b.log_k, 1e-9 * std::abs(a.log_k));
  EXPECT_GT(a.log_k, 0.0);

  // Reordering learners leaves log K unchanged.
  std::vector<Trajectory> rev(ts.rbegin(), ts.rend());
  std::vector<int> rev_labels(c.labels.rbegin(), c.labels.rend());
  EXPECT_NEAR(bayes_factor(Partition(rev_labels), rev, opts).log_k, a.log_k, 1e-9 * std::abs(a.log_k));

  double sum = 0.0;
  for (double v : a.log_likelihoods_per_cluster) sum += v;
  EXPECT_NEAR(a.log_k, sum - a.log_likelihood_whole, 1e-12 * std::abs(sum));
}

TEST(BayesFactor, ExchangeableCohortDoesNotFavourRandomSplits) {
  // A single archetype: every split of the learners is arbitrary.
  const auto c = generate_cohort({{"only", 0.0, 1.0, 0.0, 0, 0.0, 20, true}}, 60, 40.0, 8);
  TrajectoryOptions o;
  o.course_end = 40.0;
  const auto ts = build_trajectories(c.log, c.catalog, o);
  CurveOptions opts;
  opts.max_inputs = 30;
  std::vector<int> labels(20, 0);
  for (std::size_t i = 10; i < 20; ++i) labels[i] = 1;
  std::mt19937_64 shuffler(3);
  int non_positive = 0;
  for (int k = 0; k < 40; ++k) {
    std::shuffle(labels.begin(), labels.end(), shuffler);
    non_positive += bayes_factor(Partition(labels), ts, opts).log_k <= 0.0;
  }
  EXPECT_GE(non_positive, 38);
}

TEST(BayesFactor, NeighbouringClusterPairs) {
  SimGraph g;
  g.n = 4;
  g.edges = {{0, 1, 1.0, 1.0}, {1, 2, 1.0, 1.0}, {2, 3, 1.0, 1.0}};
  const auto pairs = neighboring_clusters(Partition({0, 0, 1, 2}), g);
  EXPECT_EQ(pairs, (std::vector<std::pair<int, int>>{{0, 1}, {1, 2}}));
}
