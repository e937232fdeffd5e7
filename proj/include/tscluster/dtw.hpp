#pragma once

#include "tscluster/error.hpp"
#include "tscluster/ingest.hpp"
#include "tscluster/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace tscluster {

/// Dynamic time warping distance with squared-difference cell cost and the
/// symmetric three-step pattern {(i-1,j), (i,j-1), (i-1,j-1)}. No final square
/// root and no warping window.
inline double dtw_distance(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw InvalidInput("dtw_distance: empty input");
  const std::size_t n = x.size();
  const std::size_t m = y.size();
  constexpr double inf = std::numeric_limits<double>::infinity();

  // Two rows of the cumulative cost matrix.
  std::vector<double> prev(m, inf);
  std::vector<double> curr(m, inf);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double diff = x[i] - y[j];
      const double cost = diff * diff;
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = inf;
        if (i > 0) best = std::min(best, prev[j]);
        if (j > 0) best = std::min(best, curr[j - 1]);
        if (i > 0 && j > 0) best = std::min(best, prev[j - 1]);
      }
      curr[j] = best + cost;
    }
    std::swap(prev, curr);
  }
  return prev[m - 1];
}

enum class SigmaRule { fixed, median_distance };

struct KernelConfig {
  SigmaRule rule = SigmaRule::median_distance;
  double sigma2 = 1.0; // used when rule == fixed
};

/// exp(-d / sigma2).
inline double dtw_kernel(double d, double sigma2) {
  if (!(sigma2 > 0.0)) throw InvalidInput("dtw_kernel: sigma2 must be > 0");
  if (d < 0.0) throw InvalidInput("dtw_kernel: distance must be >= 0");
  return std::exp(-d / sigma2);
}

/// Resolves sigma^2 from the config and the distance matrix. The median rule
/// falls back to the mean positive distance when the median is zero, and to 1
/// when every distance is zero.
inline double resolve_sigma2(const Eigen::MatrixXd& distances, const KernelConfig& cfg) {
  if (cfg.rule == SigmaRule::fixed) {
    if (!(cfg.sigma2 > 0.0)) throw InvalidInput("sigma2 must be > 0 for the fixed rule");
    return cfg.sigma2;
  }
  const Eigen::Index n = distances.rows();
  std::vector<double> off;
  off.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) off.push_back(distances(i, j));
  if (off.empty()) throw InvalidInput("median rule needs at least two series");
  std::sort(off.begin(), off.end());
  const std::size_t k = off.size();
  const double median = k % 2 == 1 ? off[k / 2] : 0.5 * (off[k / 2 - 1] + off[k / 2]);
  if (median > 0.0) return median;
  double sum = 0.0;
  std::size_t positive = 0;
  for (double d : off)
    if (d > 0.0) {
      sum += d;
      ++positive;
    }
  return positive > 0 ? sum / static_cast<double>(positive) : 1.0;
}

struct SimilarityMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd distances;    // D, symmetric, zero diagonal
  Eigen::MatrixXd similarities; // A = exp(-D / sigma2), unit diagonal
  double sigma2 = 1.0;

  std::size_t size() const noexcept { return ids.size(); }
};

/// Pairwise DTW distances and kernel similarities of equal-length trajectories.
inline SimilarityMatrix similarity_matrix(const std::vector<Trajectory>& trajectories,
                                          const KernelConfig& cfg = {}, unsigned threads = 1) {
  const std::size_t n = trajectories.size();
  if (n < 2) throw InvalidInput("similarity_matrix: need at least 2 trajectories");
  const std::size_t len = trajectories.front().size();
  for (const auto& t : trajectories) {
    if (t.size() != len)
      throw InvalidInput("similarity_matrix: length mismatch for learner '" + t.learner_id + "' (" +
                         std::to_string(t.size()) + " vs " + std::to_string(len) + ")");
    for (double v : t.values)
      if (!std::isfinite(v)) throw InvalidInput("non-finite value in trajectory " + t.learner_id);
  }

  SimilarityMatrix out;
  out.ids.reserve(n);
  for (const auto& t : trajectories) out.ids.push_back(t.learner_id);
  const auto ni = static_cast<Eigen::Index>(n);
  out.distances = Eigen::MatrixXd::Zero(ni, ni);

  // Row i owns the pairs (i, j > i); each slot is written exactly once.
  parallel_for(n, threads, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = dtw_distance(trajectories[i].values, trajectories[j].values);
      out.distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
      out.distances(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
    }
  });

  out.sigma2 = resolve_sigma2(out.distances, cfg);
  out.similarities = (-out.distances.array() / out.sigma2).exp().matrix();
  return out;
}

} // namespace tscluster
