#pragma once

// Normalised variation of information between partitions.

#include "tscluster/error.hpp"
#include "tscluster/parallel.hpp"
#include "tscluster/partition.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

namespace tscluster {

namespace detail {

inline double entropy_of_counts(const std::vector<std::size_t>& counts, double n) {
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

} // namespace detail

/// VI(H, H') = (2 Omega(H, H') - Omega(H) - Omega(H')) / log N, natural-log
/// entropies over community frequencies. Lies in [0, 1].
inline double variation_of_information(const Partition& a, const Partition& b) {
  require_same_size(a, b);
  const std::size_t n = a.size();
  if (n < 2) throw InvalidInput("variation_of_information: need N >= 2");
  const double nn = static_cast<double>(n);

  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < n; ++i) ++joint[{a[i], b[i]}];
  std::vector<std::size_t> joint_counts;
  joint_counts.reserve(joint.size());
  for (const auto& [key, c] : joint) joint_counts.push_back(c);
  // Fixed summation order keeps VI(a, b) == VI(b, a) bit for bit.
  std::sort(joint_counts.begin(), joint_counts.end());

  const double h_joint = detail::entropy_of_counts(joint_counts, nn);
  auto sizes_a = a.community_sizes(), sizes_b = b.community_sizes();
  std::sort(sizes_a.begin(), sizes_a.end());
  std::sort(sizes_b.begin(), sizes_b.end());
  const double h_a = detail::entropy_of_counts(sizes_a, nn);
  const double h_b = detail::entropy_of_counts(sizes_b, nn);
  const double vi = (2.0 * h_joint - (h_a + h_b)) / std::log(nn);
  return std::clamp(vi, 0.0, 1.0);
}

/// Mean VI over all ordered pairs i != j of an ensemble.
inline double ensemble_vi(const std::vector<Partition>& partitions) {
  const std::size_t l = partitions.size();
  if (l < 2) throw InvalidInput("ensemble_vi: need at least 2 partitions");
  double sum = 0.0;
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = i + 1; j < l; ++j) {
      // Identical partitions are common at robust scales; skip the entropy work.
      if (partitions[i] == partitions[j]) continue;
      sum += 2.0 * variation_of_information(partitions[i], partitions[j]);
    }
  return sum / static_cast<double>(l * (l - 1));
}

/// VI(t, t') between the best partitions at every pair of times.
inline Eigen::MatrixXd cross_time_vi(const std::vector<Partition>& best, unsigned threads = 1) {
  const std::size_t t = best.size();
  if (t < 2) throw InvalidInput("cross_time_vi: need at least 2 times");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t));
  parallel_for(t, threads, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < t; ++j) {
      const double v = best[i] == best[j] ? 0.0 : variation_of_information(best[i], best[j]);
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  });
  return m;
}

} // namespace tscluster
