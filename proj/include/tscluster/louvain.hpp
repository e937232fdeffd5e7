#pragma once

#include "tscluster/error.hpp"
#include "tscluster/partition.hpp"
#include "tscluster/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

namespace tscluster {

/// Tr H^T B H: sum of B over node pairs that share a community (diagonal included).
inline double partition_quality(const Eigen::MatrixXd& b, const Partition& p) {
  if (static_cast<Eigen::Index>(p.size()) != b.rows()) throw InvalidInput("partition size mismatch");
  double q = 0.0;
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      if (p[static_cast<std::size_t>(i)] == p[static_cast<std::size_t>(j)]) q += b(i, j);
  return q;
}

namespace detail {

// One local-moving phase on a dense quality matrix. Nodes are visited in seeded
// random order; each moves to the community with the largest strictly positive
// gain, ties going to the lowest community index. Returns true if any node moved.
inline bool louvain_local_moves(const Eigen::MatrixXd& b, std::vector<int>& community, Rng& rng,
                                double tol) {
  const std::size_t n = community.size();
  const auto order = random_permutation(n, rng);
  std::vector<double> link(n, 0.0);
  std::vector<int> size(n, 0);
  for (int c : community) ++size[static_cast<std::size_t>(c)];

  bool moved_any = false;
  for (int sweep = 0; sweep < 1000; ++sweep) {
    bool moved = false;
    for (std::size_t node : order) {
      const int from = community[node];
      std::fill(link.begin(), link.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j)
        if (j != node) link[static_cast<std::size_t>(community[j])] += b(static_cast<Eigen::Index>(node), static_cast<Eigen::Index>(j));

      // Gain of moving node from `from` to c is 2 (link[c] - link[from]); an
      // empty community has link 0.
      int best = from;
      double best_gain = tol;
      int empty = -1;
      for (std::size_t c = 0; c < n; ++c) {
        if (static_cast<int>(c) == from) continue;
        if (size[c] == 0) {
          if (empty < 0) empty = static_cast<int>(c);
          continue;
        }
        const double gain = 2.0 * (link[c] - link[static_cast<std::size_t>(from)]);
        if (gain > best_gain) {
          best_gain = gain;
          best = static_cast<int>(c);
        }
      }
      if (empty >= 0 && size[static_cast<std::size_t>(from)] > 1) {
        const double gain = -2.0 * link[static_cast<std::size_t>(from)];
        if (gain > best_gain) {
          best_gain = gain;
          best = empty;
        }
      }
      if (best != from) {
        --size[static_cast<std::size_t>(from)];
        ++size[static_cast<std::size_t>(best)];
        community[node] = best;
        moved = true;
        moved_any = true;
      }
    }
    if (!moved) break;
  }
  return moved_any;
}

} // namespace detail

/// Greedy two-phase (local moves, aggregation) maximisation of Tr H^T B H for a
/// dense quality matrix B. B is symmetrised first. Deterministic for a given seed.
inline Partition louvain_optimize(const Eigen::MatrixXd& quality, std::uint64_t seed) {
  if (quality.rows() != quality.cols()) throw InvalidInput("louvain: quality matrix must be square");
  if (!quality.allFinite()) throw InvalidInput("louvain: quality matrix has non-finite entries");
  const std::size_t n = static_cast<std::size_t>(quality.rows());
  if (n == 0) return Partition{};

  Eigen::MatrixXd b = 0.5 * (quality + quality.transpose());
  const double tol = 1e-13 * std::max(1e-300, b.cwiseAbs().maxCoeff());
  Rng rng(seed);

  std::vector<int> node_to_block(n);
  for (std::size_t i = 0; i < n; ++i) node_to_block[i] = static_cast<int>(i);

  for (;;) {
    const std::size_t k = static_cast<std::size_t>(b.rows());
    std::vector<int> community(k);
    for (std::size_t i = 0; i < k; ++i) community[i] = static_cast<int>(i);
    if (!detail::louvain_local_moves(b, community, rng, tol)) break;

    // Aggregate: one super-node per non-empty community.
    const Partition level(community);
    const auto c = static_cast<Eigen::Index>(level.count());
    Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(c, c);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        agg(level[i], level[j]) += b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    for (auto& blk : node_to_block) blk = level[static_cast<std::size_t>(blk)];
    b = 0.5 * (agg + agg.transpose());
    if (c == 1) break;
  }
  return Partition(node_to_block);
}

} // namespace tscluster
