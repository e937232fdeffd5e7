#pragma once

// Graph sparsification: minimum spanning tree and the relaxed MST rule.

#include "tscluster/dtw.hpp"
#include "tscluster/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>
#include <vector>

namespace tscluster {

struct Edge {
  int u = 0; // u < v
  int v = 0;
  double distance = 0.0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct RmstConfig {
  double gamma = 0.5;
  int k = 1;
};

/// Undirected weighted graph; edges sorted by (u, v).
struct SimGraph {
  int n = 0;
  std::vector<Edge> edges;

  Eigen::MatrixXd adjacency() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : edges) {
      a(e.u, e.v) = e.weight;
      a(e.v, e.u) = e.weight;
    }
    return a;
  }

  bool connected() const {
    if (n <= 1) return true;
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const auto& e : edges) {
      adj[static_cast<std::size_t>(e.u)].push_back(e.v);
      adj[static_cast<std::size_t>(e.v)].push_back(e.u);
    }
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::vector<int> stack{0};
    seen[0] = true;
    int visited = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : adj[static_cast<std::size_t>(u)])
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = true;
          ++visited;
          stack.push_back(v);
        }
    }
    return visited == n;
  }

  bool has_edge(int u, int v) const {
    if (u > v) std::swap(u, v);
    return std::binary_search(edges.begin(), edges.end(), Edge{u, v, 0.0, 0.0},
                              [](const Edge& a, const Edge& b) {
                                return std::tie(a.u, a.v) < std::tie(b.u, b.v);
                              });
  }
};

inline void validate_distance_matrix(const Eigen::MatrixXd& d) {
  if (d.rows() != d.cols()) throw InvalidInput("distance matrix must be square");
  if (d.rows() < 2) throw InvalidInput("distance matrix needs n >= 2");
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (d(i, i) != 0.0) throw InvalidInput("distance matrix must have a zero diagonal");
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      if (!std::isfinite(d(i, j))) throw InvalidInput("distance matrix has non-finite entries");
      if (d(i, j) != d(j, i)) throw InvalidInput("distance matrix is not symmetric");
      if (d(i, j) < 0.0) throw InvalidInput("distance matrix has negative entries");
    }
  }
}

namespace detail {

struct DisjointSets {
  std::vector<int> parent, rank;
  explicit DisjointSets(int n) : parent(static_cast<std::size_t>(n)), rank(static_cast<std::size_t>(n), 0) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)]) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
    if (rank[static_cast<std::size_t>(a)] == rank[static_cast<std::size_t>(b)]) ++rank[static_cast<std::size_t>(a)];
    return true;
  }
};

// Largest edge distance on the tree path between every pair of nodes.
inline Eigen::MatrixXd minimax_path_lengths(int n, const std::vector<Edge>& tree) {
  std::vector<std::vector<std::pair<int, double>>> adj(static_cast<std::size_t>(n));
  for (const auto& e : tree) {
    adj[static_cast<std::size_t>(e.u)].emplace_back(e.v, e.distance);
    adj[static_cast<std::size_t>(e.v)].emplace_back(e.u, e.distance);
  }
  Eigen::MatrixXd mlink = Eigen::MatrixXd::Zero(n, n);
  std::vector<int> stack;
  std::vector<int> from(static_cast<std::size_t>(n));
  for (int root = 0; root < n; ++root) {
    std::fill(from.begin(), from.end(), -1);
    from[static_cast<std::size_t>(root)] = root;
    stack.assign(1, root);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (auto [v, w] : adj[static_cast<std::size_t>(u)]) {
        if (from[static_cast<std::size_t>(v)] != -1) continue;
        from[static_cast<std::size_t>(v)] = u;
        mlink(root, v) = std::max(mlink(root, u), w);
        stack.push_back(v);
      }
    }
  }
  return mlink;
}

// Distance from each node to its k-th nearest other node.
inline std::vector<double> kth_neighbor_distance(const Eigen::MatrixXd& d, int k) {
  const Eigen::Index n = d.rows();
  std::vector<double> out(static_cast<std::size_t>(n));
  std::vector<double> row;
  for (Eigen::Index i = 0; i < n; ++i) {
    row.clear();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) row.push_back(d(i, j));
    std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
    out[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(k - 1)];
  }
  return out;
}

inline void sort_edges(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end(),
            [](const Edge& a, const Edge& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
}

} // namespace detail

/// Kruskal over edges ordered by (distance, u, v); the tie-break makes the tree
/// reproducible when distances repeat. Edge weights are left at zero.
inline std::vector<Edge> minimum_spanning_tree(const Eigen::MatrixXd& d) {
  validate_distance_matrix(d);
  const int n = static_cast<int>(d.rows());
  std::vector<Edge> candidates;
  candidates.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) candidates.push_back({i, j, d(i, j), 0.0});
  std::sort(candidates.begin(), candidates.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.distance, a.u, a.v) < std::tie(b.distance, b.u, b.v);
  });
  detail::DisjointSets sets(n);
  std::vector<Edge> tree;
  tree.reserve(static_cast<std::size_t>(n - 1));
  for (const auto& e : candidates) {
    if (sets.unite(e.u, e.v)) {
      tree.push_back(e);
      if (static_cast<int>(tree.size()) == n - 1) break;
    }
  }
  detail::sort_edges(tree);
  return tree;
}

/// Relaxed minimum spanning tree. Keeps edge (i, j) iff
///   d_ij <= mlink_ij + gamma * (d_i^(k) + d_j^(k)),
/// where mlink_ij is the largest distance on the MST path between i and j and
/// d_i^(k) is the distance from i to its k-th nearest neighbour. Retained edges
/// carry the weights in `weights` (kernel similarities).
inline SimGraph rmst_graph(const Eigen::MatrixXd& d, const Eigen::MatrixXd& weights,
                           const RmstConfig& cfg = {}) {
  validate_distance_matrix(d);
  const int n = static_cast<int>(d.rows());
  if (!(cfg.gamma >= 0.0) || !std::isfinite(cfg.gamma)) throw InvalidInput("rmst: gamma must be >= 0");
  if (cfg.k < 1 || cfg.k >= n) throw InvalidInput("rmst: k must satisfy 1 <= k < n");
  if (weights.rows() != d.rows() || weights.cols() != d.cols())
    throw InvalidInput("rmst: weight matrix shape mismatch");

  const auto tree = minimum_spanning_tree(d);
  const Eigen::MatrixXd mlink = detail::minimax_path_lengths(n, tree);
  const auto knn = detail::kth_neighbor_distance(d, cfg.k);

  SimGraph g;
  g.n = n;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double allowance =
          cfg.gamma * (knn[static_cast<std::size_t>(i)] + knn[static_cast<std::size_t>(j)]);
      if (d(i, j) <= mlink(i, j) + allowance) g.edges.push_back({i, j, d(i, j), weights(i, j)});
    }
  }
  if (!g.connected()) throw NumericalError("rmst produced a disconnected graph");
  return g;
}

inline SimGraph rmst_graph(const SimilarityMatrix& s, const RmstConfig& cfg = {}) {
  return rmst_graph(s.distances, s.similarities, cfg);
}

/// Symmetric k-nearest-neighbour graph united with the MST (so it stays connected).
inline SimGraph knn_graph(const Eigen::MatrixXd& d, const Eigen::MatrixXd& weights, int k) {
  validate_distance_matrix(d);
  const int n = static_cast<int>(d.rows());
  if (k < 1 || k >= n) throw InvalidInput("knn: k must satisfy 1 <= k < n");
  const auto knn = detail::kth_neighbor_distance(d, k);
  const auto tree = minimum_spanning_tree(d);
  SimGraph g;
  g.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (d(i, j) <= knn[static_cast<std::size_t>(i)] || d(i, j) <= knn[static_cast<std::size_t>(j)])
        g.edges.push_back({i, j, d(i, j), weights(i, j)});
  for (const auto& e : tree)
    if (!g.has_edge(e.u, e.v)) {
      g.edges.push_back({e.u, e.v, e.distance, weights(e.u, e.v)});
      detail::sort_edges(g.edges);
    }
  return g;
}

} // namespace tscluster
