#pragma once

// Markov Stability: random-walk Laplacians, block auto-covariance and the
// stability objective, all evaluated through one symmetric eigendecomposition.

#include "tscluster/error.hpp"
#include "tscluster/partition.hpp"
#include "tscluster/rmst.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace tscluster {

enum class LaplacianMode { combinatorial, normalized };

struct StabilityEvaluation {
  double t = 0.0;
  Eigen::MatrixXd autocovariance; // c x c block auto-covariance R(t, H)
  double trace = 0.0;
};

/// Continuous-time random walk on a connected weighted graph.
///
/// combinatorial: L = D - A, stationary distribution uniform.
/// normalized:    L = I - D^{-1} A, stationary distribution proportional to degree.
///
/// In both modes Pi^{1/2} L Pi^{-1/2} is symmetric, so
///   Pi e^{-tL} = V e^{-t Lambda} V^T,  V = Pi^{1/2} U,
/// with U, Lambda the eigenpairs of the symmetrized operator. Every quantity below
/// is evaluated from that factorization.
class LaplacianSystem {
public:
  LaplacianSystem(const Eigen::MatrixXd& adjacency, LaplacianMode mode) : mode_(mode) {
    const Eigen::Index n = adjacency.rows();
    if (n < 2 || adjacency.cols() != n) throw InvalidInput("adjacency must be square with n >= 2");
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double a = adjacency(i, j);
        if (!std::isfinite(a) || a < 0.0) throw InvalidInput("adjacency must be finite and >= 0");
        if (a != adjacency(j, i)) throw InvalidInput("adjacency must be symmetric");
      }
    Eigen::MatrixXd a = adjacency;
    a.diagonal().setZero();
    const Eigen::VectorXd degree = a.rowwise().sum();
    for (Eigen::Index i = 0; i < n; ++i)
      if (!(degree(i) > 0.0)) throw InvalidInput("node " + std::to_string(i) + " has zero degree");
    if (!is_connected(a)) throw InvalidInput("graph is disconnected");

    Eigen::MatrixXd sym;
    if (mode == LaplacianMode::combinatorial) {
      laplacian_ = Eigen::MatrixXd(degree.asDiagonal()) - a;
      pi_ = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
      sym = laplacian_;
    } else {
      const Eigen::VectorXd inv_deg = degree.cwiseInverse();
      laplacian_ = Eigen::MatrixXd::Identity(n, n) - inv_deg.asDiagonal() * a;
      pi_ = degree / degree.sum();
      const Eigen::VectorXd inv_sqrt = degree.cwiseSqrt().cwiseInverse();
      sym = Eigen::MatrixXd::Identity(n, n) - inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
    }
    sym = 0.5 * (sym + sym.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    // Clamp round-off below zero: the operator is positive semi-definite.
    eigenvalues_ = eig.eigenvalues().cwiseMax(0.0);
    eigenvectors_ = eig.eigenvectors();
    const Eigen::VectorXd sqrt_pi = pi_.cwiseSqrt();
    weighted_ = sqrt_pi.asDiagonal() * eigenvectors_;
  }

  LaplacianSystem(const SimGraph& g, LaplacianMode mode) : LaplacianSystem(g.adjacency(), mode) {}

  LaplacianMode mode() const noexcept { return mode_; }
  Eigen::Index size() const noexcept { return pi_.size(); }
  const Eigen::MatrixXd& laplacian() const noexcept { return laplacian_; }
  const Eigen::VectorXd& stationary() const noexcept { return pi_; }
  const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }

  /// e^{-tL}; rows sum to one.
  Eigen::MatrixXd propagator(double t) const {
    const Eigen::VectorXd sqrt_pi = pi_.cwiseSqrt();
    const Eigen::VectorXd decay = (-t * eigenvalues_).array().exp().matrix();
    return sqrt_pi.cwiseInverse().asDiagonal() *
           (eigenvectors_ * decay.asDiagonal() * eigenvectors_.transpose()) * sqrt_pi.asDiagonal();
  }

  /// Pi e^{-tL} - pi^T pi, or Pi (I - tL) - pi^T pi when linearised.
  Eigen::MatrixXd stability_matrix(double t, bool linearised = false) const {
    check_time(t);
    Eigen::MatrixXd b;
    if (linearised) {
      b = Eigen::MatrixXd(pi_.asDiagonal()) - t * (pi_.asDiagonal() * laplacian_);
    } else {
      const Eigen::VectorXd decay = (-t * eigenvalues_).array().exp().matrix();
      b = weighted_ * decay.asDiagonal() * weighted_.transpose();
    }
    b.noalias() -= pi_ * pi_.transpose();
    return 0.5 * (b + b.transpose());
  }

  /// Squared norms of the community projections of each spectral mode; together
  /// with the mode decays they give Tr R(t, H) for any t in O(n).
  Eigen::VectorXd mode_weights(const Partition& p) const {
    check_partition(p);
    Eigen::MatrixXd projected = Eigen::MatrixXd::Zero(p.count(), size());
    for (Eigen::Index i = 0; i < size(); ++i)
      projected.row(p[static_cast<std::size_t>(i)]) += weighted_.row(i);
    return projected.colwise().squaredNorm().transpose();
  }

  double community_mass_squared(const Partition& p) const {
    check_partition(p);
    std::vector<double> mass(static_cast<std::size_t>(p.count()), 0.0);
    for (Eigen::Index i = 0; i < size(); ++i) mass[static_cast<std::size_t>(p[static_cast<std::size_t>(i)])] += pi_(i);
    double s = 0.0;
    for (double m : mass) s += m * m;
    return s;
  }

  /// Tr R(t, H).
  double trace_autocovariance(const Partition& p, double t, bool linearised = false) const {
    check_time(t);
    return trace_from_weights(mode_weights(p), community_mass_squared(p), t, linearised);
  }

  /// Tr R(tau, H) for every tau in `times`.
  std::vector<double> trace_curve(const Partition& p, std::span<const double> times,
                                  bool linearised = false) const {
    const Eigen::VectorXd w = mode_weights(p);
    const double mass2 = community_mass_squared(p);
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) {
      check_time(t);
      out.push_back(trace_from_weights(w, mass2, t, linearised));
    }
    return out;
  }

  double trace_from_weights(const Eigen::VectorXd& w, double mass2, double t, bool linearised) const {
    double s = 0.0;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      const double decay = linearised ? 1.0 - t * eigenvalues_(k) : std::exp(-t * eigenvalues_(k));
      s += decay * w(k);
    }
    return s - mass2;
  }

private:
  static bool is_connected(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::vector<Eigen::Index> stack{0};
    seen[0] = true;
    Eigen::Index visited = 1;
    while (!stack.empty()) {
      const Eigen::Index u = stack.back();
      stack.pop_back();
      for (Eigen::Index v = 0; v < n; ++v)
        if (a(u, v) > 0.0 && !seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = true;
          ++visited;
          stack.push_back(v);
        }
    }
    return visited == n;
  }

  static void check_time(double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidInput("Markov time must be finite and >= 0");
  }

  void check_partition(const Partition& p) const {
    if (static_cast<Eigen::Index>(p.size()) != size())
      throw InvalidInput("partition size " + std::to_string(p.size()) + " does not match graph size " +
                         std::to_string(size()));
  }

  LaplacianMode mode_;
  Eigen::MatrixXd laplacian_;
  Eigen::VectorXd pi_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  Eigen::MatrixXd weighted_;
};

inline LaplacianSystem build_system(const SimGraph& g, LaplacianMode mode = LaplacianMode::combinatorial) {
  return LaplacianSystem(g, mode);
}

/// R(t; H) = H^T (Pi e^{-tL} - pi^T pi) H.
inline StabilityEvaluation block_autocovariance(const LaplacianSystem& sys, const Partition& p, double t,
                                                bool linearised = false) {
  if (static_cast<Eigen::Index>(p.size()) != sys.size())
    throw InvalidInput("partition size does not match graph size");
  const Eigen::MatrixXd h = p.membership();
  StabilityEvaluation ev;
  ev.t = t;
  ev.autocovariance = h.transpose() * sys.stability_matrix(t, linearised) * h;
  ev.trace = ev.autocovariance.trace();
  return ev;
}

/// Markov Stability r(t, H): running minimum of Tr R(tau, H) over grid times tau <= t.
inline double stability(const LaplacianSystem& sys, const Partition& p, double t,
                        std::span<const double> tau_grid, bool linearised = false) {
  if (tau_grid.empty()) throw InvalidInput("stability: empty time grid");
  std::vector<double> taus;
  for (double tau : tau_grid)
    if (tau <= t) taus.push_back(tau);
  if (taus.empty()) throw InvalidInput("stability: no grid time <= t");
  const auto curve = sys.trace_curve(p, taus, linearised);
  return *std::min_element(curve.begin(), curve.end());
}

} // namespace tscluster
