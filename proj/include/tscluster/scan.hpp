#pragma once

// Multiscale sweep: optimise Markov Stability at every Markov time with an
// ensemble of seeded Louvain restarts.

#include "tscluster/error.hpp"
#include "tscluster/louvain.hpp"
#include "tscluster/parallel.hpp"
#include "tscluster/partition.hpp"
#include "tscluster/random.hpp"
#include "tscluster/stability.hpp"
#include "tscluster/vi.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace tscluster {

struct ScanConfig {
  std::vector<double> time_grid = log_grid(1e-2, 1e2, 100);
  int restarts = 100;
  std::uint64_t seed = 0;
  bool use_linearised = false;
  unsigned threads = 1;
  bool keep_ensembles = true;

  /// `count` log-spaced points covering [lo, hi].
  static std::vector<double> log_grid(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2) throw InvalidInput("log_grid: need 0 < lo < hi, count >= 2");
    std::vector<double> out(static_cast<std::size_t>(count));
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (int i = 0; i < count; ++i)
      out[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (count - 1));
    return out;
  }

  void validate() const {
    if (time_grid.empty()) throw InvalidInput("scan: empty time grid");
    for (std::size_t i = 0; i < time_grid.size(); ++i) {
      if (!(time_grid[i] > 0.0) || !std::isfinite(time_grid[i]))
        throw InvalidInput("scan: Markov times must be positive and finite");
      if (i > 0 && !(time_grid[i] > time_grid[i - 1]))
        throw InvalidInput("scan: time grid must be strictly increasing");
    }
    if (restarts < 1) throw InvalidInput("scan: restarts must be >= 1");
  }
};

/// A selected robust scale.
struct RobustScale {
  std::size_t index = 0; // grid index of the chosen time
  double t = 0.0;
  int n_communities = 0;
  std::size_t plateau_begin = 0; // inclusive grid indices
  std::size_t plateau_end = 0;
  double plateau_decades = 0.0;
  double block_vi = 0.0; // mean VI(t, t') inside the plateau
  double vi_t = 0.0;
  bool trivial = false; // all singletons or one community

  friend bool operator==(const RobustScale&, const RobustScale&) = default;
};

struct ScanResult {
  std::vector<double> times;
  std::vector<Partition> best;                  // \hat H(t)
  std::vector<std::vector<Partition>> ensemble; // optimised restarts per time (may be empty)
  std::vector<double> r_star;                   // r(t, \hat H(t))
  std::vector<double> vi_t;                     // ensemble VI(t)
  std::vector<int> n_communities;
  Eigen::MatrixXd vi_tt; // VI(\hat H(t), \hat H(t'))
  std::vector<RobustScale> selected;

  std::size_t size() const noexcept { return times.size(); }
};

/// Optimises stability at every grid time. Restart `run` at grid index `ti` is
/// seeded with derive_seed(seed, ti, run), so the result does not depend on the
/// thread schedule. Among the restarts the partition with the largest r(t, H)
/// wins (first one on ties).
inline ScanResult scan(const LaplacianSystem& sys, const ScanConfig& cfg) {
  cfg.validate();
  const std::size_t nt = cfg.time_grid.size();
  const std::size_t runs = static_cast<std::size_t>(cfg.restarts);

  ScanResult out;
  out.times = cfg.time_grid;
  out.best.resize(nt);
  out.r_star.assign(nt, 0.0);
  out.vi_t.assign(nt, 0.0);
  out.n_communities.assign(nt, 0);
  out.ensemble.resize(nt);

  parallel_for(nt, cfg.threads, [&](std::size_t ti) {
    const double t = cfg.time_grid[ti];
    Eigen::MatrixXd b;
    try {
      b = sys.stability_matrix(t, cfg.use_linearised);
    } catch (const std::exception& e) {
      throw NumericalError("propagator failure at t=" + std::to_string(t) + ": " + e.what());
    }
    if (!b.allFinite()) throw NumericalError("propagator failure at t=" + std::to_string(t));

    const std::span<const double> taus(cfg.time_grid.data(), ti + 1);
    std::vector<Partition> ensemble;
    ensemble.reserve(runs);
    double best_r = -std::numeric_limits<double>::infinity();
    std::size_t best_run = 0;
    for (std::size_t run = 0; run < runs; ++run) {
      Partition p = louvain_optimize(b, derive_seed(cfg.seed, ti, run));
      // Reuse an identical earlier restart's stability.
      std::size_t same = run;
      for (std::size_t k = 0; k < run; ++k)
        if (ensemble[k] == p) {
          same = k;
          break;
        }
      if (same == run) {
        const auto curve = sys.trace_curve(p, taus, cfg.use_linearised);
        const double r = *std::min_element(curve.begin(), curve.end());
        if (r > best_r) {
          best_r = r;
          best_run = run;
        }
      }
      ensemble.push_back(std::move(p));
    }
    out.best[ti] = ensemble[best_run];
    out.r_star[ti] = best_r;
    out.n_communities[ti] = out.best[ti].count();
    out.vi_t[ti] = runs >= 2 ? ensemble_vi(ensemble) : 0.0;
    if (cfg.keep_ensembles) out.ensemble[ti] = std::move(ensemble);
  });
  if (!cfg.keep_ensembles) out.ensemble.clear();

  out.vi_tt = nt >= 2 ? cross_time_vi(out.best, cfg.threads) : Eigen::MatrixXd::Zero(1, 1);
  return out;
}

} // namespace tscluster
