#pragma once

// In-memory version of the similarity -> graph -> scan -> select chain, for
// tests that sweep settings without touching the filesystem.

#include "tscluster/dtw.hpp"
#include "tscluster/ingest.hpp"
#include "tscluster/rmst.hpp"
#include "tscluster/robustness.hpp"
#include "tscluster/scan.hpp"
#include "tscluster/stability.hpp"
#include "tscluster/synth.hpp"

#include <optional>
#include <vector>

namespace analysis {

struct Settings {
  double gamma = 0.5;
  int n_times = 60;
  int restarts = 20;
  std::uint64_t seed = 1;
  tscluster::LaplacianMode mode = tscluster::LaplacianMode::normalized;
};

struct Result {
  tscluster::ScanResult scan;
  std::vector<tscluster::RobustScale> selected;

  // Highest-ranked selected scale that is not all-singletons or one block.
  std::optional<tscluster::Partition> top_nontrivial() const {
    for (const auto& s : selected)
      if (!s.trivial) return scan.best[s.index];
    return std::nullopt;
  }
};

inline std::vector<tscluster::Trajectory> trajectories(const tscluster::Cohort& c) {
  tscluster::TrajectoryOptions o;
  o.course_end = c.course_end;
  return tscluster::build_trajectories(c.log, c.catalog, o);
}

inline Result run(const tscluster::SimilarityMatrix& sim, const Settings& s) {
  const auto g = tscluster::rmst_graph(sim, {s.gamma, 1});
  tscluster::ScanConfig cfg;
  cfg.time_grid = tscluster::ScanConfig::log_grid(1e-2, 1e2, s.n_times);
  cfg.restarts = s.restarts;
  cfg.seed = s.seed;
  cfg.keep_ensembles = false;
  Result r;
  r.scan = tscluster::scan(tscluster::build_system(g, s.mode), cfg);
  r.selected = tscluster::select_robust(r.scan);
  return r;
}

inline Result run(const tscluster::Cohort& c, const Settings& s) {
  return run(tscluster::similarity_matrix(trajectories(c)), s);
}

} // namespace analysis
