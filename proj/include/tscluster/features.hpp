#pragma once

// Per-learner temporal statistics.

#include "tscluster/error.hpp"
#include "tscluster/ingest.hpp"

#include <cmath>
#include <span>
#include <set>
#include <vector>

namespace tscluster {

struct PlateauRun {
  std::size_t start = 0;
  std::size_t length = 0;
  double level = 0.0;
};

struct IsotonicFit {
  std::vector<double> fitted; // non-decreasing
  double sse = 0.0;           // ||y - fitted||^2
  std::vector<PlateauRun> runs;
};

/// Least-squares non-decreasing fit by pool-adjacent-violators.
inline IsotonicFit isotonic_fit(std::span<const double> y) {
  if (y.empty()) throw InvalidInput("isotonic_fit: empty input");
  for (double v : y)
    if (!std::isfinite(v)) throw InvalidInput("isotonic_fit: non-finite input");

  struct Block {
    double sum;
    std::size_t count;
    double mean() const { return sum / static_cast<double>(count); }
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (double v : y) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      const Block top = blocks.back();
      blocks.pop_back();
      blocks.back().sum += top.sum;
      blocks.back().count += top.count;
    }
  }

  IsotonicFit fit;
  fit.fitted.reserve(y.size());
  std::size_t start = 0;
  for (const auto& b : blocks) {
    const double level = b.mean();
    fit.runs.push_back({start, b.count, level});
    for (std::size_t k = 0; k < b.count; ++k) fit.fitted.push_back(level);
    start += b.count;
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - fit.fitted[i];
    fit.sse += r * r;
  }
  return fit;
}

struct SessionSummary {
  std::vector<std::size_t> lengths; // partition the task range
  double mean_massed_length = 1.0;  // mean over runs of length >= 2, else 1
};

/// Splits a non-decreasing sequence into maximal runs whose values stay within
/// `level_tol` of the run's first value.
inline SessionSummary sessions_from_fitted(std::span<const double> fitted, double level_tol) {
  if (fitted.empty()) throw InvalidInput("massed_sessions: empty trajectory");
  if (!(level_tol >= 0.0)) throw InvalidInput("massed_sessions: level_tol must be >= 0");
  SessionSummary s;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= fitted.size(); ++i) {
    if (i == fitted.size() || fitted[i] - fitted[start] > level_tol) {
      s.lengths.push_back(i - start);
      start = i;
    }
  }
  double sum = 0.0;
  std::size_t massed = 0;
  for (std::size_t len : s.lengths)
    if (len >= 2) {
      sum += static_cast<double>(len);
      ++massed;
    }
  s.mean_massed_length = massed > 0 ? sum / static_cast<double>(massed) : 1.0;
  return s;
}

/// Massed (binge) sessions: plateaus of the isotonic fit of completion time
/// against task index.
inline SessionSummary massed_sessions(std::span<const double> completion_times, double level_tol = 0.5) {
  if (completion_times.empty()) throw InvalidInput("massed_sessions: empty trajectory");
  const auto fit = isotonic_fit(completion_times);
  return sessions_from_fitted(fit.fitted, level_tol);
}

inline SessionSummary massed_sessions(const Trajectory& traj, double level_tol = 0.5) {
  return massed_sessions(std::span<const double>(traj.values), level_tol);
}

/// 100 * distinct catalog tasks completed / M.
inline double completion_percentage(const EventLog& log, const TaskCatalog& catalog,
                                    const std::string& learner_id) {
  std::set<std::size_t> done;
  bool found = false;
  for (const auto& r : log.records) {
    if (r.learner_id != learner_id) continue;
    found = true;
    if (auto idx = catalog.index_of(r.task_id)) done.insert(*idx);
  }
  if (!found) throw InvalidInput("unknown learner '" + learner_id + "'");
  return 100.0 * static_cast<double>(done.size()) / static_cast<double>(catalog.size());
}

struct LearnerStats {
  std::string learner_id;
  double mean_massed_session_length = 1.0;
  double completion_pct = 0.0;
};

/// Session statistics use completed tasks only, in catalog order.
inline LearnerStats learner_stats(const EventLog& log, const TaskCatalog& catalog,
                                  const std::string& learner_id, double level_tol = 0.5) {
  TrajectoryOptions opts;
  opts.missing = MissingPolicy::drop;
  opts.skip_unknown_tasks = true;
  const auto traj = build_trajectory(log, catalog, learner_id, opts);
  LearnerStats s;
  s.learner_id = learner_id;
  s.completion_pct = completion_percentage(log, catalog, learner_id);
  s.mean_massed_session_length = traj.values.empty() ? 1.0 : massed_sessions(traj, level_tol).mean_massed_length;
  return s;
}

} // namespace tscluster
