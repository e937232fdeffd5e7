#pragma once

// Synthetic cohorts with planted behavioural archetypes, and recovery scoring.

#include "tscluster/error.hpp"
#include "tscluster/ingest.hpp"
#include "tscluster/partition.hpp"
#include "tscluster/random.hpp"
#include "tscluster/vi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace tscluster {

/// One behavioural archetype. Every learner follows the linear reference
/// schedule shifted by `offset_days`, with per-task normal jitter truncated at
/// three standard deviations. With `binge_block` > 0 the catalog is cut into
/// consecutive blocks of `binge_block` tasks (shared deadlines), and each block is
/// completed in one sitting `binge_gap_days` after the reference time of its last
/// task; jitter then applies per block. Skipped tasks emit no event. Ordered
/// archetypes complete tasks in layout order.
struct ArchetypeSpec {
  std::string name;
  double offset_days = 0.0;
  double jitter_days = 0.0;
  double skip_probability = 0.0;
  int binge_block = 0;
  double binge_gap_days = 0.0;
  int count = 0;
  bool ordered = true;
};

struct Cohort {
  EventLog log;
  TaskCatalog catalog;
  std::vector<std::string> learner_ids; // sorted, same order as build_trajectories
  std::vector<int> labels;              // planted archetype index per learner
  std::vector<std::string> archetypes;
  double course_end = 0.0;
};

/// Reference completion time of 0-based task k out of m over the span.
inline double reference_time(std::size_t k, std::size_t m, double span_days) {
  return span_days * static_cast<double>(k + 1) / static_cast<double>(m + 1);
}

inline void validate_archetype(const ArchetypeSpec& a) {
  if (a.count < 0) throw InvalidInput("archetype '" + a.name + "': count must be >= 0");
  if (!(a.skip_probability >= 0.0 && a.skip_probability <= 1.0))
    throw InvalidInput("archetype '" + a.name + "': skip probability must be in [0,1]");
  if (!std::isfinite(a.offset_days) || !(a.jitter_days >= 0.0) || !std::isfinite(a.jitter_days))
    throw InvalidInput("archetype '" + a.name + "': offset must be finite and jitter >= 0");
  if (a.binge_block < 0 || !(a.binge_gap_days >= 0.0))
    throw InvalidInput("archetype '" + a.name + "': binge parameters must be >= 0");
  if (a.name.empty() || a.name.find(',') != std::string::npos)
    throw InvalidInput("archetype name must be non-empty and contain no comma");
}

inline Cohort generate_cohort(const std::vector<ArchetypeSpec>& specs, std::size_t tasks, double span_days,
                              std::uint64_t seed) {
  int total = 0;
  for (const auto& a : specs) {
    validate_archetype(a);
    total += a.count;
  }
  if (total < 4) throw InvalidInput("generate_cohort: need at least 4 learners");
  if (tasks < 10) throw InvalidInput("generate_cohort: need at least 10 tasks");
  if (!(span_days > 0.0) || !std::isfinite(span_days)) throw InvalidInput("generate_cohort: span must be > 0");

  const int width = static_cast<int>(std::to_string(total).size());
  const auto pad = [](std::size_t v, int w) {
    std::string s = std::to_string(v);
    return std::string(static_cast<std::size_t>(std::max(0, w - static_cast<int>(s.size()))), '0') + s;
  };

  Cohort c;
  c.course_end = span_days;
  std::vector<std::string> task_ids;
  const int task_width = static_cast<int>(std::to_string(tasks).size());
  for (std::size_t k = 0; k < tasks; ++k) task_ids.push_back("T" + pad(k + 1, task_width));
  c.catalog = TaskCatalog(task_ids);

  std::size_t learner = 0;
  for (std::size_t ai = 0; ai < specs.size(); ++ai) {
    const auto& a = specs[ai];
    c.archetypes.push_back(a.name);
    for (int i = 0; i < a.count; ++i, ++learner) {
      Rng rng(derive_seed(seed, learner));
      const std::string id = "L" + pad(learner + 1, width);
      c.learner_ids.push_back(id);
      c.labels.push_back(static_cast<int>(ai));

      const auto jitter = [&] {
        if (a.jitter_days <= 0.0) return 0.0;
        double z = standard_normal(rng);
        while (std::abs(z) > 3.0) z = standard_normal(rng);
        return z * a.jitter_days;
      };

      std::vector<double> times(tasks);
      if (a.binge_block > 0) {
        const auto block = static_cast<std::size_t>(a.binge_block);
        for (std::size_t k = 0; k < tasks; k += block) {
          const std::size_t last = std::min(tasks, k + block) - 1;
          const double when = reference_time(last, tasks, span_days) + a.binge_gap_days + a.offset_days + jitter();
          for (std::size_t j = k; j <= last; ++j) times[j] = when;
        }
      } else {
        for (std::size_t k = 0; k < tasks; ++k)
          times[k] = reference_time(k, tasks, span_days) + a.offset_days + jitter();
      }
      for (double& t : times) t = std::clamp(t, 0.0, span_days);
      if (a.ordered) std::sort(times.begin(), times.end());

      for (std::size_t k = 0; k < tasks; ++k) {
        if (a.skip_probability > 0.0 && uniform_unit(rng) < a.skip_probability) continue;
        c.log.records.push_back({id, task_ids[k], times[k]});
      }
    }
  }
  // Learners whose every task was skipped still need to exist in the log.
  for (const auto& id : c.learner_ids) {
    const bool present = std::any_of(c.log.records.begin(), c.log.records.end(),
                                     [&](const EventRecord& r) { return r.learner_id == id; });
    if (!present) throw InvalidInput("generated learner " + id + " completed no tasks; lower skip probability");
  }
  return c;
}

/// Adjusted Rand index between two labelings.
inline double adjusted_rand_index(const Partition& a, const Partition& b) {
  require_same_size(a, b);
  const std::size_t n = a.size();
  std::vector<std::vector<double>> table(static_cast<std::size_t>(a.count()),
                                         std::vector<double>(static_cast<std::size_t>(b.count()), 0.0));
  for (std::size_t i = 0; i < n; ++i) table[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])] += 1.0;
  const auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  std::vector<double> col(static_cast<std::size_t>(b.count()), 0.0);
  for (const auto& row : table) {
    double r = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      sum_ij += choose2(row[j]);
      r += row[j];
      col[j] += row[j];
    }
    sum_a += choose2(r);
  }
  for (double c : col) sum_b += choose2(c);
  const double expected = sum_a * sum_b / choose2(static_cast<double>(n));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0; // both labelings trivial in the same way
  return (sum_ij - expected) / (max_index - expected);
}

struct RecoveryScore {
  double ari = 0.0;
  double vi = 0.0;
};

inline RecoveryScore recovery_score(const Partition& found, const Partition& planted) {
  require_same_size(found, planted);
  return {adjusted_rand_index(found, planted), variation_of_information(found, planted)};
}

/// Four archetypes: early offset, on time, skip-prone and binge.
inline std::vector<ArchetypeSpec> four_archetype_preset(int per_archetype = 20) {
  return {
      {"early_bird", -10.0, 1.0, 0.0, 0, 0.0, per_archetype, true},
      {"on_time", 0.0, 1.0, 0.0, 0, 0.0, per_archetype, true},
      {"low_engager", 0.0, 1.0, 0.5, 0, 0.0, per_archetype, true},
      {"crammer", 0.0, 1.0, 0.0, 24, 3.0, per_archetype, true},
  };
}

} // namespace tscluster
