#pragma once

// Event-log and task-catalog parsing, and conversion to per-learner trajectories.

#include "tscluster/error.hpp"
#include "tscluster/io/text.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tscluster {

enum class LogFormat { completion, click };
enum class DuplicatePolicy { keep_earliest, error };
enum class MissingPolicy { sentinel_end_of_course, drop };

struct EventRecord {
  std::string learner_id;
  std::string task_id;
  double timestamp = 0.0; // days since course start

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct EventLog {
  std::vector<EventRecord> records;

  /// Distinct learner ids, sorted.
  std::vector<std::string> learner_ids() const {
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.learner_id);
    return {ids.begin(), ids.end()};
  }
};

class TaskCatalog {
public:
  TaskCatalog() = default;

  /// Tasks in course layout order.
  explicit TaskCatalog(std::vector<std::string> tasks) : tasks_(std::move(tasks)) {
    if (tasks_.empty()) throw InvalidInput("task catalog is empty");
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (!index_.emplace(tasks_[i], i).second)
        throw InvalidInput("duplicate task id in catalog: " + tasks_[i]);
    }
  }

  std::size_t size() const noexcept { return tasks_.size(); }
  const std::vector<std::string>& tasks() const noexcept { return tasks_; }

  /// 0-based position in layout order.
  std::optional<std::size_t> index_of(const std::string& task_id) const {
    auto it = index_.find(task_id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

private:
  std::vector<std::string> tasks_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// One learner's completion times in catalog order. Never-completed tasks are
/// flagged in `completed`; their value depends on the missing-task policy.
struct Trajectory {
  std::string learner_id;
  std::vector<double> values;
  std::vector<bool> completed;

  std::size_t size() const noexcept { return values.size(); }
};

struct TrajectoryOptions {
  MissingPolicy missing = MissingPolicy::sentinel_end_of_course;
  double course_end = 0.0;
  bool skip_unknown_tasks = false;
};

namespace detail {

inline bool is_blank(std::string_view line) { return io::trim(line).empty(); }

inline std::vector<std::string> read_header(std::istream& in, std::size_t& line_no,
                                            std::string& header_line) {
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    header_line = std::string(io::trim(line));
    std::vector<std::string> cols;
    for (auto f : io::split_fields(header_line)) cols.emplace_back(f);
    return cols;
  }
  throw ParseError(line_no == 0 ? 1 : line_no, "empty file");
}

} // namespace detail

/// Parses `learner_id,task_id,timestamp` rows. Duplicated (learner, task) pairs
/// keep the earliest timestamp at the position of their first row. Click logs are
/// coarse-grained to whole days before de-duplication.
inline EventLog parse_event_log(std::istream& in, LogFormat format = LogFormat::completion,
                                DuplicatePolicy duplicates = DuplicatePolicy::keep_earliest) {
  std::size_t line_no = 0;
  std::string header;
  const auto cols = detail::read_header(in, line_no, header);
  if (cols != std::vector<std::string>{"learner_id", "task_id", "timestamp"})
    throw ParseError(line_no, "expected header 'learner_id,task_id,timestamp', got '" + header + "'");

  EventLog log;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    if (io::trim(line) == header) throw ParseError(line_no, "duplicate header");
    const auto fields = io::split_fields(line);
    if (fields.size() != 3)
      throw ParseError(line_no, "expected 3 fields, found " + std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty()) throw ParseError(line_no, "empty id field");
    const auto ts = io::parse_double(fields[2]);
    if (!ts) throw ParseError(line_no, "malformed timestamp '" + std::string(fields[2]) + "'");
    if (!std::isfinite(*ts) || *ts < 0.0)
      throw ParseError(line_no, "timestamp must be finite and >= 0");
    const double t = format == LogFormat::click ? std::floor(*ts) : *ts;

    auto key = std::make_pair(std::string(fields[0]), std::string(fields[1]));
    auto [it, inserted] = seen.try_emplace(key, log.records.size());
    if (inserted) {
      log.records.push_back({std::move(key.first), std::move(key.second), t});
    } else if (duplicates == DuplicatePolicy::error && format == LogFormat::completion) {
      throw ParseError(line_no, "duplicate completion for (" + it->first.first + ", " +
                                    it->first.second + ")");
    } else {
      auto& rec = log.records[it->second];
      rec.timestamp = std::min(rec.timestamp, t);
    }
  }
  if (log.records.empty()) throw ParseError(line_no, "empty file: no records after header");
  return log;
}

inline void write_event_log(std::ostream& out, const EventLog& log) {
  out << "learner_id,task_id,timestamp\n";
  for (const auto& r : log.records)
    out << r.learner_id << ',' << r.task_id << ',' << io::format_double(r.timestamp) << '\n';
}

/// Parses `task_id,order_index` rows; order indices must be a permutation of 1..M.
inline TaskCatalog parse_task_catalog(std::istream& in) {
  std::size_t line_no = 0;
  std::string header;
  const auto cols = detail::read_header(in, line_no, header);
  if (cols != std::vector<std::string>{"task_id", "order_index"})
    throw ParseError(line_no, "expected header 'task_id,order_index', got '" + header + "'");

  std::vector<std::pair<long long, std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    if (io::trim(line) == header) throw ParseError(line_no, "duplicate header");
    const auto fields = io::split_fields(line);
    if (fields.size() != 2)
      throw ParseError(line_no, "expected 2 fields, found " + std::to_string(fields.size()));
    const auto idx = io::parse_int(fields[1]);
    if (!idx || *idx < 1) throw ParseError(line_no, "order_index must be a positive integer");
    if (fields[0].empty()) throw ParseError(line_no, "empty task id");
    rows.emplace_back(*idx, std::string(fields[0]));
  }
  if (rows.empty()) throw ParseError(line_no, "empty file: no tasks after header");
  std::sort(rows.begin(), rows.end());
  std::vector<std::string> tasks;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<long long>(i + 1))
      throw InvalidInput("catalog order_index values must be exactly 1..M");
    tasks.push_back(rows[i].second);
  }
  return TaskCatalog(std::move(tasks));
}

inline void write_task_catalog(std::ostream& out, const TaskCatalog& catalog) {
  out << "task_id,order_index\n";
  for (std::size_t i = 0; i < catalog.size(); ++i) out << catalog.tasks()[i] << ',' << i + 1 << '\n';
}

/// Builds the completion-time trajectory of one learner. `unknown_tasks`, when
/// given, receives the number of log rows whose task is absent from the catalog.
inline Trajectory build_trajectory(const EventLog& log, const TaskCatalog& catalog,
                                   const std::string& learner_id, const TrajectoryOptions& opts = {},
                                   std::size_t* unknown_tasks = nullptr) {
  const std::size_t m = catalog.size();
  std::vector<double> first(m, 0.0);
  std::vector<bool> done(m, false);
  bool found = false;
  std::size_t unknown = 0;
  for (const auto& r : log.records) {
    if (r.learner_id != learner_id) continue;
    found = true;
    const auto idx = catalog.index_of(r.task_id);
    if (!idx) {
      if (!opts.skip_unknown_tasks)
        throw InvalidInput("unknown task id '" + r.task_id + "' for learner '" + learner_id + "'");
      ++unknown;
      continue;
    }
    if (!done[*idx] || r.timestamp < first[*idx]) first[*idx] = r.timestamp;
    done[*idx] = true;
  }
  if (!found) throw InvalidInput("unknown learner '" + learner_id + "'");
  if (unknown_tasks) *unknown_tasks = unknown;

  Trajectory traj{learner_id, {}, {}};
  for (std::size_t k = 0; k < m; ++k) {
    if (done[k]) {
      traj.values.push_back(first[k]);
      traj.completed.push_back(true);
    } else if (opts.missing == MissingPolicy::sentinel_end_of_course) {
      traj.values.push_back(opts.course_end);
      traj.completed.push_back(false);
    }
  }
  return traj;
}

/// Trajectories for every learner in the log, ordered by learner id.
inline std::vector<Trajectory> build_trajectories(const EventLog& log, const TaskCatalog& catalog,
                                                  const TrajectoryOptions& opts = {},
                                                  std::size_t* unknown_tasks = nullptr) {
  std::vector<Trajectory> out;
  std::size_t total_unknown = 0;
  for (const auto& id : log.learner_ids()) {
    std::size_t unknown = 0;
    out.push_back(build_trajectory(log, catalog, id, opts, &unknown));
    total_unknown += unknown;
  }
  if (unknown_tasks) *unknown_tasks = total_unknown;
  return out;
}

} // namespace tscluster
