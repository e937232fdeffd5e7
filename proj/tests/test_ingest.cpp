#include "tscluster/ingest.hpp"
#include "tscluster/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace tscluster;

namespace {

EventLog parse(const std::string& text, LogFormat fmt = LogFormat::completion,
               DuplicatePolicy dup = DuplicatePolicy::keep_earliest) {
  std::istringstream in(text);
  return parse_event_log(in, fmt, dup);
}

std::size_t error_line(const std::string& text, LogFormat fmt = LogFormat::completion) {
  try {
    parse(text, fmt);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

TaskCatalog three_tasks() { return TaskCatalog({"T1", "T2", "T3"}); }

} // namespace

TEST(EventLog, ParsesRows) {
  const auto log = parse("learner_id,task_id,timestamp\nA,T1,1.5\nA,T2,2\nB,T1,0.25\n");
  ASSERT_EQ(log.records.size(), 3u);
  EXPECT_EQ(log.records[2].learner_id, "B");
  EXPECT_DOUBLE_EQ(log.records[0].timestamp, 1.5);
  EXPECT_EQ(log.learner_ids(), (std::vector<std::string>{"A", "B"}));
}

TEST(EventLog, RowErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("learner_id,task_id,timestamp\nA,T1,1\nA,T2,-3\n"), 3u);
  EXPECT_EQ(error_line("learner_id,task_id,timestamp\nA,T1,abc\n"), 2u);
  EXPECT_EQ(error_line("learner_id,task_id,timestamp\nA,T1\n"), 2u);
  EXPECT_EQ(error_line("learner_id,task_id,timestamp\nA,T1,1\n\nA,T2,inf\n"), 4u);
  EXPECT_EQ(error_line("learner_id,task_id,timestamp\nA,T1,1\nlearner_id,task_id,timestamp\n"), 3u);
  EXPECT_EQ(error_line("user,task,time\nA,T1,1\n"), 1u);
}

TEST(EventLog, EmptyInputsAreErrors) {
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("learner_id,task_id,timestamp\n"), ParseError);
}

TEST(EventLog, ClickLogFloorsAndKeepsFirstOccurrence) {
  const auto log = parse("learner_id,task_id,timestamp\nA,P1,9.8\nA,P1,4.2\n", LogFormat::click);
  ASSERT_EQ(log.records.size(), 1u);
  EXPECT_EQ(log.records[0].timestamp, 4.0);
}

TEST(EventLog, DuplicateCompletionsKeepEarliestOrFail) {
  const std::string text = "learner_id,task_id,timestamp\nA,T1,5\nA,T2,6\nA,T1,2\n";
  const auto log = parse(text);
  ASSERT_EQ(log.records.size(), 2u);
  EXPECT_EQ(log.records[0].task_id, "T1");
  EXPECT_EQ(log.records[0].timestamp, 2.0);
  EXPECT_THROW(parse(text, LogFormat::completion, DuplicatePolicy::error), ParseError);
}

TEST(EventLog, WriteThenParseReproducesRecords) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  EventLog log;
  for (int i = 0; i < 200; ++i)
    log.records.push_back({"L" + std::to_string(i % 17), "T" + std::to_string(i), u(rng)});
  std::ostringstream out;
  write_event_log(out, log);
  const auto back = parse(out.str());
  EXPECT_EQ(back.records, log.records);
}

TEST(TaskCatalog, ParsesOrderIndexAndRejectsGaps) {
  std::istringstream in("task_id,order_index\nB,2\nA,1\nC,3\n");
  const auto c = parse_task_catalog(in);
  EXPECT_EQ(c.tasks(), (std::vector<std::string>{"A", "B", "C"}));
  EXPECT_EQ(c.index_of("C"), 2u);
  EXPECT_FALSE(c.index_of("Z").has_value());

  std::istringstream gap("task_id,order_index\nA,1\nB,3\n");
  EXPECT_THROW(parse_task_catalog(gap), Error);
  std::istringstream dup("task_id,order_index\nA,1\nA,2\n");
  EXPECT_THROW(parse_task_catalog(dup), Error);
  EXPECT_THROW(TaskCatalog(std::vector<std::string>{}), InvalidInput);
}

TEST(Trajectory, CompletionTimesInCatalogOrder) {
  const auto log = parse("learner_id,task_id,timestamp\nA,T3,3\nA,T1,1\nA,T2,2\n");
  const auto t = build_trajectory(log, three_tasks(), "A");
  EXPECT_EQ(t.values, (std::vector<double>{1, 2, 3}));
}

TEST(Trajectory, MissingTaskPolicies) {
  const auto log = parse("learner_id,task_id,timestamp\nA,T1,1\nA,T3,3\n");
  TrajectoryOptions sentinel;
  sentinel.course_end = 70.0;
  const auto s = build_trajectory(log, three_tasks(), "A", sentinel);
  EXPECT_EQ(s.values, (std::vector<double>{1, 70, 3}));
  EXPECT_EQ(s.completed, (std::vector<bool>{true, false, true}));

  TrajectoryOptions drop;
  drop.missing = MissingPolicy::drop;
  const auto d = build_trajectory(log, three_tasks(), "A", drop);
  EXPECT_EQ(d.values, (std::vector<double>{1, 3}));
}

TEST(Trajectory, UnknownLearnerAndTask) {
  const auto log = parse("learner_id,task_id,timestamp\nA,T1,1\nA,T9,3\n");
  EXPECT_THROW(build_trajectory(log, three_tasks(), "Z"), InvalidInput);
  EXPECT_THROW(build_trajectory(log, three_tasks(), "A"), InvalidInput);
  TrajectoryOptions skip;
  skip.skip_unknown_tasks = true;
  skip.course_end = 10.0;
  std::size_t unknown = 0;
  const auto t = build_trajectory(log, three_tasks(), "A", skip, &unknown);
  EXPECT_EQ(unknown, 1u);
  EXPECT_EQ(t.values, (std::vector<double>{1, 10, 10}));
}

TEST(Trajectory, InvariantToRowOrder) {
  const auto c = generate_cohort(four_archetype_preset(3), 30, 40.0, 11);
  TrajectoryOptions opts;
  opts.course_end = 40.0;
  const auto base = build_trajectories(c.log, c.catalog, opts);
  EventLog shuffled = c.log;
  std::mt19937_64 rng(5);
  std::shuffle(shuffled.records.begin(), shuffled.records.end(), rng);
  const auto again = build_trajectories(shuffled, c.catalog, opts);
  ASSERT_EQ(base.size(), again.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_EQ(base[i].learner_id, again[i].learner_id);
    EXPECT_EQ(base[i].values, again[i].values);
  }
}

TEST(Trajectory, DropLengthEqualsCompletedCount) {
  const auto c = generate_cohort(four_archetype_preset(4), 40, 40.0, 2);
  TrajectoryOptions drop;
  drop.missing = MissingPolicy::drop;
  for (const auto& id : c.learner_ids) {
    const auto t = build_trajectory(c.log, c.catalog, id, drop);
    const auto done = std::count_if(c.log.records.begin(), c.log.records.end(),
                                    [&](const EventRecord& r) { return r.learner_id == id; });
    EXPECT_EQ(t.size(), static_cast<std::size_t>(done));
  }
}

TEST(Trajectory, SynthCohortRoundTripGivesFullLengthSeries) {
  const auto c = generate_cohort(four_archetype_preset(5), 50, 60.0, 9);
  std::ostringstream ev, cat;
  write_event_log(ev, c.log);
  write_task_catalog(cat, c.catalog);
  std::istringstream ev_in(ev.str()), cat_in(cat.str());
  const auto log = parse_event_log(ev_in);
  const auto catalog = parse_task_catalog(cat_in);
  TrajectoryOptions opts;
  opts.course_end = 60.0;
  const auto ts = build_trajectories(log, catalog, opts);
  ASSERT_EQ(ts.size(), 20u);
  for (const auto& t : ts) {
    EXPECT_EQ(t.size(), 50u);
    for (double v : t.values) EXPECT_TRUE(v >= 0.0 && v <= 60.0);
  }
}
