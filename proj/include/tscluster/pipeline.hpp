#pragma once

// End-to-end orchestration. Each stage reads the previous stages' files from the
// output directory and writes its own, followed by a `<stage>.digest` sidecar
// holding the SHA-256 of the stage's inputs and the list of files it wrote. With
// `resume`, a stage whose sidecar matches and whose files all exist is skipped.

#include "tscluster/dtw.hpp"
#include "tscluster/error.hpp"
#include "tscluster/features.hpp"
#include "tscluster/gpr.hpp"
#include "tscluster/ingest.hpp"
#include "tscluster/io/digest.hpp"
#include "tscluster/io/graphml.hpp"
#include "tscluster/io/manifest.hpp"
#include "tscluster/io/matrix_io.hpp"
#include "tscluster/io/scan_io.hpp"
#include "tscluster/io/text.hpp"
#include "tscluster/partition.hpp"
#include "tscluster/rmst.hpp"
#include "tscluster/robustness.hpp"
#include "tscluster/scan.hpp"
#include "tscluster/stability.hpp"
#include "tscluster/synth.hpp"

#include "json.hpp"

#include <boost/math/distributions/hypergeometric.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace tscluster {

inline constexpr const char* kVersion = "0.1.0";

enum class Stage { simulate, ingest, similarity, graph, scan, select, stats, characterize };

inline constexpr std::array<Stage, 8> kAllStages = {Stage::simulate, Stage::ingest, Stage::similarity,
                                                    Stage::graph,    Stage::scan,   Stage::select,
                                                    Stage::stats,    Stage::characterize};

inline const char* stage_name(Stage s) {
  switch (s) {
  case Stage::simulate: return "simulate";
  case Stage::ingest: return "ingest";
  case Stage::similarity: return "similarity";
  case Stage::graph: return "graph";
  case Stage::scan: return "scan";
  case Stage::select: return "select";
  case Stage::stats: return "stats";
  case Stage::characterize: return "characterize";
  }
  return "?";
}

inline std::optional<Stage> stage_from_name(std::string_view name) {
  for (Stage s : kAllStages)
    if (name == stage_name(s)) return s;
  return std::nullopt;
}

namespace detail {

inline std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

inline std::ifstream open_input(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + p.string());
  return in;
}

// Reads a two-column `key,value` CSV with the given header.
inline std::vector<std::pair<std::string, std::string>> read_pairs(const std::filesystem::path& p,
                                                                   std::string_view h1, std::string_view h2) {
  auto in = open_input(p);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    const auto f = io::split_fields(line);
    if (!header) {
      if (f.size() != 2 || f[0] != h1 || f[1] != h2)
        throw ParseError(line_no, p.filename().string() + ": expected header " + std::string(h1) + "," +
                                      std::string(h2));
      header = true;
      continue;
    }
    if (f.size() != 2 || f[0].empty()) throw ParseError(line_no, p.filename().string() + ": expected 2 fields");
    if (!seen.emplace(f[0]).second) throw ParseError(line_no, "duplicate id " + std::string(f[0]));
    out.emplace_back(std::string(f[0]), std::string(f[1]));
  }
  if (!header) throw ParseError(1, p.filename().string() + ": empty file");
  return out;
}

// Labels in `ids` order; nullopt when any id is unlabelled.
inline std::optional<Partition> partition_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs,
                                                     const std::vector<std::string>& ids) {
  std::map<std::string, std::string> by_id(pairs.begin(), pairs.end());
  std::map<std::string, int> codes;
  std::vector<int> labels;
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) return std::nullopt;
    labels.push_back(codes.try_emplace(it->second, static_cast<int>(codes.size())).first->second);
  }
  return Partition(labels);
}

} // namespace detail

/// A selected scale together with its partition, as stored in selected.json.
struct SelectedScale {
  RobustScale scale;
  Partition partition;
};

class Pipeline {
public:
  explicit Pipeline(io::RunManifest manifest, bool resume = false, std::ostream* log = nullptr)
      : m_(std::move(manifest)), resume_(resume), log_(log) {}

  const io::RunManifest& manifest() const noexcept { return m_; }

  /// Scales written by the select stage, in rank order.
  std::vector<SelectedScale> selected_scales(std::vector<std::string>* ids = nullptr) const {
    return load_selected(ids);
  }

  /// Stages executed by `run`, in order.
  std::vector<Stage> plan() const {
    std::vector<Stage> out;
    for (Stage s : kAllStages)
      if (s != Stage::simulate || m_.synthetic()) out.push_back(s);
    return out;
  }

  void run_all() {
    for (Stage s : plan()) run_stage(s);
  }

  /// Runs one stage; any failure is rethrown as StageError tagged with the stage.
  /// Returns false when the stage was skipped as up to date.
  bool run_stage(Stage s) {
    const std::string name = stage_name(s);
    try {
      std::filesystem::create_directories(m_.output_dir);
      const std::string digest = input_digest(s);
      if (resume_ && up_to_date(s, digest)) {
        note(name + ": up to date, skipped");
        return false;
      }
      std::filesystem::remove(sidecar(s));
      written_.clear();
      execute(s);
      std::ofstream side(sidecar(s), std::ios::binary | std::ios::trunc);
      side << digest << '\n';
      for (const auto& f : written_) side << f << '\n';
      if (!side) throw Error("cannot write " + sidecar(s).string());
      note(name + ": done");
      return true;
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }

private:
  io::RunManifest m_;
  bool resume_ = false;
  std::ostream* log_ = nullptr;
  std::vector<std::string> written_;

  void note(const std::string& msg) const {
    if (log_) *log_ << "tscluster: " << msg << '\n';
  }

  std::filesystem::path out(const std::string& name) const { return m_.output_dir / name; }
  std::filesystem::path sidecar(Stage s) const { return out(std::string(stage_name(s)) + ".digest"); }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::ofstream f(out(name), std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + out(name).string());
    body(f);
    f.flush();
    if (!f) throw Error("failed writing " + out(name).string());
    written_.push_back(name);
  }

  void write_json(const std::string& name, const nlohmann::json& j) {
    write(name, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  }

  // ---- inputs ---------------------------------------------------------------

  std::filesystem::path events_source() const {
    return m_.synthetic() ? out("cohort_events.csv") : *m_.events;
  }
  std::filesystem::path catalog_source() const {
    return m_.synthetic() ? out("cohort_catalog.csv") : *m_.catalog;
  }
  std::optional<std::filesystem::path> labels_source() const {
    if (m_.synthetic()) return out("cohort_labels.csv");
    return m_.labels;
  }

  std::vector<std::filesystem::path> stage_inputs(Stage s) const {
    switch (s) {
    case Stage::simulate: return {};
    case Stage::ingest: return {events_source(), catalog_source()};
    case Stage::similarity: return {out("events.csv"), out("catalog.csv")};
    case Stage::graph: return {out("similarity.bin")};
    case Stage::scan: return {out("similarity.bin"), out("edges.csv")};
    case Stage::select: return {out("scan.json"), out("edges.csv"), out("similarity.bin")};
    case Stage::stats: return {out("events.csv"), out("catalog.csv"), out("selected.json")};
    case Stage::characterize: {
      std::vector<std::filesystem::path> in{out("events.csv"), out("catalog.csv"), out("selected.json"),
                                            out("edges.csv"), out("scan.json"), out("similarity.bin")};
      if (auto l = labels_source()) in.push_back(*l);
      if (m_.grades) in.push_back(*m_.grades);
      return in;
    }
    }
    return {};
  }

  std::string input_digest(Stage s) const {
    io::Sha256 h;
    h.field("tscluster-stage").field(kVersion).field(stage_name(s)).field(m_.canonical());
    for (const auto& p : stage_inputs(s)) h.field(p.filename().string()).file(p);
    return h.hex();
  }

  bool up_to_date(Stage s, const std::string& digest) const {
    std::ifstream side(sidecar(s));
    std::string line;
    if (!side || !std::getline(side, line) || line != digest) return false;
    while (std::getline(side, line))
      if (!line.empty() && !std::filesystem::exists(out(line))) return false;
    return true;
  }

  std::string stage_digest_on_disk(Stage s) const {
    std::ifstream side(sidecar(s));
    std::string line;
    if (side && std::getline(side, line)) return line;
    return {};
  }

  // ---- shared loaders ---------------------------------------------------------

  struct Cohort {
    EventLog log;
    TaskCatalog catalog;
    std::vector<Trajectory> trajectories;
    std::vector<std::string> ids;
    double course_end = 0.0;
  };

  Cohort load_cohort() const {
    Cohort c;
    {
      auto in = detail::open_input(out("events.csv"));
      c.log = parse_event_log(in);
    }
    {
      auto in = detail::open_input(out("catalog.csv"));
      c.catalog = parse_task_catalog(in);
    }
    double latest = 0.0;
    for (const auto& r : c.log.records) latest = std::max(latest, r.timestamp);
    const double fallback = m_.synthetic() ? m_.synth_span : latest;
    const auto opts = m_.trajectory_options(fallback);
    c.course_end = opts.course_end;
    c.trajectories = build_trajectories(c.log, c.catalog, opts);
    for (const auto& t : c.trajectories) c.ids.push_back(t.learner_id);
    return c;
  }

  io::CachedSimilarity load_similarity() const { return io::read_similarity_cache(out("similarity.bin")); }

  SimGraph load_graph(const std::vector<std::string>& ids) const {
    auto in = detail::open_input(out("edges.csv"));
    return io::read_edge_list(in, ids);
  }

  nlohmann::json load_json(const std::string& name) const {
    auto in = detail::open_input(out(name));
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error("malformed " + name + ": " + e.what());
    }
  }

  std::vector<SelectedScale> load_selected(std::vector<std::string>* ids = nullptr) const {
    const auto j = load_json("selected.json");
    std::vector<SelectedScale> out;
    try {
      if (ids) *ids = j.at("node_ids").get<std::vector<std::string>>();
      for (const auto& s : j.at("scales"))
        out.push_back({io::scale_from_json(s), Partition(s.at("partition").get<std::vector<int>>())});
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("malformed selected.json: ") + e.what());
    }
    return out;
  }

  unsigned threads() const { return resolve_threads(m_.threads); }

  // ---- stages -------------------------------------------------------------------

  void execute(Stage s) {
    switch (s) {
    case Stage::simulate: return simulate();
    case Stage::ingest: return ingest();
    case Stage::similarity: return similarity();
    case Stage::graph: return graph();
    case Stage::scan: return run_scan();
    case Stage::select: return select();
    case Stage::stats: return stats();
    case Stage::characterize: return characterize();
    }
  }

  void simulate() {
    if (!m_.synthetic()) throw InvalidInput("manifest defines no archetypes");
    const auto cohort = generate_cohort(m_.archetypes, m_.synth_tasks, m_.synth_span,
                                        derive_seed(m_.seed, std::uint64_t{0x5E7}));
    write("cohort_events.csv", [&](std::ostream& o) { write_event_log(o, cohort.log); });
    write("cohort_catalog.csv", [&](std::ostream& o) { write_task_catalog(o, cohort.catalog); });
    write("cohort_labels.csv", [&](std::ostream& o) {
      o << "learner_id,archetype\n";
      for (std::size_t i = 0; i < cohort.learner_ids.size(); ++i)
        o << cohort.learner_ids[i] << ',' << cohort.archetypes[static_cast<std::size_t>(cohort.labels[i])] << '\n';
    });
  }

  void ingest() {
    EventLog log;
    TaskCatalog catalog;
    {
      auto in = detail::open_input(events_source());
      log = parse_event_log(in, m_.event_format);
    }
    {
      auto in = detail::open_input(catalog_source());
      catalog = parse_task_catalog(in);
    }
    double latest = 0.0;
    for (const auto& r : log.records) latest = std::max(latest, r.timestamp);
    const auto opts = m_.trajectory_options(m_.synthetic() ? m_.synth_span : latest);
    std::size_t unknown = 0;
    const auto trajectories = build_trajectories(log, catalog, opts, &unknown);
    if (unknown > 0) note("ingest: skipped " + std::to_string(unknown) + " rows with unknown task ids");

    write("events.csv", [&](std::ostream& o) { write_event_log(o, log); });
    write("catalog.csv", [&](std::ostream& o) { write_task_catalog(o, catalog); });
    write("trajectories.csv", [&](std::ostream& o) {
      o << "learner_id";
      for (const auto& t : catalog.tasks()) o << ',' << t;
      o << '\n';
      for (const auto& t : trajectories) {
        o << t.learner_id;
        for (double v : t.values) o << ',' << io::format_double(v);
        o << '\n';
      }
    });
  }

  void similarity() {
    const auto cohort = load_cohort();
    const auto sim = similarity_matrix(cohort.trajectories, m_.kernel, threads());
    const std::string digest = input_digest(Stage::similarity);
    io::write_similarity_cache(out("similarity.bin"), sim, digest);
    written_.push_back("similarity.bin");
    write("distances.csv", [&](std::ostream& o) { io::write_matrix_csv(o, sim.ids, sim.distances); });
    write("similarities.csv", [&](std::ostream& o) { io::write_matrix_csv(o, sim.ids, sim.similarities); });
  }

  void graph() {
    const auto cached = load_similarity();
    const auto& sim = cached.matrix;
    const SimGraph g = m_.graph_method == io::GraphMethod::rmst
                           ? rmst_graph(sim.distances, sim.similarities, m_.rmst)
                           : knn_graph(sim.distances, sim.similarities, m_.knn_k);
    write("edges.csv", [&](std::ostream& o) { io::write_edge_list(o, g, sim.ids); });
    write("graph.graphml", [&](std::ostream& o) { io::write_graphml(o, g, sim.ids, m_.seed); });
  }

  void run_scan() {
    const auto ids = load_similarity().matrix.ids;
    const SimGraph g = load_graph(ids);
    const LaplacianSystem sys = build_system(g, m_.laplacian);
    const ScanConfig cfg = m_.scan_config();
    const ScanResult result = scan(sys, cfg);

    io::ScanHeader header;
    header.seed = m_.seed;
    header.node_ids = ids;
    header.laplacian = m_.laplacian == LaplacianMode::normalized ? "normalized" : "combinatorial";
    header.linearised = m_.linearised;
    header.restarts = m_.restarts;
    write_json("scan.json", io::scan_to_json(result, header));
    write("partitions.csv", [&](std::ostream& o) { io::write_partitions_csv(o, result, ids); });
    write("vi_t.csv", [&](std::ostream& o) { io::write_vi_t_csv(o, result); });
    write("vi_tt.csv", [&](std::ostream& o) { io::write_vi_tt_csv(o, result); });
  }

  void select() {
    io::ScanHeader header;
    const ScanResult result = io::scan_from_json(load_json("scan.json"), &header);
    const auto scales = select_robust(result, m_.selection);

    nlohmann::json j;
    j["seed"] = m_.seed;
    j["node_ids"] = header.node_ids;
    j["scales"] = nlohmann::json::array();
    std::vector<io::NodeLabelling> labellings;
    for (std::size_t k = 0; k < scales.size(); ++k) {
      const auto& s = scales[k];
      const Partition& p = result.best[s.index];
      auto entry = io::scale_to_json(s);
      entry["rank"] = k + 1;
      entry["partition"] = p.labels();
      j["scales"].push_back(std::move(entry));
      const std::string tag = "scale" + std::to_string(k + 1);
      write("partition_" + tag + ".csv", [&](std::ostream& o) { io::write_partition_csv(o, p, header.node_ids); });
      labellings.push_back({tag, p});
    }
    write_json("selected.json", j);

    const SimGraph g = load_graph(header.node_ids);
    write("graph_selected.graphml",
          [&](std::ostream& o) { io::write_graphml(o, g, header.node_ids, m_.seed, labellings); });
  }

  std::vector<LearnerStats> learner_table(const Cohort& c) const {
    std::vector<LearnerStats> out;
    for (const auto& id : c.ids) out.push_back(learner_stats(c.log, c.catalog, id, m_.level_tol));
    return out;
  }

  void stats() {
    const auto cohort = load_cohort();
    std::vector<std::string> ids;
    const auto scales = load_selected(&ids);
    if (ids != cohort.ids) throw InvalidInput("selected.json does not match the ingested learners");
    const auto table = learner_table(cohort);
    for (std::size_t k = 0; k < scales.size(); ++k) {
      if (scales[k].scale.trivial) continue;
      write("stats_scale" + std::to_string(k + 1) + ".csv", [&](std::ostream& o) {
        o << "learner_id,mean_massed_session_length,completion_pct,cluster_label\n";
        for (std::size_t i = 0; i < table.size(); ++i)
          o << table[i].learner_id << ',' << io::format_double(table[i].mean_massed_session_length) << ','
            << io::format_double(table[i].completion_pct) << ',' << scales[k].partition[i] << '\n';
      });
    }
  }

  void characterize() {
    const auto cohort = load_cohort();
    std::vector<std::string> ids;
    const auto scales = load_selected(&ids);
    if (ids != cohort.ids) throw InvalidInput("selected.json does not match the ingested learners");
    const auto cached = load_similarity();
    const SimGraph g = load_graph(ids);
    const ScanResult result = io::scan_from_json(load_json("scan.json"));
    const auto table = learner_table(cohort);
    const CurveOptions curve = m_.curve_options();
    const double horizon = detail::axis_horizon(detail::pointers(cohort.trajectories));

    std::optional<Partition> planted;
    if (auto l = labels_source()) {
      planted = detail::partition_from_pairs(detail::read_pairs(*l, "learner_id", "archetype"), ids);
      if (!planted) note("characterize: labels file does not cover every learner; recovery not scored");
    }
    std::optional<std::map<std::string, std::string>> grades;
    if (m_.grades) {
      const auto pairs = detail::read_pairs(*m_.grades, "learner_id", "grade");
      grades.emplace(pairs.begin(), pairs.end());
    }

    std::ostringstream md;
    md << "# tscluster report\n\n";
    md << "| setting | value |\n|---|---|\n";
    md << "| seed | " << m_.seed << " |\n";
    md << "| learners | " << ids.size() << " |\n";
    md << "| tasks | " << cohort.catalog.size() << " |\n";
    md << "| course end (days) | " << detail::fmt(cohort.course_end) << " |\n";
    md << "| kernel sigma^2 | " << detail::fmt(cached.matrix.sigma2) << " |\n";
    md << "| graph | " << (m_.graph_method == io::GraphMethod::rmst ? "RMST" : "kNN") << ", " << g.edges.size()
       << " edges |\n";
    md << "| Laplacian | " << (m_.laplacian == LaplacianMode::normalized ? "normalized" : "combinatorial")
       << (m_.linearised ? " (linearised)" : "") << " |\n";
    md << "| Markov times | " << result.size() << " in [" << detail::fmt(m_.t_min) << ", "
       << detail::fmt(m_.t_max) << "] |\n";
    md << "| Louvain restarts | " << m_.restarts << " |\n\n";

    md << "## Robust scales\n\n";
    const bool any_nontrivial =
        std::any_of(scales.begin(), scales.end(), [](const SelectedScale& s) { return !s.scale.trivial; });
    if (scales.empty()) {
      md << "No robust scales: the scan shows no natural clusters at the scanned resolutions.\n\n";
    } else {
      md << "| rank | t | communities | plateau t | decades | block VI | VI(t) | trivial |\n"
         << "|---|---|---|---|---|---|---|---|\n";
      for (std::size_t k = 0; k < scales.size(); ++k) {
        const auto& s = scales[k].scale;
        md << "| " << k + 1 << " | " << detail::fmt(s.t) << " | " << s.n_communities << " | "
           << detail::fmt(result.times[s.plateau_begin]) << " to " << detail::fmt(result.times[s.plateau_end])
           << " | " << detail::fmt(s.plateau_decades, 3) << " | " << detail::fmt(s.block_vi, 3) << " | "
           << detail::fmt(s.vi_t, 3) << " | " << (s.trivial ? "yes" : "no") << " |\n";
      }
      md << '\n';
      if (!any_nontrivial)
        md << "Only trivial scales are robust: the data show no natural clusters.\n\n";
    }

    // Nested scales, finest first.
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < scales.size(); ++k)
      if (!scales[k].scale.trivial) order.push_back(k);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scales[a].scale.t < scales[b].scale.t; });
    if (order.size() >= 2) {
      md << "### Hierarchy\n\n| finer | coarser | nodes nested |\n|---|---|---|\n";
      for (std::size_t i = 0; i + 1 < order.size(); ++i)
        md << "| scale " << order[i] + 1 << " | scale " << order[i + 1] + 1 << " | "
           << detail::fmt(100.0 * hierarchy_consistency(scales[order[i]].partition, scales[order[i + 1]].partition), 4)
           << "% |\n";
      md << '\n';
    }

    for (std::size_t k = 0; k < scales.size(); ++k) {
      const auto& sel = scales[k];
      if (sel.scale.trivial) continue;
      const std::string tag = "scale" + std::to_string(k + 1);
      const Partition& p = sel.partition;
      const auto members = p.members();

      md << "## Scale " << k + 1 << ": " << sel.scale.n_communities << " clusters at t = " << detail::fmt(sel.scale.t)
         << "\n\n";
      if (planted) {
        const auto score = recovery_score(p, *planted);
        md << "Agreement with planted labels: ARI " << detail::fmt(score.ari, 4) << ", VI " << detail::fmt(score.vi, 4)
           << ".\n\n";
      }

      md << "| cluster | size | mean completion % | mean massed session length |\n|---|---|---|---|\n";
      for (std::size_t c = 0; c < members.size(); ++c) {
        double pct = 0.0, len = 0.0;
        for (std::size_t i : members[c]) {
          pct += table[i].completion_pct;
          len += table[i].mean_massed_session_length;
        }
        const double n = static_cast<double>(members[c].size());
        md << "| " << c << " | " << members[c].size() << " | " << detail::fmt(pct / n) << " | "
           << detail::fmt(len / n) << " |\n";
      }
      md << '\n';

      std::vector<ClusterCurve> curves(members.size());
      parallel_for(members.size(), threads(), [&](std::size_t c) {
        std::vector<const Trajectory*> subset;
        for (std::size_t i : members[c]) subset.push_back(&cohort.trajectories[i]);
        try {
          curves[c] = cluster_mean_trajectory(subset, curve, horizon);
        } catch (const Error& e) {
          throw NumericalError("GP fit failed for cluster " + std::to_string(c) + " of " + tag + ": " + e.what());
        }
      });
      for (std::size_t c = 0; c < curves.size(); ++c) {
        write("curves_" + tag + "_cluster" + std::to_string(c) + ".csv", [&](std::ostream& o) {
          o << (m_.gp_axis == GpAxis::task_index ? "task_index" : "time") << ",mean,variance\n";
          for (std::size_t i = 0; i < curves[c].grid.size(); ++i)
            o << io::format_double(curves[c].grid[i]) << ',' << io::format_double(curves[c].mean[i]) << ','
              << io::format_double(curves[c].variance[i]) << '\n';
        });
      }

      const auto bayes = bayes_factor(p, cohort.trajectories, curve, threads());
      std::vector<PairwiseBayes> pairwise;
      if (m_.pairwise_bayes) pairwise = pairwise_bayes_factors(p, cohort.trajectories, neighboring_clusters(p, g), curve, threads());

      nlohmann::json bj;
      bj["seed"] = m_.seed;
      bj["scale"] = k + 1;
      bj["t"] = sel.scale.t;
      bj["axis"] = m_.gp_axis == GpAxis::task_index ? "task_index" : "time";
      bj["log_likelihood_whole"] = bayes.log_likelihood_whole;
      bj["log_likelihoods_per_cluster"] = bayes.log_likelihoods_per_cluster;
      bj["log_k"] = bayes.log_k;
      bj["hyperparameters"] = nlohmann::json::array();
      for (const auto& cv : curves)
        bj["hyperparameters"].push_back({{"signal_variance", cv.hyper.signal_variance},
                                         {"length_scale", cv.hyper.length_scale},
                                         {"noise_variance", cv.hyper.noise_variance}});
      bj["pairwise"] = nlohmann::json::array();
      for (const auto& pb : pairwise)
        bj["pairwise"].push_back({{"cluster_a", pb.cluster_a}, {"cluster_b", pb.cluster_b}, {"log_k", pb.log_k}});
      write_json("bayes_" + tag + ".json", bj);

      md << "Gaussian-process comparison: log K = " << detail::fmt(bayes.log_k, 6)
         << " (per-cluster models versus one model for all learners; K > 1 favours the clustering).\n\n";
      if (!pairwise.empty()) {
        md << "| neighbouring clusters | log K |\n|---|---|\n";
        for (const auto& pb : pairwise)
          md << "| " << pb.cluster_a << " vs " << pb.cluster_b << " | " << detail::fmt(pb.log_k, 6) << " |\n";
        md << '\n';
      }

      if (grades) grade_table(md, p, ids, *grades);
    }

    write("report.md", [&](std::ostream& o) { o << md.str(); });

    nlohmann::json info;
    info["tool"] = "tscluster";
    info["version"] = kVersion;
    info["seed"] = m_.seed;
    info["settings"] = m_.canonical();
    info["stages"] = nlohmann::json::object();
    for (Stage s : plan())
      if (s != Stage::characterize) info["stages"][stage_name(s)] = stage_digest_on_disk(s);
    write_json("run_info.json", info);
  }

  // Cluster-by-grade counts with a one-sided hypergeometric enrichment p-value
  // P(X >= observed) for every cell.
  static void grade_table(std::ostream& md, const Partition& p, const std::vector<std::string>& ids,
                          const std::map<std::string, std::string>& grades) {
    std::set<std::string> levels;
    std::vector<std::optional<std::string>> g(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (auto it = grades.find(ids[i]); it != grades.end()) {
        g[i] = it->second;
        levels.insert(it->second);
      }
    const std::vector<std::string> cols(levels.begin(), levels.end());
    const auto c = static_cast<std::size_t>(p.count());
    std::vector<std::vector<unsigned>> counts(c, std::vector<unsigned>(cols.size(), 0));
    std::vector<unsigned> row_total(c, 0), col_total(cols.size(), 0);
    unsigned total = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!g[i]) continue;
      const auto col = static_cast<std::size_t>(std::lower_bound(cols.begin(), cols.end(), *g[i]) - cols.begin());
      const auto row = static_cast<std::size_t>(p[i]);
      ++counts[row][col];
      ++row_total[row];
      ++col_total[col];
      ++total;
    }
    if (total == 0) {
      md << "No graded learners in this cohort.\n\n";
      return;
    }
    md << "Grades by cluster (count, enrichment p-value):\n\n| cluster |";
    for (const auto& l : cols) md << ' ' << l << " |";
    md << "\n|---|";
    for (std::size_t k = 0; k < cols.size(); ++k) md << "---|";
    md << '\n';
    for (std::size_t r = 0; r < c; ++r) {
      md << "| " << r << " |";
      for (std::size_t k = 0; k < cols.size(); ++k) {
        double pv = 1.0;
        const unsigned x = counts[r][k];
        if (x > 0) {
          boost::math::hypergeometric_distribution<double> dist(col_total[k], row_total[r], total);
          pv = boost::math::cdf(boost::math::complement(dist, x - 1));
        }
        md << ' ' << x << " (p=" << detail::fmt(pv, 3) << ") |";
      }
      md << '\n';
    }
    md << '\n';
  }
};

} // namespace tscluster
