#pragma once

// Run manifest: a flat `key = value` text file. Blank lines and lines starting
// with '#' are ignored. Relative paths resolve against the manifest's directory.
// Every key except `archetype` may appear at most once; see README.md for the
// full key reference.

#include "tscluster/dtw.hpp"
#include "tscluster/error.hpp"
#include "tscluster/gpr.hpp"
#include "tscluster/ingest.hpp"
#include "tscluster/io/text.hpp"
#include "tscluster/rmst.hpp"
#include "tscluster/robustness.hpp"
#include "tscluster/scan.hpp"
#include "tscluster/stability.hpp"
#include "tscluster/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace tscluster::io {

enum class GraphMethod { rmst, knn };

struct RunManifest {
  // inputs and outputs
  std::optional<std::filesystem::path> events;
  std::optional<std::filesystem::path> catalog;
  std::optional<std::filesystem::path> grades;
  std::optional<std::filesystem::path> labels;
  std::filesystem::path output_dir = "tscluster-out";
  LogFormat event_format = LogFormat::completion;
  std::uint64_t seed = 0;

  // trajectories
  std::optional<double> course_end; // defaults to the latest timestamp
  MissingPolicy missing = MissingPolicy::sentinel_end_of_course;
  bool skip_unknown_tasks = false;

  KernelConfig kernel;
  GraphMethod graph_method = GraphMethod::rmst;
  RmstConfig rmst;
  int knn_k = 5;

  LaplacianMode laplacian = LaplacianMode::normalized;
  double t_min = 1e-2;
  double t_max = 1e2;
  int n_times = 100;
  int restarts = 100;
  bool linearised = false;
  unsigned threads = 0; // 0 = hardware concurrency

  SelectionConfig selection;

  double level_tol = 0.5;
  GpAxis gp_axis = GpAxis::task_index;
  std::size_t gp_max_inputs = 60;
  int gp_restarts = 3;
  bool pairwise_bayes = true;

  // synthetic cohort
  std::vector<ArchetypeSpec> archetypes;
  std::size_t synth_tasks = 240;
  double synth_span = 70.0;

  bool synthetic() const noexcept { return !archetypes.empty(); }

  ScanConfig scan_config() const {
    ScanConfig c;
    c.time_grid = ScanConfig::log_grid(t_min, t_max, n_times);
    c.restarts = restarts;
    c.seed = derive_seed(seed, std::uint64_t{0x5CA4});
    c.use_linearised = linearised;
    c.threads = threads;
    c.keep_ensembles = false;
    return c;
  }

  CurveOptions curve_options() const {
    CurveOptions c;
    c.axis = gp_axis;
    c.max_inputs = gp_max_inputs;
    c.gp.restarts = gp_restarts;
    c.gp.seed = derive_seed(seed, std::uint64_t{0x6B});
    return c;
  }

  TrajectoryOptions trajectory_options(double fallback_course_end) const {
    TrajectoryOptions o;
    o.missing = missing;
    o.course_end = course_end.value_or(fallback_course_end);
    o.skip_unknown_tasks = skip_unknown_tasks;
    return o;
  }

  /// Canonical text of every setting that can change numeric output. Paths and
  /// thread counts are excluded; stage digests cover input files by content.
  std::string canonical() const;
};

namespace detail {

inline bool parse_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidInput("manifest key '" + key + "': expected true or false");
}

inline double parse_real(const std::string& key, std::string_view v) {
  const auto d = parse_double(v);
  if (!d || !std::isfinite(*d)) throw InvalidInput("manifest key '" + key + "': expected a number");
  return *d;
}

inline long long parse_integer(const std::string& key, std::string_view v, long long lo, long long hi) {
  const auto i = parse_int(v);
  if (!i || *i < lo || *i > hi)
    throw InvalidInput("manifest key '" + key + "': expected an integer in [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
  return *i;
}

// "name count=20 offset=-10 jitter=1 skip=0 block=0 gap=0 ordered=true"
inline ArchetypeSpec parse_archetype(std::string_view v) {
  std::istringstream in{std::string(v)};
  ArchetypeSpec a;
  if (!(in >> a.name)) throw InvalidInput("archetype: missing name");
  std::string item;
  while (in >> item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InvalidInput("archetype '" + a.name + "': expected key=value, got " + item);
    const std::string k = item.substr(0, eq);
    const std::string_view val = std::string_view(item).substr(eq + 1);
    const std::string ctx = "archetype " + a.name + " " + k;
    if (k == "count") a.count = static_cast<int>(parse_integer(ctx, val, 0, 1'000'000));
    else if (k == "offset") a.offset_days = parse_real(ctx, val);
    else if (k == "jitter") a.jitter_days = parse_real(ctx, val);
    else if (k == "skip") a.skip_probability = parse_real(ctx, val);
    else if (k == "block") a.binge_block = static_cast<int>(parse_integer(ctx, val, 0, 1'000'000));
    else if (k == "gap") a.binge_gap_days = parse_real(ctx, val);
    else if (k == "ordered") a.ordered = parse_bool(ctx, val);
    else throw InvalidInput("archetype '" + a.name + "': unknown field " + k);
  }
  validate_archetype(a);
  return a;
}

inline std::string archetype_text(const ArchetypeSpec& a) {
  return a.name + " count=" + std::to_string(a.count) + " offset=" + format_double(a.offset_days) +
         " jitter=" + format_double(a.jitter_days) + " skip=" + format_double(a.skip_probability) +
         " block=" + std::to_string(a.binge_block) + " gap=" + format_double(a.binge_gap_days) +
         " ordered=" + (a.ordered ? "true" : "false");
}

} // namespace detail

inline std::string RunManifest::canonical() const {
  std::ostringstream s;
  s << "event_format=" << (event_format == LogFormat::click ? "click" : "completion") << '\n'
    << "seed=" << seed << '\n'
    << "course_end=" << (course_end ? format_double(*course_end) : "auto") << '\n'
    << "missing_policy=" << (missing == MissingPolicy::drop ? "drop" : "sentinel") << '\n'
    << "skip_unknown_tasks=" << skip_unknown_tasks << '\n'
    << "sigma_rule=" << (kernel.rule == SigmaRule::fixed ? "fixed" : "median") << '\n'
    << "sigma2=" << format_double(kernel.sigma2) << '\n'
    << "graph_method=" << (graph_method == GraphMethod::knn ? "knn" : "rmst") << '\n'
    << "rmst_gamma=" << format_double(rmst.gamma) << '\n'
    << "rmst_k=" << rmst.k << '\n'
    << "knn_k=" << knn_k << '\n'
    << "laplacian=" << (laplacian == LaplacianMode::combinatorial ? "combinatorial" : "normalized") << '\n'
    << "t_min=" << format_double(t_min) << '\n'
    << "t_max=" << format_double(t_max) << '\n'
    << "n_times=" << n_times << '\n'
    << "restarts=" << restarts << '\n'
    << "linearised=" << linearised << '\n'
    << "min_plateau_decades=" << format_double(selection.min_plateau_decades) << '\n'
    << "vi_block_threshold=" << format_double(selection.vi_block_threshold) << '\n'
    << "vi_dip_quantile=" << format_double(selection.vi_dip_quantile) << '\n'
    << "level_tol=" << format_double(level_tol) << '\n'
    << "gp_axis=" << (gp_axis == GpAxis::time ? "time" : "task_index") << '\n'
    << "gp_max_inputs=" << gp_max_inputs << '\n'
    << "gp_restarts=" << gp_restarts << '\n'
    << "pairwise_bayes=" << pairwise_bayes << '\n'
    << "synth_tasks=" << synth_tasks << '\n'
    << "synth_span=" << format_double(synth_span) << '\n';
  for (const auto& a : archetypes) s << "archetype=" << detail::archetype_text(a) << '\n';
  return s.str();
}

/// Parses manifest text. `base_dir` anchors relative paths.
inline RunManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir = {}) {
  RunManifest m;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::string> preset;
  int preset_count = 20;

  const auto resolve = [&](std::string_view v) {
    std::filesystem::path p{std::string(v)};
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };

  using Setter = std::function<void(const std::string&, std::string_view)>;
  const std::map<std::string, Setter> keys = {
      {"events", [&](auto&, auto v) { m.events = resolve(v); }},
      {"catalog", [&](auto&, auto v) { m.catalog = resolve(v); }},
      {"grades", [&](auto&, auto v) { m.grades = resolve(v); }},
      {"labels", [&](auto&, auto v) { m.labels = resolve(v); }},
      {"output_dir", [&](auto&, auto v) { m.output_dir = resolve(v); }},
      {"event_format",
       [&](auto& k, auto v) {
         if (v == "completion") m.event_format = LogFormat::completion;
         else if (v == "click") m.event_format = LogFormat::click;
         else throw InvalidInput("manifest key '" + k + "': expected completion or click");
       }},
      {"seed",
       [&](auto& k, auto v) {
         std::uint64_t s = 0;
         auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
         if (ec != std::errc{} || ptr != v.data() + v.size()) throw InvalidInput("manifest key '" + k + "': expected an unsigned integer");
         m.seed = s;
       }},
      {"course_end",
       [&](auto& k, auto v) {
         m.course_end = detail::parse_real(k, v);
         if (!(*m.course_end > 0.0)) throw InvalidInput("course_end must be > 0");
       }},
      {"missing_policy",
       [&](auto& k, auto v) {
         if (v == "sentinel") m.missing = MissingPolicy::sentinel_end_of_course;
         else if (v == "drop") m.missing = MissingPolicy::drop;
         else throw InvalidInput("manifest key '" + k + "': expected sentinel or drop");
       }},
      {"skip_unknown_tasks", [&](auto& k, auto v) { m.skip_unknown_tasks = detail::parse_bool(k, v); }},
      {"sigma_rule",
       [&](auto& k, auto v) {
         if (v == "median") m.kernel.rule = SigmaRule::median_distance;
         else if (v == "fixed") m.kernel.rule = SigmaRule::fixed;
         else throw InvalidInput("manifest key '" + k + "': expected median or fixed");
       }},
      {"sigma2",
       [&](auto& k, auto v) {
         m.kernel.sigma2 = detail::parse_real(k, v);
         if (!(m.kernel.sigma2 > 0.0)) throw InvalidInput("sigma2 must be > 0");
       }},
      {"graph_method",
       [&](auto& k, auto v) {
         if (v == "rmst") m.graph_method = GraphMethod::rmst;
         else if (v == "knn") m.graph_method = GraphMethod::knn;
         else throw InvalidInput("manifest key '" + k + "': expected rmst or knn");
       }},
      {"rmst_gamma",
       [&](auto& k, auto v) {
         m.rmst.gamma = detail::parse_real(k, v);
         if (m.rmst.gamma < 0.0) throw InvalidInput("rmst_gamma must be >= 0");
       }},
      {"rmst_k", [&](auto& k, auto v) { m.rmst.k = static_cast<int>(detail::parse_integer(k, v, 1, 1'000'000)); }},
      {"knn_k", [&](auto& k, auto v) { m.knn_k = static_cast<int>(detail::parse_integer(k, v, 1, 1'000'000)); }},
      {"laplacian",
       [&](auto& k, auto v) {
         if (v == "normalized") m.laplacian = LaplacianMode::normalized;
         else if (v == "combinatorial") m.laplacian = LaplacianMode::combinatorial;
         else throw InvalidInput("manifest key '" + k + "': expected normalized or combinatorial");
       }},
      {"t_min", [&](auto& k, auto v) { m.t_min = detail::parse_real(k, v); }},
      {"t_max", [&](auto& k, auto v) { m.t_max = detail::parse_real(k, v); }},
      {"n_times", [&](auto& k, auto v) { m.n_times = static_cast<int>(detail::parse_integer(k, v, 2, 100'000)); }},
      {"restarts", [&](auto& k, auto v) { m.restarts = static_cast<int>(detail::parse_integer(k, v, 1, 1'000'000)); }},
      {"linearised", [&](auto& k, auto v) { m.linearised = detail::parse_bool(k, v); }},
      {"threads", [&](auto& k, auto v) { m.threads = static_cast<unsigned>(detail::parse_integer(k, v, 0, 4096)); }},
      {"min_plateau_decades", [&](auto& k, auto v) { m.selection.min_plateau_decades = detail::parse_real(k, v); }},
      {"vi_block_threshold", [&](auto& k, auto v) { m.selection.vi_block_threshold = detail::parse_real(k, v); }},
      {"vi_dip_quantile", [&](auto& k, auto v) { m.selection.vi_dip_quantile = detail::parse_real(k, v); }},
      {"level_tol",
       [&](auto& k, auto v) {
         m.level_tol = detail::parse_real(k, v);
         if (m.level_tol < 0.0) throw InvalidInput("level_tol must be >= 0");
       }},
      {"gp_axis",
       [&](auto& k, auto v) {
         if (v == "task_index") m.gp_axis = GpAxis::task_index;
         else if (v == "time") m.gp_axis = GpAxis::time;
         else throw InvalidInput("manifest key '" + k + "': expected task_index or time");
       }},
      {"gp_max_inputs",
       [&](auto& k, auto v) { m.gp_max_inputs = static_cast<std::size_t>(detail::parse_integer(k, v, 2, 100'000)); }},
      {"gp_restarts", [&](auto& k, auto v) { m.gp_restarts = static_cast<int>(detail::parse_integer(k, v, 1, 1000)); }},
      {"pairwise_bayes", [&](auto& k, auto v) { m.pairwise_bayes = detail::parse_bool(k, v); }},
      {"synth_tasks",
       [&](auto& k, auto v) { m.synth_tasks = static_cast<std::size_t>(detail::parse_integer(k, v, 10, 1'000'000)); }},
      {"synth_span",
       [&](auto& k, auto v) {
         m.synth_span = detail::parse_real(k, v);
         if (!(m.synth_span > 0.0)) throw InvalidInput("synth_span must be > 0");
       }},
      {"synth_preset",
       [&](auto& k, auto v) {
         if (v != "four_archetypes") throw InvalidInput("manifest key '" + k + "': unknown preset");
         preset = std::string(v);
       }},
      {"synth_per_archetype",
       [&](auto& k, auto v) { preset_count = static_cast<int>(detail::parse_integer(k, v, 1, 100'000)); }},
  };

  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    const std::string key(trim(body.substr(0, eq)));
    const auto value = trim(body.substr(eq + 1));
    if (value.empty()) throw ParseError(line_no, "empty value for '" + key + "'");
    try {
      if (key == "archetype") {
        m.archetypes.push_back(detail::parse_archetype(value));
        continue;
      }
      const auto it = keys.find(key);
      if (it == keys.end()) throw InvalidInput("unknown manifest key '" + key + "'");
      if (!seen.insert(key).second) throw InvalidInput("duplicate manifest key '" + key + "'");
      it->second(key, value);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
  }

  if (preset) {
    if (!m.archetypes.empty()) throw InvalidInput("synth_preset and archetype lines are mutually exclusive");
    m.archetypes = four_archetype_preset(preset_count);
  }
  if (!(m.t_min > 0.0) || !(m.t_max > m.t_min)) throw InvalidInput("manifest: need 0 < t_min < t_max");
  if (m.synthetic()) {
    if (m.events || m.catalog || m.labels)
      throw InvalidInput("manifest: synthetic cohorts generate their own events, catalog and labels");
  } else if (!m.events || !m.catalog) {
    throw InvalidInput("manifest: 'events' and 'catalog' are required unless archetypes are given");
  }
  return m;
}

inline RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path());
}

} // namespace tscluster::io
