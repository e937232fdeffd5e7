// tscluster command-line front end.

#include "tscluster/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <string>
#include <utility>

int main(int argc, char** argv) {
  CLI::App app{"Cluster learner task-completion time series by multiscale Markov Stability"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tscluster::kVersion));

  std::string manifest_path;
  std::string output_dir;
  bool resume = false;
  bool quiet = false;

  const auto add = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--manifest,-m", manifest_path, "Run manifest (key = value)")->required()->check(CLI::ExistingFile);
    sub->add_option("--output-dir,-o", output_dir, "Override the manifest's output_dir");
    sub->add_flag("--resume", resume, "Skip stages whose inputs are unchanged since the last run");
    sub->add_flag("--quiet,-q", quiet, "Suppress progress messages");
    return sub;
  };
  add("simulate", "Generate a synthetic cohort from the manifest's archetypes");
  add("ingest", "Validate the event log and catalog, build trajectories");
  add("similarity", "DTW distances and kernel similarities");
  add("graph", "Sparsify the similarity matrix into a graph");
  add("scan", "Optimise Markov Stability over the Markov time grid");
  add("select", "Select robust scales from the scan");
  add("stats", "Per-learner session and completion statistics per selected scale");
  add("characterize", "Gaussian-process cluster curves, Bayes factors and the report");
  add("run", "Run every stage in order");

  CLI11_PARSE(app, argc, argv);

  try {
    auto manifest = tscluster::io::load_manifest(manifest_path);
    if (!output_dir.empty()) manifest.output_dir = output_dir;
    tscluster::Pipeline pipeline(std::move(manifest), resume, quiet ? nullptr : &std::cerr);
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "run") {
      pipeline.run_all();
    } else {
      pipeline.run_stage(*tscluster::stage_from_name(name));
    }
  } catch (const tscluster::StageError& e) {
    std::cerr << "tscluster: error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "tscluster: error: [manifest] " << e.what() << '\n';
    return 2;
  }
  return 0;
}
