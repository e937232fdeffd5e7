#include "oracles.hpp"

#include "tscluster/io/graphml.hpp"
#include "tscluster/io/manifest.hpp"
#include "tscluster/io/matrix_io.hpp"
#include "tscluster/io/scan_io.hpp"
#include "tscluster/robustness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace tscluster;
namespace fs = std::filesystem;
using tscluster::io::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "tscluster_test_io";
  fs::create_directories(dir);
  return dir / name;
}

SimilarityMatrix random_similarity(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SimilarityMatrix s;
  s.distances = oracle::random_distances(static_cast<int>(n), rng);
  s.sigma2 = 0.37;
  s.similarities = (-s.distances.array() / s.sigma2).exp().matrix();
  for (std::size_t i = 0; i < n; ++i) s.ids.push_back("learner " + std::to_string(i));
  return s;
}

io::RunManifest parse(const std::string& text) {
  std::istringstream in(text);
  return io::parse_manifest(in, "/base");
}

} // namespace

TEST(MatrixCsv, RoundTripsExactly) {
  const auto s = random_similarity(7, 1);
  std::stringstream buf;
  io::write_matrix_csv(buf, s.ids, s.similarities);
  const auto [ids, m] = io::read_matrix_csv(buf);
  EXPECT_EQ(ids, s.ids);
  EXPECT_EQ(m, s.similarities);
}

TEST(MatrixCsv, RejectsRaggedRows) {
  std::istringstream in("id,a,b\na,1,2\nb,3\n");
  EXPECT_THROW(io::read_matrix_csv(in), ParseError);
}

TEST(SimilarityCache, RoundTripsWithDigest) {
  const auto s = random_similarity(9, 2);
  const std::string digest(64, 'a');
  const auto path = scratch("cache.bin");
  io::write_similarity_cache(path, s, digest);
  const auto c = io::read_similarity_cache(path);
  EXPECT_EQ(c.digest, digest);
  EXPECT_EQ(c.matrix.ids, s.ids);
  EXPECT_EQ(c.matrix.sigma2, s.sigma2);
  EXPECT_EQ(c.matrix.distances, s.distances);
  EXPECT_EQ(c.matrix.similarities, s.similarities);
  // 8 magic + 4 version + 64 digest + 8 n + ids + 8 sigma + two n*n blocks.
  std::size_t id_bytes = 0;
  for (const auto& id : s.ids) id_bytes += 4 + id.size();
  EXPECT_EQ(fs::file_size(path), 8 + 4 + 64 + 8 + id_bytes + 8 + 2 * 81 * 8);
}

TEST(SimilarityCache, RejectsForeignFilesAndVersions) {
  const auto path = scratch("bad.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a cache at all";
  }
  EXPECT_THROW(io::read_similarity_cache(path), Error);

  const auto s = random_similarity(3, 3);
  io::write_similarity_cache(path, s, std::string(64, 'f'));
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(8);
    const std::uint32_t v = 99;
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
  EXPECT_THROW(io::read_similarity_cache(path), Error);

  io::write_similarity_cache(path, s, std::string(64, 'f'));
  fs::resize_file(path, fs::file_size(path) - 5);
  EXPECT_THROW(io::read_similarity_cache(path), Error);
  EXPECT_THROW(io::write_similarity_cache(path, s, "short"), InvalidInput);
}

TEST(EdgeList, RoundTripsAndOrdersEdges) {
  std::mt19937_64 rng(4);
  const auto d = oracle::random_distances(12, rng);
  const Eigen::MatrixXd w = (-d.array()).exp().matrix();
  const auto g = rmst_graph(d, w, {0.5, 1});
  std::vector<std::string> ids;
  for (int i = 0; i < 12; ++i) ids.push_back("L" + std::to_string(i));
  std::stringstream buf;
  io::write_edge_list(buf, g, ids);
  const auto back = io::read_edge_list(buf, ids);
  EXPECT_EQ(back.n, g.n);
  EXPECT_EQ(back.edges, g.edges);

  std::istringstream unknown("source,target,distance,weight\nL0,ZZ,1,1\n");
  EXPECT_THROW(io::read_edge_list(unknown, ids), ParseError);
  std::istringstream loop("source,target,distance,weight\nL0,L0,1,1\n");
  EXPECT_THROW(io::read_edge_list(loop, ids), ParseError);
}

TEST(GraphMl, ContainsNodesEdgesSeedAndLabels) {
  SimGraph g;
  g.n = 3;
  g.edges = {{0, 1, 0.5, 0.25}, {1, 2, 1.0, 0.125}};
  std::ostringstream out;
  io::write_graphml(out, g, {"a&b", "c", "d"}, 42, {{"scale0", Partition({0, 0, 1})}});
  const std::string xml = out.str();
  EXPECT_NE(xml.find("<data key=\"seed\">42</data>"), std::string::npos);
  EXPECT_NE(xml.find("a&amp;b"), std::string::npos);
  EXPECT_NE(xml.find("attr.name=\"scale0\""), std::string::npos);
  EXPECT_NE(xml.find("<node id=\"n2\"><data key=\"label\">d</data><data key=\"c0\">1</data></node>"),
            std::string::npos);
  EXPECT_NE(xml.find("source=\"n1\" target=\"n2\""), std::string::npos);
  EXPECT_NE(xml.find("<data key=\"weight\">0.125</data>"), std::string::npos);
  EXPECT_THROW(io::write_graphml(out, g, {"a"}, 0), InvalidInput);
}

TEST(ScanJson, RoundTripsExactly) {
  const LaplacianSystem sys(oracle::two_cliques(4), LaplacianMode::normalized);
  ScanConfig cfg;
  cfg.time_grid = ScanConfig::log_grid(1e-2, 1e2, 12);
  cfg.restarts = 5;
  cfg.seed = 3;
  const auto s = scan(sys, cfg);
  io::ScanHeader h{17, {"a", "b", "c", "d", "e", "f", "g", "h"}, "normalized", false, 5};
  const auto j = io::scan_to_json(s, h);
  io::ScanHeader h2;
  const auto back = io::scan_from_json(json::parse(j.dump()), &h2);
  EXPECT_EQ(back.times, s.times);
  EXPECT_EQ(back.best, s.best);
  EXPECT_EQ(back.r_star, s.r_star);
  EXPECT_EQ(back.vi_t, s.vi_t);
  EXPECT_EQ(back.n_communities, s.n_communities);
  EXPECT_EQ(back.vi_tt, s.vi_tt);
  EXPECT_EQ(h2.seed, 17u);
  EXPECT_EQ(h2.node_ids, h.node_ids);
  EXPECT_EQ(h2.restarts, 5);

  const auto sel = select_robust(s);
  for (const auto& r : sel) EXPECT_EQ(io::scale_from_json(json::parse(io::scale_to_json(r).dump())), r);
}

TEST(ScanJson, RejectsMissingFields) {
  EXPECT_THROW(io::scan_from_json(json::parse(R"({"records": [{"t": 1}]})")), Error);
}

TEST(Manifest, ParsesKeysAndResolvesPaths) {
  const auto m = parse("# comment\n"
                       "events = data/events.csv\n"
                       "catalog = /abs/catalog.csv\n"
                       "seed = 12345678901234\n"
                       "laplacian = combinatorial\n"
                       "rmst_gamma = 0.75\n"
                       "t_min = 0.001\n"
                       "n_times = 20\n"
                       "missing_policy = drop\n"
                       "gp_axis = time\n");
  EXPECT_EQ(*m.events, fs::path("/base/data/events.csv"));
  EXPECT_EQ(*m.catalog, fs::path("/abs/catalog.csv"));
  EXPECT_EQ(m.seed, 12345678901234u);
  EXPECT_EQ(m.laplacian, LaplacianMode::combinatorial);
  EXPECT_EQ(m.rmst.gamma, 0.75);
  EXPECT_EQ(m.n_times, 20);
  EXPECT_EQ(m.missing, MissingPolicy::drop);
  EXPECT_EQ(m.gp_axis, GpAxis::time);
  EXPECT_FALSE(m.synthetic());
  EXPECT_EQ(m.scan_config().time_grid.size(), 20u);
  EXPECT_EQ(m.scan_config().time_grid.front(), 0.001);
}

TEST(Manifest, Archetypes) {
  const auto m = parse("archetype = fast count=3 offset=-2 jitter=0.5\n"
                       "archetype = slow count=4 skip=0.25 block=5 gap=1 ordered=false\n");
  ASSERT_EQ(m.archetypes.size(), 2u);
  EXPECT_EQ(m.archetypes[0].name, "fast");
  EXPECT_EQ(m.archetypes[0].offset_days, -2.0);
  EXPECT_EQ(m.archetypes[1].binge_block, 5);
  EXPECT_FALSE(m.archetypes[1].ordered);
  EXPECT_TRUE(m.synthetic());
  EXPECT_EQ(parse("synth_preset = four_archetypes\nsynth_per_archetype = 5\n").archetypes.size(), 4u);
}

TEST(Manifest, ErrorsCarryLineNumbers) {
  const auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("events = a\ncatalog = b\nbogus = 1\n"), 3u);
  EXPECT_EQ(line_of("events = a\n\nevents = b\n"), 3u);
  EXPECT_EQ(line_of("seed = -1\n"), 1u);
  EXPECT_EQ(line_of("no equals sign\n"), 1u);
  EXPECT_EQ(line_of("laplacian = weird\n"), 1u);
  EXPECT_EQ(line_of("archetype = x count=2 colour=red\n"), 1u);
  EXPECT_THROW(parse("seed = 1\n"), InvalidInput); // no events or catalog
  EXPECT_THROW(parse("synth_preset = four_archetypes\nevents = e.csv\n"), InvalidInput);
  EXPECT_THROW(parse("events = a\ncatalog = b\nt_min = 5\nt_max = 1\n"), InvalidInput);
}

TEST(Manifest, CanonicalTextIgnoresPathsAndThreads) {
  const auto a = parse("events = a.csv\ncatalog = b.csv\nthreads = 4\nseed = 3\n");
  const auto b = parse("events = other/a.csv\ncatalog = c.csv\nseed = 3\n");
  const auto c = parse("events = a.csv\ncatalog = b.csv\nseed = 4\n");
  EXPECT_EQ(a.canonical(), b.canonical());
  EXPECT_NE(a.canonical(), c.canonical());
  EXPECT_NE(a.canonical().find("laplacian=normalized"), std::string::npos);
}
