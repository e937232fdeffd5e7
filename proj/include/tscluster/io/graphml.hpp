#pragma once

// GraphML export for external layout tools, and a plain edge-list CSV that
// round-trips a SimGraph exactly.

#include "tscluster/error.hpp"
#include "tscluster/io/text.hpp"
#include "tscluster/partition.hpp"
#include "tscluster/rmst.hpp"

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tscluster::io {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"': out += "&quot;"; break;
    case '\'': out += "&apos;"; break;
    default: out.push_back(c);
    }
  }
  return out;
}

/// A named node labelling written as an integer node attribute.
struct NodeLabelling {
  std::string name;
  Partition partition;
};

inline void write_graphml(std::ostream& out, const SimGraph& g, const std::vector<std::string>& ids,
                          std::uint64_t seed, const std::vector<NodeLabelling>& labellings = {}) {
  if (ids.size() != static_cast<std::size_t>(g.n)) throw InvalidInput("write_graphml: id count does not match graph");
  for (const auto& l : labellings)
    if (l.partition.size() != ids.size()) throw InvalidInput("write_graphml: labelling size mismatch");

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
      << "  <key id=\"seed\" for=\"graph\" attr.name=\"seed\" attr.type=\"string\"/>\n"
      << "  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n";
  for (std::size_t k = 0; k < labellings.size(); ++k)
    out << "  <key id=\"c" << k << "\" for=\"node\" attr.name=\"" << xml_escape(labellings[k].name)
        << "\" attr.type=\"int\"/>\n";
  out << "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n"
      << "  <key id=\"distance\" for=\"edge\" attr.name=\"distance\" attr.type=\"double\"/>\n"
      << "  <graph id=\"G\" edgedefault=\"undirected\">\n"
      << "    <data key=\"seed\">" << seed << "</data>\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << "    <node id=\"n" << i << "\"><data key=\"label\">" << xml_escape(ids[i]) << "</data>";
    for (std::size_t k = 0; k < labellings.size(); ++k)
      out << "<data key=\"c" << k << "\">" << labellings[k].partition[i] << "</data>";
    out << "</node>\n";
  }
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& edge = g.edges[e];
    out << "    <edge id=\"e" << e << "\" source=\"n" << edge.u << "\" target=\"n" << edge.v << "\">"
        << "<data key=\"weight\">" << format_double(edge.weight) << "</data>"
        << "<data key=\"distance\">" << format_double(edge.distance) << "</data></edge>\n";
  }
  out << "  </graph>\n</graphml>\n";
}

inline void write_edge_list(std::ostream& out, const SimGraph& g, const std::vector<std::string>& ids) {
  out << "source,target,distance,weight\n";
  for (const auto& e : g.edges)
    out << ids[static_cast<std::size_t>(e.u)] << ',' << ids[static_cast<std::size_t>(e.v)] << ','
        << format_double(e.distance) << ',' << format_double(e.weight) << '\n';
}

/// Reads an edge list written by write_edge_list; node order follows `ids`.
inline SimGraph read_edge_list(std::istream& in, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], static_cast<int>(i));
  SimGraph g;
  g.n = static_cast<int>(ids.size());
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (!header) {
      if (f.size() != 4 || f[0] != "source" || f[1] != "target" || f[2] != "distance" || f[3] != "weight")
        throw ParseError(line_no, "expected header source,target,distance,weight");
      header = true;
      continue;
    }
    if (f.size() != 4) throw ParseError(line_no, "expected 4 fields");
    const auto u = index.find(std::string(f[0]));
    const auto v = index.find(std::string(f[1]));
    if (u == index.end() || v == index.end()) throw ParseError(line_no, "unknown node id");
    const auto d = parse_double(f[2]);
    const auto w = parse_double(f[3]);
    if (!d || !w) throw ParseError(line_no, "malformed number");
    Edge e{std::min(u->second, v->second), std::max(u->second, v->second), *d, *w};
    if (e.u == e.v) throw ParseError(line_no, "self loop");
    g.edges.push_back(e);
  }
  if (!header) throw ParseError(line_no, "empty edge list");
  tscluster::detail::sort_edges(g.edges);
  return g;
}

} // namespace tscluster::io
