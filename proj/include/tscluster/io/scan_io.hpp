#pragma once

// Serialisation of scan results and selected scales.

#include "tscluster/error.hpp"
#include "tscluster/io/text.hpp"
#include "tscluster/partition.hpp"
#include "tscluster/scan.hpp"

#include "json.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace tscluster::io {

using nlohmann::json;

/// Everything in a scan JSON besides the per-time records.
struct ScanHeader {
  std::uint64_t seed = 0;
  std::vector<std::string> node_ids;
  std::string laplacian;
  bool linearised = false;
  int restarts = 0;
};

inline json scan_to_json(const ScanResult& scan, const ScanHeader& header) {
  json j;
  j["seed"] = header.seed;
  j["node_ids"] = header.node_ids;
  j["laplacian"] = header.laplacian;
  j["linearised"] = header.linearised;
  j["restarts"] = header.restarts;
  json records = json::array();
  for (std::size_t i = 0; i < scan.size(); ++i) {
    records.push_back({{"t", scan.times[i]},
                       {"n_communities", scan.n_communities[i]},
                       {"r_star", scan.r_star[i]},
                       {"vi_t", scan.vi_t[i]},
                       {"partition", scan.best[i].labels()}});
  }
  j["records"] = std::move(records);
  json vi_tt = json::array();
  for (Eigen::Index r = 0; r < scan.vi_tt.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < scan.vi_tt.cols(); ++c) row.push_back(scan.vi_tt(r, c));
    vi_tt.push_back(std::move(row));
  }
  j["vi_tt"] = std::move(vi_tt);
  return j;
}

/// Inverse of scan_to_json. Ensembles are not stored, so `ensemble` stays empty.
inline ScanResult scan_from_json(const json& j, ScanHeader* header = nullptr) {
  try {
    ScanResult s;
    const auto& records = j.at("records");
    for (const auto& r : records) {
      s.times.push_back(r.at("t").get<double>());
      s.n_communities.push_back(r.at("n_communities").get<int>());
      s.r_star.push_back(r.at("r_star").get<double>());
      s.vi_t.push_back(r.at("vi_t").get<double>());
      s.best.emplace_back(r.at("partition").get<std::vector<int>>());
    }
    const auto& vi = j.at("vi_tt");
    const auto n = static_cast<Eigen::Index>(vi.size());
    s.vi_tt = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& row = vi.at(static_cast<std::size_t>(r));
      if (static_cast<Eigen::Index>(row.size()) != n) throw Error("vi_tt is not square");
      for (Eigen::Index c = 0; c < n; ++c) s.vi_tt(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    if (header) {
      header->seed = j.at("seed").get<std::uint64_t>();
      header->node_ids = j.at("node_ids").get<std::vector<std::string>>();
      header->laplacian = j.at("laplacian").get<std::string>();
      header->linearised = j.at("linearised").get<bool>();
      header->restarts = j.at("restarts").get<int>();
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed scan JSON: ") + e.what());
  }
}

/// Long-format partitions: one row per (time, node).
inline void write_partitions_csv(std::ostream& out, const ScanResult& scan, const std::vector<std::string>& ids) {
  out << "t_index,t,node_id,label\n";
  for (std::size_t i = 0; i < scan.size(); ++i)
    for (std::size_t n = 0; n < ids.size(); ++n)
      out << i << ',' << format_double(scan.times[i]) << ',' << ids[n] << ',' << scan.best[i][n] << '\n';
}

inline void write_partition_csv(std::ostream& out, const Partition& p, const std::vector<std::string>& ids) {
  out << "node_id,label\n";
  for (std::size_t n = 0; n < ids.size(); ++n) out << ids[n] << ',' << p[n] << '\n';
}

inline void write_vi_t_csv(std::ostream& out, const ScanResult& scan) {
  out << "t,n_communities,r_star,vi_t\n";
  for (std::size_t i = 0; i < scan.size(); ++i)
    out << format_double(scan.times[i]) << ',' << scan.n_communities[i] << ',' << format_double(scan.r_star[i])
        << ',' << format_double(scan.vi_t[i]) << '\n';
}

/// Square VI(t, t') matrix; the header row and first column carry the times.
inline void write_vi_tt_csv(std::ostream& out, const ScanResult& scan) {
  out << "t";
  for (double t : scan.times) out << ',' << format_double(t);
  out << '\n';
  for (Eigen::Index r = 0; r < scan.vi_tt.rows(); ++r) {
    out << format_double(scan.times[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < scan.vi_tt.cols(); ++c) out << ',' << format_double(scan.vi_tt(r, c));
    out << '\n';
  }
}

inline json scale_to_json(const RobustScale& s) {
  return {{"index", s.index},
          {"t", s.t},
          {"n_communities", s.n_communities},
          {"plateau_begin", s.plateau_begin},
          {"plateau_end", s.plateau_end},
          {"plateau_decades", s.plateau_decades},
          {"block_vi", s.block_vi},
          {"vi_t", s.vi_t},
          {"trivial", s.trivial}};
}

inline RobustScale scale_from_json(const json& j) {
  RobustScale s;
  s.index = j.at("index").get<std::size_t>();
  s.t = j.at("t").get<double>();
  s.n_communities = j.at("n_communities").get<int>();
  s.plateau_begin = j.at("plateau_begin").get<std::size_t>();
  s.plateau_end = j.at("plateau_end").get<std::size_t>();
  s.plateau_decades = j.at("plateau_decades").get<double>();
  s.block_vi = j.at("block_vi").get<double>();
  s.vi_t = j.at("vi_t").get<double>();
  s.trivial = j.at("trivial").get<bool>();
  return s;
}

} // namespace tscluster::io
