#pragma once

// Similarity matrix import/export: CSV with an id header row, and a
// version-tagged binary cache keyed by the digest of the inputs.
//
// Binary layout (little-endian):
//   8 bytes   magic "TSCSIMC\0"
//   u32       format version (1)
//   64 bytes  input digest, lowercase hex SHA-256
//   u64       n
//   n times   u32 id length, id bytes (UTF-8)
//   f64       sigma^2
//   n*n f64   distances, row-major
//   n*n f64   similarities, row-major

#include "tscluster/dtw.hpp"
#include "tscluster/error.hpp"
#include "tscluster/io/text.hpp"

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace tscluster::io {

static_assert(std::endian::native == std::endian::little, "binary cache assumes a little-endian host");

inline constexpr char kSimilarityMagic[8] = {'T', 'S', 'C', 'S', 'I', 'M', 'C', '\0'};
inline constexpr std::uint32_t kSimilarityCacheVersion = 1;

inline void write_matrix_csv(std::ostream& out, const std::vector<std::string>& ids, const Eigen::MatrixXd& m) {
  out << "id";
  for (const auto& id : ids) out << ',' << id;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << format_double(m(i, j));
    out << '\n';
  }
}

inline std::pair<std::vector<std::string>, Eigen::MatrixXd> read_matrix_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.empty() || fields[0] != "id") throw ParseError(line_no, "matrix CSV must start with an 'id' header");
    for (std::size_t k = 1; k < fields.size(); ++k) ids.emplace_back(fields[k]);
    break;
  }
  if (ids.empty()) throw ParseError(line_no, "empty matrix CSV");
  const auto n = static_cast<Eigen::Index>(ids.size());
  Eigen::MatrixXd m(n, n);
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (row >= n || static_cast<Eigen::Index>(fields.size()) != n + 1)
      throw ParseError(line_no, "matrix row has wrong shape");
    if (fields[0] != ids[static_cast<std::size_t>(row)]) throw ParseError(line_no, "row id does not match header");
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto v = parse_double(fields[static_cast<std::size_t>(j + 1)]);
      if (!v) throw ParseError(line_no, "malformed number");
      m(row, j) = *v;
    }
    ++row;
  }
  if (row != n) throw ParseError(line_no, "matrix CSV has " + std::to_string(row) + " rows, expected " + std::to_string(n));
  return {std::move(ids), std::move(m)};
}

namespace detail {

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("truncated similarity cache");
  return v;
}

} // namespace detail

inline void write_similarity_cache(const std::filesystem::path& path, const SimilarityMatrix& s,
                                   const std::string& digest_hex) {
  if (digest_hex.size() != 64) throw InvalidInput("cache digest must be 64 hex characters");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kSimilarityMagic, sizeof(kSimilarityMagic));
  detail::put(out, kSimilarityCacheVersion);
  out.write(digest_hex.data(), 64);
  detail::put(out, static_cast<std::uint64_t>(s.ids.size()));
  for (const auto& id : s.ids) {
    detail::put(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  detail::put(out, s.sigma2);
  const auto write_matrix = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put(out, m(i, j));
  };
  write_matrix(s.distances);
  write_matrix(s.similarities);
  if (!out) throw Error("failed writing " + path.string());
}

struct CachedSimilarity {
  std::string digest;
  SimilarityMatrix matrix;
};

inline CachedSimilarity read_similarity_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kSimilarityMagic, sizeof(magic)) != 0) throw Error("not a similarity cache: " + path.string());
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kSimilarityCacheVersion)
    throw Error("unsupported similarity cache version " + std::to_string(version));
  CachedSimilarity c;
  c.digest.resize(64);
  in.read(c.digest.data(), 64);
  const auto n = detail::get<std::uint64_t>(in);
  if (n > (1u << 24)) throw Error("corrupt similarity cache");
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto len = detail::get<std::uint32_t>(in);
    std::string id(len, '\0');
    in.read(id.data(), len);
    c.matrix.ids.push_back(std::move(id));
  }
  c.matrix.sigma2 = detail::get<double>(in);
  const auto nn = static_cast<Eigen::Index>(n);
  const auto read_matrix = [&] {
    Eigen::MatrixXd m(nn, nn);
    for (Eigen::Index i = 0; i < nn; ++i)
      for (Eigen::Index j = 0; j < nn; ++j) m(i, j) = detail::get<double>(in);
    return m;
  };
  c.matrix.distances = read_matrix();
  c.matrix.similarities = read_matrix();
  return c;
}

} // namespace tscluster::io
