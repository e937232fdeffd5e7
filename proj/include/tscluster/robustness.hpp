#pragma once

// Selection of robust Markov scales from a completed scan.

#include "tscluster/error.hpp"
#include "tscluster/scan.hpp"
#include "tscluster/vi.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tscluster {

struct SelectionConfig {
  double min_plateau_decades = 0.5;
  double vi_block_threshold = 0.05;
  double vi_dip_quantile = 0.25;
};

namespace detail {

// Linear-interpolation sample quantile.
inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

} // namespace detail

/// Robust scales of a scan, ranked by plateau length. A scale qualifies when
///  (i)   the community count of \hat H(t) is constant over >= min_plateau_decades,
///  (ii)  the mean VI(t, t') inside that plateau is below vi_block_threshold, and
///  (iii) VI(t) has a local minimum inside the plateau that is no larger than the
///        vi_dip_quantile quantile of the whole VI(t) curve.
/// The chosen time in each plateau is its lowest-VI(t) local minimum. An empty
/// result means the scan shows no robust structure.
inline std::vector<RobustScale> select_robust(const ScanResult& scan, const SelectionConfig& cfg = {}) {
  const std::size_t nt = scan.size();
  if (nt == 0) throw InvalidInput("select_robust: empty scan");
  if (scan.best.size() != nt || scan.vi_t.size() != nt || scan.n_communities.size() != nt)
    throw InvalidInput("select_robust: inconsistent scan result");
  if (scan.vi_tt.rows() != static_cast<Eigen::Index>(nt) && nt > 1)
    throw InvalidInput("select_robust: VI(t,t') matrix missing");

  const double dip_level = detail::quantile(scan.vi_t, cfg.vi_dip_quantile);
  const auto is_local_min = [&](std::size_t i) {
    if (i > 0 && scan.vi_t[i] > scan.vi_t[i - 1]) return false;
    if (i + 1 < nt && scan.vi_t[i] > scan.vi_t[i + 1]) return false;
    return true;
  };

  std::vector<RobustScale> out;
  std::size_t begin = 0;
  while (begin < nt) {
    std::size_t end = begin;
    while (end + 1 < nt && scan.n_communities[end + 1] == scan.n_communities[begin]) ++end;

    RobustScale s;
    s.plateau_begin = begin;
    s.plateau_end = end;
    s.n_communities = scan.n_communities[begin];
    s.plateau_decades = std::log10(scan.times[end]) - std::log10(scan.times[begin]);

    double block = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = begin; i <= end; ++i)
      for (std::size_t j = i + 1; j <= end; ++j) {
        block += scan.vi_tt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        ++pairs;
      }
    s.block_vi = pairs > 0 ? block / static_cast<double>(pairs) : 0.0;

    bool found = false;
    for (std::size_t i = begin; i <= end; ++i) {
      if (!is_local_min(i) || scan.vi_t[i] > dip_level) continue;
      if (!found || scan.vi_t[i] < scan.vi_t[s.index]) s.index = i;
      found = true;
    }

    if (found && s.plateau_decades >= cfg.min_plateau_decades && s.block_vi < cfg.vi_block_threshold) {
      s.t = scan.times[s.index];
      s.vi_t = scan.vi_t[s.index];
      const auto n = static_cast<int>(scan.best[s.index].size());
      s.trivial = s.n_communities <= 1 || s.n_communities >= n;
      out.push_back(s);
    }
    begin = end + 1;
  }

  std::stable_sort(out.begin(), out.end(), [](const RobustScale& a, const RobustScale& b) {
    return a.plateau_decades > b.plateau_decades;
  });
  return out;
}

/// Fraction of nodes whose community in `fine` sits (by majority) inside the
/// node's community in `coarse`. 1 means `fine` refines `coarse` exactly.
inline double hierarchy_consistency(const Partition& fine, const Partition& coarse) {
  require_same_size(fine, coarse);
  const auto members = fine.members();
  std::size_t agree = 0;
  for (const auto& group : members) {
    std::vector<std::size_t> votes(static_cast<std::size_t>(coarse.count()), 0);
    for (std::size_t i : group) ++votes[static_cast<std::size_t>(coarse[i])];
    agree += *std::max_element(votes.begin(), votes.end());
  }
  return static_cast<double>(agree) / static_cast<double>(fine.size());
}

} // namespace tscluster
