#pragma once

#include "tscluster/error.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <unordered_map>
#include <vector>

namespace tscluster {

/// Assignment of nodes to communities. Labels are always canonical: contiguous
/// 0..c-1, numbered in order of first appearance, so two partitions that differ
/// only by relabeling compare equal.
class Partition {
public:
  Partition() = default;

  explicit Partition(const std::vector<int>& labels) : labels_(labels.size()) {
    std::unordered_map<int, int> remap;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto [it, inserted] = remap.try_emplace(labels[i], static_cast<int>(remap.size()));
      labels_[i] = it->second;
    }
    count_ = static_cast<int>(remap.size());
  }

  static Partition singletons(std::size_t n) {
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i);
    return Partition(labels);
  }

  static Partition all_in_one(std::size_t n) { return Partition(std::vector<int>(n, 0)); }

  std::size_t size() const noexcept { return labels_.size(); }
  int count() const noexcept { return count_; }
  int operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const noexcept { return labels_; }

  std::vector<std::size_t> community_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(count_), 0);
    for (int l : labels_) ++sizes[static_cast<std::size_t>(l)];
    return sizes;
  }

  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(count_));
    for (std::size_t i = 0; i < labels_.size(); ++i)
      out[static_cast<std::size_t>(labels_[i])].push_back(i);
    return out;
  }

  /// N x c membership matrix H.
  Eigen::MatrixXd membership() const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size()), count_);
    for (std::size_t i = 0; i < labels_.size(); ++i)
      h(static_cast<Eigen::Index>(i), labels_[i]) = 1.0;
    return h;
  }

  friend bool operator==(const Partition&, const Partition&) = default;

private:
  std::vector<int> labels_;
  int count_ = 0;
};

inline void require_same_size(const Partition& a, const Partition& b) {
  if (a.size() != b.size())
    throw InvalidInput("partition size mismatch: " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()));
}

} // namespace tscluster
