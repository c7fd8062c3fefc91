#pragma once

#include <Eigen/Dense>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace glmkl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Partition of p covariates into m contiguous groups with penalty weights d_j.
class BlockStructure {
 public:
  BlockStructure(std::vector<int> group_sizes, std::vector<double> weights)
      : sizes_(std::move(group_sizes)), weights_(std::move(weights)) {
    if (sizes_.empty()) throw std::invalid_argument("BlockStructure: need at least one group");
    if (weights_.size() != sizes_.size())
      throw std::invalid_argument("BlockStructure: weights count " + std::to_string(weights_.size()) +
                                  " != group count " + std::to_string(sizes_.size()));
    offsets_.reserve(sizes_.size());
    int off = 0;
    for (std::size_t j = 0; j < sizes_.size(); ++j) {
      if (sizes_[j] < 1)
        throw std::invalid_argument("BlockStructure: group " + std::to_string(j + 1) + " has size " +
                                    std::to_string(sizes_[j]));
      if (!(weights_[j] > 0.0))
        throw std::invalid_argument("BlockStructure: group " + std::to_string(j + 1) + " has weight " +
                                    std::to_string(weights_[j]) + ", must be > 0");
      offsets_.push_back(off);
      off += sizes_[j];
    }
    p_ = off;
  }

  static BlockStructure uniform(int m, int group_size, double weight = 1.0) {
    return BlockStructure(std::vector<int>(m, group_size), std::vector<double>(m, weight));
  }

  int m() const { return static_cast<int>(sizes_.size()); }
  int p() const { return p_; }
  int size(int j) const { return sizes_[j]; }
  int offset(int j) const { return offsets_[j]; }
  double weight(int j) const { return weights_[j]; }
  const std::vector<int>& sizes() const { return sizes_; }
  const std::vector<double>& weights() const { return weights_; }

  // View of group j inside a length-p vector.
  auto seg(const Vec& v, int j) const { return v.segment(offsets_[j], sizes_[j]); }
  auto seg(Vec& v, int j) const { return v.segment(offsets_[j], sizes_[j]); }
  // p x p matrix block (rows of group i, columns of group j).
  auto block(const Mat& a, int i, int j) const {
    return a.block(offsets_[i], offsets_[j], sizes_[i], sizes_[j]);
  }

  BlockStructure with_weights(std::vector<double> w) const { return BlockStructure(sizes_, std::move(w)); }

 private:
  std::vector<int> sizes_;
  std::vector<double> weights_;
  std::vector<int> offsets_;
  int p_ = 0;
};

// Set of active groups J, 0-based indices.
class SparsityPattern {
 public:
  SparsityPattern() = default;
  SparsityPattern(std::set<int> active, int m) : active_(std::move(active)), m_(m) {
    for (int j : active_)
      if (j < 0 || j >= m)
        throw std::invalid_argument("SparsityPattern: group index " + std::to_string(j + 1) +
                                    " outside 1.." + std::to_string(m));
  }

  const std::set<int>& active() const { return active_; }
  int m() const { return m_; }
  bool contains(int j) const { return active_.count(j) != 0; }
  bool empty() const { return active_.empty(); }
  std::size_t card() const { return active_.size(); }

  std::vector<int> complement() const {
    std::vector<int> out;
    for (int j = 0; j < m_; ++j)
      if (!contains(j)) out.push_back(j);
    return out;
  }

  bool operator==(const SparsityPattern& o) const { return m_ == o.m_ && active_ == o.active_; }
  bool operator!=(const SparsityPattern& o) const { return !(*this == o); }

 private:
  std::set<int> active_;
  int m_ = 0;
};

// Group j is active iff ||w_j|| > tol (strictly; boundary counts as inactive).
inline SparsityPattern pattern_of(const Vec& w, const BlockStructure& blocks, double tol) {
  if (tol < 0.0) throw std::invalid_argument("pattern_of: tol must be >= 0");
  if (w.size() != blocks.p())
    throw std::invalid_argument("pattern_of: vector length " + std::to_string(w.size()) +
                                " != p = " + std::to_string(blocks.p()));
  std::set<int> act;
  for (int j = 0; j < blocks.m(); ++j)
    if (blocks.seg(w, j).norm() > tol) act.insert(j);
  return SparsityPattern(std::move(act), blocks.m());
}

// Default activity threshold, relative to the loading scale.
inline double default_pattern_tol(const Vec& w) { return 1e-8 * w.norm(); }

}  // namespace glmkl
