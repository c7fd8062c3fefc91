#pragma once

#include <string>
#include <vector>

#include "glmkl/data.hpp"

namespace glmkl {

// Dense factorizations above this n are refused; Gram storage and Cholesky
// are O(n^2)/O(n^3). Linear kernels route around the cap via their factors.
inline constexpr Eigen::Index kDenseKernelCap = 5000;

struct KernelSpec {
  enum class Kind { Gaussian, Linear };
  Kind kind = Kind::Gaussian;
  double bandwidth = 1.0;  // k(x,x') = exp(-b ||x-x'||^2)

  static KernelSpec gaussian(double b) {
    if (!(b > 0.0)) throw std::invalid_argument("gaussian bandwidth must be > 0");
    return {Kind::Gaussian, b};
  }
  static KernelSpec linear() { return {Kind::Linear, 0.0}; }
};

// "gaussian:b=1", "gaussian", or "linear", comma-separated per group.
std::vector<KernelSpec> parse_kernel_specs(const std::string& text);
std::string to_string(const KernelSpec& spec);

// Gram matrix on the rows of x (one group's columns).
Mat kernel_matrix(const KernelSpec& spec, const Mat& x);

// One group's kernel: dense Gram, or a factor with K = factor factor' for
// linear kernels, which keeps n = 10^4 problems workable.
struct GroupKernel {
  Mat dense;
  Mat factor;
  bool low_rank() const { return factor.size() > 0; }
  Eigen::Index n() const { return low_rank() ? factor.rows() : dense.rows(); }

  Vec apply(const Vec& v) const {
    return low_rank() ? Vec(factor * (factor.transpose() * v)) : Vec(dense * v);
  }
  double quadratic(const Vec& v) const {
    return low_rank() ? (factor.transpose() * v).squaredNorm() : v.dot(dense * v);
  }
};

struct KernelProblem {
  std::vector<GroupKernel> kernels;
  Vec y;
  std::vector<double> weights;

  Eigen::Index n() const { return y.size(); }
  int m() const { return static_cast<int>(kernels.size()); }

  KernelProblem with_weights(std::vector<double> w) const {
    KernelProblem out = *this;
    if (w.size() != weights.size())
      throw std::invalid_argument("weight count mismatch");
    for (double d : w)
      if (!(d > 0.0)) throw std::invalid_argument("weights must be > 0");
    out.weights = std::move(w);
    return out;
  }
};

// Builds per-group kernels from the dataset columns. One spec broadcasts to
// all groups. Gaussian Grams are validated PSD (floor at 0 within -1e-8 of
// the trace scale, hard error beyond).
KernelProblem make_kernel_problem(const Dataset& data, const BlockStructure& blocks,
                                  const std::vector<KernelSpec>& specs);

// Wraps externally built Gram matrices; same validation and repair.
KernelProblem from_kernels(std::vector<Mat> grams, Vec y, std::vector<double> weights);

}  // namespace glmkl
