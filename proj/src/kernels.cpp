#include "glmkl/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace glmkl {

namespace {

Mat validated_gram(Mat k, const std::string& label) {
  k = 0.5 * (k + k.transpose()).eval();
  const Eigen::Index n = k.rows();
  const double scale = std::max(k.trace() / static_cast<double>(n), 1e-300);
  Eigen::SelfAdjointEigenSolver<Mat> es(k);
  const double lo = es.eigenvalues().minCoeff();
  if (lo < -1e-8 * scale)
    throw std::runtime_error(label + ": kernel matrix indefinite (min eigenvalue " +
                             std::to_string(lo) + " at trace scale " + std::to_string(scale) + ")");
  if (lo < 0.0)
    k = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
        es.eigenvectors().transpose();
  return k;
}

}  // namespace

std::vector<KernelSpec> parse_kernel_specs(const std::string& text) {
  std::vector<KernelSpec> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "linear") {
      out.push_back(KernelSpec::linear());
    } else if (tok == "gaussian") {
      out.push_back(KernelSpec::gaussian(1.0));
    } else if (tok.rfind("gaussian:b=", 0) == 0) {
      double b = 0.0;
      try {
        std::size_t used = 0;
        b = std::stod(tok.substr(11), &used);
        if (used != tok.size() - 11) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw std::runtime_error("cannot parse kernel spec '" + tok + "'");
      }
      out.push_back(KernelSpec::gaussian(b));
    } else {
      throw std::runtime_error("unknown kernel spec '" + tok +
                               "' (expected linear, gaussian, or gaussian:b=...)");
    }
  }
  if (out.empty()) throw std::runtime_error("empty kernel spec");
  return out;
}

std::string to_string(const KernelSpec& spec) {
  if (spec.kind == KernelSpec::Kind::Linear) return "linear";
  std::ostringstream os;
  os << "gaussian:b=" << spec.bandwidth;
  return os.str();
}

Mat kernel_matrix(const KernelSpec& spec, const Mat& x) {
  if (!x.allFinite()) throw std::invalid_argument("kernel input contains non-finite values");
  const Eigen::Index n = x.rows();
  if (spec.kind == KernelSpec::Kind::Linear) {
    Mat k = x * x.transpose();
    return 0.5 * (k + k.transpose()).eval();
  }
  const Vec sq = x.rowwise().squaredNorm();
  Mat d2 = (-2.0 * x * x.transpose()).colwise() + sq;
  d2.rowwise() += sq.transpose();
  Mat k = (-spec.bandwidth * d2.cwiseMax(0.0)).array().exp();
  k.diagonal().setOnes();
  return 0.5 * (k + k.transpose()).eval();
}

KernelProblem make_kernel_problem(const Dataset& data, const BlockStructure& blocks,
                                  const std::vector<KernelSpec>& specs) {
  if (data.p() != blocks.p())
    throw std::invalid_argument("data has " + std::to_string(data.p()) +
                                " columns, blocks expect " + std::to_string(blocks.p()));
  std::vector<KernelSpec> per_group = specs;
  if (per_group.size() == 1) per_group.assign(static_cast<std::size_t>(blocks.m()), specs[0]);
  if (per_group.size() != static_cast<std::size_t>(blocks.m()))
    throw std::invalid_argument("got " + std::to_string(specs.size()) + " kernel specs for " +
                                std::to_string(blocks.m()) + " groups");

  KernelProblem prob;
  prob.y = data.y;
  prob.weights = blocks.weights();
  for (int j = 0; j < blocks.m(); ++j) {
    const Mat cols = data.x.middleCols(blocks.offset(j), blocks.size(j));
    GroupKernel gk;
    if (per_group[static_cast<std::size_t>(j)].kind == KernelSpec::Kind::Linear) {
      if (!cols.allFinite())
        throw std::invalid_argument("kernel input contains non-finite values");
      gk.factor = cols;
    } else {
      if (data.n() > kDenseKernelCap)
        throw std::runtime_error("dense kernel path capped at n = " +
                                 std::to_string(kDenseKernelCap) + ", got n = " +
                                 std::to_string(data.n()));
      gk.dense = validated_gram(kernel_matrix(per_group[static_cast<std::size_t>(j)], cols),
                                "group " + std::to_string(j + 1));
    }
    prob.kernels.push_back(std::move(gk));
  }
  return prob;
}

KernelProblem from_kernels(std::vector<Mat> grams, Vec y, std::vector<double> weights) {
  if (grams.empty()) throw std::invalid_argument("need at least one kernel");
  if (grams.size() != weights.size())
    throw std::invalid_argument("kernel count " + std::to_string(grams.size()) +
                                " != weight count " + std::to_string(weights.size()));
  KernelProblem prob;
  prob.y = std::move(y);
  prob.weights = std::move(weights);
  for (std::size_t j = 0; j < grams.size(); ++j) {
    if (grams[j].rows() != prob.y.size() || grams[j].cols() != prob.y.size())
      throw std::invalid_argument("kernel " + std::to_string(j + 1) + " is " +
                                  std::to_string(grams[j].rows()) + "x" +
                                  std::to_string(grams[j].cols()) + ", y has length " +
                                  std::to_string(prob.y.size()));
    if (!(prob.weights[j] > 0.0)) throw std::invalid_argument("weights must be > 0");
    GroupKernel gk;
    gk.dense = validated_gram(std::move(grams[j]), "kernel " + std::to_string(j + 1));
    prob.kernels.push_back(std::move(gk));
  }
  return prob;
}

}  // namespace glmkl
