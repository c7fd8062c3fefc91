#pragma once

#include <map>

#include "glmkl/blocks.hpp"
#include "glmkl/kernels.hpp"

namespace glmkl {

struct MklSolution {
  Vec alpha;         // centered dual vector, length n
  Vec eta;           // kernel weights, sum_j eta_j d_j^2 = 1
  Vec norms;         // ||f_j|| = eta_j sqrt(alpha' K_j alpha)
  double mu = 0.0;
  double duality_gap = 0.0;
  long iterations = 0;
};

// Alternating scheme: given eta, the centered regularized system is solved
// exactly; given alpha, eta_j is reset proportional to ||f_j||/d_j and
// renormalized. Both half-steps descend the primal, and exit is certified by
// the primal-dual gap <= 1e-6 (1 + |primal|).
MklSolution mkl_solve(const KernelProblem& prob, double mu);

// Aggregate optimality residual: centered linear system of the stationarity
// condition, simplex normalization, support concentrated on the argmax of
// alpha' K_j alpha / d_j^2, and centering of alpha.
double mkl_kkt_check(const KernelProblem& prob, const MklSolution& sol);

struct LsKernelEstimate {
  Vec alpha;
  Vec norms;  // ||f_j^ls|| = sqrt(alpha' K_j alpha)
};

// Unweighted ridge-style estimate behind the adaptive weights.
LsKernelEstimate ls_kernel_estimate(const KernelProblem& prob, double kappa);

// Two-stage scheme: weights from the kappa0 n^{-1/3} least-squares fit,
// then mkl_solve at mu0 n^{-1/3}. gamma <= 1 is outside the supporting
// theory and warns on stderr.
MklSolution adaptive_mkl(const KernelProblem& prob, double mu0, double gamma,
                         double kappa0 = 1.0);

// Data-driven estimate of the correlation condition for each inactive group,
// from kernel quantities alone (no population covariance). Raw values;
// thresholding is the caller's business.
std::map<int, double> estimate_condition(const KernelProblem& prob, const SparsityPattern& j_set,
                                         double kappa);

}  // namespace glmkl
