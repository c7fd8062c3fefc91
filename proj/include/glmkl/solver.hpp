#pragma once

#include <optional>
#include <vector>

#include "glmkl/data.hpp"

namespace glmkl {

// One fitted group lasso estimate. `reg` is lambda for the standard penalty
// lambda * sum_j d_j ||w_j||, or mu when squared_form is set and the penalty
// is (mu/2) (sum_j d_j ||w_j||)^2.
struct GroupLassoSolution {
  Vec w;
  double intercept = 0.0;
  double reg = 0.0;
  bool squared_form = false;
  SparsityPattern pattern;
  double kkt_residual = 0.0;
  long iterations = 0;  // coordinate descent sweeps spent
};

// Per-group optimality diagnostics. For an inactive group the correlate
// ||S_{jX} w - s_{jY}|| must stay within the threshold; for an active group
// it must cancel the penalty direction exactly.
struct GroupKkt {
  int group = 0;
  bool active = false;
  double correlate_norm = 0.0;  // ||S_{jX} w - s_{jY}||
  double threshold = 0.0;       // lambda d_j, or mu d_j sum_i d_i ||w_i||
  double violation = 0.0;       // this group's contribution to the residual
};

struct KktReport {
  double residual = 0.0;  // max over groups
  std::vector<GroupKkt> groups;
};

struct SolveOptions {
  double tol = 1e-7;        // absolute bound on the KKT residual at exit
  long max_sweeps = 100000;
  const Vec* warm_start = nullptr;
};

// Largest lambda with a nonzero solution: max_j ||s_xy_j|| / d_j.
double lambda_max(const EmpiricalMoments& mom, const BlockStructure& blocks);

// Stationarity residual of w for the lambda-form problem. Activity is read
// as ||w_j|| > 0; solver output holds exact zeros on inactive groups.
KktReport check_kkt(const EmpiricalMoments& mom, const BlockStructure& blocks, const Vec& w,
                    double lambda);

// Same for the squared penalty; thresholds couple groups through
// sum_i d_i ||w_i||, so w = 0 is optimal only when s_xy = 0.
KktReport check_kkt_squared(const EmpiricalMoments& mom, const BlockStructure& blocks, const Vec& w,
                            double mu);

// Exact block coordinate descent on the centered objective
//   1/2 s_yy - s_xy'w + 1/2 w'S w + lambda sum_j d_j ||w_j||.
// Each block subproblem is solved to machine precision through a scalar
// root find on the eigenvalues of S_jj. Throws if the residual tolerance is
// not met within max_sweeps, and for lambda = 0 on singular S.
GroupLassoSolution solve_fixed_lambda(const EmpiricalMoments& mom, const BlockStructure& blocks,
                                      double lambda, const SolveOptions& opts = {});

// Squared-penalty solve via the scalar reduction lambda = mu sum_j d_j ||w_j||:
// bisects on s = sum_j d_j ||w_j(mu s)||, which is a strictly decreasing
// fixed-point gap, then certifies the result against check_kkt_squared.
GroupLassoSolution solve_fixed_mu(const EmpiricalMoments& mom, const BlockStructure& blocks, double mu,
                                  const SolveOptions& opts = {});

// Unpenalized solve; refuses singular S rather than picking a pseudo-inverse.
Vec ols(const EmpiricalMoments& mom);

struct PathOptions {
  int points = 100;
  double min_ratio = 1e-3;  // smallest lambda as a fraction of lambda_max
  SolveOptions solve;
};

struct PathResult {
  Vec lambdas;  // decreasing grid, lambda_max down to lambda_max * min_ratio
  std::vector<GroupLassoSolution> solutions;
  Mat eta;  // points x m, eta_j = d_j ||w_j|| / sum_i d_i ||w_i|| (zero row at w = 0)
};

// Warm-started sweep over a log-spaced lambda grid.
PathResult regularization_path(const EmpiricalMoments& mom, const BlockStructure& blocks,
                               const PathOptions& opts = {});

// Two-stage estimate: weights d_j = ||w_j^ols||^-gamma fed into a
// squared-penalty solve. Throws when some ||w_j^ols|| = 0.
GroupLassoSolution adaptive_group_lasso(const EmpiricalMoments& mom, const BlockStructure& blocks,
                                        double mu, double gamma, const SolveOptions& opts = {});

// Population-limit solve at a fixed regularization level.
GroupLassoSolution population_group_lasso(const PopulationModel& model, const BlockStructure& blocks,
                                          double lambda0, const SolveOptions& opts = {});

}  // namespace glmkl
