#include "glmkl/solver.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace glmkl {

namespace {

void require_shapes(const EmpiricalMoments& mom, const BlockStructure& blocks) {
  if (mom.s_xx.rows() != blocks.p() || mom.s_xx.cols() != blocks.p() || mom.s_xy.size() != blocks.p())
    throw std::invalid_argument("moments are " + std::to_string(mom.s_xx.rows()) + "x" +
                                std::to_string(mom.s_xx.cols()) + " with s_xy length " +
                                std::to_string(mom.s_xy.size()) + ", blocks expect p = " +
                                std::to_string(blocks.p()));
}

struct BlockEig {
  Mat u;
  Vec lam;
};

std::vector<BlockEig> decompose_blocks(const Mat& s_xx, const BlockStructure& blocks) {
  std::vector<BlockEig> out(blocks.m());
  for (int j = 0; j < blocks.m(); ++j) {
    Eigen::SelfAdjointEigenSolver<Mat> es(blocks.block(s_xx, j, j));
    out[j].u = es.eigenvectors();
    out[j].lam = es.eigenvalues().cwiseMax(0.0);  // clip eigensolver noise on PSD input
  }
  return out;
}

// Minimize 1/2 w'Q w - r'w + tau ||w|| for one block, Q = U diag(lam) U'.
// Interior optimum solves (Q + tau/t I) w = r with t = ||w||, found as the
// root of h(t) = sum_i z_i^2 (lam_i t + tau)^-2 - 1, which is strictly
// decreasing from h(0) = ||z||^2/tau^2 - 1 > 0.
Vec solve_block(const BlockEig& eig, const Vec& r, double tau) {
  const Vec z = eig.u.transpose() * r;
  const double zn = z.norm();
  // the boundary case belongs to the zero solution; the relative slack keeps
  // ties at ||r|| = tau from activating through rotation round-off
  if (zn <= tau * (1.0 + 1e-12)) return Vec::Zero(r.size());
  if (tau <= 0.0) {
    // unpenalized block solve; caller guarantees invertibility
    return eig.u * z.cwiseQuotient(eig.lam);
  }

  // h(t) -> sum over null eigdirections of z_i^2/tau^2 as t grows; a root
  // exists iff that limit is below 1, otherwise the subproblem is unbounded.
  double flat = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (eig.lam[i] <= 0.0) flat += z[i] * z[i];
  if (flat >= tau * tau)
    throw std::runtime_error("group subproblem unbounded: singular block with threshold " +
                             std::to_string(tau));

  const auto h = [&](double t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double den = eig.lam[i] * t + tau;
      s += (z[i] / den) * (z[i] / den);
    }
    return s - 1.0;
  };
  const auto dh = [&](double t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double den = eig.lam[i] * t + tau;
      s -= 2.0 * z[i] * z[i] * eig.lam[i] / (den * den * den);
    }
    return s;
  };

  double lo = 0.0, hi = (zn - tau) / std::max(eig.lam.maxCoeff(), 1e-300);
  while (h(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300)
      throw std::runtime_error("group subproblem root bracketing overflow");
  }

  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double val = h(t);
    if (val > 0.0)
      lo = t;
    else
      hi = t;
    if (hi - lo <= 1e-15 * hi) break;
    const double step = dh(t);
    double next = (step < 0.0) ? t - val / step : -1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    t = next;
  }

  Vec scale(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) scale[i] = t / (eig.lam[i] * t + tau);
  return eig.u * scale.asDiagonal() * z;
}

double penalty_sum(const Vec& w, const BlockStructure& blocks) {
  double s = 0.0;
  for (int j = 0; j < blocks.m(); ++j) s += blocks.weight(j) * blocks.seg(w, j).norm();
  return s;
}

KktReport kkt_with_thresholds(const EmpiricalMoments& mom, const BlockStructure& blocks, const Vec& w,
                              const Vec& thresholds) {
  const Vec v = mom.s_xx * w - mom.s_xy;
  KktReport rep;
  rep.groups.resize(blocks.m());
  for (int j = 0; j < blocks.m(); ++j) {
    GroupKkt& g = rep.groups[j];
    g.group = j;
    g.threshold = thresholds[j];
    const auto vj = blocks.seg(v, j);
    g.correlate_norm = vj.norm();
    const auto wj = blocks.seg(w, j);
    const double wn = wj.norm();
    g.active = wn > 0.0;
    if (g.active)
      g.violation = (vj + (g.threshold / wn) * wj).norm();
    else
      g.violation = std::max(0.0, g.correlate_norm - g.threshold);
    rep.residual = std::max(rep.residual, g.violation);
  }
  return rep;
}

GroupLassoSolution ols_solution(const EmpiricalMoments& mom, const BlockStructure& blocks, double reg,
                                bool squared) {
  GroupLassoSolution sol;
  sol.w = ols(mom);
  sol.intercept = mom.intercept_for(sol.w);
  sol.reg = reg;
  sol.squared_form = squared;
  sol.pattern = pattern_of(sol.w, blocks, 0.0);
  sol.kkt_residual = (mom.s_xx * sol.w - mom.s_xy).norm();
  sol.iterations = 0;
  return sol;
}

}  // namespace

double lambda_max(const EmpiricalMoments& mom, const BlockStructure& blocks) {
  require_shapes(mom, blocks);
  double best = 0.0;
  for (int j = 0; j < blocks.m(); ++j)
    best = std::max(best, blocks.seg(mom.s_xy, j).norm() / blocks.weight(j));
  return best;
}

KktReport check_kkt(const EmpiricalMoments& mom, const BlockStructure& blocks, const Vec& w,
                    double lambda) {
  require_shapes(mom, blocks);
  if (w.size() != blocks.p()) throw std::invalid_argument("check_kkt: w has wrong length");
  if (lambda < 0.0) throw std::invalid_argument("check_kkt: lambda must be >= 0");
  Vec thr(blocks.m());
  for (int j = 0; j < blocks.m(); ++j) thr[j] = lambda * blocks.weight(j);
  return kkt_with_thresholds(mom, blocks, w, thr);
}

KktReport check_kkt_squared(const EmpiricalMoments& mom, const BlockStructure& blocks, const Vec& w,
                            double mu) {
  require_shapes(mom, blocks);
  if (w.size() != blocks.p()) throw std::invalid_argument("check_kkt_squared: w has wrong length");
  if (mu < 0.0) throw std::invalid_argument("check_kkt_squared: mu must be >= 0");
  const double total = penalty_sum(w, blocks);
  Vec thr(blocks.m());
  for (int j = 0; j < blocks.m(); ++j) thr[j] = mu * blocks.weight(j) * total;
  return kkt_with_thresholds(mom, blocks, w, thr);
}

Vec ols(const EmpiricalMoments& mom) {
  Eigen::SelfAdjointEigenSolver<Mat> es(mom.s_xx);
  const double lam_min = es.eigenvalues().minCoeff();
  const double lam_max_ = es.eigenvalues().maxCoeff();
  if (!(lam_min > 1e-12 * std::max(lam_max_, 1.0)))
    throw std::runtime_error("unpenalized solve on singular moment matrix (min eigenvalue " +
                             std::to_string(lam_min) + ")");
  return es.eigenvectors() *
         (es.eigenvectors().transpose() * mom.s_xy).cwiseQuotient(es.eigenvalues()).matrix();
}

GroupLassoSolution solve_fixed_lambda(const EmpiricalMoments& mom, const BlockStructure& blocks,
                                      double lambda, const SolveOptions& opts) {
  require_shapes(mom, blocks);
  if (lambda < 0.0) throw std::invalid_argument("solve_fixed_lambda: lambda must be >= 0");
  if (lambda == 0.0) return ols_solution(mom, blocks, 0.0, false);

  const auto eigs = decompose_blocks(mom.s_xx, blocks);
  Vec w = Vec::Zero(blocks.p());
  if (opts.warm_start) {
    if (opts.warm_start->size() != blocks.p())
      throw std::invalid_argument("solve_fixed_lambda: warm start has wrong length");
    w = *opts.warm_start;
  }

  Vec grad = mom.s_xx * w;  // maintained S w
  const auto objective = [&](double pen) { return 0.5 * mom.s_yy - mom.s_xy.dot(w) + 0.5 * w.dot(grad) + lambda * pen; };
  double obj_prev = objective(penalty_sum(w, blocks));

  GroupLassoSolution sol;
  sol.reg = lambda;
  for (long sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    for (int j = 0; j < blocks.m(); ++j) {
      const Vec wj_old = blocks.seg(w, j);
      const Vec r = blocks.seg(mom.s_xy, j) - blocks.seg(grad, j) +
                    blocks.block(mom.s_xx, j, j) * wj_old;
      const Vec wj = solve_block(eigs[j], r, lambda * blocks.weight(j));
      blocks.seg(w, j) = wj;
      grad += mom.s_xx.middleCols(blocks.offset(j), blocks.size(j)) * (wj - wj_old);
    }
    if (sweep % 64 == 0) grad = mom.s_xx * w;  // shed incremental rounding

    const double obj = objective(penalty_sum(w, blocks));
    if (obj > obj_prev + 1e-10 * (1.0 + std::abs(obj_prev)))
      throw std::logic_error("descent violated: objective rose from " + std::to_string(obj_prev) +
                             " to " + std::to_string(obj));
    obj_prev = obj;

    double res = 0.0;
    for (int j = 0; j < blocks.m(); ++j) {
      const Vec vj = blocks.seg(grad, j) - blocks.seg(mom.s_xy, j);
      const auto wj = blocks.seg(w, j);
      const double wn = wj.norm();
      const double tau = lambda * blocks.weight(j);
      res = std::max(res, wn > 0.0 ? (vj + (tau / wn) * wj.eval()).norm()
                                   : std::max(0.0, vj.norm() - tau));
    }
    if (res <= opts.tol) {
      const KktReport rep = check_kkt(mom, blocks, w, lambda);  // fresh products
      if (rep.residual <= opts.tol) {
        sol.w = std::move(w);
        sol.intercept = mom.intercept_for(sol.w);
        sol.pattern = pattern_of(sol.w, blocks, 0.0);
        sol.kkt_residual = rep.residual;
        sol.iterations = sweep;
        return sol;
      }
      grad = mom.s_xx * w;  // maintained gradient had drifted; resync and keep sweeping
    }
  }
  throw std::runtime_error("group lasso did not reach tolerance " + std::to_string(opts.tol) +
                           " within " + std::to_string(opts.max_sweeps) + " sweeps at lambda " +
                           std::to_string(lambda));
}

GroupLassoSolution solve_fixed_mu(const EmpiricalMoments& mom, const BlockStructure& blocks, double mu,
                                  const SolveOptions& opts) {
  require_shapes(mom, blocks);
  if (mu < 0.0) throw std::invalid_argument("solve_fixed_mu: mu must be >= 0");
  if (mu == 0.0) return ols_solution(mom, blocks, 0.0, true);

  const double lmax = lambda_max(mom, blocks);
  GroupLassoSolution sol;
  sol.squared_form = true;
  sol.reg = mu;
  if (lmax == 0.0) {
    sol.w = Vec::Zero(blocks.p());
    sol.intercept = mom.intercept_for(sol.w);
    sol.pattern = pattern_of(sol.w, blocks, 0.0);
    return sol;
  }

  SolveOptions inner = opts;
  inner.tol = 0.5 * opts.tol;
  Vec warm = Vec::Zero(blocks.p());
  long sweeps = 0;

  // gap(s) = sum_j d_j ||w_j(mu s)|| - s is strictly decreasing, positive for
  // small s (the penalty vanishes, the fit does not) and negative at
  // s = lambda_max / mu where the solution is zero.
  const auto eval = [&](double s) {
    inner.warm_start = &warm;
    GroupLassoSolution inner_sol = solve_fixed_lambda(mom, blocks, mu * s, inner);
    sweeps += inner_sol.iterations;
    warm = inner_sol.w;
    return penalty_sum(warm, blocks) - s;
  };

  double hi = lmax / mu;
  double lo = hi * 1e-12;
  while (eval(lo) <= 0.0) {
    lo *= 1e-2;
    if (lo < hi * 1e-280)
      throw std::runtime_error("squared-form reduction failed to bracket its fixed point");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (eval(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }

  inner.warm_start = &warm;
  GroupLassoSolution fin = solve_fixed_lambda(mom, blocks, mu * std::sqrt(lo * hi), inner);
  sweeps += fin.iterations;

  const KktReport rep = check_kkt_squared(mom, blocks, fin.w, mu);
  if (rep.residual > opts.tol)
    throw std::runtime_error("squared-form reduction failed to certify: residual " +
                             std::to_string(rep.residual) + " exceeds " + std::to_string(opts.tol));
  sol.w = std::move(fin.w);
  sol.intercept = mom.intercept_for(sol.w);
  sol.pattern = pattern_of(sol.w, blocks, 0.0);
  sol.kkt_residual = rep.residual;
  sol.iterations = sweeps;
  return sol;
}

PathResult regularization_path(const EmpiricalMoments& mom, const BlockStructure& blocks,
                               const PathOptions& opts) {
  require_shapes(mom, blocks);
  if (opts.points < 2) throw std::invalid_argument("regularization_path: need at least 2 grid points");
  if (!(opts.min_ratio > 0.0 && opts.min_ratio < 1.0))
    throw std::invalid_argument("regularization_path: min_ratio must lie in (0, 1)");
  const double lmax = lambda_max(mom, blocks);
  if (lmax == 0.0)
    throw std::invalid_argument("regularization_path: s_xy is zero, the path is identically zero");

  PathResult path;
  path.lambdas.resize(opts.points);
  path.eta.setZero(opts.points, blocks.m());
  path.solutions.reserve(opts.points);

  SolveOptions step = opts.solve;
  Vec warm = Vec::Zero(blocks.p());
  for (int i = 0; i < opts.points; ++i) {
    const double frac = static_cast<double>(i) / (opts.points - 1);
    path.lambdas[i] = lmax * std::pow(opts.min_ratio, frac);
    step.warm_start = &warm;
    GroupLassoSolution sol = solve_fixed_lambda(mom, blocks, path.lambdas[i], step);
    warm = sol.w;
    const double total = penalty_sum(sol.w, blocks);
    if (total > 0.0)
      for (int j = 0; j < blocks.m(); ++j)
        path.eta(i, j) = blocks.weight(j) * blocks.seg(sol.w, j).norm() / total;
    path.solutions.push_back(std::move(sol));
  }
  return path;
}

GroupLassoSolution adaptive_group_lasso(const EmpiricalMoments& mom, const BlockStructure& blocks,
                                        double mu, double gamma, const SolveOptions& opts) {
  require_shapes(mom, blocks);
  const Vec wls = ols(mom);
  std::vector<double> d(blocks.m());
  for (int j = 0; j < blocks.m(); ++j) {
    const double norm = blocks.seg(wls, j).norm();
    if (norm == 0.0)
      throw std::runtime_error("adaptive weights undefined: unpenalized block " +
                               std::to_string(j + 1) + " is exactly zero");
    d[j] = std::pow(norm, -gamma);
  }
  return solve_fixed_mu(mom, blocks.with_weights(std::move(d)), mu, opts);
}

GroupLassoSolution population_group_lasso(const PopulationModel& model, const BlockStructure& blocks,
                                          double lambda0, const SolveOptions& opts) {
  return solve_fixed_lambda(model.population_moments(), blocks, lambda0, opts);
}

}  // namespace glmkl
