#include "glmkl/consistency.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "glmkl/rng.hpp"

namespace glmkl {

namespace {

void require_pattern(const PopulationModel& model, const BlockStructure& blocks,
                     const SparsityPattern& j_set) {
  if (j_set.m() != blocks.m())
    throw std::invalid_argument("pattern describes " + std::to_string(j_set.m()) +
                                " groups, blocks have " + std::to_string(blocks.m()));
  if (model.w().size() != blocks.p() || model.sigma_xx().rows() != blocks.p())
    throw std::invalid_argument("model dimension " + std::to_string(model.w().size()) +
                                " does not match blocks p = " + std::to_string(blocks.p()));
  if (j_set.empty()) throw std::invalid_argument("active set is empty, conditions are undefined");
  for (int j : j_set.active())
    if (blocks.seg(model.w(), j).norm() == 0.0)
      throw std::invalid_argument("group " + std::to_string(j + 1) +
                                  " is in the pattern but carries a zero loading");
}

std::vector<int> covariate_indices(const BlockStructure& blocks, const std::vector<int>& groups) {
  std::vector<int> cols;
  for (int j : groups)
    for (int k = 0; k < blocks.size(j); ++k) cols.push_back(blocks.offset(j) + k);
  return cols;
}

Mat gather(const Mat& s, const std::vector<int>& rows, const std::vector<int>& cols) {
  Mat out(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = s(rows[r], cols[c]);
  return out;
}

// Everything the condition formulas need about the active part.
struct ActivePart {
  std::vector<int> groups;      // active group ids, sorted
  std::vector<int> cols;        // their covariate indices
  std::vector<int> offsets;     // offsets of each active group inside cols
  Mat sigma_jj;
  Eigen::LDLT<Mat> factor;
  Vec scaled_w;                 // Diag(d_j/||w_j||) w_J
  Vec z;                        // Sigma_JJ^{-1} scaled_w
};

ActivePart build_active(const PopulationModel& model, const BlockStructure& blocks,
                        const SparsityPattern& j_set) {
  ActivePart act;
  act.groups.assign(j_set.active().begin(), j_set.active().end());
  act.cols = covariate_indices(blocks, act.groups);
  int off = 0;
  for (int j : act.groups) {
    act.offsets.push_back(off);
    off += blocks.size(j);
  }
  act.sigma_jj = gather(model.sigma_xx(), act.cols, act.cols);

  Eigen::SelfAdjointEigenSolver<Mat> es(act.sigma_jj, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 1e-12 * std::max(hi, 1.0)))
    throw std::runtime_error("active covariance block is singular (min eigenvalue " +
                             std::to_string(lo) + ")");
  act.factor.compute(act.sigma_jj);

  act.scaled_w.resize(off);
  for (std::size_t a = 0; a < act.groups.size(); ++a) {
    const int j = act.groups[a];
    const auto wj = blocks.seg(model.w(), j);
    act.scaled_w.segment(act.offsets[a], blocks.size(j)) = (blocks.weight(j) / wj.norm()) * wj;
  }
  act.z = act.factor.solve(act.scaled_w);
  return act;
}

Mat cross_block(const PopulationModel& model, const BlockStructure& blocks, int i,
                const ActivePart& act) {
  std::vector<int> rows;
  for (int k = 0; k < blocks.size(i); ++k) rows.push_back(blocks.offset(i) + k);
  return gather(model.sigma_xx(), rows, act.cols);
}

ConditionVerdict classify(double max_value) {
  if (max_value < 1.0 - kBoundaryTol) return ConditionVerdict::StrictHolds;
  if (max_value <= 1.0 + kBoundaryTol) return ConditionVerdict::WeakBoundary;
  return ConditionVerdict::Violated;
}

}  // namespace

const char* to_string(ConditionVerdict v) {
  switch (v) {
    case ConditionVerdict::StrictHolds: return "StrictHolds";
    case ConditionVerdict::WeakBoundary: return "WeakBoundary";
    case ConditionVerdict::Violated: return "Violated";
  }
  return "?";
}

ConditionReport condition_value(const PopulationModel& model, const BlockStructure& blocks,
                                const SparsityPattern& j_set) {
  require_pattern(model, blocks, j_set);
  const ActivePart act = build_active(model, blocks, j_set);

  ConditionReport rep;
  for (int i : j_set.complement()) {
    const double value = (cross_block(model, blocks, i, act) * act.z).norm() / blocks.weight(i);
    rep.per_group_values[i] = value;
    rep.max_value = std::max(rep.max_value, value);
  }
  rep.verdict = classify(rep.max_value);
  return rep;
}

std::map<int, double> refined_condition(const PopulationModel& model, const BlockStructure& blocks,
                                        const SparsityPattern& j_set) {
  require_pattern(model, blocks, j_set);
  const ActivePart act = build_active(model, blocks, j_set);
  const Vec delta = -act.z;

  // Diag over active groups of (d_j/||w_j||)(I - w_j w_j'/||w_j||^2), applied to delta
  Vec proj(delta.size());
  for (std::size_t a = 0; a < act.groups.size(); ++a) {
    const int j = act.groups[a];
    const auto wj = blocks.seg(model.w(), j);
    const double wn2 = wj.squaredNorm();
    const auto dj = delta.segment(act.offsets[a], blocks.size(j));
    proj.segment(act.offsets[a], blocks.size(j)) =
        (blocks.weight(j) / std::sqrt(wn2)) * (dj - wj * (wj.dot(dj) / wn2));
  }
  const Vec inner = act.factor.solve(proj);

  std::map<int, double> out;
  for (int i : j_set.complement()) {
    const Mat cross = cross_block(model, blocks, i, act);
    const double value = (cross * act.z).norm() / blocks.weight(i);
    if (std::abs(value - 1.0) <= kBoundaryTol)
      out[i] = (cross * delta).dot(cross * inner);
  }
  return out;
}

double spectral_upper_bound(const PopulationModel& model, const BlockStructure& blocks,
                            const SparsityPattern& j_set) {
  require_pattern(model, blocks, j_set);
  const ActivePart act = build_active(model, blocks, j_set);

  double best = 0.0;
  for (int i : j_set.complement()) {
    // Sigma_{iJ} Sigma_JJ^{-1}, then one spectral norm per active block
    const Mat c = act.factor.solve(cross_block(model, blocks, i, act).transpose()).transpose();
    double sum = 0.0;
    for (std::size_t a = 0; a < act.groups.size(); ++a) {
      const int j = act.groups[a];
      const Mat cij = c.middleCols(act.offsets[a], blocks.size(j));
      sum += blocks.weight(j) *
             Eigen::JacobiSVD<Mat>(cij).singularValues().maxCoeff();
    }
    best = std::max(best, sum / blocks.weight(i));
  }
  return best;
}

LoadingFreeReport loading_free_condition(const PopulationModel& model, const BlockStructure& blocks,
                                         const SparsityPattern& j_set, int restarts) {
  require_pattern(model, blocks, j_set);
  if (restarts < 0) throw std::invalid_argument("restarts must be >= 0");
  const ActivePart act = build_active(model, blocks, j_set);
  const auto active = act.groups;
  const Eigen::Index pj = static_cast<Eigen::Index>(act.cols.size());

  Vec dvec(pj);
  for (std::size_t a = 0; a < active.size(); ++a)
    dvec.segment(act.offsets[a], blocks.size(active[a])).setConstant(blocks.weight(active[a]));

  const auto normalize_blocks = [&](Vec& u) {
    for (std::size_t a = 0; a < active.size(); ++a) {
      auto seg = u.segment(act.offsets[a], blocks.size(active[a]));
      const double n = seg.norm();
      if (n > 0.0)
        seg /= n;
      else
        seg[0] = 1.0;
    }
  };

  Rng rng(0x10adf3ee);
  LoadingFreeReport rep;
  for (int i : j_set.complement()) {
    // b maps active loadings to the inactive correlate; maximize ||b u||
    const Mat b = (1.0 / blocks.weight(i)) *
                  act.factor.solve(cross_block(model, blocks, i, act).transpose()).transpose() *
                  dvec.asDiagonal();
    const Mat a = b.transpose() * b;

    std::vector<Vec> starts;
    {
      Eigen::JacobiSVD<Mat> svd(b, Eigen::ComputeThinV);
      Vec u = svd.matrixV().col(0);
      normalize_blocks(u);
      starts.push_back(u);
    }
    {
      // the actual loading direction: makes the report provably dominate
      // the loading-specific condition value
      Vec u(pj);
      for (std::size_t aa = 0; aa < active.size(); ++aa) {
        const int j = active[aa];
        u.segment(act.offsets[aa], blocks.size(j)) = blocks.seg(model.w(), j).normalized();
      }
      starts.push_back(u);
    }
    Rng stream = rng.child({static_cast<std::uint64_t>(i)});
    for (int r = 0; r < restarts; ++r) {
      Vec u(pj);
      for (Eigen::Index k = 0; k < pj; ++k) u[k] = stream.normal();
      normalize_blocks(u);
      starts.push_back(std::move(u));
    }

    double best = 0.0;
    for (Vec u : starts) {
      double val = u.dot(a * u);
      for (int it = 0; it < 1000; ++it) {
        Vec v = a * u;
        normalize_blocks(v);
        u = std::move(v);
        const double next = u.dot(a * u);
        if (next - val <= 1e-13 * std::max(1.0, next)) {
          val = std::max(val, next);
          break;
        }
        val = next;
      }
      best = std::max(best, val);
    }
    rep.per_group[i] = std::sqrt(best);
    rep.value = std::max(rep.value, rep.per_group[i]);
  }

  rep.spectral_bound = spectral_upper_bound(model, blocks, j_set);
  for (int i : j_set.complement())
    rep.sdp_bound = std::max(rep.sdp_bound, sdp_upper_bound(model, blocks, j_set, i).value);
  return rep;
}

SdpBound sdp_upper_bound(const PopulationModel& model, const BlockStructure& blocks,
                         const SparsityPattern& j_set, int i) {
  require_pattern(model, blocks, j_set);
  if (i < 0 || i >= blocks.m() || j_set.contains(i))
    throw std::invalid_argument("group " + std::to_string(i + 1) + " is not inactive");
  const ActivePart act = build_active(model, blocks, j_set);

  Vec dvec(static_cast<Eigen::Index>(act.cols.size()));
  std::vector<int> sizes;
  for (std::size_t a = 0; a < act.groups.size(); ++a) {
    const int j = act.groups[a];
    dvec.segment(act.offsets[a], blocks.size(j)).setConstant(blocks.weight(j));
    sizes.push_back(blocks.size(j));
  }

  const Mat half = act.factor.solve(cross_block(model, blocks, i, act).transpose());
  const Mat a = dvec.asDiagonal() * half * half.transpose() * dvec.asDiagonal();

  SdpBound cover = sdp_cover_value(0.5 * (a + a.transpose()), sizes);
  cover.value = std::sqrt(std::max(cover.value, 0.0)) / blocks.weight(i);
  return cover;
}

ProbabilityEstimate pattern_probability_limit(const PopulationModel& model,
                                              const BlockStructure& blocks, const SparsityPattern& j_set,
                                              double lambda0, long draws, std::uint64_t seed) {
  if (!(lambda0 > 0.0)) throw std::invalid_argument("lambda0 must be > 0");
  if (draws < 1) throw std::invalid_argument("need at least one draw");
  if (j_set.m() != blocks.m())
    throw std::invalid_argument("pattern describes " + std::to_string(j_set.m()) +
                                " groups, blocks have " + std::to_string(blocks.m()));
  if (j_set.complement().empty()) return {1.0, 0.0};  // nothing outside the pattern to miss
  require_pattern(model, blocks, j_set);

  const ActivePart act = build_active(model, blocks, j_set);
  const std::vector<int> inactive = j_set.complement();
  const std::vector<int> cols_c = covariate_indices(blocks, inactive);

  // per-inactive-group means and slices inside the complement stack
  std::vector<int> offs_c;
  int off = 0;
  for (int i : inactive) {
    offs_c.push_back(off);
    off += blocks.size(i);
  }
  Vec mean(off);
  for (std::size_t a = 0; a < inactive.size(); ++a)
    mean.segment(offs_c[a], blocks.size(inactive[a])) =
        cross_block(model, blocks, inactive[a], act) * act.z;

  const Mat cross = gather(model.sigma_xx(), cols_c, act.cols);
  Mat cond = gather(model.sigma_xx(), cols_c, cols_c) -
             cross * act.factor.solve(cross.transpose());
  cond = 0.5 * (cond + cond.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(cond);
  if (es.eigenvalues().minCoeff() < -1e-8)
    throw std::runtime_error("conditional covariance indefinite (min eigenvalue " +
                             std::to_string(es.eigenvalues().minCoeff()) + ")");
  const Mat sampler = es.eigenvectors() *
                      es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  const double scale = model.sigma() / lambda0;
  Rng rng(seed, {0x9a77e21});
  long hits = 0;
  Vec g(off), t(off);
  for (long it = 0; it < draws; ++it) {
    for (Eigen::Index k = 0; k < off; ++k) g[k] = rng.normal();
    t.noalias() = sampler * g;
    bool ok = true;
    for (std::size_t a = 0; a < inactive.size() && ok; ++a) {
      const int i = inactive[a];
      const double norm =
          (scale * t.segment(offs_c[a], blocks.size(i)) - mean.segment(offs_c[a], blocks.size(i)))
              .norm();
      ok = norm <= blocks.weight(i);
    }
    if (ok) ++hits;
  }
  const double est = static_cast<double>(hits) / static_cast<double>(draws);
  return {est, std::sqrt(est * (1.0 - est) / static_cast<double>(draws))};
}

}  // namespace glmkl
