#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "glmkl/data.hpp"

namespace glmkl {

// Verdicts within this band of 1 are treated as sitting on the boundary;
// exact <1 versus =1 is meaningless in floating point.
inline constexpr double kBoundaryTol = 1e-6;

enum class ConditionVerdict { StrictHolds, WeakBoundary, Violated };

const char* to_string(ConditionVerdict v);

struct ConditionReport {
  std::map<int, double> per_group_values;  // i in J^c, 0-based
  double max_value = 0.0;
  ConditionVerdict verdict = ConditionVerdict::StrictHolds;
};

// For each inactive i: (1/d_i) || Sigma_{iJ} Sigma_JJ^{-1} Diag(d_j/||w_j||) w_J ||.
// Values below 1 across J^c make the pattern recoverable in the limit; above 1
// it cannot be.
ConditionReport condition_value(const PopulationModel& model, const BlockStructure& blocks,
                                const SparsityPattern& J);

// Second-order escape hatch for groups sitting exactly on the boundary:
// positive values rescue pattern recovery despite the boundary. Empty when no
// group is within kBoundaryTol of 1. Identically zero when every active group
// has size 1 (the inner projector collapses).
std::map<int, double> refined_condition(const PopulationModel& model, const BlockStructure& blocks,
                                        const SparsityPattern& J);

struct LoadingFreeReport {
  double value = 0.0;                 // certified lower bound on the loading-free max
  std::map<int, double> per_group;    // per inactive i
  double spectral_bound = 0.0;        // block operator-norm upper bound
  double sdp_bound = 0.0;             // max over i of the semidefinite upper bound
};

// Worst case of the condition value over all unit loading directions,
// maximized by multi-start projected power ascent. The maximization is
// nonconvex, so the value is a lower bound; both upper bounds come along so
// the caller sees the certified interval.
LoadingFreeReport loading_free_condition(const PopulationModel& model, const BlockStructure& blocks,
                                         const SparsityPattern& J, int restarts = 50);

// max_i (1/d_i) sum_{j in J} d_j || block_ij( Sigma_{iJ} Sigma_JJ^{-1} ) ||_spec.
double spectral_upper_bound(const PopulationModel& model, const BlockStructure& blocks,
                            const SparsityPattern& J);

struct SdpBound {
  double value = 0.0;  // certified upper bound
  double gap = 0.0;    // primal-dual gap at exit, trace scale
};

// Semidefinite relaxation of the loading-free max for one inactive group,
// solved through its blockwise-trace dual by eigenvalue cutting planes.
SdpBound sdp_upper_bound(const PopulationModel& model, const BlockStructure& blocks,
                         const SparsityPattern& J, int i);

// Dual workhorse behind sdp_upper_bound, exposed for direct checks: minimal
// sum lambda_j with BlockDiag(lambda_j I) >= a, for PSD a partitioned by
// sizes. Returned value is the certified upper trace bound.
SdpBound sdp_cover_value(const Mat& a, const std::vector<int>& sizes);

struct ProbabilityEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

// Limit law of the pattern-selection event under root-n regularization
// scaling: Monte-Carlo over the conditional Gaussian of the inactive
// covariates given the active ones.
ProbabilityEstimate pattern_probability_limit(const PopulationModel& model,
                                              const BlockStructure& blocks, const SparsityPattern& J,
                                              double lambda0, long draws, std::uint64_t seed = 42);

}  // namespace glmkl
