#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glmkl/data.hpp"

namespace glmkl {

enum class Scenario { FiniteConsistent, FiniteWeakViolated, FiniteBoundaryRefined, Nonparametric };

// "finite-consistent", "finite-weak-violated", "finite-boundary-refined",
// "nonparametric".
Scenario parse_scenario(const std::string& text);
const char* to_string(Scenario s);

// Log-spaced regularization fractions, descending from 1 down to
// 10^-decades, points_per_decade per decade plus the top endpoint. Cells use
// reg = fraction * anchor, where the anchor is the population lambda_max for
// the finite scenarios.
struct RegGrid {
  int points_per_decade = 50;
  double decades = 3.0;

  std::vector<double> fractions() const;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::FiniteConsistent;
  std::uint64_t seed = 42;
  std::vector<long> n_grid = {100, 1000, 10000};
  RegGrid reg;
  int replications = 50;
  // When set, each finite-scenario cell is fit by the two-stage reweighted
  // scheme with this exponent instead of the plain penalty.
  std::optional<double> adaptive_gamma;
  std::string output_dir;  // when nonempty, run_sweep writes sweep.csv + meta.json
};

// A drawn population instance: covariance with per-group trace one, two
// active groups with unit-normalized loadings scaled Uniform(1/3, 1), noise
// at a fifth of the signal scale, zero intercept.
struct FiniteModel {
  PopulationModel model;
  BlockStructure blocks;
  long attempts = 1;  // rejection-sampling draws consumed
};

FiniteModel gen_finite_model(std::uint64_t seed, int m = 4, int group_size = 2, int card_j = 2);

// Which consistency regime a conditioned draw must land in. Violated draws
// are split by whether some fixed regularization level recovers the pattern
// in the population problem: when it does, the path shows model-consistent
// estimates despite inconsistent loadings; when it does not, no grid point
// is model consistent in the limit.
enum class TargetVerdict { Strict, ViolatedNoRefine, ViolatedRefined };

FiniteModel gen_finite_model_conditioned(std::uint64_t seed, TargetVerdict target,
                                         long attempt_cap = 100000);

struct NonparametricModel {
  Mat s;                          // m x m covariance, unit diagonal
  std::vector<double> bandwidths; // per group, all 1
  std::vector<Vec> f_coords;      // eigenbasis coefficients; empty = inactive
  SparsityPattern support;
  double sigma = 0.0;       // noise level, a fifth of the signal sd
  double signal_sd = 0.0;   // sd of sum_j f_j(X_j), from the closed-form moments
};

NonparametricModel gen_nonparametric_model(std::uint64_t seed, int m = 4);

struct SweepCell {
  long n = 0;
  double reg = 0.0;
  double pattern_freq = 0.0;  // over successful replications; 0 when none succeed
  double log_mse = 0.0;       // log10 of the mean squared estimation error
  long failures = 0;          // replications excluded from this cell
};

struct ExperimentResult {
  Scenario scenario = Scenario::FiniteConsistent;
  std::uint64_t seed = 0;
  std::vector<long> n_grid;
  std::vector<double> reg_values;   // descending, shared across n
  std::vector<SweepCell> cells;     // n-major, reg descending within each n
  long model_attempts = 1;

  // Per-replication path summary: the best estimation error over the grid
  // and whether any grid point matched the true pattern.
  struct PathSummary {
    long n = 0;
    int replication = 0;
    double best_err = 0.0;
    bool any_pattern_match = false;
  };
  std::vector<PathSummary> paths;
};

// Replication sweep over (n, reg) with a shared grid; finite scenarios run
// the exact solver down the grid with warm starts, the kernel scenario runs
// the alternating scheme per grid point. Per-cell solver failures are
// excluded and counted. Deterministic for a fixed config, independent of
// worker count: replication r of size-index c draws from stream
// {seed, c, r}, and aggregation is a fixed-order reduction.
ExperimentResult run_sweep(const ExperimentConfig& config);

struct ClassifyConfig {
  std::uint64_t seed = 42;
  int count = 500;   // models drawn
  long n = 1000;     // samples per path
  RegGrid reg;       // grid anchored per path at the empirical lambda_max
  double error_threshold = 0.1;
};

struct ClassifyResult {
  struct Row {
    double condition_max = 0.0;  // population condition value of the drawn model
    int category = 0;            // 1 pattern+small error, 2 pattern only, 3 neither
  };
  struct Bin {
    double log10_lo = 0.0;
    double log10_hi = 0.0;
    long count = 0;
    double fraction[3] = {0.0, 0.0, 0.0};  // sums to 1 when count > 0
  };
  std::vector<Row> rows;   // one per model, draw order
  std::vector<Bin> bins;   // fixed log10 binning of condition_max
  long failures = 0;       // models whose path failed end to end
};

// Draws unconditioned models, runs one path each, and buckets the outcome
// by the population condition value.
ClassifyResult classify_paths(const ClassifyConfig& config);

struct FrequencyEstimate {
  double freq = 0.0;
  double std_error = 0.0;  // binomial
  long failures = 0;
};

// Pattern-match frequency at a single (n, lambda) cell; the hook for
// comparing finite-sample selection against the root-n limit law.
FrequencyEstimate pattern_frequency(const PopulationModel& model, const BlockStructure& blocks,
                                    long n, double lambda, int replications, std::uint64_t seed);

// Draws (X, Y) of size n from the model; stream {seed} fully determines the
// bytes drawn.
Dataset sample_dataset(const PopulationModel& model, long n, std::uint64_t seed);

struct NonparametricSample {
  Dataset data;
  Vec signal;  // noiseless sum_j f_j(x_j) at the drawn points
};
NonparametricSample sample_nonparametric(const NonparametricModel& model, long n,
                                         std::uint64_t seed);

void write_sweep_csv(const std::string& path, const ExperimentResult& result);
void write_classify_csv(const std::string& path, const ClassifyResult& result);
void write_meta_json(const std::string& path, const ExperimentConfig& config,
                     const ExperimentResult& result);

}  // namespace glmkl
