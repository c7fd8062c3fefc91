#pragma once

#include <string>
#include <utility>

#include "glmkl/data.hpp"
#include "glmkl/solver.hpp"

namespace glmkl {

// Shortest decimal form that round-trips a double, used for every CSV cell
// so that reruns compare byte for byte.
std::string format_double(double v);

// CSV with header "y,x1,...,xp" in that order.
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const Dataset& data);

// Sidecar {"group_sizes":[...], "weights":[...]}; weights default to 1.
BlockStructure read_blocks_json(const std::string& path);
void write_blocks_json(const std::string& path, const BlockStructure& blocks);

// Ground-truth bundle: sigma_xx (row-major), w, sigma, optional b, plus the
// block structure, so a single file specifies a population problem.
std::pair<PopulationModel, BlockStructure> read_model_json(const std::string& path);
void write_model_json(const std::string& path, const PopulationModel& model,
                      const BlockStructure& blocks);

// Columns lambda, eta_1..eta_m, pattern_bits, kkt_residual; pattern_bits is
// an m-character 0/1 string, group order.
void write_path_csv(const std::string& path, const PathResult& result);

// Comma-separated 1-based group list, e.g. "1,3"; empty string = empty set.
SparsityPattern parse_pattern(const std::string& text, int m);
std::string pattern_bits(const SparsityPattern& pattern);

}  // namespace glmkl
