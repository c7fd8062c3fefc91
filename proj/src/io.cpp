#include "glmkl/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace glmkl {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(where + ": cannot parse number from '" + s + "'");
  }
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return j;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

Vec to_vec(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw std::runtime_error(where + " must be an array");
  Vec v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "y")
    throw std::runtime_error(path + ": first column must be named 'y'");
  const int p = static_cast<int>(header.size()) - 1;
  if (p < 1) throw std::runtime_error(path + ": no covariate columns");
  for (int k = 1; k <= p; ++k)
    if (header[k] != "x" + std::to_string(k))
      throw std::runtime_error(path + ": column " + std::to_string(k + 1) + " is '" + header[k] +
                               "', expected 'x" + std::to_string(k) + "'");

  std::vector<double> ys;
  std::vector<double> xs;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != p + 1)
      throw std::runtime_error(path + " row " + std::to_string(row) + ": expected " +
                               std::to_string(p + 1) + " cells, found " + std::to_string(cells.size()));
    const std::string where = path + " row " + std::to_string(row);
    ys.push_back(parse_double(cells[0], where));
    for (int k = 1; k <= p; ++k) xs.push_back(parse_double(cells[k], where));
  }
  const auto n = static_cast<Eigen::Index>(ys.size());
  Mat x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = 0; k < p; ++k) x(i, k) = xs[static_cast<std::size_t>(i) * p + k];
  return Dataset(std::move(x), Eigen::Map<Vec>(ys.data(), n));
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  auto out = open_out(path);
  out << "y";
  for (Eigen::Index k = 0; k < data.p(); ++k) out << ",x" << (k + 1);
  out << "\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out << format_double(data.y[i]);
    for (Eigen::Index k = 0; k < data.p(); ++k) out << "," << format_double(data.x(i, k));
    out << "\n";
  }
}

BlockStructure read_blocks_json(const std::string& path) {
  const json j = load_json(path);
  if (!j.contains("group_sizes")) throw std::runtime_error(path + ": missing group_sizes");
  std::vector<int> sizes = j.at("group_sizes").get<std::vector<int>>();
  std::vector<double> weights(sizes.size(), 1.0);
  if (j.contains("weights")) {
    weights = j.at("weights").get<std::vector<double>>();
    if (weights.size() != sizes.size())
      throw std::runtime_error(path + ": weights count " + std::to_string(weights.size()) +
                               " != group count " + std::to_string(sizes.size()));
  }
  return BlockStructure(std::move(sizes), std::move(weights));
}

void write_blocks_json(const std::string& path, const BlockStructure& blocks) {
  json j;
  j["group_sizes"] = blocks.sizes();
  j["weights"] = blocks.weights();
  open_out(path) << j.dump(2) << "\n";
}

std::pair<PopulationModel, BlockStructure> read_model_json(const std::string& path) {
  const json j = load_json(path);
  for (const char* key : {"sigma_xx", "w", "sigma", "group_sizes"})
    if (!j.contains(key)) throw std::runtime_error(path + ": missing " + std::string(key));

  std::vector<int> sizes = j.at("group_sizes").get<std::vector<int>>();
  std::vector<double> weights(sizes.size(), 1.0);
  if (j.contains("weights")) weights = j.at("weights").get<std::vector<double>>();
  BlockStructure blocks(std::move(sizes), std::move(weights));

  const Vec w = to_vec(j.at("w"), path + ": w");
  const Eigen::Index p = w.size();
  const Vec flat = to_vec(j.at("sigma_xx"), path + ": sigma_xx");
  if (flat.size() != p * p)
    throw std::runtime_error(path + ": sigma_xx has " + std::to_string(flat.size()) +
                             " entries, expected " + std::to_string(p * p));
  Mat sigma_xx(p, p);
  for (Eigen::Index r = 0; r < p; ++r)
    for (Eigen::Index c = 0; c < p; ++c) sigma_xx(r, c) = flat[r * p + c];

  const double sigma = j.at("sigma").get<double>();
  const double b = j.value("b", 0.0);
  if (blocks.p() != p)
    throw std::runtime_error(path + ": group sizes sum to " + std::to_string(blocks.p()) +
                             " but w has length " + std::to_string(p));
  return {PopulationModel(std::move(sigma_xx), w, b, sigma), std::move(blocks)};
}

void write_model_json(const std::string& path, const PopulationModel& model,
                      const BlockStructure& blocks) {
  json j;
  const Mat& s = model.sigma_xx();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(s.size()));
  for (Eigen::Index r = 0; r < s.rows(); ++r)
    for (Eigen::Index c = 0; c < s.cols(); ++c) flat.push_back(s(r, c));
  j["sigma_xx"] = flat;
  j["w"] = std::vector<double>(model.w().data(), model.w().data() + model.w().size());
  j["sigma"] = model.sigma();
  j["b"] = model.b();
  j["group_sizes"] = blocks.sizes();
  j["weights"] = blocks.weights();
  open_out(path) << j.dump(2) << "\n";
}

void write_path_csv(const std::string& path, const PathResult& result) {
  auto out = open_out(path);
  const int m = static_cast<int>(result.eta.cols());
  out << "lambda";
  for (int jx = 1; jx <= m; ++jx) out << ",eta_" << jx;
  out << ",pattern_bits,kkt_residual\n";
  for (Eigen::Index i = 0; i < result.lambdas.size(); ++i) {
    out << format_double(result.lambdas[i]);
    for (int jx = 0; jx < m; ++jx) out << "," << format_double(result.eta(i, jx));
    out << "," << pattern_bits(result.solutions[static_cast<std::size_t>(i)].pattern);
    out << "," << format_double(result.solutions[static_cast<std::size_t>(i)].kkt_residual) << "\n";
  }
}

SparsityPattern parse_pattern(const std::string& text, int m) {
  std::set<int> act;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    int j = 0;
    try {
      std::size_t used = 0;
      j = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw std::runtime_error("pattern: cannot parse group index '" + tok + "'");
    }
    if (j < 1 || j > m)
      throw std::runtime_error("pattern: group " + std::to_string(j) + " outside 1.." +
                               std::to_string(m));
    act.insert(j - 1);
  }
  return SparsityPattern(std::move(act), m);
}

std::string pattern_bits(const SparsityPattern& pattern) {
  std::string bits(static_cast<std::size_t>(pattern.m()), '0');
  for (int j : pattern.active()) bits[static_cast<std::size_t>(j)] = '1';
  return bits;
}

}  // namespace glmkl
