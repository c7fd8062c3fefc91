#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "glmkl/blocks.hpp"

namespace glmkl {

struct Dataset {
  Mat x;  // n x p design
  Vec y;  // length n response

  Dataset(Mat x_, Vec y_) : x(std::move(x_)), y(std::move(y_)) {
    if (x.rows() != y.size())
      throw std::invalid_argument("Dataset: x has " + std::to_string(x.rows()) + " rows but y has " +
                                  std::to_string(y.size()) + " entries");
    if (x.rows() < 2) throw std::invalid_argument("Dataset: need n >= 2 samples");
  }

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }
};

// Centered empirical second moments. n = 0 marks population moments built
// directly from a PopulationModel rather than from data. Means are kept so
// the intercept b = mean(y) - mean(x)'w can be read off a centered solve.
struct EmpiricalMoments {
  double s_yy = 0.0;
  Vec s_xy;
  Mat s_xx;
  Eigen::Index n = 0;
  Vec x_mean;  // empty means zero
  double y_mean = 0.0;

  double intercept_for(const Vec& w) const {
    return y_mean - (x_mean.size() ? x_mean.dot(w) : 0.0);
  }
};

// Centering projection applied through column/row mean subtraction, never by
// materializing Pi_n = I - (1/n)11'.
EmpiricalMoments empirical_moments(const Dataset& data, const BlockStructure& blocks);

// Ground truth for experiments and population conditions.
class PopulationModel {
 public:
  PopulationModel(Mat sigma_xx, Vec w, double b, double sigma);

  const Mat& sigma_xx() const { return sigma_xx_; }
  const Vec& w() const { return w_; }
  double b() const { return b_; }
  double sigma() const { return sigma_; }
  double min_eigenvalue() const { return min_eig_; }

  SparsityPattern support(const BlockStructure& blocks) const {
    return pattern_of(w_, blocks, default_pattern_tol(w_));
  }

  EmpiricalMoments population_moments() const {
    EmpiricalMoments mom;
    mom.s_xx = sigma_xx_;
    mom.s_xy = sigma_xx_ * w_;
    mom.s_yy = w_.dot(mom.s_xy) + sigma_ * sigma_;
    mom.n = 0;
    mom.y_mean = b_;  // population covariates have mean zero
    return mom;
  }

 private:
  Mat sigma_xx_;
  Vec w_;
  double b_;
  double sigma_;
  double min_eig_;
};

}  // namespace glmkl
