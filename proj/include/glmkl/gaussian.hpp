#pragma once

#include <map>
#include <utility>
#include <vector>

#include "glmkl/blocks.hpp"
#include "glmkl/data.hpp"

namespace glmkl {

// Closed-form spectral data for a Gaussian kernel exp(-b(x-x')^2) paired with
// a centered Gaussian input of variance s. The non-centered covariance
// operator diagonalizes in a scaled Hermite basis with geometrically decaying
// eigenvalues; everything downstream (means, cross moments, the truncated
// operator condition) is expressed in that basis.
struct GaussianEigenSystem {
  double s = 0.0;  // input variance
  double b = 0.0;  // kernel bandwidth
  double a = 0.0;  // 1/(4s)
  double c = 0.0;  // sqrt(a^2 + 2ab)
  double big_a = 0.0;  // a + b + c
  double big_b = 0.0;  // b / big_a, the geometric decay ratio in (0,1)
  int trunc = 0;
  Vec lambda;  // eigenvalues, index 0..trunc-1
};

GaussianEigenSystem eigen_system(double s, double b, int trunc);

// Pointwise value of the k-th basis function. Hermite polynomials here are the
// physicists' family (H_0 = 1, H_1 = 2x, H_{k+1} = 2xH_k - 2kH_{k-1}); this is
// the convention under which sum_k lambda_k = 1 closes exactly.
double eigenfunction(const GaussianEigenSystem& sys, int k, double x);

// E e_k(X) for k = 0..trunc-1; odd indices vanish by symmetry.
Vec eigenfunction_means(const GaussianEigenSystem& sys);

// Gauss-Hermite rule for weight exp(-x^2): nodes and weights.
std::pair<Vec, Vec> gauss_hermite(int n);

// integral of exp(-(u,v) q (u,v)^T) H_k(u) H_l(v) over the plane, evaluated by
// rotating q to principal axes and tensorized Gauss-Hermite quadrature. The
// integrand is then polynomial times the quadrature weight, so the rule is
// exact up to rounding. nodes = 0 picks 2*max(k,l) + 40 points per axis.
double d_kl_quadrature(const Mat& q, int k, int l, int nodes = 0);

// Matrix of non-centered second moments E e_k^{row}(X_row) e_l^{col}(X_col)
// for (X_row, X_col) jointly Gaussian with 2x2 covariance s2 (row variable
// first). Both systems must share the truncation level.
Mat cross_moments(const Mat& s2, const GaussianEigenSystem& sys_row,
                  const GaussianEigenSystem& sys_col);

// Population consistency condition values for Gaussian kernels on jointly
// Gaussian scalar inputs, computed in the truncated eigenbasis: for each group
// i outside j_set, (1/d_i) times the norm of
//   Sigma_{ii}^{1/2} C_{iJ} C_{JJ}^{-1} Diag(d_j/|f_j|) g_J,
// where g_j solves f_j = Sigma_{jj}^{1/2} g_j and C are correlation blocks.
// f_coords gives each f_j by its coefficients in that group's eigenbasis
// (length up to trunc; groups outside j_set may be empty).
std::map<int, double> analytic_condition(const Mat& s,
                                         const std::vector<double>& bandwidths,
                                         const std::vector<double>& weights,
                                         const SparsityPattern& j_set,
                                         const std::vector<Vec>& f_coords,
                                         int trunc);

}  // namespace glmkl
