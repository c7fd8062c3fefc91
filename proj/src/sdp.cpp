#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "glmkl/consistency.hpp"

namespace glmkl {

namespace {

// Dense primal simplex for max c'x, ax = b, x >= 0, started from a feasible
// basis. Bland's rule; sizes here are tiny (rows = active group count).
struct SimplexOut {
  Vec x;
  Vec pi;  // equality multipliers at the optimum
};

SimplexOut simplex_max(const Mat& a, const Vec& b, const Vec& c, std::vector<int> basis) {
  const Eigen::Index rows = a.rows();
  for (long iter = 0; iter < 20000; ++iter) {
    Mat bmat(rows, rows);
    for (Eigen::Index r = 0; r < rows; ++r) bmat.col(r) = a.col(basis[static_cast<std::size_t>(r)]);
    const Eigen::PartialPivLU<Mat> lu(bmat);
    const Vec xb = lu.solve(b);
    Vec cb(rows);
    for (Eigen::Index r = 0; r < rows; ++r) cb[r] = c[basis[static_cast<std::size_t>(r)]];
    const Vec pi = lu.transpose().solve(cb);

    int entering = -1;
    for (Eigen::Index q = 0; q < a.cols(); ++q) {
      bool in_basis = false;
      for (int idx : basis) in_basis |= idx == q;
      if (in_basis) continue;
      if (c[q] - pi.dot(a.col(q)) > 1e-10) {
        entering = static_cast<int>(q);
        break;  // smallest improving index
      }
    }
    if (entering < 0) {
      SimplexOut out;
      out.x = Vec::Zero(a.cols());
      for (Eigen::Index r = 0; r < rows; ++r) out.x[basis[static_cast<std::size_t>(r)]] = xb[r];
      out.pi = pi;
      return out;
    }

    const Vec dir = lu.solve(a.col(entering));
    int leave = -1;
    double best_ratio = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (dir[r] > 1e-12) {
        const double ratio = std::max(xb[r], 0.0) / dir[r];
        if (leave < 0 || ratio < best_ratio - 1e-15 ||
            (ratio <= best_ratio + 1e-15 &&
             basis[static_cast<std::size_t>(r)] < basis[static_cast<std::size_t>(leave)]))
          leave = static_cast<int>(r), best_ratio = ratio;
      }
    }
    if (leave < 0) throw std::logic_error("cover relaxation is unbounded");
    basis[static_cast<std::size_t>(leave)] = entering;
  }
  throw std::runtime_error("simplex iteration cap hit");
}

}  // namespace

SdpBound sdp_cover_value(const Mat& a_in, const std::vector<int>& sizes) {
  const int m = static_cast<int>(sizes.size());
  int p = 0;
  std::vector<int> offs;
  for (int s : sizes) {
    offs.push_back(p);
    p += s;
  }
  if (a_in.rows() != p || a_in.cols() != p)
    throw std::invalid_argument("cover: matrix is " + std::to_string(a_in.rows()) + "x" +
                                std::to_string(a_in.cols()) + " but sizes sum to " +
                                std::to_string(p));
  const Mat a = 0.5 * (a_in + a_in.transpose());

  // cut r: sum_j coeff_r[j] lambda_j >= rhs_r, from unit vectors v with
  // coeff_r[j] = ||v_j||^2 and rhs_r = v'av
  std::vector<Vec> coeff;
  std::vector<double> rhs;
  for (int j = 0; j < m; ++j) {
    Eigen::SelfAdjointEigenSolver<Mat> es(a.block(offs[j], offs[j], sizes[j], sizes[j]),
                                          Eigen::EigenvaluesOnly);
    Vec e = Vec::Zero(m);
    e[j] = 1.0;
    coeff.push_back(std::move(e));
    rhs.push_back(std::max(es.eigenvalues().maxCoeff(), 0.0));
  }

  double last_gap = std::numeric_limits<double>::infinity();
  for (int round = 0; round < 5000; ++round) {
    const int ncuts = static_cast<int>(coeff.size());
    // LP dual of the cut relaxation: max rhs'y s.t. sum_r coeff_r[j] y_r <= 1;
    // slacks give the identity starting basis, multipliers give lambda
    Mat lp(m, ncuts + m);
    Vec cost = Vec::Zero(ncuts + m);
    for (int r = 0; r < ncuts; ++r) {
      lp.col(r) = coeff[static_cast<std::size_t>(r)];
      cost[r] = rhs[static_cast<std::size_t>(r)];
    }
    lp.rightCols(m) = Mat::Identity(m, m);
    std::vector<int> basis(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) basis[static_cast<std::size_t>(j)] = ncuts + j;

    const SimplexOut lpout = simplex_max(lp, Vec::Ones(m), cost, std::move(basis));
    const Vec lambda = lpout.pi.cwiseMax(0.0);

    Mat h = -a;
    for (int j = 0; j < m; ++j)
      h.block(offs[j], offs[j], sizes[j], sizes[j]) += lambda[j] * Mat::Identity(sizes[j], sizes[j]);
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    const double lam_min = es.eigenvalues().minCoeff();

    const double lower = lambda.sum();
    const double shift = std::max(0.0, -lam_min);
    const double upper = lower + m * shift;
    const double gap = m * shift;
    if (gap <= 1e-12 + 1e-8 * std::max(1.0, upper)) return {upper, gap};
    last_gap = gap;

    const Vec v = es.eigenvectors().col(0);
    Vec cnew(m);
    for (int j = 0; j < m; ++j) cnew[j] = v.segment(offs[j], sizes[j]).squaredNorm();
    coeff.push_back(std::move(cnew));
    rhs.push_back(v.dot(a * v));
  }
  throw std::runtime_error("semidefinite cover did not converge: gap " + std::to_string(last_gap));
}

}  // namespace glmkl
