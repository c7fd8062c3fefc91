#include "glmkl/gaussian.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace glmkl {

namespace {

void hermite_row(double x, int count, double* out) {
  out[0] = 1.0;
  if (count > 1) out[1] = 2.0 * x;
  for (int k = 2; k < count; ++k)
    out[k] = 2.0 * x * out[k - 1] - 2.0 * (k - 1) * out[k - 2];
}

double hermite(int k, double x) {
  std::vector<double> h(static_cast<std::size_t>(k) + 1);
  hermite_row(x, k + 1, h.data());
  return h[static_cast<std::size_t>(k)];
}

// sqrt of the basis normalization c^{1/2} / (a^{1/2} 2^k k!), kept as a
// running product so no factorial is formed on its own
double norm_factor(const GaussianEigenSystem& sys, int k) {
  double f = std::sqrt(sys.c / sys.a);
  for (int i = 1; i <= k; ++i) f /= 2.0 * i;
  return std::sqrt(f);
}

}  // namespace

GaussianEigenSystem eigen_system(double s, double b, int trunc) {
  if (!(s > 0.0)) throw std::invalid_argument("eigen_system: input variance must be > 0");
  if (!(b > 0.0)) throw std::invalid_argument("eigen_system: bandwidth must be > 0");
  if (trunc < 1) throw std::invalid_argument("eigen_system: truncation level must be >= 1");
  GaussianEigenSystem sys;
  sys.s = s;
  sys.b = b;
  sys.a = 1.0 / (4.0 * s);
  sys.c = std::sqrt(sys.a * sys.a + 2.0 * sys.a * b);
  sys.big_a = sys.a + b + sys.c;
  sys.big_b = b / sys.big_a;
  sys.trunc = trunc;
  sys.lambda.resize(trunc);
  const double head = std::sqrt(2.0 * sys.a / sys.big_a);
  double lam = head;
  for (int k = 0; k < trunc; ++k) {
    sys.lambda[k] = lam;
    lam *= sys.big_b;
  }
  return sys;
}

double eigenfunction(const GaussianEigenSystem& sys, int k, double x) {
  if (k < 0 || k >= sys.trunc)
    throw std::invalid_argument("eigenfunction: index outside the truncation level");
  return std::sqrt(sys.lambda[k]) * norm_factor(sys, k) *
         std::exp(-(sys.c - sys.a) * x * x) * hermite(k, std::sqrt(2.0 * sys.c) * x);
}

Vec eigenfunction_means(const GaussianEigenSystem& sys) {
  Vec means = Vec::Zero(sys.trunc);
  const double ratio = (sys.c - sys.a) / (2.0 * (sys.c + sys.a));
  const double head = 2.0 * std::sqrt(sys.a * sys.c) / (sys.a + sys.c);
  double central = 1.0;  // binomial(2k, k), built incrementally
  double power = 1.0;    // ratio^k
  for (int k = 0; 2 * k < sys.trunc; ++k) {
    if (k > 0) {
      central *= (2.0 * k) * (2.0 * k - 1.0) / (static_cast<double>(k) * k);
      power *= ratio;
    }
    means[2 * k] = std::sqrt(sys.lambda[2 * k] * head * central) * power;
  }
  return means;
}

namespace {

// Orthonormal Hermite values p_0..p_count-1 at x (weight exp(-x^2)).
void orthonormal_hermite_row(double x, int count, double* out) {
  out[0] = std::pow(M_PI, -0.25);
  if (count > 1) out[1] = std::sqrt(2.0) * x * out[0];
  for (int k = 2; k < count; ++k)
    out[k] = std::sqrt(2.0 / k) * x * out[k - 1] - std::sqrt((k - 1.0) / k) * out[k - 2];
}

}  // namespace

std::pair<Vec, Vec> gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: need at least one node");
  // Eigenvalues of the Jacobi matrix locate the nodes well, but the squared
  // first eigenvector components are only absolutely accurate, which ruins the
  // tail weights (they underflow the eigensolver's noise floor and then meet
  // enormous Hermite values). So: polish each node by Newton on the orthonormal
  // polynomial, then take Christoffel weights 1/sum_k p_k(x)^2, which are
  // relatively accurate however small.
  Mat jac = Mat::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double v = std::sqrt(0.5 * i);
    jac(i, i - 1) = v;
    jac(i - 1, i) = v;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jac, Eigen::EigenvaluesOnly);
  Vec nodes = es.eigenvalues();
  Vec weights(n);
  std::vector<double> p(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i < n; ++i) {
    double x = nodes[i];
    for (int step = 0; step < 4; ++step) {
      orthonormal_hermite_row(x, n + 1, p.data());
      const double deriv = std::sqrt(2.0 * n) * p[static_cast<std::size_t>(n) - 1];
      if (deriv == 0.0) break;
      const double shift = p[static_cast<std::size_t>(n)] / deriv;
      x -= shift;
      if (std::abs(shift) <= 1e-16 * (1.0 + std::abs(x))) break;
    }
    nodes[i] = x;
    orthonormal_hermite_row(x, n, p.data());
    double kernel = 0.0;
    for (int k = 0; k < n; ++k) kernel += p[static_cast<std::size_t>(k)] * p[static_cast<std::size_t>(k)];
    weights[i] = 1.0 / kernel;
  }
  return {std::move(nodes), std::move(weights)};
}

double d_kl_quadrature(const Mat& q, int k, int l, int nodes) {
  if (q.rows() != 2 || q.cols() != 2)
    throw std::invalid_argument("d_kl_quadrature: q must be 2x2");
  if (k < 0 || l < 0) throw std::invalid_argument("d_kl_quadrature: negative index");
  const Mat sym = 0.5 * (q + q.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("d_kl_quadrature: q must be positive definite");
  if (nodes <= 0) nodes = 2 * std::max(k, l) + 40;

  // z = sqrt(eig) V^T (u,v) turns the exponent into -|z|^2; back-map the
  // Hermite arguments through columns of V eig^{-1/2}
  const Mat back = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
  const double jac = 1.0 / std::sqrt(es.eigenvalues().prod());

  const auto [gh_nodes, gh_weights] = gauss_hermite(nodes);
  double total = 0.0;
  for (int i = 0; i < nodes; ++i) {
    for (int j = 0; j < nodes; ++j) {
      const double u = back(0, 0) * gh_nodes[i] + back(0, 1) * gh_nodes[j];
      const double v = back(1, 0) * gh_nodes[i] + back(1, 1) * gh_nodes[j];
      total += gh_weights[i] * gh_weights[j] * hermite(k, u) * hermite(l, v);
    }
  }
  return jac * total;
}

Mat cross_moments(const Mat& s2, const GaussianEigenSystem& sys_row,
                  const GaussianEigenSystem& sys_col) {
  if (s2.rows() != 2 || s2.cols() != 2)
    throw std::invalid_argument("cross_moments: covariance block must be 2x2");
  if (sys_row.trunc != sys_col.trunc)
    throw std::invalid_argument("cross_moments: systems disagree on truncation");
  const double det = s2(0, 0) * s2(1, 1) - s2(0, 1) * s2(1, 0);
  if (!(det > 0.0))
    throw std::invalid_argument("cross_moments: covariance block is degenerate");
  const int count = sys_row.trunc;

  const double cr = sys_row.c, cc = sys_col.c;
  Mat scaled(2, 2);
  scaled << s2(0, 0) * cr, s2(0, 1) * std::sqrt(cr * cc),
      s2(1, 0) * std::sqrt(cr * cc), s2(1, 1) * cc;
  Mat q = 0.25 * scaled.inverse();
  q(0, 0) += 0.5 * (1.0 - sys_row.a / cr);
  q(1, 1) += 0.5 * (1.0 - sys_col.a / cc);

  // One grid serves every (k,l) pair: tabulate weighted Hermite values along
  // each rotated coordinate and contract. Node count is what the largest pair
  // would demand, so the rule stays exact for all of them.
  const int nodes = 2 * (count - 1) + 40;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (q + q.transpose()));
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("cross_moments: assembled quadratic form not positive definite");
  const Mat back = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
  const double jac = 1.0 / std::sqrt(es.eigenvalues().prod());
  const auto [gh_nodes, gh_weights] = gauss_hermite(nodes);

  Mat hu(nodes * nodes, count), hv(nodes * nodes, count);
  std::vector<double> row(static_cast<std::size_t>(count));
  for (int i = 0; i < nodes; ++i) {
    for (int j = 0; j < nodes; ++j) {
      const double wt = std::sqrt(gh_weights[i] * gh_weights[j]);
      const double u = back(0, 0) * gh_nodes[i] + back(0, 1) * gh_nodes[j];
      const double v = back(1, 0) * gh_nodes[i] + back(1, 1) * gh_nodes[j];
      const int at = i * nodes + j;
      hermite_row(u, count, row.data());
      for (int t = 0; t < count; ++t) hu(at, t) = wt * row[static_cast<std::size_t>(t)];
      hermite_row(v, count, row.data());
      for (int t = 0; t < count; ++t) hv(at, t) = wt * row[static_cast<std::size_t>(t)];
    }
  }
  Mat d = jac * (hu.transpose() * hv);

  const double shared = 1.0 / (4.0 * M_PI * std::sqrt(cr * cc) * std::sqrt(det));
  for (int k = 0; k < count; ++k) {
    const double fk = std::sqrt(sys_row.lambda[k]) * norm_factor(sys_row, k);
    for (int l = 0; l < count; ++l) {
      const double fl = std::sqrt(sys_col.lambda[l]) * norm_factor(sys_col, l);
      d(k, l) *= shared * fk * fl;
    }
  }
  return d;
}

namespace {

struct GroupOperator {
  Mat cov;        // centered covariance block, eigen-cleaned
  Mat half;       // cov^{1/2}
  Mat half_inv;   // cov^{-1/2}
};

GroupOperator group_operator(const GaussianEigenSystem& sys, const Vec& means, int group) {
  GroupOperator op;
  op.cov = Mat(sys.lambda.asDiagonal());
  op.cov -= means * means.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(op.cov);
  if (es.eigenvalues().minCoeff() <= 1e-12)
    throw std::runtime_error(
        "analytic_condition: truncated covariance block for group " + std::to_string(group + 1) +
        " is numerically singular; reduce the truncation level");
  const Vec root = es.eigenvalues().cwiseSqrt();
  op.half = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  op.half_inv = es.eigenvectors() * root.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return op;
}

Mat pair_covariance(const Mat& s, int i, int j) {
  Mat s2(2, 2);
  s2 << s(i, i), s(i, j), s(j, i), s(j, j);
  return s2;
}

}  // namespace

std::map<int, double> analytic_condition(const Mat& s,
                                         const std::vector<double>& bandwidths,
                                         const std::vector<double>& weights,
                                         const SparsityPattern& j_set,
                                         const std::vector<Vec>& f_coords,
                                         int trunc) {
  const int m = static_cast<int>(s.rows());
  if (s.cols() != m) throw std::invalid_argument("analytic_condition: covariance must be square");
  if (static_cast<int>(bandwidths.size()) != m ||
      static_cast<int>(weights.size()) != m ||
      static_cast<int>(f_coords.size()) != m)
    throw std::invalid_argument("analytic_condition: per-group inputs must match the group count");
  if (j_set.m() != m)
    throw std::invalid_argument("analytic_condition: pattern group count mismatch");
  if (j_set.empty())
    throw std::invalid_argument("analytic_condition: pattern has no active group");
  for (double w : weights)
    if (!(w > 0.0)) throw std::invalid_argument("analytic_condition: weights must be > 0");
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + s.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("analytic_condition: covariance must be symmetric");

  std::vector<GaussianEigenSystem> systems;
  std::vector<Vec> means;
  systems.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    systems.push_back(eigen_system(s(j, j), bandwidths[j], trunc));
    means.push_back(eigenfunction_means(systems.back()));
  }

  const std::vector<int> active(j_set.active().begin(), j_set.active().end());
  const int r = static_cast<int>(active.size());

  std::vector<GroupOperator> ops;
  ops.reserve(static_cast<std::size_t>(r));
  std::vector<Vec> scaled_g;  // (d_j/|f_j|) Sigma_jj^{-1/2} f_j per active group
  for (int j : active) {
    ops.push_back(group_operator(systems[static_cast<std::size_t>(j)],
                                 means[static_cast<std::size_t>(j)], j));
    Vec coords = Vec::Zero(trunc);
    const Vec& given = f_coords[static_cast<std::size_t>(j)];
    if (given.size() > trunc)
      throw std::invalid_argument(
          "analytic_condition: coefficient vector longer than the truncation level");
    coords.head(given.size()) = given;
    const double norm = coords.norm();
    if (!(norm > 0.0))
      throw std::invalid_argument("analytic_condition: active group " + std::to_string(j + 1) +
                                  " has a zero coefficient vector");
    scaled_g.push_back(weights[static_cast<std::size_t>(j)] / norm *
                       (ops.back().half_inv * coords));
  }

  const auto centered_cross = [&](int gi, int gj) {
    const Mat raw = cross_moments(pair_covariance(s, gi, gj), systems[static_cast<std::size_t>(gi)],
                                  systems[static_cast<std::size_t>(gj)]);
    return Mat(raw - means[static_cast<std::size_t>(gi)] *
                         means[static_cast<std::size_t>(gj)].transpose());
  };

  // correlation blocks among active groups
  Mat corr = Mat::Identity(r * trunc, r * trunc);
  for (int bi = 0; bi < r; ++bi)
    for (int bj = bi + 1; bj < r; ++bj) {
      const Mat block = ops[static_cast<std::size_t>(bi)].half_inv *
                        centered_cross(active[static_cast<std::size_t>(bi)],
                                       active[static_cast<std::size_t>(bj)]) *
                        ops[static_cast<std::size_t>(bj)].half_inv;
      corr.block(bi * trunc, bj * trunc, trunc, trunc) = block;
      corr.block(bj * trunc, bi * trunc, trunc, trunc) = block.transpose();
    }

  Eigen::SelfAdjointEigenSolver<Mat> ces(corr);
  if (ces.eigenvalues().minCoeff() <= 1e-12)
    throw std::runtime_error(
        "analytic_condition: truncated joint correlation operator is numerically singular; "
        "reduce the truncation level");

  Vec rhs(r * trunc);
  for (int bi = 0; bi < r; ++bi) rhs.segment(bi * trunc, trunc) = scaled_g[static_cast<std::size_t>(bi)];
  const Vec z = ces.eigenvectors() *
                (ces.eigenvalues().cwiseInverse().asDiagonal() *
                 (ces.eigenvectors().transpose() * rhs));

  // Sigma_ii^{1/2} C_iJ collapses to Sigma_iJ Diag(Sigma_jj^{-1/2}); no
  // square root of the inactive diagonal blocks is ever needed.
  std::map<int, double> out;
  for (int i : j_set.complement()) {
    Vec image = Vec::Zero(trunc);
    for (int bi = 0; bi < r; ++bi)
      image += centered_cross(i, active[static_cast<std::size_t>(bi)]) *
               (ops[static_cast<std::size_t>(bi)].half_inv * z.segment(bi * trunc, trunc));
    out[i] = image.norm() / weights[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace glmkl
