#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "glmkl/rng.hpp"
#include "glmkl/solver.hpp"

using namespace glmkl;

namespace {

Mat random_psd(Rng& rng, int p, double ridge) {
  Mat g(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) g(i, j) = rng.normal();
  Mat s = g * g.transpose() / p + ridge * Mat::Identity(p, p);
  return 0.5 * (s + s.transpose()).eval();
}

Vec random_vec(Rng& rng, int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

BlockStructure random_blocks(Rng& rng, int max_m, int max_size) {
  const int m = 1 + static_cast<int>(rng.below(max_m));
  std::vector<int> sizes(m);
  std::vector<double> weights(m);
  for (int j = 0; j < m; ++j) {
    sizes[j] = 1 + static_cast<int>(rng.below(max_size));
    weights[j] = rng.uniform(0.5, 2.0);
  }
  return BlockStructure(std::move(sizes), std::move(weights));
}

EmpiricalMoments moments_from(const Mat& s_xx, const Vec& s_xy) {
  EmpiricalMoments mom;
  mom.s_xx = s_xx;
  mom.s_xy = s_xy;
  mom.s_yy = 1.0 + s_xy.cwiseAbs().sum();  // any value dominating the fit term
  mom.n = 0;
  return mom;
}

double objective(const EmpiricalMoments& mom, const BlockStructure& blocks, const Vec& w,
                 double lambda) {
  double pen = 0.0;
  for (int j = 0; j < blocks.m(); ++j) pen += blocks.weight(j) * blocks.seg(w, j).norm();
  return 0.5 * mom.s_yy - mom.s_xy.dot(w) + 0.5 * w.dot(mom.s_xx * w) + lambda * pen;
}

// Proximal gradient reference: independent of the coordinate solver, slow and
// simple. Step 1/L with L the top eigenvalue of s_xx.
Vec ista_reference(const EmpiricalMoments& mom, const BlockStructure& blocks, double lambda,
                   int iters) {
  const double lip = Eigen::SelfAdjointEigenSolver<Mat>(mom.s_xx, Eigen::EigenvaluesOnly)
                         .eigenvalues()
                         .maxCoeff();
  const double step = 1.0 / std::max(lip, 1e-12);
  Vec w = Vec::Zero(blocks.p());
  for (int it = 0; it < iters; ++it) {
    const Vec v = w - step * (mom.s_xx * w - mom.s_xy);
    for (int j = 0; j < blocks.m(); ++j) {
      const auto vj = blocks.seg(v, j);
      const double norm = vj.norm();
      const double shrink = step * lambda * blocks.weight(j);
      blocks.seg(w, j) = (norm > shrink) ? ((1.0 - shrink / norm) * vj).eval()
                                         : Vec::Zero(vj.size());
    }
  }
  return w;
}

}  // namespace

TEST_CASE("coordinate solver matches proximal-gradient reference") {
  Rng rng(101);
  for (int inst = 0; inst < 25; ++inst) {
    Rng r = rng.child({static_cast<std::uint64_t>(inst)});
    const auto blocks = random_blocks(r, 4, 3);
    const int p = blocks.p();
    const Mat s_xx = random_psd(r, p, 0.1);
    const Vec s_xy = random_vec(r, p);
    const auto mom = moments_from(s_xx, s_xy);
    const double lambda = 0.3 * lambda_max(mom, blocks);
    if (lambda == 0.0) continue;

    const auto sol = solve_fixed_lambda(mom, blocks, lambda);
    const Vec ref = ista_reference(mom, blocks, lambda, 60000);

    CHECK(sol.kkt_residual <= 1e-7);
    CHECK((sol.w - ref).norm() <= 1e-5 * (1.0 + ref.norm()));
    // never worse than the reference
    CHECK(objective(mom, blocks, sol.w, lambda) <=
          objective(mom, blocks, ref, lambda) + 1e-9);
  }
}

TEST_CASE("identity design reduces to block soft thresholding") {
  Rng rng(102);
  const BlockStructure blocks({2, 3, 1}, {1.0, 1.5, 0.7});
  const int p = blocks.p();
  const Vec s_xy = random_vec(rng, p);
  const auto mom = moments_from(Mat::Identity(p, p), s_xy);
  const double lambda = 0.4 * lambda_max(mom, blocks);

  const auto sol = solve_fixed_lambda(mom, blocks, lambda);
  for (int j = 0; j < blocks.m(); ++j) {
    const auto sj = blocks.seg(s_xy, j);
    const double norm = sj.norm();
    const double shrink = lambda * blocks.weight(j);
    const Vec expect = (norm > shrink) ? ((1.0 - shrink / norm) * sj).eval()
                                       : Vec::Zero(sj.size());
    CHECK((blocks.seg(sol.w, j) - expect).norm() <= 1e-8);
  }
}

TEST_CASE("above lambda_max the solution is exactly zero") {
  Rng rng(103);
  const auto blocks = random_blocks(rng, 4, 3);
  const auto mom = moments_from(random_psd(rng, blocks.p(), 0.05), random_vec(rng, blocks.p()));
  const double lmax = lambda_max(mom, blocks);

  for (double factor : {1.0, 1.5, 10.0}) {
    const auto sol = solve_fixed_lambda(mom, blocks, factor * lmax);
    CHECK(sol.w.norm() == 0.0);
    CHECK(sol.pattern.empty());
    CHECK(sol.iterations == 1);
  }
  // just below, something activates
  const auto sol = solve_fixed_lambda(mom, blocks, 0.999 * lmax);
  CHECK_FALSE(sol.pattern.empty());
}

TEST_CASE("inactive blocks come out as exact zeros") {
  Rng rng(104);
  const auto blocks = BlockStructure({2, 2, 2}, {1, 1, 1});
  const auto mom = moments_from(random_psd(rng, 6, 0.2), random_vec(rng, 6));
  const auto sol = solve_fixed_lambda(mom, blocks, 0.7 * lambda_max(mom, blocks));
  bool saw_inactive = false;
  for (int j = 0; j < 3; ++j) {
    if (!sol.pattern.contains(j)) {
      saw_inactive = true;
      CHECK(blocks.seg(sol.w, j).norm() == 0.0);
    }
  }
  CHECK(saw_inactive);
}

TEST_CASE("stationarity report on hand-checkable points") {
  Rng rng(105);
  const BlockStructure blocks({2, 2}, {1.0, 2.0});
  const Mat s_xx = random_psd(rng, 4, 0.3);
  const Vec s_xy = random_vec(rng, 4);
  const auto mom = moments_from(s_xx, s_xy);

  // at w = 0, the violation is the thresholded correlate norm
  const double lambda = 0.5;
  const auto rep0 = check_kkt(mom, blocks, Vec::Zero(4), lambda);
  for (int j = 0; j < 2; ++j) {
    const double expect = std::max(0.0, blocks.seg(s_xy, j).norm() - lambda * blocks.weight(j));
    CHECK(rep0.groups[j].violation == doctest::Approx(expect).epsilon(1e-14));
    CHECK_FALSE(rep0.groups[j].active);
  }

  // squared form at w = 0: thresholds collapse, residual is the raw correlate
  const auto repsq = check_kkt_squared(mom, blocks, Vec::Zero(4), 3.0);
  double raw = 0.0;
  for (int j = 0; j < 2; ++j) raw = std::max(raw, blocks.seg(s_xy, j).norm());
  CHECK(repsq.residual == doctest::Approx(raw).epsilon(1e-14));

  // at the unpenalized optimum with lambda = 0 the residual vanishes
  const Vec wols = ols(mom);
  CHECK(check_kkt(mom, blocks, wols, 0.0).residual <= 1e-10);
}

TEST_CASE("unpenalized solve on worked example and singular refusal") {
  Mat s(2, 2);
  s << 2, 0, 0, 1;
  Vec b(2);
  b << 2, 3;
  const Vec w = ols(moments_from(s, b));
  CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(3.0).epsilon(1e-14));

  Mat sing(2, 2);
  sing << 1, 1, 1, 1;
  CHECK_THROWS_WITH_AS(ols(moments_from(sing, b)), doctest::Contains("singular"),
                       std::runtime_error);
  // lambda = 0 routes through the same refusal
  CHECK_THROWS_AS(solve_fixed_lambda(moments_from(sing, b), BlockStructure({1, 1}, {1, 1}), 0.0),
                  std::runtime_error);
}

TEST_CASE("singular block with too-small threshold is reported unbounded") {
  Mat s(2, 2);
  s << 1, 0, 0, 0;
  Vec b(2);
  b << 0, 1;
  const BlockStructure blocks({1, 1}, {1, 1});
  CHECK_THROWS_WITH_AS(solve_fixed_lambda(moments_from(s, b), blocks, 0.5),
                       doctest::Contains("unbounded"), std::runtime_error);
  // threshold above the correlate keeps it bounded: block stays at zero
  const auto sol = solve_fixed_lambda(moments_from(s, b), blocks, 1.1);
  CHECK(sol.w.norm() == 0.0);
}

TEST_CASE("squared and standard penalties agree through the scalar bridge") {
  Rng rng(106);
  for (int inst = 0; inst < 15; ++inst) {
    Rng r = rng.child({static_cast<std::uint64_t>(inst)});
    const auto blocks = random_blocks(r, 4, 3);
    const auto mom = moments_from(random_psd(r, blocks.p(), 0.15), random_vec(r, blocks.p()));
    const double lambda = rng.uniform(0.1, 0.8) * lambda_max(mom, blocks);
    if (lambda == 0.0) continue;

    const auto sol_l = solve_fixed_lambda(mom, blocks, lambda);
    double total = 0.0;
    for (int j = 0; j < blocks.m(); ++j)
      total += blocks.weight(j) * blocks.seg(sol_l.w, j).norm();
    if (total == 0.0) continue;

    const auto sol_m = solve_fixed_mu(mom, blocks, lambda / total);
    CHECK(sol_m.squared_form);
    CHECK((sol_m.w - sol_l.w).norm() <= 1e-6 * std::max(1.0, sol_l.w.norm()));
    CHECK(sol_m.pattern == sol_l.pattern);
    CHECK(sol_m.kkt_residual <= 1e-7);
  }
}

TEST_CASE("squared-penalty norms shrink as mu grows") {
  Rng rng(107);
  const auto blocks = BlockStructure({2, 2}, {1, 1});
  const auto mom = moments_from(random_psd(rng, 4, 0.2), random_vec(rng, 4));
  double prev = std::numeric_limits<double>::infinity();
  for (double mu : {0.01, 0.1, 1.0, 10.0}) {
    const auto sol = solve_fixed_mu(mom, blocks, mu);
    double total = 0.0;
    for (int j = 0; j < blocks.m(); ++j) total += blocks.seg(sol.w, j).norm();
    CHECK(total <= prev + 1e-9);
    prev = total;
  }
  // mu = 0 is the unpenalized fit
  const auto sol0 = solve_fixed_mu(mom, blocks, 0.0);
  CHECK((sol0.w - ols(mom)).norm() <= 1e-12);
}

TEST_CASE("warm starts do not move the optimum") {
  Rng rng(108);
  const auto blocks = BlockStructure({2, 3}, {1.0, 1.3});
  const auto mom = moments_from(random_psd(rng, 5, 0.25), random_vec(rng, 5));
  const double lambda = 0.4 * lambda_max(mom, blocks);

  const auto cold = solve_fixed_lambda(mom, blocks, lambda);
  Vec start = random_vec(rng, 5);
  SolveOptions opts;
  opts.warm_start = &start;
  const auto warm = solve_fixed_lambda(mom, blocks, lambda, opts);
  CHECK((cold.w - warm.w).norm() <= 1e-6 * (1.0 + cold.w.norm()));
}

TEST_CASE("regularization path endpoints and certificates") {
  Rng rng(109);
  const auto blocks = BlockStructure({2, 2, 2}, {1, 1, 1});
  const auto mom = moments_from(random_psd(rng, 6, 0.2), random_vec(rng, 6));
  PathOptions opts;
  opts.points = 25;
  opts.min_ratio = 1e-2;
  const auto path = regularization_path(mom, blocks, opts);

  const double lmax = lambda_max(mom, blocks);
  CHECK(path.lambdas[0] == doctest::Approx(lmax).epsilon(1e-14));
  CHECK(path.lambdas[24] == doctest::Approx(lmax * 1e-2).epsilon(1e-12));
  for (int i = 1; i < 25; ++i) CHECK(path.lambdas[i] < path.lambdas[i - 1]);

  CHECK(path.solutions[0].w.norm() == 0.0);
  CHECK(path.eta.row(0).norm() == 0.0);
  for (int i = 0; i < 25; ++i) {
    CHECK(path.solutions[static_cast<std::size_t>(i)].kkt_residual <= 1e-7);
    const double rowsum = path.eta.row(i).sum();
    if (path.solutions[static_cast<std::size_t>(i)].w.norm() > 0.0)
      CHECK(rowsum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("adaptive weights come from the unpenalized fit") {
  Rng rng(110);
  const auto blocks = BlockStructure({2, 2}, {1.0, 3.0});
  const auto mom = moments_from(random_psd(rng, 4, 0.3), random_vec(rng, 4));

  // gamma = 0 wipes the weights back to 1 regardless of the originals
  const auto flat = adaptive_group_lasso(mom, blocks, 0.05, 0.0);
  const auto direct = solve_fixed_mu(mom, blocks.with_weights({1.0, 1.0}), 0.05);
  CHECK((flat.w - direct.w).norm() <= 1e-9);

  // an exactly-zero unpenalized block is refused
  Mat s = Mat::Identity(4, 4);
  Vec b(4);
  b << 0, 0, 1, 2;
  CHECK_THROWS_WITH_AS(adaptive_group_lasso(moments_from(s, b), blocks, 0.05, 1.0),
                       doctest::Contains("unpenalized block"), std::runtime_error);
}

TEST_CASE("population solve tracks the truth as regularization vanishes") {
  Mat sigma(4, 4);
  sigma << 1.0, 0.3, 0.1, 0.0, 0.3, 1.0, 0.0, 0.1, 0.1, 0.0, 1.0, 0.2, 0.0, 0.1, 0.2, 1.0;
  Vec w(4);
  w << 1.0, -0.5, 0.0, 0.0;
  const PopulationModel model(sigma, w, 0.7, 0.2);
  const BlockStructure blocks({2, 2}, {1, 1});

  const auto sol = population_group_lasso(model, blocks, 1e-4);
  CHECK((sol.w - w).norm() <= 1e-2);
  CHECK(sol.intercept == doctest::Approx(0.7).epsilon(1e-12));

  // heavier regularization kills the weak group first
  const auto heavy = population_group_lasso(model, blocks, 0.5);
  CHECK(heavy.pattern.card() <= 1);
}

TEST_CASE("intercept identity holds on data") {
  Rng rng(111);
  const int n = 200, p = 4;
  Mat x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal() + 2.0;
  Vec wtrue(p);
  wtrue << 1, 0, -1, 0;
  Vec y(n);
  for (int i = 0; i < n; ++i) y[i] = x.row(i).dot(wtrue) + 0.5 + 0.1 * rng.normal();

  const BlockStructure blocks({2, 2}, {1, 1});
  const auto mom = empirical_moments(Dataset(x, y), blocks);
  const auto sol = solve_fixed_lambda(mom, blocks, 0.05 * lambda_max(mom, blocks));
  CHECK(sol.intercept == doctest::Approx(mom.y_mean - mom.x_mean.dot(sol.w)).epsilon(1e-14));
  CHECK(sol.intercept == doctest::Approx(0.5).epsilon(0.5));
}
