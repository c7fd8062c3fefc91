#include "glmkl/data.hpp"

#include <Eigen/Eigenvalues>

namespace glmkl {

EmpiricalMoments empirical_moments(const Dataset& data, const BlockStructure& blocks) {
  if (data.p() != blocks.p())
    throw std::invalid_argument("empirical_moments: data has " + std::to_string(data.p()) +
                                " covariate columns but blocks describe p = " + std::to_string(blocks.p()));
  const double n = static_cast<double>(data.n());
  const Mat xc = data.x.rowwise() - data.x.colwise().mean();
  const Vec yc = data.y.array() - data.y.mean();

  EmpiricalMoments mom;
  mom.s_xx = (xc.transpose() * xc) / n;
  mom.s_xx = 0.5 * (mom.s_xx + mom.s_xx.transpose()).eval();  // exact symmetry
  mom.s_xy = (xc.transpose() * yc) / n;
  mom.s_yy = yc.squaredNorm() / n;
  mom.n = data.n();
  mom.x_mean = data.x.colwise().mean().transpose();
  mom.y_mean = data.y.mean();
  return mom;
}

PopulationModel::PopulationModel(Mat sigma_xx, Vec w, double b, double sigma)
    : sigma_xx_(std::move(sigma_xx)), w_(std::move(w)), b_(b), sigma_(sigma) {
  if (sigma_xx_.rows() != sigma_xx_.cols())
    throw std::invalid_argument("PopulationModel: sigma_xx must be square");
  if (w_.size() != sigma_xx_.rows())
    throw std::invalid_argument("PopulationModel: w has length " + std::to_string(w_.size()) +
                                " but sigma_xx is " + std::to_string(sigma_xx_.rows()) + "x" +
                                std::to_string(sigma_xx_.cols()));
  if (sigma_ < 0.0) throw std::invalid_argument("PopulationModel: sigma must be >= 0");
  const double asym = (sigma_xx_ - sigma_xx_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10)
    throw std::invalid_argument("PopulationModel: sigma_xx asymmetric by " + std::to_string(asym));
  sigma_xx_ = 0.5 * (sigma_xx_ + sigma_xx_.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma_xx_, Eigen::EigenvaluesOnly);
  min_eig_ = es.eigenvalues().minCoeff();
  if (!(min_eig_ > 0.0))
    throw std::invalid_argument("PopulationModel: sigma_xx not positive definite (min eigenvalue " +
                                std::to_string(min_eig_) + ")");
}

}  // namespace glmkl
