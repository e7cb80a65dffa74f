#include "rbcv/estimators.hpp"

namespace rbcv {

Eigen::MatrixXd empirical_cov_matrix(const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  if (samples.rows() == 0) throw std::invalid_argument("empirical_cov_matrix: no samples");
  const Eigen::MatrixXd centered = samples.rowwise() - samples.colwise().mean();
  return (centered.transpose() * centered) / static_cast<double>(samples.rows());
}

}  // namespace rbcv
