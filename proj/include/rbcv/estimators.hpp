#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace rbcv {

/// Standard 95% two-sided normal quantile.
inline constexpr double kDefaultQuantile = 1.96;

/// Summary of one Monte-Carlo estimation: E_M, Var_M and the CLT half-width.
struct EstimatorReport {
  double mean = 0.0;
  double variance = 0.0;
  double half_width = 0.0;
  Eigen::Index replicates = 0;
};

/// E_M(x) = (1/M) sum x_m.
template <typename Derived>
double empirical_mean(const Eigen::DenseBase<Derived>& samples) {
  if (samples.size() == 0) throw std::invalid_argument("empirical_mean: no samples");
  return samples.derived().template cast<double>().mean();
}

/// Var_M(x) = E_M((x - E_M x)^2), the divide-by-M estimator.
template <typename Derived>
double empirical_var(const Eigen::DenseBase<Derived>& samples) {
  if (samples.size() == 0) throw std::invalid_argument("empirical_var: no samples");
  const double mean = empirical_mean(samples);
  const double var = (samples.derived().array() - mean).square().mean();
  return var < 0.0 ? 0.0 : var;
}

/// Cov_M(x, y) = E_M(x y) - E_M(x) E_M(y), evaluated in centered form so that
/// Cov_M(x, x) == Var_M(x) bit for bit.
template <typename DerivedX, typename DerivedY>
double empirical_cov(const Eigen::DenseBase<DerivedX>& x, const Eigen::DenseBase<DerivedY>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("empirical_cov: length mismatch");
  if (x.size() == 0) throw std::invalid_argument("empirical_cov: no samples");
  const double mx = empirical_mean(x);
  const double my = empirical_mean(y);
  return ((x.derived().array() - mx) * (y.derived().array() - my)).mean();
}

/// Mean, variance and half-width a*sqrt(Var_M/M) of a sample.
template <typename Derived>
EstimatorReport confidence_interval(const Eigen::DenseBase<Derived>& samples,
                                    double quantile = kDefaultQuantile) {
  if (!(quantile > 0.0)) throw std::invalid_argument("confidence_interval: quantile must be > 0");
  EstimatorReport report;
  report.mean = empirical_mean(samples);
  report.variance = empirical_var(samples);
  report.replicates = samples.size();
  report.half_width = quantile * std::sqrt(report.variance / static_cast<double>(report.replicates));
  return report;
}

/// Empirical covariance matrix of the columns of a sample matrix (M x I).
Eigen::MatrixXd empirical_cov_matrix(const Eigen::Ref<const Eigen::MatrixXd>& samples);

}  // namespace rbcv
