#pragma once

#include "rbcv/estimators.hpp"
#include "rbcv/kolmogorov.hpp"
#include "rbcv/models.hpp"
#include "rbcv/sde.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace rbcv {

/// Singular values below kSvdCutoff * sigma_max of the centered sample matrix
/// are treated as zero.
inline constexpr double kSvdCutoff = 1e-10;

/// Fraction of clamped grid queries above which evaluations carry a warning.
inline constexpr double kClampWarningRate = 0.1;

struct MuDiagnostics {
  Eigen::Index rank = 0;
  /// Condition number of the covariance matrix C (infinite when singular).
  double condition_number = 0.0;
  double sigma_max = 0.0;
};

struct MuSolution {
  Vector mu;
  MuDiagnostics diagnostics;
};

/// Least-squares fit of z on the columns of a fixed sample matrix Y (M x I).
///
/// Minimizing Var_M(z - Y mu) is the covariance system C mu = b with
/// C = Cov_M(Y, Y) and b = Cov_M(Y, z); it is solved as a least-squares problem
/// on the centered samples (QR, then an SVD of the small triangular factor),
/// which avoids forming C. Leading-column prefixes Y[:, :k] share the same
/// factorization, so every truncated basis is solved from one QR.
class ControlVariateFit {
 public:
  explicit ControlVariateFit(const Eigen::Ref<const Matrix>& y);

  Eigen::Index replicates() const { return centered_.rows(); }
  Eigen::Index basis_size() const { return centered_.cols(); }
  const Vector& column_means() const { return means_; }

  /// Minimum-norm mu for the first `prefix` columns.
  MuSolution solve(const VectorCRef& z, Eigen::Index prefix) const;
  MuSolution solve(const VectorCRef& z) const { return solve(z, basis_size()); }

  /// Var_M(z - Y[:, :k] mu) for a mu of length k.
  double residual_variance(const VectorCRef& z, const VectorCRef& mu) const;

 private:
  Matrix centered_;
  Vector means_;
  Eigen::HouseholderQR<Matrix> qr_;
  std::vector<Eigen::JacobiSVD<Matrix>> prefix_svd_;
};

/// One-shot helper: mu minimizing Var_M(z - y mu) with y given as M x I.
MuSolution solve_mu(const VectorCRef& z, const Eigen::Ref<const Matrix>& y);

struct BasisElement {
  Vector lambda;
  double offline_mean = 0.0;  ///< E_{M_large}(Z^lambda), algorithm 1.
  std::shared_ptr<const KolmogorovGradient> gradient;  ///< algorithm 2.
};

struct BasisMetadata {
  std::string model_fingerprint;
  std::string criterion = "abs";
  double epsilon = 0.0;
  std::uint64_t seed_trial = 0;
  std::uint64_t seed_offline = 0;
  Eigen::Index m_small = 0;
  Eigen::Index m_large = 0;
  std::size_t trial_size = 0;
};

struct ReducedBasis {
  int algorithm = 1;
  std::vector<BasisElement> elements;
  BasisMetadata metadata;

  Eigen::Index size() const { return static_cast<Eigen::Index>(elements.size()); }
  void validate() const;
};

/// Z^lambda_i - E_{M_large}(Z^lambda_i) on the given paths.
Vector eval_basis_algo1(const ReducedBasis& basis, Eigen::Index element, const PathBundle& paths,
                        const Model& model);

/// Ito integral of grad u^lambda_i . sigma^lambda along the lambda-trajectory.
Vector eval_basis_algo2(const ReducedBasis& basis, Eigen::Index element, const VectorCRef& lambda,
                        const PathBundle& paths, const Model& model);

/// z and all basis outputs for one query on one PathBundle.
struct BasisSamples {
  Vector z;
  Matrix y;  ///< M x I.
  std::int64_t gradient_queries = 0;
  std::int64_t gradient_clamps = 0;

  double clamp_rate() const {
    return gradient_queries == 0 ? 0.0
                                 : static_cast<double>(gradient_clamps) / gradient_queries;
  }
};

/// Algorithm 1 basis outputs do not depend on the query; only on the paths.
Matrix algo1_basis_matrix(const ReducedBasis& basis, const PathBundle& paths, const Model& model);

BasisSamples sample_basis(const ReducedBasis& basis, const VectorCRef& lambda,
                          const PathBundle& paths, const Model& model);

struct ControlledEstimate {
  EstimatorReport controlled;
  EstimatorReport raw;
  Vector mu;
  MuDiagnostics diagnostics;
  double clamp_rate = 0.0;
  bool clamp_warning = false;

  /// Var(Z) / Var(Z - Y mu); NaN when Z is constant, inf when fully controlled.
  double reduction_factor() const;
};

/// Controlled report for the first `prefix` basis outputs of pre-computed samples.
ControlledEstimate controlled_from_samples(const VectorCRef& z, const ControlVariateFit& fit,
                                           const Eigen::Ref<const Matrix>& y, Eigen::Index prefix,
                                           double quantile = kDefaultQuantile);

ControlledEstimate controlled_estimate(const ReducedBasis& basis, const VectorCRef& lambda,
                                      const PathBundle& paths, const Model& model,
                                      double quantile = kDefaultQuantile);

// A basis directory holds manifest.json plus one payload file per algorithm-2 element.
void write_basis(const ReducedBasis& basis, const Model& model, const std::filesystem::path& dir);
/// Throws std::runtime_error if the stored fingerprint does not match `model`.
ReducedBasis read_basis(const std::filesystem::path& dir, const Model& model);

}  // namespace rbcv
