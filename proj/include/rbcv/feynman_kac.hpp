#pragma once

#include "rbcv/estimators.hpp"
#include "rbcv/sde.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace rbcv {

// Jacobians follow the gradient convention (grad b)_{ij} = d b_j / d x_i, so
// that for b(x) = A x the first variation tends to exp(A^T T) and
// E[Phi_T grad g(X_T)] is the gradient of u.

/// grad b(t, x) written into `out` (d x d).
using DriftJacobianFn = std::function<void(double t, const VectorCRef& x, MatrixRef out)>;
/// grad sigma_k(t, x) for column k of sigma: (out)_{ij} = d sigma_{jk} / d x_i.
using DiffusionJacobianFn =
    std::function<void(double t, const VectorCRef& x, Eigen::Index k, MatrixRef out)>;
/// grad g(x) or grad f(t, x) written into `out` (size d).
using TerminalGradientFn = std::function<void(const VectorCRef& x, VectorRef out)>;
using RunningGradientFn = std::function<void(double t, const VectorCRef& x, VectorRef out)>;

/// Pathwise first variation Phi coupled to an Euler-Maruyama trajectory:
/// Phi_0 = I and Phi_{n+1} = Phi_n (I + dt grad b + sqrt(dt) sum_k G_{n,k} grad sigma_k).
struct FirstVariationState {
  Matrix terminal;                  ///< M x d terminal states.
  std::vector<Matrix> phi;          ///< Phi_N per replicate.
  /// Phi_n per replicate and step (n = 0..N), only when requested.
  std::vector<std::vector<Matrix>> phi_path;
  Matrix states;                    ///< M x (N+1)d, only when requested.
};

struct FirstVariationOptions {
  bool store_path = false;
};

FirstVariationState simulate_first_variation(const SdeSpec& spec, const PathBundle& paths,
                                             const DriftJacobianFn& grad_b,
                                             const DiffusionJacobianFn& grad_sigma = {},
                                             const FirstVariationOptions& options = {});

struct GradientEstimate {
  Vector gradient;
  std::vector<EstimatorReport> components;
};

/// Monte-Carlo estimate of grad u(t, y) = E[Phi_T grad g(X_T) - int_t^T Phi_s grad f ds]
/// for X started at y at time t. `t` must lie on the time grid of `spec`;
/// replicates use streams (seed, {0, m}).
GradientEstimate grad_u_estimate(const SdeSpec& spec, double t, const VectorCRef& y,
                                 const DriftJacobianFn& grad_b,
                                 const DiffusionJacobianFn& grad_sigma,
                                 const TerminalGradientFn& grad_g, const RunningGradientFn& grad_f,
                                 Eigen::Index replicates, std::uint64_t seed,
                                 double quantile = kDefaultQuantile);

}  // namespace rbcv
