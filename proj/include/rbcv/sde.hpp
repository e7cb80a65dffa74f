#pragma once

#include "rbcv/random.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace rbcv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorCRef = Eigen::Ref<const Eigen::VectorXd>;
using VectorRef = Eigen::Ref<Eigen::VectorXd>;
using MatrixRef = Eigen::Ref<Eigen::MatrixXd>;

/// Drift b(t, x) written into `out` (size d).
using DriftFn = std::function<void(double t, const VectorCRef& x, VectorRef out)>;
/// Diffusion sigma(t, x) written into `out` (d x d).
using DiffusionFn = std::function<void(double t, const VectorCRef& x, MatrixRef out)>;
/// Vector-valued integrand h(t, x) written into `out` (size d).
using Integrand = std::function<void(double t, const VectorCRef& x, VectorRef out)>;

/// Relative safety margin kept inside a reflecting ball.
inline constexpr double kReflectionMargin = 1e-6;

struct ReflectingBall {
  double radius = 0.0;
};

/// Parametrized SDE instance dX = b dt + sigma dB on a uniform grid t_n = n T / N.
struct SdeSpec {
  Eigen::Index dimension = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  Vector initial;
  double horizon = 1.0;
  int steps = 1;
  std::optional<ReflectingBall> boundary;

  double time_step() const { return horizon / steps; }
  double time(int n) const { return horizon * n / steps; }
  void validate() const;
};

/// Output functional Z = g(X_T) - sum_n f(t_n, X_n) dt (left-point rule).
struct OutputFunctional {
  std::function<double(const VectorCRef& x)> terminal;
  std::function<double(double t, const VectorCRef& x)> running;
};

/// Raw N(0,1) increments G_n for M replicates x N steps x d components.
///
/// Replicate m of the bundle is the Philox stream (seed, {query,
/// first_replicate + m}), so a bundle can be generated in chunks and still be
/// identical to the whole. Draws are scaled by sqrt(dt) only at use time.
class PathBundle {
 public:
  PathBundle() = default;

  static PathBundle generate(std::uint64_t seed, std::uint32_t query, Eigen::Index replicates,
                             int steps, Eigen::Index dimension,
                             std::uint32_t first_replicate = 0);

  /// Wraps explicit increments; column m holds replicate m as N blocks of d.
  static PathBundle from_increments(Matrix increments, int steps, Eigen::Index dimension);

  Eigen::Index replicates() const { return data_.cols(); }
  int steps() const { return steps_; }
  Eigen::Index dimension() const { return dimension_; }
  std::uint64_t seed() const { return seed_; }
  std::uint32_t query() const { return query_; }

  /// G_n for replicate m as a d-vector.
  auto increment(Eigen::Index m, int n) const {
    return data_.col(m).segment(static_cast<Eigen::Index>(n) * dimension_, dimension_);
  }
  const Matrix& data() const { return data_; }

 private:
  Matrix data_;
  int steps_ = 0;
  Eigen::Index dimension_ = 0;
  std::uint64_t seed_ = 0;
  std::uint32_t query_ = 0;
};

struct SimulateOptions {
  bool store_states = false;
};

/// Everything produced by one Euler-Maruyama sweep over a PathBundle.
struct TrajectoryOutput {
  Matrix terminal;    ///< M x d terminal states X_N.
  Vector functional;  ///< M values of Z.
  Matrix integrals;   ///< M x K discrete Ito integrals, one column per integrand.
  Matrix states;      ///< M x (N+1)d, only when requested.
  std::int64_t boundary_clamps = 0;
};

/// Non-finite state; carries where it happened.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, Eigen::Index replicate, int step)
      : std::runtime_error(what), replicate_(replicate), step_(step) {}
  Eigen::Index replicate() const { return replicate_; }
  int step() const { return step_; }

 private:
  Eigen::Index replicate_;
  int step_;
};

/// Euler-Maruyama with common random numbers.
///
/// X_{n+1} = X_n + dt b(t_n, X_n) + sqrt(dt) sigma(t_n, X_n) G_n, followed by
/// the boundary rule. Each integrand h accumulates the Ito sum
/// sum_n h(t_n, X_n) . sigma(t_n, X_n) sqrt(dt) G_n.
TrajectoryOutput simulate(const SdeSpec& spec, const PathBundle& paths,
                          const OutputFunctional& output,
                          std::span<const Integrand> integrands = {},
                          const SimulateOptions& options = {});

struct ReflectionResult {
  Vector point;
  bool clamped = false;  ///< True when the reflection overshot the ball.
};

/// Radial reflection into the open ball of radius R with a 1e-6 R safety margin.
ReflectionResult reflect_ball(const VectorCRef& x, double radius);

}  // namespace rbcv
