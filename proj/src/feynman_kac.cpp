#include "rbcv/feynman_kac.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rbcv {

namespace {

constexpr Eigen::Index kGradientChunk = 10000;

// Runs X and Phi forward on every replicate and calls visit(m, n, x, phi) at
// each grid node n = 0..N.
template <typename Visit>
void first_variation_loop(const SdeSpec& spec, const PathBundle& paths,
                          const DriftJacobianFn& grad_b, const DiffusionJacobianFn& grad_sigma,
                          Visit&& visit) {
  spec.validate();
  if (!grad_b) throw std::invalid_argument("first variation: grad b is required");
  if (spec.boundary)
    throw std::invalid_argument("first variation: reflecting boundaries are not supported");
  if (paths.steps() != spec.steps || paths.dimension() != spec.dimension)
    throw std::invalid_argument("first variation: PathBundle shape does not match the SDE");

  const Eigen::Index d = spec.dimension;
  const double dt = spec.time_step();
  const double sqrt_dt = std::sqrt(dt);
  Vector x(d), drift(d);
  Matrix sigma(d, d), jac(d, d), factor(d, d), phi(d, d), next(d, d), jac_sigma(d, d);

  for (Eigen::Index m = 0; m < paths.replicates(); ++m) {
    x = spec.initial;
    phi.setIdentity();
    visit(m, 0, x, phi);
    for (int n = 0; n < spec.steps; ++n) {
      const double t = spec.time(n);
      const auto g = paths.increment(m, n);
      grad_b(t, x, jac);
      factor.setIdentity();
      factor += dt * jac;
      if (grad_sigma) {
        for (Eigen::Index k = 0; k < d; ++k) {
          grad_sigma(t, x, k, jac_sigma);
          factor += (sqrt_dt * g(k)) * jac_sigma;
        }
      }
      spec.drift(t, x, drift);
      spec.diffusion(t, x, sigma);
      x += dt * drift + sqrt_dt * (sigma * g);
      next.noalias() = phi * factor;
      phi.swap(next);
      if (!x.allFinite() || !phi.allFinite()) {
        std::ostringstream msg;
        msg << "first variation: non-finite state at replicate " << m << ", step " << n + 1;
        throw SimulationError(msg.str(), m, n + 1);
      }
      visit(m, n + 1, x, phi);
    }
  }
}

}  // namespace

FirstVariationState simulate_first_variation(const SdeSpec& spec, const PathBundle& paths,
                                             const DriftJacobianFn& grad_b,
                                             const DiffusionJacobianFn& grad_sigma,
                                             const FirstVariationOptions& options) {
  const Eigen::Index d = spec.dimension;
  const Eigen::Index replicates = paths.replicates();
  FirstVariationState state;
  state.terminal.resize(replicates, d);
  state.phi.resize(static_cast<std::size_t>(replicates));
  if (options.store_path) {
    state.phi_path.resize(static_cast<std::size_t>(replicates));
    state.states.resize(replicates, (spec.steps + 1) * d);
  }
  first_variation_loop(spec, paths, grad_b, grad_sigma,
                       [&](Eigen::Index m, int n, const Vector& x, const Matrix& phi) {
                         if (options.store_path) {
                           state.phi_path[static_cast<std::size_t>(m)].push_back(phi);
                           state.states.row(m).segment(static_cast<Eigen::Index>(n) * d, d) =
                               x.transpose();
                         }
                         if (n == spec.steps) {
                           state.terminal.row(m) = x.transpose();
                           state.phi[static_cast<std::size_t>(m)] = phi;
                         }
                       });
  return state;
}

GradientEstimate grad_u_estimate(const SdeSpec& spec, double t, const VectorCRef& y,
                                 const DriftJacobianFn& grad_b,
                                 const DiffusionJacobianFn& grad_sigma,
                                 const TerminalGradientFn& grad_g, const RunningGradientFn& grad_f,
                                 Eigen::Index replicates, std::uint64_t seed, double quantile) {
  spec.validate();
  if (!grad_g) throw std::invalid_argument("grad_u_estimate: grad g is required");
  if (y.size() != spec.dimension) throw std::invalid_argument("grad_u_estimate: y has wrong size");
  if (replicates <= 0) throw std::invalid_argument("grad_u_estimate: replicates must be positive");
  const double dt = spec.time_step();
  const double position = t / dt;
  const auto start = static_cast<int>(std::llround(position));
  if (start < 0 || start > spec.steps || std::abs(position - start) > 1e-9 * spec.steps)
    throw std::invalid_argument("grad_u_estimate: t must be a node of the time grid");

  const Eigen::Index d = spec.dimension;
  Matrix samples(replicates, d);
  if (start == spec.steps) {
    Vector g(d);
    grad_g(y, g);
    samples.rowwise() = g.transpose();
  } else {
    // The same dynamics restarted at (t, y) on the remaining steps.
    const double t0 = spec.time(start);
    SdeSpec shifted = spec;
    shifted.initial = y;
    shifted.steps = spec.steps - start;
    shifted.horizon = spec.horizon - t0;
    shifted.drift = [&spec, t0](double s, const VectorCRef& x, VectorRef out) { spec.drift(s + t0, x, out); };
    shifted.diffusion = [&spec, t0](double s, const VectorCRef& x, MatrixRef out) {
      spec.diffusion(s + t0, x, out);
    };
    const DriftJacobianFn shifted_b = [&grad_b, t0](double s, const VectorCRef& x, MatrixRef out) {
      grad_b(s + t0, x, out);
    };
    DiffusionJacobianFn shifted_sigma;
    if (grad_sigma)
      shifted_sigma = [&grad_sigma, t0](double s, const VectorCRef& x, Eigen::Index k, MatrixRef out) {
        grad_sigma(s + t0, x, k, out);
      };

    const double h = shifted.time_step();
    Vector g(d), f(d), acc(d);
    // Replicates are independent streams, so chunking only bounds memory.
    for (Eigen::Index first = 0; first < replicates; first += kGradientChunk) {
      const Eigen::Index count = std::min(kGradientChunk, replicates - first);
      const auto paths = PathBundle::generate(seed, 0, count, shifted.steps, d, first);
      first_variation_loop(shifted, paths, shifted_b, shifted_sigma,
                           [&](Eigen::Index m, int n, const Vector& x, const Matrix& phi) {
                             if (n == 0) acc.setZero();
                             if (n < shifted.steps) {
                               if (grad_f) {
                                 grad_f(shifted.time(n) + t0, x, f);
                                 acc.noalias() -= h * (phi * f);
                               }
                               return;
                             }
                             grad_g(x, g);
                             acc.noalias() += phi * g;
                             samples.row(first + m) = acc.transpose();
                           });
    }
  }

  GradientEstimate estimate;
  estimate.gradient.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    estimate.components.push_back(confidence_interval(samples.col(k), quantile));
    estimate.gradient(k) = estimate.components.back().mean;
  }
  return estimate;
}

}  // namespace rbcv
