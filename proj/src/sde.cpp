#include "rbcv/sde.hpp"

#include <cmath>
#include <sstream>

namespace rbcv {

void SdeSpec::validate() const {
  if (dimension <= 0) throw std::invalid_argument("SdeSpec: dimension must be positive");
  if (!drift || !diffusion) throw std::invalid_argument("SdeSpec: drift and diffusion required");
  if (initial.size() != dimension)
    throw std::invalid_argument("SdeSpec: initial condition has wrong dimension");
  if (!(horizon > 0.0)) throw std::invalid_argument("SdeSpec: horizon must be > 0");
  if (steps <= 0) throw std::invalid_argument("SdeSpec: steps must be positive");
  if (boundary && !(boundary->radius > 0.0))
    throw std::invalid_argument("SdeSpec: reflecting radius must be > 0");
}

PathBundle PathBundle::generate(std::uint64_t seed, std::uint32_t query, Eigen::Index replicates,
                                int steps, Eigen::Index dimension,
                                std::uint32_t first_replicate) {
  if (replicates <= 0 || steps <= 0 || dimension <= 0)
    throw std::invalid_argument("PathBundle: shape must be positive");
  PathBundle bundle;
  bundle.steps_ = steps;
  bundle.dimension_ = dimension;
  bundle.seed_ = seed;
  bundle.query_ = query;
  bundle.data_.resize(static_cast<Eigen::Index>(steps) * dimension, replicates);
  for (Eigen::Index m = 0; m < replicates; ++m) {
    const RngStream stream(seed, {query, first_replicate + static_cast<std::uint32_t>(m)});
    stream.fill_gaussians({bundle.data_.col(m).data(), static_cast<std::size_t>(bundle.data_.rows())});
  }
  return bundle;
}

PathBundle PathBundle::from_increments(Matrix increments, int steps, Eigen::Index dimension) {
  if (increments.rows() != static_cast<Eigen::Index>(steps) * dimension)
    throw std::invalid_argument("PathBundle: increments must have N*d rows");
  PathBundle bundle;
  bundle.data_ = std::move(increments);
  bundle.steps_ = steps;
  bundle.dimension_ = dimension;
  return bundle;
}

ReflectionResult reflect_ball(const VectorCRef& x, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("reflect_ball: radius must be > 0");
  const double norm = x.norm();
  if (norm < radius) return {x, false};
  const double limit = radius * (1.0 - kReflectionMargin);
  const double reflected = 2.0 * radius - norm;
  if (reflected <= 0.0) return {x * (limit / norm), true};
  return {x * (std::min(reflected, limit) / norm), false};
}

TrajectoryOutput simulate(const SdeSpec& spec, const PathBundle& paths,
                          const OutputFunctional& output, std::span<const Integrand> integrands,
                          const SimulateOptions& options) {
  spec.validate();
  if (!output.terminal) throw std::invalid_argument("simulate: terminal payoff required");
  if (paths.steps() != spec.steps || paths.dimension() != spec.dimension)
    throw std::invalid_argument("simulate: PathBundle shape does not match the SDE");

  const Eigen::Index d = spec.dimension;
  const Eigen::Index replicates = paths.replicates();
  const int steps = spec.steps;
  const auto num_integrands = static_cast<Eigen::Index>(integrands.size());
  const double dt = spec.time_step();
  const double sqrt_dt = std::sqrt(dt);

  TrajectoryOutput result;
  result.terminal.resize(replicates, d);
  result.functional.resize(replicates);
  result.integrals = Matrix::Zero(replicates, num_integrands);
  if (options.store_states) result.states.resize(replicates, (steps + 1) * d);

  Vector x(d), drift(d), noise(d), h(d);
  Matrix sigma(d, d);

  for (Eigen::Index m = 0; m < replicates; ++m) {
    x = spec.initial;
    double running = 0.0;
    if (options.store_states) result.states.row(m).head(d) = x.transpose();
    for (int n = 0; n < steps; ++n) {
      const double t = spec.time(n);
      spec.drift(t, x, drift);
      spec.diffusion(t, x, sigma);
      noise.noalias() = sigma * paths.increment(m, n);
      noise *= sqrt_dt;
      for (Eigen::Index k = 0; k < num_integrands; ++k) {
        integrands[static_cast<std::size_t>(k)](t, x, h);
        result.integrals(m, k) += h.dot(noise);
      }
      if (output.running) running += output.running(t, x) * dt;
      x += dt * drift + noise;
      if (spec.boundary && x.norm() >= spec.boundary->radius) {
        auto reflected = reflect_ball(x, spec.boundary->radius);
        x = reflected.point;
        if (reflected.clamped) ++result.boundary_clamps;
      }
      if (!x.allFinite()) {
        std::ostringstream msg;
        msg << "simulate: non-finite state at replicate " << m << ", step " << n + 1;
        throw SimulationError(msg.str(), m, n + 1);
      }
      if (options.store_states) result.states.row(m).segment((n + 1) * d, d) = x.transpose();
    }
    result.terminal.row(m) = x.transpose();
    result.functional(m) = output.terminal(x) - running;
    if (!std::isfinite(result.functional(m))) {
      std::ostringstream msg;
      msg << "simulate: non-finite functional at replicate " << m;
      throw SimulationError(msg.str(), m, steps);
    }
  }
  if (!result.integrals.allFinite()) throw SimulationError("simulate: non-finite integral", -1, steps);
  return result;
}

}  // namespace rbcv
