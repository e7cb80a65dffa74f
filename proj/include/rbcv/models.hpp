#pragma once

#include "rbcv/black_scholes.hpp"
#include "rbcv/dumbbell.hpp"
#include "rbcv/kolmogorov.hpp"
#include "rbcv/sde.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rbcv {

/// A parametrized SDE together with its scalar output functional.
///
/// Parameter vectors λ are always "full" vectors of size parameter_dimension();
/// the experiment box decides which coordinates actually vary.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index parameter_dimension() const = 0;
  virtual Eigen::Index state_dimension() const = 0;
  virtual int steps() const = 0;
  virtual double horizon() const = 0;
  /// Names of the coordinates of λ, in order.
  virtual std::vector<std::string> parameter_names() const = 0;

  virtual SdeSpec sde(const VectorCRef& lambda) const = 0;
  virtual OutputFunctional output(const VectorCRef& lambda) const = 0;

  /// Approximate grad u for the Kolmogorov-gradient control variate at λ.
  virtual std::shared_ptr<const KolmogorovGradient> solve_kolmogorov(const VectorCRef& lambda) const = 0;
  virtual std::shared_ptr<const KolmogorovGradient> load_gradient(
      const std::filesystem::path& path) const = 0;

  /// Every model setting that a stored basis depends on, as key=value lines.
  virtual std::string fingerprint() const = 0;

  /// Throws std::invalid_argument when λ cannot be simulated at all.
  virtual void check_parameter(const VectorCRef& lambda) const;
};

/// Result of simulating one λ on a PathBundle, optionally with gradient integrals.
struct ModelRun {
  Vector z;           ///< Z^λ per replicate.
  Matrix integrals;   ///< M x K Ito integrals of the supplied gradients.
  std::int64_t gradient_queries = 0;
  std::int64_t gradient_clamps = 0;
};

ModelRun run_model(const Model& model, const VectorCRef& lambda, const PathBundle& paths,
                   std::span<const KolmogorovGradient* const> gradients = {});

/// Black-Scholes call under either the 7-parameter hyperbolic volatility or a
/// constant volatility (λ = (sigma)).
class BlackScholesModel final : public Model {
 public:
  enum class Vol { hyperbolic, constant };

  struct Settings {
    Vol vol = Vol::hyperbolic;
    double s0 = 90.0;
    double strike = 100.0;
    double rate = 0.04;
    double horizon = 1.0;
    int steps = 100;
    int pde_time_steps = 100;
    int pde_space_steps = 300;
    double smax_factor = 3.0;  ///< S_max = smax_factor * K.
  };

  explicit BlackScholesModel(Settings settings);

  std::string name() const override { return "bs"; }
  Eigen::Index parameter_dimension() const override;
  Eigen::Index state_dimension() const override { return 1; }
  int steps() const override { return settings_.steps; }
  double horizon() const override { return settings_.horizon; }
  std::vector<std::string> parameter_names() const override;
  SdeSpec sde(const VectorCRef& lambda) const override;
  OutputFunctional output(const VectorCRef& lambda) const override;
  std::shared_ptr<const KolmogorovGradient> solve_kolmogorov(const VectorCRef& lambda) const override;
  std::shared_ptr<const KolmogorovGradient> load_gradient(
      const std::filesystem::path& path) const override;
  std::string fingerprint() const override;
  void check_parameter(const VectorCRef& lambda) const override;

  const Settings& settings() const { return settings_; }
  BsOutputSpec output_spec() const;
  LocalVolFn volatility(const VectorCRef& lambda) const;

 private:
  Settings settings_;
};

/// Hookean or FENE dumbbell with Kramers output X_i F_j(X).
///
/// λ holds the d^2 - 1 free entries of the velocity gradient. The Kolmogorov
/// gradient is always the exact Hookean one, also for FENE springs.
class DumbbellModel final : public Model {
 public:
  DumbbellModel(DumbbellParams base, int steps);

  std::string name() const override;
  Eigen::Index parameter_dimension() const override;
  Eigen::Index state_dimension() const override { return base_.dimension; }
  int steps() const override { return steps_; }
  double horizon() const override { return base_.horizon; }
  std::vector<std::string> parameter_names() const override;
  SdeSpec sde(const VectorCRef& lambda) const override;
  OutputFunctional output(const VectorCRef& lambda) const override;
  std::shared_ptr<const KolmogorovGradient> solve_kolmogorov(const VectorCRef& lambda) const override;
  std::shared_ptr<const KolmogorovGradient> load_gradient(
      const std::filesystem::path& path) const override;
  std::string fingerprint() const override;

  const DumbbellParams& base() const { return base_; }
  DumbbellParams params(const VectorCRef& lambda) const;

 private:
  DumbbellParams base_;
  int steps_;
};

/// Scalar OU dX = -theta X dt + sigma dB with output g(X) = X_T; λ = (theta, sigma).
class OuModel final : public Model {
 public:
  OuModel(double x0, double horizon, int steps);

  std::string name() const override { return "ou"; }
  Eigen::Index parameter_dimension() const override { return 2; }
  Eigen::Index state_dimension() const override { return 1; }
  int steps() const override { return steps_; }
  double horizon() const override { return horizon_; }
  std::vector<std::string> parameter_names() const override { return {"theta", "sigma"}; }
  SdeSpec sde(const VectorCRef& lambda) const override;
  OutputFunctional output(const VectorCRef& lambda) const override;
  std::shared_ptr<const KolmogorovGradient> solve_kolmogorov(const VectorCRef& lambda) const override;
  std::shared_ptr<const KolmogorovGradient> load_gradient(
      const std::filesystem::path& path) const override;
  std::string fingerprint() const override;

 private:
  double x0_;
  double horizon_;
  int steps_;
};

/// Axis-aligned box over the active coordinates of λ plus frozen values.
///
/// map[k] is the active index feeding full coordinate k, or -1 when the
/// coordinate is frozen at frozen(k). Several full coordinates may share one
/// active index, which ties them (b = c in the volatility experiment).
struct ParameterBox {
  Vector lower;
  Vector upper;
  std::vector<int> map;
  Vector frozen;

  Eigen::Index active_dimension() const { return lower.size(); }
  Eigen::Index full_dimension() const { return static_cast<Eigen::Index>(map.size()); }
  Vector expand(const VectorCRef& active) const;
  /// Active coordinates of a full vector; throws if tied coordinates disagree.
  Vector contract(const VectorCRef& full) const;
  bool contains(const VectorCRef& full, double tolerance = 1e-12) const;
  /// Same center, twice the width in every active coordinate.
  ParameterBox widened(double factor = 2.0) const;
  /// `count` full vectors uniform on the box; point k uses stream (seed, {query, k}).
  std::vector<Vector> sample(std::size_t count, std::uint64_t seed, std::uint32_t query) const;
  void validate() const;
};

}  // namespace rbcv
