#pragma once

#include "rbcv/black_scholes.hpp"
#include "rbcv/sde.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <vector>

namespace rbcv {

/// Values C(t_l, S_j) and precomputed dC/dS on a uniform [0,T] x [0,S_max] grid.
struct GridFunction {
  double horizon = 1.0;
  double s_max = 300.0;
  Matrix values;       ///< (L+1) x (J+1), row l is time t_l.
  Matrix derivatives;  ///< Same shape as values.

  int time_steps() const { return static_cast<int>(values.rows()) - 1; }
  int space_steps() const { return static_cast<int>(values.cols()) - 1; }
  double time(int l) const { return horizon * l / time_steps(); }
  double space(int j) const { return s_max * j / space_steps(); }
};

enum class GridField { value, derivative };

/// Bilinear interpolation on the enclosing tile. Queries outside the grid are
/// clamped to the boundary and reported through `clamped`.
double interpolate(const GridFunction& grid, double t, double s, GridField field,
                   bool* clamped = nullptr);

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Crank-Nicolson for dC/dt - rC + rS dC/dS + sigma^2 S^2 / 2 d2C/dS2 = 0
/// backward from C(T,S) = max(S-K, 0).
///
/// The S = 0 row follows the reduced equation dC/dt = rC. The last column is
/// the Dirichlet value S_max - K exp(-r (T - t_l)), i.e. (3 - e^{-r(T-t)}) K
/// when S_max = 3K.
GridFunction solve_bs_crank_nicolson(const LocalVolFn& vol, const BsOutputSpec& output,
                                     int time_steps, int space_steps, double s_max);
GridFunction solve_bs_crank_nicolson(const HyperbolicVolParams& params, const BsOutputSpec& output,
                                     int time_steps, int space_steps, double s_max);

/// Exact Kolmogorov solution u(t,y) = y' A(t) y + c(t) for Hookean dumbbells.
struct HookeanKolmogorov {
  double horizon = 1.0;
  int component_i = 0;
  int component_j = 1;
  std::vector<Matrix> a;  ///< A(t_l), l = 0..L.

  int time_steps() const { return static_cast<int>(a.size()) - 1; }
  /// A(t) linearly interpolated between nodes; clamped to [0, T].
  Matrix matrix_at(double t) const;
  /// grad u(t, y) = 2 A(t) y.
  void gradient(double t, const VectorCRef& y, VectorRef out) const;
};

/// Integrates A' = -(lambda - I)^T A - A (lambda - I) backward from
/// A(T) = (e_i e_j^T + e_j e_i^T) / 2 with classical RK4 on L steps.
HookeanKolmogorov solve_hookean_kolmogorov(const Matrix& lambda, int component_i, int component_j,
                                           double horizon, int time_steps);

/// grad u used by the Kolmogorov-gradient control variates.
class KolmogorovGradient {
 public:
  virtual ~KolmogorovGradient() = default;
  /// Writes grad u(t, y) into `out`; returns true when the query was clamped.
  virtual bool gradient(double t, const VectorCRef& y, VectorRef out) const = 0;
  virtual void save(const std::filesystem::path& path) const = 0;
};

/// BS gradient: d/dS of u = e^{-rt} C, read from a GridFunction.
class GridGradient final : public KolmogorovGradient {
 public:
  GridGradient(GridFunction grid, double rate) : grid_(std::move(grid)), rate_(rate) {}
  bool gradient(double t, const VectorCRef& y, VectorRef out) const override;
  void save(const std::filesystem::path& path) const override;
  const GridFunction& grid() const { return grid_; }

 private:
  GridFunction grid_;
  double rate_;
};

class HookeanGradient final : public KolmogorovGradient {
 public:
  explicit HookeanGradient(HookeanKolmogorov solution) : solution_(std::move(solution)) {}
  bool gradient(double t, const VectorCRef& y, VectorRef out) const override;
  void save(const std::filesystem::path& path) const override;
  const HookeanKolmogorov& solution() const { return solution_; }

 private:
  HookeanKolmogorov solution_;
};

/// Exact gradient exp(-theta (T - t)) for the scalar OU model with g(x) = x.
class OuGradient final : public KolmogorovGradient {
 public:
  OuGradient(double theta, double horizon) : theta_(theta), horizon_(horizon) {}
  bool gradient(double t, const VectorCRef& y, VectorRef out) const override;
  void save(const std::filesystem::path& path) const override;
  double theta() const { return theta_; }

 private:
  double theta_;
  double horizon_;
};

/// Identically zero gradient of a given dimension.
class ZeroGradient final : public KolmogorovGradient {
 public:
  explicit ZeroGradient(Eigen::Index dimension) : dimension_(dimension) {}
  bool gradient(double, const VectorCRef&, VectorRef out) const override {
    out.setZero();
    return false;
  }
  void save(const std::filesystem::path& path) const override;

 private:
  Eigen::Index dimension_;
};

// Binary payloads are little-endian: 4-byte magic, u32 version, then fields.
void write_grid_function(const GridFunction& grid, const std::filesystem::path& path);
GridFunction read_grid_function(const std::filesystem::path& path);
void write_grid_function_csv(const GridFunction& grid, const std::filesystem::path& path);
GridFunction read_grid_function_csv(const std::filesystem::path& path);
void write_hookean(const HookeanKolmogorov& solution, const std::filesystem::path& path);
HookeanKolmogorov read_hookean(const std::filesystem::path& path);

/// Loads any payload written by KolmogorovGradient::save. `rate` is attached
/// to grid payloads.
std::shared_ptr<const KolmogorovGradient> load_kolmogorov_gradient(const std::filesystem::path& path,
                                                                   double rate);

}  // namespace rbcv
