#include "rbcv/kolmogorov.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace rbcv {

namespace {

constexpr std::uint32_t kPayloadVersion = 1;

class LittleEndianWriter {
 public:
  explicit LittleEndianWriter(const std::filesystem::path& path)
      : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  void magic(const char (&tag)[5]) { out_.write(tag, 4); }
  void u32(std::uint32_t v) {
    std::array<char, 4> bytes;
    for (int k = 0; k < 4; ++k) bytes[k] = static_cast<char>((v >> (8 * k)) & 0xFF);
    out_.write(bytes.data(), 4);
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<char, 8> bytes;
    for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
    out_.write(bytes.data(), 8);
  }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed");
  }

 private:
  std::ofstream out_;
};

class LittleEndianReader {
 public:
  explicit LittleEndianReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open " + path.string());
  }
  std::string magic() {
    char tag[4];
    read(tag, 4);
    return {tag, 4};
  }
  std::uint32_t u32() {
    unsigned char bytes[4];
    read(reinterpret_cast<char*>(bytes), 4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes[k]) << (8 * k);
    return v;
  }
  double f64() {
    unsigned char bytes[8];
    read(reinterpret_cast<char*>(bytes), 8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
    return std::bit_cast<double>(v);
  }

 private:
  void read(char* dst, std::streamsize n) {
    in_.read(dst, n);
    if (in_.gcount() != n) throw std::runtime_error("truncated payload file");
  }
  std::ifstream in_;
};

std::string read_magic(const std::filesystem::path& path) {
  LittleEndianReader reader(path);
  return reader.magic();
}

void expect_version(LittleEndianReader& reader) {
  const auto version = reader.u32();
  if (version != kPayloadVersion)
    throw std::runtime_error("unsupported payload version " + std::to_string(version));
}

// Thomas algorithm for a tridiagonal system; sub[0] and super[n-1] are unused.
void solve_tridiagonal(const Vector& sub, Vector diag, const Vector& super, Vector& rhs) {
  const Eigen::Index n = diag.size();
  for (Eigen::Index i = 1; i < n; ++i) {
    const double w = sub(i) / diag(i - 1);
    diag(i) -= w * super(i - 1);
    rhs(i) -= w * rhs(i - 1);
  }
  rhs(n - 1) /= diag(n - 1);
  for (Eigen::Index i = n - 2; i >= 0; --i) rhs(i) = (rhs(i) - super(i) * rhs(i + 1)) / diag(i);
}

}  // namespace

double interpolate(const GridFunction& grid, double t, double s, GridField field, bool* clamped) {
  const Matrix& table = field == GridField::value ? grid.values : grid.derivatives;
  const int nl = grid.time_steps();
  const int nj = grid.space_steps();
  const double time_tol = 1e-12 * grid.horizon;
  bool outside = t < -time_tol || t > grid.horizon + time_tol || s < 0.0 || s > grid.s_max;
  if (clamped) *clamped = outside;

  const double tl = std::clamp(t / grid.horizon, 0.0, 1.0) * nl;
  const double sj = std::clamp(s / grid.s_max, 0.0, 1.0) * nj;
  const int l = std::min(static_cast<int>(tl), nl - 1);
  const int j = std::min(static_cast<int>(sj), nj - 1);
  const double wt = tl - l;
  const double ws = sj - j;
  return (1.0 - wt) * ((1.0 - ws) * table(l, j) + ws * table(l, j + 1)) +
         wt * ((1.0 - ws) * table(l + 1, j) + ws * table(l + 1, j + 1));
}

GridFunction solve_bs_crank_nicolson(const LocalVolFn& vol, const BsOutputSpec& output,
                                     int time_steps, int space_steps, double s_max) {
  output.validate();
  if (time_steps < 2 || space_steps < 2)
    throw std::invalid_argument("crank-nicolson: need at least 2 time and 2 space steps");
  if (!(s_max > output.strike))
    throw std::invalid_argument("crank-nicolson: S_max must exceed the strike");

  const int nl = time_steps;
  const int nj = space_steps;
  const double r = output.rate;
  const double dt = output.horizon / nl;
  const double ds = s_max / nj;

  GridFunction grid;
  grid.horizon = output.horizon;
  grid.s_max = s_max;
  grid.values.resize(nl + 1, nj + 1);
  grid.derivatives.resize(nl + 1, nj + 1);

  for (int j = 0; j <= nj; ++j) grid.values(nl, j) = std::max(j * ds - output.strike, 0.0);

  // Operator coefficients at one time level: (L C)_j = lo_j C_{j-1} + mid_j C_j + up_j C_{j+1}.
  const Eigen::Index interior = nj - 1;
  Vector lo(interior), mid(interior), up(interior);
  const auto assemble = [&](double t, Vector& lower, Vector& diag, Vector& upper) {
    for (int j = 1; j < nj; ++j) {
      const double s = j * ds;
      const double sigma = vol(t, s);
      const double diffusion = 0.5 * sigma * sigma * s * s / (ds * ds);
      const double advection = 0.5 * r * s / ds;
      lower(j - 1) = diffusion - advection;
      diag(j - 1) = -2.0 * diffusion - r;
      upper(j - 1) = diffusion + advection;
    }
  };
  Vector lo_next(interior), mid_next(interior), up_next(interior);
  assemble(grid.time(nl), lo_next, mid_next, up_next);

  Vector rhs(interior), sub(interior), diag(interior), super(interior);
  for (int l = nl - 1; l >= 0; --l) {
    const double t = grid.time(l);
    assemble(t, lo, mid, up);
    const auto previous = grid.values.row(l + 1);

    const double c0 = previous(0) * (1.0 - 0.5 * r * dt) / (1.0 + 0.5 * r * dt);
    const double c_top = s_max - output.strike * std::exp(-r * (output.horizon - t));

    for (Eigen::Index k = 0; k < interior; ++k) {
      const int j = static_cast<int>(k) + 1;
      rhs(k) = previous(j) + 0.5 * dt * (lo_next(k) * previous(j - 1) + mid_next(k) * previous(j) +
                                         up_next(k) * previous(j + 1));
      sub(k) = -0.5 * dt * lo(k);
      diag(k) = 1.0 - 0.5 * dt * mid(k);
      super(k) = -0.5 * dt * up(k);
    }
    rhs(0) -= sub(0) * c0;
    rhs(interior - 1) -= super(interior - 1) * c_top;
    solve_tridiagonal(sub, diag, super, rhs);

    grid.values(l, 0) = c0;
    grid.values.row(l).segment(1, interior) = rhs.transpose();
    grid.values(l, nj) = c_top;
    if (!grid.values.row(l).allFinite()) {
      std::ostringstream msg;
      msg << "crank-nicolson: non-finite solution at time level " << l << " (L=" << nl
          << ", J=" << nj << ", S_max=" << s_max << ")";
      throw SolverError(msg.str());
    }
    lo_next.swap(lo);
    mid_next.swap(mid);
    up_next.swap(up);
  }

  for (int l = 0; l <= nl; ++l) {
    const auto c = grid.values.row(l);
    auto dc = grid.derivatives.row(l);
    dc(0) = (-3.0 * c(0) + 4.0 * c(1) - c(2)) / (2.0 * ds);
    for (int j = 1; j < nj; ++j) dc(j) = (c(j + 1) - c(j - 1)) / (2.0 * ds);
    dc(nj) = (3.0 * c(nj) - 4.0 * c(nj - 1) + c(nj - 2)) / (2.0 * ds);
  }
  return grid;
}

GridFunction solve_bs_crank_nicolson(const HyperbolicVolParams& params, const BsOutputSpec& output,
                                     int time_steps, int space_steps, double s_max) {
  const HyperbolicVol vol(params);
  return solve_bs_crank_nicolson([&vol](double t, double s) { return vol(t, s); }, output,
                                 time_steps, space_steps, s_max);
}

Matrix HookeanKolmogorov::matrix_at(double t) const {
  const int nl = time_steps();
  const double tl = std::clamp(t / horizon, 0.0, 1.0) * nl;
  const int l = std::min(static_cast<int>(tl), nl - 1);
  const double w = tl - l;
  if (w == 0.0) return a[static_cast<std::size_t>(l)];
  return (1.0 - w) * a[static_cast<std::size_t>(l)] + w * a[static_cast<std::size_t>(l) + 1];
}

void HookeanKolmogorov::gradient(double t, const VectorCRef& y, VectorRef out) const {
  const int nl = time_steps();
  const double tl = std::clamp(t / horizon, 0.0, 1.0) * nl;
  const int l = std::min(static_cast<int>(tl), nl - 1);
  const double w = tl - l;
  const auto& a0 = a[static_cast<std::size_t>(l)];
  out.noalias() = 2.0 * (1.0 - w) * (a0 * y);
  if (w != 0.0) out.noalias() += 2.0 * w * (a[static_cast<std::size_t>(l) + 1] * y);
}

HookeanKolmogorov solve_hookean_kolmogorov(const Matrix& lambda, int component_i, int component_j,
                                           double horizon, int time_steps) {
  const Eigen::Index d = lambda.rows();
  if (lambda.cols() != d) throw std::invalid_argument("hookean kolmogorov: lambda must be square");
  if (std::abs(lambda.trace()) > 1e-12 * (1.0 + lambda.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("hookean kolmogorov: lambda must be trace-free");
  if (component_i < 0 || component_i >= d || component_j < 0 || component_j >= d)
    throw std::invalid_argument("hookean kolmogorov: component out of range");
  if (time_steps < 1 || !(horizon > 0.0))
    throw std::invalid_argument("hookean kolmogorov: invalid time grid");

  const Matrix shifted = lambda - Matrix::Identity(d, d);
  // In backward time tau = T - t: dA/dtau = B^T A + A B with B = lambda - I.
  const auto rhs = [&shifted](const Matrix& a) -> Matrix {
    return shifted.transpose() * a + a * shifted;
  };

  HookeanKolmogorov result;
  result.horizon = horizon;
  result.component_i = component_i;
  result.component_j = component_j;
  result.a.resize(static_cast<std::size_t>(time_steps) + 1);

  Matrix a = Matrix::Zero(d, d);
  a(component_i, component_j) += 0.5;
  a(component_j, component_i) += 0.5;
  result.a.back() = a;

  const double h = horizon / time_steps;
  for (int l = time_steps - 1; l >= 0; --l) {
    const Matrix k1 = rhs(a);
    const Matrix k2 = rhs(a + 0.5 * h * k1);
    const Matrix k3 = rhs(a + 0.5 * h * k2);
    const Matrix k4 = rhs(a + h * k3);
    a += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // Exact symmetrization: the flow preserves symmetry, rounding may not.
    a = 0.5 * (a + a.transpose()).eval();
    result.a[static_cast<std::size_t>(l)] = a;
  }
  return result;
}

bool GridGradient::gradient(double t, const VectorCRef& y, VectorRef out) const {
  bool clamped = false;
  out(0) = std::exp(-rate_ * t) * interpolate(grid_, t, y(0), GridField::derivative, &clamped);
  return clamped;
}

void GridGradient::save(const std::filesystem::path& path) const { write_grid_function(grid_, path); }

bool HookeanGradient::gradient(double t, const VectorCRef& y, VectorRef out) const {
  solution_.gradient(t, y, out);
  return false;
}

void HookeanGradient::save(const std::filesystem::path& path) const { write_hookean(solution_, path); }

bool OuGradient::gradient(double t, const VectorCRef&, VectorRef out) const {
  out(0) = std::exp(-theta_ * (horizon_ - t));
  return false;
}

void OuGradient::save(const std::filesystem::path& path) const {
  LittleEndianWriter w(path);
  w.magic("RBOU");
  w.u32(kPayloadVersion);
  w.f64(theta_);
  w.f64(horizon_);
  w.finish();
}

void ZeroGradient::save(const std::filesystem::path& path) const {
  LittleEndianWriter w(path);
  w.magic("RBZG");
  w.u32(kPayloadVersion);
  w.u32(static_cast<std::uint32_t>(dimension_));
  w.finish();
}

void write_grid_function(const GridFunction& grid, const std::filesystem::path& path) {
  LittleEndianWriter w(path);
  w.magic("RBGF");
  w.u32(kPayloadVersion);
  w.u32(static_cast<std::uint32_t>(grid.time_steps()));
  w.u32(static_cast<std::uint32_t>(grid.space_steps()));
  w.f64(grid.horizon);
  w.f64(grid.s_max);
  for (const Matrix* table : {&grid.values, &grid.derivatives})
    for (Eigen::Index l = 0; l < table->rows(); ++l)
      for (Eigen::Index j = 0; j < table->cols(); ++j) w.f64((*table)(l, j));
  w.finish();
}

GridFunction read_grid_function(const std::filesystem::path& path) {
  LittleEndianReader r(path);
  if (r.magic() != "RBGF") throw std::runtime_error(path.string() + ": not a grid function file");
  expect_version(r);
  const auto nl = r.u32();
  const auto nj = r.u32();
  GridFunction grid;
  grid.horizon = r.f64();
  grid.s_max = r.f64();
  grid.values.resize(nl + 1, nj + 1);
  grid.derivatives.resize(nl + 1, nj + 1);
  for (Matrix* table : {&grid.values, &grid.derivatives})
    for (Eigen::Index l = 0; l < table->rows(); ++l)
      for (Eigen::Index j = 0; j < table->cols(); ++j) (*table)(l, j) = r.f64();
  return grid;
}

void write_grid_function_csv(const GridFunction& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  char buf[64];
  const auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "L,J,T,S_max\n"
      << grid.time_steps() << ',' << grid.space_steps() << ',' << num(grid.horizon) << ','
      << num(grid.s_max) << '\n';
  out << "l,j,value,derivative\n";
  for (int l = 0; l <= grid.time_steps(); ++l)
    for (int j = 0; j <= grid.space_steps(); ++j)
      out << l << ',' << j << ',' << num(grid.values(l, j)) << ',' << num(grid.derivatives(l, j))
          << '\n';
}

GridFunction read_grid_function_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "L,J,T,S_max") throw std::runtime_error(path.string() + ": bad grid CSV header");
  std::getline(in, line);
  int nl = 0, nj = 0;
  GridFunction grid;
  if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &nl, &nj, &grid.horizon, &grid.s_max) != 4)
    throw std::runtime_error(path.string() + ": bad grid CSV dimensions");
  grid.values.resize(nl + 1, nj + 1);
  grid.derivatives.resize(nl + 1, nj + 1);
  std::getline(in, line);
  for (Eigen::Index k = 0; k < grid.values.size(); ++k) {
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": truncated grid CSV");
    int l = 0, j = 0;
    double v = 0.0, dv = 0.0;
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &l, &j, &v, &dv) != 4 || l < 0 || l > nl ||
        j < 0 || j > nj)
      throw std::runtime_error(path.string() + ": bad grid CSV row");
    grid.values(l, j) = v;
    grid.derivatives(l, j) = dv;
  }
  return grid;
}

void write_hookean(const HookeanKolmogorov& solution, const std::filesystem::path& path) {
  LittleEndianWriter w(path);
  w.magic("RBHK");
  w.u32(kPayloadVersion);
  const auto d = static_cast<std::uint32_t>(solution.a.front().rows());
  w.u32(d);
  w.u32(static_cast<std::uint32_t>(solution.time_steps()));
  w.u32(static_cast<std::uint32_t>(solution.component_i));
  w.u32(static_cast<std::uint32_t>(solution.component_j));
  w.f64(solution.horizon);
  for (const auto& a : solution.a)
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c) w.f64(a(r, c));
  w.finish();
}

HookeanKolmogorov read_hookean(const std::filesystem::path& path) {
  LittleEndianReader r(path);
  if (r.magic() != "RBHK") throw std::runtime_error(path.string() + ": not a Hookean payload");
  expect_version(r);
  const auto d = r.u32();
  const auto nl = r.u32();
  HookeanKolmogorov s;
  s.component_i = static_cast<int>(r.u32());
  s.component_j = static_cast<int>(r.u32());
  s.horizon = r.f64();
  s.a.assign(nl + 1, Matrix(d, d));
  for (auto& a : s.a)
    for (Eigen::Index row = 0; row < a.rows(); ++row)
      for (Eigen::Index c = 0; c < a.cols(); ++c) a(row, c) = r.f64();
  return s;
}

std::shared_ptr<const KolmogorovGradient> load_kolmogorov_gradient(const std::filesystem::path& path,
                                                                   double rate) {
  const std::string magic = read_magic(path);
  if (magic == "RBGF") return std::make_shared<GridGradient>(read_grid_function(path), rate);
  if (magic == "RBHK") return std::make_shared<HookeanGradient>(read_hookean(path));
  LittleEndianReader r(path);
  r.magic();
  expect_version(r);
  if (magic == "RBOU") {
    const double theta = r.f64();
    const double horizon = r.f64();
    return std::make_shared<OuGradient>(theta, horizon);
  }
  if (magic == "RBZG") return std::make_shared<ZeroGradient>(static_cast<Eigen::Index>(r.u32()));
  throw std::runtime_error(path.string() + ": unknown payload type '" + magic + "'");
}

}  // namespace rbcv
