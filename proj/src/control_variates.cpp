#include "rbcv/control_variates.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace rbcv {

namespace {

constexpr const char* kManifestFormat = "rbcv-basis";
constexpr int kManifestVersion = 1;

std::string payload_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "element-%02zu.bin", index + 1);
  return buf;
}

}  // namespace

ControlVariateFit::ControlVariateFit(const Eigen::Ref<const Matrix>& y) {
  if (y.rows() == 0) throw std::invalid_argument("ControlVariateFit: no samples");
  if (y.cols() >= y.rows())
    throw std::invalid_argument("ControlVariateFit: need more replicates than basis elements");
  means_ = y.colwise().mean().transpose();
  centered_ = y.rowwise() - means_.transpose();
  qr_.compute(centered_);
  const Eigen::Index n = centered_.cols();
  const Matrix r = qr_.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  prefix_svd_.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index k = 1; k <= n; ++k)
    prefix_svd_.emplace_back(r.topLeftCorner(k, k), Eigen::ComputeFullU | Eigen::ComputeFullV);
}

MuSolution ControlVariateFit::solve(const VectorCRef& z, Eigen::Index prefix) const {
  if (z.size() != replicates()) throw std::invalid_argument("solve_mu: z has wrong length");
  if (prefix < 0 || prefix > basis_size()) throw std::out_of_range("solve_mu: prefix out of range");
  MuSolution solution;
  solution.mu = Vector::Zero(prefix);
  if (prefix == 0) return solution;

  const auto& svd = prefix_svd_[static_cast<std::size_t>(prefix - 1)];
  const Vector& sv = svd.singularValues();
  solution.diagnostics.sigma_max = sv(0);
  const double threshold = kSvdCutoff * sv(0);
  const double sigma_min = sv(prefix - 1);
  // C is reported singular whenever the cutoff drops a direction.
  solution.diagnostics.condition_number =
      sigma_min > threshold ? (sv(0) / sigma_min) * (sv(0) / sigma_min)
                            : std::numeric_limits<double>::infinity();
  if (sv(0) == 0.0) return solution;

  const Vector zc = z.array() - z.mean();
  const Vector w = (qr_.householderQ().adjoint() * zc).head(prefix);
  Vector coeff = svd.matrixU().transpose() * w;
  for (Eigen::Index k = 0; k < prefix; ++k) {
    if (sv(k) > threshold) {
      coeff(k) /= sv(k);
      ++solution.diagnostics.rank;
    } else {
      coeff(k) = 0.0;
    }
  }
  solution.mu = svd.matrixV() * coeff;
  return solution;
}

double ControlVariateFit::residual_variance(const VectorCRef& z, const VectorCRef& mu) const {
  if (z.size() != replicates()) throw std::invalid_argument("residual_variance: z has wrong length");
  const Vector zc = z.array() - z.mean();
  if (mu.size() == 0) return empirical_var(zc);
  return empirical_var(zc - centered_.leftCols(mu.size()) * mu);
}

MuSolution solve_mu(const VectorCRef& z, const Eigen::Ref<const Matrix>& y) {
  return ControlVariateFit(y).solve(z);
}

void ReducedBasis::validate() const {
  if (algorithm != 1 && algorithm != 2) throw std::invalid_argument("basis: algorithm must be 1 or 2");
  if (elements.empty()) throw std::invalid_argument("basis: no elements");
  for (std::size_t i = 0; i < elements.size(); ++i) {
    if (algorithm == 2 && !elements[i].gradient)
      throw std::invalid_argument("basis: algorithm-2 element without gradient");
    for (std::size_t j = 0; j < i; ++j)
      if (elements[i].lambda.size() == elements[j].lambda.size() &&
          elements[i].lambda == elements[j].lambda)
        throw std::invalid_argument("basis: selected parameters are not distinct");
  }
}

Vector eval_basis_algo1(const ReducedBasis& basis, Eigen::Index element, const PathBundle& paths,
                        const Model& model) {
  if (basis.algorithm != 1) throw std::invalid_argument("eval_basis_algo1: not an algorithm-1 basis");
  if (element < 0 || element >= basis.size()) throw std::out_of_range("eval_basis_algo1: bad index");
  const auto& e = basis.elements[static_cast<std::size_t>(element)];
  return run_model(model, e.lambda, paths).z.array() - e.offline_mean;
}

Vector eval_basis_algo2(const ReducedBasis& basis, Eigen::Index element, const VectorCRef& lambda,
                        const PathBundle& paths, const Model& model) {
  if (basis.algorithm != 2) throw std::invalid_argument("eval_basis_algo2: not an algorithm-2 basis");
  if (element < 0 || element >= basis.size()) throw std::out_of_range("eval_basis_algo2: bad index");
  const KolmogorovGradient* g = basis.elements[static_cast<std::size_t>(element)].gradient.get();
  return run_model(model, lambda, paths, std::span(&g, 1)).integrals.col(0);
}

Matrix algo1_basis_matrix(const ReducedBasis& basis, const PathBundle& paths, const Model& model) {
  Matrix y(paths.replicates(), basis.size());
  for (Eigen::Index i = 0; i < basis.size(); ++i) y.col(i) = eval_basis_algo1(basis, i, paths, model);
  return y;
}

BasisSamples sample_basis(const ReducedBasis& basis, const VectorCRef& lambda,
                          const PathBundle& paths, const Model& model) {
  BasisSamples samples;
  if (basis.algorithm == 1) {
    samples.z = run_model(model, lambda, paths).z;
    samples.y = algo1_basis_matrix(basis, paths, model);
    return samples;
  }
  std::vector<const KolmogorovGradient*> gradients;
  for (const auto& e : basis.elements) gradients.push_back(e.gradient.get());
  auto run = run_model(model, lambda, paths, gradients);
  samples.z = std::move(run.z);
  samples.y = std::move(run.integrals);
  samples.gradient_queries = run.gradient_queries;
  samples.gradient_clamps = run.gradient_clamps;
  return samples;
}

double ControlledEstimate::reduction_factor() const {
  if (raw.variance == 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (controlled.variance == 0.0) return std::numeric_limits<double>::infinity();
  return raw.variance / controlled.variance;
}

ControlledEstimate controlled_from_samples(const VectorCRef& z, const ControlVariateFit& fit,
                                           const Eigen::Ref<const Matrix>& y, Eigen::Index prefix,
                                           double quantile) {
  ControlledEstimate est;
  auto solution = fit.solve(z, prefix);
  est.mu = std::move(solution.mu);
  est.diagnostics = solution.diagnostics;
  est.raw = confidence_interval(z, quantile);
  if (prefix == 0) {
    est.controlled = est.raw;
    return est;
  }
  const Vector residual = z - y.leftCols(prefix) * est.mu;
  est.controlled = confidence_interval(residual, quantile);
  return est;
}

ControlledEstimate controlled_estimate(const ReducedBasis& basis, const VectorCRef& lambda,
                                      const PathBundle& paths, const Model& model,
                                      double quantile) {
  if (basis.elements.empty()) {
    ControlledEstimate est;
    est.raw = confidence_interval(run_model(model, lambda, paths).z, quantile);
    est.controlled = est.raw;
    return est;
  }
  const BasisSamples samples = sample_basis(basis, lambda, paths, model);
  const ControlVariateFit fit(samples.y);
  auto est = controlled_from_samples(samples.z, fit, samples.y, basis.size(), quantile);
  est.clamp_rate = samples.clamp_rate();
  est.clamp_warning = est.clamp_rate > kClampWarningRate;
  return est;
}

void write_basis(const ReducedBasis& basis, const Model& model, const std::filesystem::path& dir) {
  basis.validate();
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["format"] = kManifestFormat;
  manifest["version"] = kManifestVersion;
  manifest["algorithm"] = basis.algorithm;
  manifest["model"] = model.fingerprint();
  manifest["parameter_names"] = model.parameter_names();
  const auto& meta = basis.metadata;
  manifest["criterion"] = meta.criterion;
  manifest["epsilon"] = meta.epsilon;
  manifest["seed_trial"] = meta.seed_trial;
  manifest["seed_offline"] = meta.seed_offline;
  manifest["m_small"] = meta.m_small;
  manifest["m_large"] = meta.m_large;
  manifest["trial_size"] = meta.trial_size;
  manifest["size"] = basis.elements.size();
  auto elements = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < basis.elements.size(); ++i) {
    const auto& e = basis.elements[i];
    nlohmann::ordered_json entry;
    entry["lambda"] = std::vector<double>(e.lambda.data(), e.lambda.data() + e.lambda.size());
    if (basis.algorithm == 1) {
      entry["offline_mean"] = e.offline_mean;
    } else {
      const std::string name = payload_name(i);
      e.gradient->save(dir / name);
      entry["payload"] = name;
    }
    elements.push_back(std::move(entry));
  }
  manifest["elements"] = std::move(elements);
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

ReducedBasis read_basis(const std::filesystem::path& dir, const Model& model) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != kManifestFormat)
    throw std::runtime_error(path.string() + ": not a basis manifest");
  if (manifest.value("version", 0) != kManifestVersion)
    throw std::runtime_error(path.string() + ": unsupported manifest version");
  if (manifest.at("model").get<std::string>() != model.fingerprint())
    throw std::runtime_error("basis/model mismatch: " + path.string() +
                             " was built for a different model configuration:\n" +
                             manifest.at("model").get<std::string>());

  ReducedBasis basis;
  basis.algorithm = manifest.at("algorithm").get<int>();
  auto& meta = basis.metadata;
  meta.model_fingerprint = manifest.at("model").get<std::string>();
  meta.criterion = manifest.at("criterion").get<std::string>();
  meta.epsilon = manifest.at("epsilon").get<double>();
  meta.seed_trial = manifest.at("seed_trial").get<std::uint64_t>();
  meta.seed_offline = manifest.at("seed_offline").get<std::uint64_t>();
  meta.m_small = manifest.at("m_small").get<Eigen::Index>();
  meta.m_large = manifest.at("m_large").get<Eigen::Index>();
  meta.trial_size = manifest.at("trial_size").get<std::size_t>();
  for (const auto& entry : manifest.at("elements")) {
    BasisElement e;
    const auto lambda = entry.at("lambda").get<std::vector<double>>();
    e.lambda = Eigen::Map<const Vector>(lambda.data(), static_cast<Eigen::Index>(lambda.size()));
    model.check_parameter(e.lambda);
    if (basis.algorithm == 1)
      e.offline_mean = entry.at("offline_mean").get<double>();
    else
      e.gradient = model.load_gradient(dir / entry.at("payload").get<std::string>());
    basis.elements.push_back(std::move(e));
  }
  if (basis.elements.size() != manifest.at("size").get<std::size_t>())
    throw std::runtime_error(path.string() + ": element count does not match size");
  basis.validate();
  return basis;
}

}  // namespace rbcv
