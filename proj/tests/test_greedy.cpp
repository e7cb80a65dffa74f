#include "rbcv/greedy.hpp"
#include "rbcv/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace rbcv;

namespace {

constexpr int kSteps = 20;

// Driftless dX = (a + b sin X) dB started far from zero: E[X_T] = x0 for every
// λ, so relative and absolute criteria differ by a nearly constant factor.
class MartingaleModel final : public Model {
 public:
  std::string name() const override { return "martingale"; }
  Eigen::Index parameter_dimension() const override { return 2; }
  Eigen::Index state_dimension() const override { return 1; }
  int steps() const override { return kSteps; }
  double horizon() const override { return 1.0; }
  std::vector<std::string> parameter_names() const override { return {"a", "b"}; }
  SdeSpec sde(const VectorCRef& lambda) const override {
    SdeSpec spec;
    spec.dimension = 1;
    spec.steps = kSteps;
    spec.initial = Vector::Constant(1, 1e3);
    spec.drift = [](double, const VectorCRef&, VectorRef out) { out.setZero(); };
    const double a = lambda(0), b = lambda(1);
    spec.diffusion = [a, b](double, const VectorCRef& x, MatrixRef out) { out(0, 0) = a + b * std::sin(x(0)); };
    return spec;
  }
  OutputFunctional output(const VectorCRef&) const override {
    OutputFunctional out;
    out.terminal = [](const VectorCRef& x) { return x(0); };
    return out;
  }
  std::shared_ptr<const KolmogorovGradient> solve_kolmogorov(const VectorCRef&) const override {
    return std::make_shared<ZeroGradient>(1);
  }
  std::shared_ptr<const KolmogorovGradient> load_gradient(const std::filesystem::path&) const override {
    return std::make_shared<ZeroGradient>(1);
  }
  std::string fingerprint() const override { return "model=martingale\n"; }
};

ParameterBox ou_box() {
  ParameterBox box;
  box.lower = Eigen::Vector2d(0.5, 0.5);
  box.upper = Eigen::Vector2d(2.0, 1.5);
  box.map = {0, 1};
  box.frozen = Vector::Zero(2);
  return box;
}

GreedyConfig small_config(std::vector<Vector> trial, int algorithm) {
  GreedyConfig config;
  config.trial = std::move(trial);
  config.algorithm = algorithm;
  config.imax = 6;
  config.m_small = 400;
  config.m_large = 4000;
  config.seed_offline = 11;
  config.large_chunk = 1500;
  return config;
}

}  // namespace

TEST(ChooseLambda1, LargestVarianceWins) {
  Matrix samples(500, 4);
  for (int k = 0; k < 4; ++k) {
    const RngStream s(5, {static_cast<std::uint32_t>(k), 0});
    for (Eigen::Index m = 0; m < 500; ++m) samples(m, k) = s.gaussian(static_cast<std::uint64_t>(m));
  }
  samples.col(2) *= std::sqrt(10.0);
  double score = 0.0;
  EXPECT_EQ(choose_lambda1(samples, Lambda1Rule::max_variance, &score), 2u);
  EXPECT_DOUBLE_EQ(score, empirical_var(samples.col(2)));
}

TEST(ChooseLambda1, TiesGoToLowestIndex) {
  Matrix samples(50, 3);
  const RngStream s(1, {0, 0});
  for (Eigen::Index m = 0; m < 50; ++m) samples(m, 0) = s.gaussian(static_cast<std::uint64_t>(m));
  samples.col(1) = samples.col(0);
  samples.col(2) = samples.col(0);
  EXPECT_EQ(choose_lambda1(samples, Lambda1Rule::max_variance), 0u);
  EXPECT_EQ(choose_lambda1(samples, Lambda1Rule::max_correlation), 0u);
}

TEST(ChooseLambda1, MostCorrelatedColumnWins) {
  // Column 1 is the common factor of every other column.
  Matrix samples(2000, 4);
  Matrix noise(2000, 4);
  for (int k = 0; k < 4; ++k) {
    const RngStream s(9, {static_cast<std::uint32_t>(k), 0});
    for (Eigen::Index m = 0; m < 2000; ++m) noise(m, k) = s.gaussian(static_cast<std::uint64_t>(m));
  }
  samples.col(1) = noise.col(1);
  samples.col(0) = noise.col(1) + 3.0 * noise.col(0);
  samples.col(2) = noise.col(1) + 3.0 * noise.col(2);
  samples.col(3) = 10.0 * noise.col(3);
  EXPECT_EQ(choose_lambda1(samples, Lambda1Rule::max_correlation), 1u);
  EXPECT_EQ(choose_lambda1(samples, Lambda1Rule::max_variance), 3u);
}

TEST(Greedy, SingletonTrial) {
  const OuModel model(1.0, 1.0, kSteps);
  auto config = small_config({Eigen::Vector2d(1.0, 1.0)}, 1);
  const auto result = greedy_build(config, model);
  EXPECT_EQ(result.basis.size(), 1);
  EXPECT_EQ(result.trace.stop_reason, "trial sample exhausted");
  EXPECT_EQ(result.trace.steps[0].remaining, 0u);
  EXPECT_TRUE(std::isnan(result.trace.steps[0].max_residual));
}

TEST(Greedy, InfiniteToleranceStopsAfterOneElement) {
  const OuModel model(1.0, 1.0, kSteps);
  auto config = small_config(ou_box().sample(15, 1, 0), 1);
  config.epsilon = std::numeric_limits<double>::infinity();
  const auto result = greedy_build(config, model);
  EXPECT_EQ(result.basis.size(), 1);
  EXPECT_EQ(result.trace.stop_reason, "tolerance reached");
}

TEST(Greedy, ImaxBoundsBasisSize) {
  const OuModel model(1.0, 1.0, kSteps);
  auto config = small_config(ou_box().sample(30, 1, 0), 2);
  config.imax = 3;
  const auto result = greedy_build(config, model);
  EXPECT_EQ(result.basis.size(), 3);
  EXPECT_EQ(result.trace.stop_reason, "imax reached");
  EXPECT_EQ(result.trace.steps.size(), 3u);
}

TEST(Greedy, ResidualsAreMonotoneAndSelectionsDistinct) {
  const OuModel model(1.0, 1.0, kSteps);
  for (int algorithm : {1, 2}) {
    for (auto criterion : {Criterion::absolute, Criterion::relative}) {
      auto config = small_config(ou_box().sample(40, 1, 0), algorithm);
      config.criterion = criterion;
      const auto result = greedy_build(config, model);
      const auto& r = result.trace.residuals;
      ASSERT_EQ(r.rows(), result.basis.size());
      for (Eigen::Index i = 1; i < r.rows(); ++i)
        for (Eigen::Index k = 0; k < r.cols(); ++k)
          EXPECT_LE(r(i, k), r(i - 1, k) * (1.0 + 1e-9) + 1e-300) << "algo " << algorithm << " step " << i;
      std::set<std::size_t> seen;
      for (const auto& step : result.trace.steps) EXPECT_TRUE(seen.insert(step.selected_index).second);
      for (std::size_t i = 1; i < result.trace.steps.size(); ++i)
        EXPECT_DOUBLE_EQ(result.trace.steps[i].selection_value, result.trace.steps[i - 1].max_residual);
    }
  }
}

TEST(Greedy, Deterministic) {
  const OuModel model(1.0, 1.0, kSteps);
  const auto config = small_config(ou_box().sample(25, 3, 0), 1);
  const auto a = greedy_build(config, model);
  const auto b = greedy_build(config, model);
  ASSERT_EQ(a.basis.size(), b.basis.size());
  for (Eigen::Index i = 0; i < a.basis.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    EXPECT_EQ(a.basis.elements[k].lambda, b.basis.elements[k].lambda);
    EXPECT_EQ(a.basis.elements[k].offline_mean, b.basis.elements[k].offline_mean);
  }
  EXPECT_EQ(a.trace.residuals, b.trace.residuals);
}

TEST(Greedy, WorkerCountDoesNotChangeResults) {
  const OuModel model(1.0, 1.0, kSteps);
  auto config = small_config(ou_box().sample(25, 3, 0), 2);
  const auto serial = greedy_build(config, model);
  config.workers = 3;
  const auto parallel = greedy_build(config, model);
  EXPECT_EQ(serial.trace.residuals, parallel.trace.residuals);
}

TEST(Greedy, OfflineMeanUsesLargeSample) {
  const OuModel model(1.0, 1.0, kSteps);
  const auto config = small_config(ou_box().sample(10, 3, 0), 1);
  const auto result = greedy_build(config, model);
  const auto& first = result.basis.elements[0];
  const auto index = result.trace.steps[0].selected_index;
  EXPECT_EQ(first.offline_mean, large_sample_mean(model, first.lambda, config.m_large, config.seed_offline,
                                                  static_cast<std::uint32_t>(index + 1), config.large_chunk));
}

TEST(LargeSampleMean, ChunkingIsInvisible) {
  const OuModel model(1.0, 1.0, kSteps);
  const Vector l = Eigen::Vector2d(1.3, 0.8);
  const double whole = large_sample_mean(model, l, 3000, 4, 2, 3000);
  const double chunked = large_sample_mean(model, l, 3000, 4, 2, 700);
  EXPECT_NEAR(whole, chunked, 1e-13);
  EXPECT_NEAR(whole, empirical_mean(run_model(model, l, PathBundle::generate(4, 2, 3000, kSteps, 1)).z), 1e-13);
}

TEST(Greedy, RelativeCriterionRescalesAbsolute) {
  const MartingaleModel model;
  ParameterBox box;
  box.lower = Eigen::Vector2d(0.5, -0.4);
  box.upper = Eigen::Vector2d(1.5, 0.4);
  box.map = {0, 1};
  box.frozen = Vector::Zero(2);
  auto config = small_config(box.sample(20, 2, 0), 1);
  config.imax = 4;
  const auto absolute = greedy_build(config, model);
  config.criterion = Criterion::relative;
  const auto relative = greedy_build(config, model);
  ASSERT_EQ(absolute.basis.size(), relative.basis.size());
  for (std::size_t i = 0; i < absolute.trace.steps.size(); ++i)
    EXPECT_EQ(absolute.trace.steps[i].selected_index, relative.trace.steps[i].selected_index);
  const auto paths = PathBundle::generate(config.seed_offline, 0, config.m_small, kSteps, 1);
  for (std::size_t k = 0; k < config.trial.size(); ++k) {
    const double mean = empirical_mean(run_model(model, config.trial[k], paths).z);
    for (Eigen::Index i = 0; i < absolute.trace.residuals.rows(); ++i) {
      const auto col = static_cast<Eigen::Index>(k);
      EXPECT_NEAR(relative.trace.residuals(i, col) * mean * mean, absolute.trace.residuals(i, col),
                  1e-10 * absolute.trace.residuals(i, col) + 1e-300);
    }
  }
}

TEST(GreedyConfig, Validation) {
  auto config = small_config({Eigen::Vector2d(1.0, 1.0), Eigen::Vector2d(1.0, 1.0)}, 1);
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = small_config({}, 1);
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = small_config({Eigen::Vector2d(1.0, 1.0)}, 3);
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = small_config({Eigen::Vector2d(1.0, 1.0)}, 1);
  config.m_large = 10;
  EXPECT_THROW(config.validate(), std::invalid_argument);
}

TEST(Online, RowsSummaryAndReuse) {
  const OuModel model(1.0, 1.0, kSteps);
  const auto built = greedy_build(small_config(ou_box().sample(30, 1, 0), 1), model);
  const auto test = ou_box().sample(12, 1, 1);
  OnlineConfig online;
  online.m_small = 400;
  const auto eval = evaluate_basis(built.basis, test, model, online);
  const auto size = static_cast<std::size_t>(built.basis.size());
  ASSERT_EQ(eval.rows.size(), (size + 1) * test.size());
  ASSERT_EQ(eval.summary.size(), size + 1);
  for (std::size_t k = 0; k < test.size(); ++k) {
    EXPECT_EQ(eval.rows[k].basis_size, 0);
    EXPECT_EQ(eval.rows[k].reduction, 1.0);
    EXPECT_EQ(eval.rows[k].mean, eval.rows[k].raw_mean);
  }
  for (const auto& s : eval.summary) {
    double raw = 0.0, controlled = 0.0;
    for (const auto& row : eval.rows)
      if (row.basis_size == s.basis_size) {
        raw += row.raw_variance;
        controlled += row.variance;
      }
    EXPECT_NEAR(s.reduction_of_means, raw / controlled, 1e-12 * raw / controlled);
    EXPECT_LE(s.variance.min, s.variance.mean);
    EXPECT_LE(s.variance.mean, s.variance.max);
  }
  EXPECT_GT(eval.summary.back().reduction_of_means, eval.summary.front().reduction_of_means);

  online.reuse_factorization = true;
  const auto reused = evaluate_basis(built.basis, test, model, online);
  for (std::size_t r = 0; r < eval.rows.size(); ++r) {
    EXPECT_EQ(reused.rows[r].mean, eval.rows[r].mean);
    EXPECT_EQ(reused.rows[r].variance, eval.rows[r].variance);
  }

  online.reuse_factorization = false;
  online.paths = PathsPolicy::per_query;
  const auto independent = evaluate_basis(built.basis, test, model, online);
  EXPECT_NE(independent.rows[0].raw_mean, eval.rows[0].raw_mean);
}

TEST(Summarize, SkipsNaN) {
  const std::vector<double> v{1.0, std::nan(""), 3.0};
  const auto s = summarize(v);
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(s.mean, 2.0);
  EXPECT_EQ(s.max, 3.0);
}
