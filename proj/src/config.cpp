#include "rbcv/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace rbcv {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

long long to_int(const std::string& key, const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (text.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

long long to_positive(const std::string& key, const std::string& text) {
  const long long v = to_int(key, text);
  if (v <= 0) throw ConfigError(key + ": must be positive");
  return v;
}

std::uint64_t to_seed(const std::string& key, const std::string& text) {
  if (text.empty() || text[0] == '-') throw ConfigError(key + ": expected a non-negative integer");
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE)
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) items.push_back(trim(item));
  return items;
}

Vector to_vector(const std::string& key, const std::string& text) {
  const auto items = split_list(text);
  Vector v(static_cast<Eigen::Index>(items.size()));
  for (std::size_t k = 0; k < items.size(); ++k)
    v(static_cast<Eigen::Index>(k)) = to_double(key, items[k]);
  return v;
}

std::string one_of(const std::string& key, const std::string& text,
                   std::initializer_list<const char*> allowed) {
  std::string options;
  for (const char* a : allowed) {
    if (text == a) return text;
    options += options.empty() ? a : std::string("|") + a;
  }
  throw ConfigError(key + ": expected " + options + ", got '" + text + "'");
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (key == "model") {
    model = one_of(key, value, {"bs", "fene", "hookean", "ou"});
  } else if (key == "bs.vol") {
    bs_vol = one_of(key, value, {"hyperbolic", "constant"});
  } else if (key == "bs.s0") {
    s0 = to_double(key, value);
  } else if (key == "bs.strike") {
    strike = to_double(key, value);
  } else if (key == "bs.rate") {
    rate = to_double(key, value);
  } else if (key == "pde.L") {
    pde_time_steps = static_cast<int>(to_positive(key, value));
  } else if (key == "pde.J") {
    pde_space_steps = static_cast<int>(to_positive(key, value));
  } else if (key == "pde.smax_factor") {
    smax_factor = to_double(key, value);
  } else if (key == "dumbbell.dim") {
    dumbbell_dim = static_cast<int>(to_positive(key, value));
  } else if (key == "dumbbell.b_ext") {
    b_ext = to_double(key, value);
  } else if (key == "dumbbell.component") {
    const auto items = split_list(value);
    if (items.size() != 2) throw ConfigError(key + ": expected 'i,j'");
    component_i = static_cast<int>(to_positive(key, items[0]));
    component_j = static_cast<int>(to_positive(key, items[1]));
  } else if (key == "dumbbell.x0") {
    dumbbell_x0 = to_vector(key, value);
  } else if (key == "ou.x0") {
    ou_x0 = to_double(key, value);
  } else if (key == "horizon") {
    horizon = to_double(key, value);
  } else if (key == "steps") {
    steps = static_cast<int>(to_positive(key, value));
  } else if (key == "box.lower") {
    box.lower = to_vector(key, value);
  } else if (key == "box.upper") {
    box.upper = to_vector(key, value);
  } else if (key == "box.map") {
    box.map.clear();
    for (const auto& item : split_list(value)) box.map.push_back(static_cast<int>(to_int(key, item)));
  } else if (key == "box.frozen") {
    box.frozen = to_vector(key, value);
  } else if (key == "algorithm") {
    algorithm = static_cast<int>(to_int(key, one_of(key, value, {"1", "2"})));
  } else if (key == "criterion") {
    criterion = one_of(key, value, {"abs", "rel"}) == "abs" ? Criterion::absolute : Criterion::relative;
  } else if (key == "epsilon") {
    epsilon = to_double(key, value);
  } else if (key == "imax") {
    imax = static_cast<int>(to_positive(key, value));
  } else if (key == "m_small") {
    m_small = static_cast<Eigen::Index>(to_positive(key, value));
  } else if (key == "m_large") {
    m_large = static_cast<Eigen::Index>(to_positive(key, value));
  } else if (key == "n_trial") {
    n_trial = static_cast<std::size_t>(to_positive(key, value));
  } else if (key == "n_test") {
    n_test = static_cast<std::size_t>(to_positive(key, value));
  } else if (key == "n_small_trial") {
    n_small_trial = static_cast<std::size_t>(to_positive(key, value));
  } else if (key == "lambda1_rule") {
    lambda1_rule = one_of(key, value, {"max-variance", "max-correlation"}) == "max-variance"
                       ? Lambda1Rule::max_variance
                       : Lambda1Rule::max_correlation;
  } else if (key == "seed_trial") {
    seed_trial = to_seed(key, value);
  } else if (key == "seed_offline") {
    seed_offline = to_seed(key, value);
  } else if (key == "seed_online") {
    seed_online = to_seed(key, value);
  } else if (key == "workers") {
    workers = static_cast<unsigned>(to_seed(key, value));
  } else if (key == "paths_policy") {
    paths = one_of(key, value, {"shared", "per-query"}) == "shared" ? PathsPolicy::shared
                                                                     : PathsPolicy::per_query;
  } else if (key == "reuse_factorization") {
    reuse_factorization = one_of(key, value, {"true", "false"}) == "true";
  } else if (key == "test_box") {
    test_box = one_of(key, value, {"paper", "wide"});
  } else if (key == "quantile") {
    quantile = to_double(key, value);
  } else if (key == "large_chunk") {
    large_chunk = static_cast<Eigen::Index>(to_positive(key, value));
  } else if (key == "out") {
    if (value.empty()) throw ConfigError("out: empty path");
    out = value;
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

ParameterBox default_box(const ExperimentConfig& config) {
  ParameterBox box;
  if (config.model == "bs" && config.bs_vol == "hyperbolic") {
    // (a, b, c, d, alpha, Gamma, C_min) with b = c tied and d, alpha, Gamma, C_min frozen.
    box.lower = Eigen::Vector2d(-0.05, 0.5);
    box.upper = Eigen::Vector2d(0.15, 1.5);
    box.map = {0, 1, 1, -1, -1, -1, -1};
    box.frozen.resize(7);
    box.frozen << 0.0, 0.0, 0.0, 1.0, 1.1, 5.0, 0.05;
  } else if (config.model == "bs") {
    box.lower = Vector::Constant(1, 0.1);
    box.upper = Vector::Constant(1, 0.4);
    box.map = {0};
    box.frozen = Vector::Zero(1);
  } else if (config.model == "ou") {
    box.lower = Eigen::Vector2d(0.5, 0.5);
    box.upper = Eigen::Vector2d(2.0, 1.5);
    box.map = {0, 1};
    box.frozen = Vector::Zero(2);
  } else {
    const int n = config.dumbbell_dim * config.dumbbell_dim - 1;
    box.lower = Vector::Constant(n, -1.0);
    box.upper = Vector::Constant(n, 1.0);
    for (int k = 0; k < n; ++k) box.map.push_back(k);
    box.frozen = Vector::Zero(n);
  }
  return box;
}

void ExperimentConfig::finalize() {
  const bool any = box.lower.size() > 0 || box.upper.size() > 0 || !box.map.empty() ||
                   box.frozen.size() > 0;
  if (!any) {
    box = default_box(*this);
  } else {
    if (box.lower.size() == 0 || box.upper.size() == 0 || box.map.empty())
      throw ConfigError("box.lower, box.upper and box.map must be given together");
    if (box.frozen.size() == 0) box.frozen = Vector::Zero(static_cast<Eigen::Index>(box.map.size()));
  }
  validate();
}

void ExperimentConfig::validate() const {
  try {
    box.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto model_ptr = make_model(*this);
  if (box.full_dimension() != model_ptr->parameter_dimension())
    throw ConfigError("box.map has " + std::to_string(box.full_dimension()) +
                      " entries but model '" + model + "' has " +
                      std::to_string(model_ptr->parameter_dimension()) + " parameters");
  if (m_large < m_small) throw ConfigError("m_large must be >= m_small");
  if (static_cast<Eigen::Index>(imax) >= m_small) throw ConfigError("m_small must exceed imax");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  if (!(quantile > 0.0)) throw ConfigError("quantile must be > 0");
  if (n_trial < static_cast<std::size_t>(imax))
    throw ConfigError("n_trial must be at least imax");
}

ExperimentConfig parse_config(std::istream& in, const std::string& origin) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(number) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      config.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

std::unique_ptr<Model> make_model(const ExperimentConfig& config) {
  try {
    if (config.model == "bs") {
      BlackScholesModel::Settings s;
      s.vol = config.bs_vol == "hyperbolic" ? BlackScholesModel::Vol::hyperbolic
                                            : BlackScholesModel::Vol::constant;
      s.s0 = config.s0;
      s.strike = config.strike;
      s.rate = config.rate;
      s.horizon = config.horizon;
      s.steps = config.steps;
      s.pde_time_steps = config.pde_time_steps;
      s.pde_space_steps = config.pde_space_steps;
      s.smax_factor = config.smax_factor;
      return std::make_unique<BlackScholesModel>(s);
    }
    if (config.model == "ou") return std::make_unique<OuModel>(config.ou_x0, config.horizon, config.steps);
    DumbbellParams p;
    p.dimension = config.dumbbell_dim;
    p.free_entries = Vector::Zero(p.dimension * p.dimension - 1);
    p.spring = config.model == "fene" ? Spring::fene : Spring::hookean;
    p.b_ext = config.b_ext;
    p.component_i = config.component_i - 1;
    p.component_j = config.component_j - 1;
    p.initial = config.dumbbell_x0;
    p.horizon = config.horizon;
    return std::make_unique<DumbbellModel>(p, config.steps);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace rbcv
