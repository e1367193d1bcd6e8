#include "lamcmc/config.hpp"

#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace lamcmc {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Flat dotted-key view of the parsed file, with value literals kept as
// strings until a typed getter interprets them.
struct KeyValues {
  std::map<std::string, std::string> values;
  mutable std::set<std::string> consumed;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  const std::string* find(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) return nullptr;
    consumed.insert(key);
    return &it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const std::string* v = find(key);
    if (!v) return fallback;
    std::string s = *v;
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
  }

  double get_double(const std::string& key, double fallback) const {
    const std::string* v = find(key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      double d = std::stod(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return d;
    } catch (...) {
      throw ConfigError("config key '" + key + "': expected a number, got '" + *v + "'");
    }
  }

  long long get_int(const std::string& key, long long fallback) const {
    const std::string* v = find(key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      long long i = std::stoll(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return i;
    } catch (...) {
      throw ConfigError("config key '" + key + "': expected an integer, got '" + *v + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const std::string* v = find(key);
    if (!v) return fallback;
    if (*v == "true") return true;
    if (*v == "false") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + *v + "'");
  }

  Vector get_vector(const std::string& key, const Vector& fallback) const {
    const std::string* v = find(key);
    if (!v) return fallback;
    if (v->size() < 2 || v->front() != '[' || v->back() != ']') {
      throw ConfigError("config key '" + key + "': expected an array [..]");
    }
    std::vector<double> items;
    std::stringstream ss(v->substr(1, v->size() - 2));
    std::string token;
    while (std::getline(ss, token, ',')) {
      token = trim(token);
      if (token.empty()) continue;
      try {
        items.push_back(std::stod(token));
      } catch (...) {
        throw ConfigError("config key '" + key + "': bad array element '" + token + "'");
      }
    }
    Vector out(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) out[i] = items[i];
    return out;
  }
};

KeyValues parse_keyvalue_text(const std::string& text) {
  KeyValues kv;
  std::string section;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    // Strip comments outside of quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
    }
    if (!section.empty()) key = section + "." + key;
    kv.values[key] = value;
  }
  return kv;
}

void flatten_json(const nlohmann::json& j, const std::string& prefix, KeyValues& kv) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    const auto& v = it.value();
    if (v.is_object()) {
      flatten_json(v, key, kv);
    } else if (v.is_array()) {
      std::string s = "[";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += format_double(v[i].get<double>());
      }
      kv.values[key] = s + "]";
    } else if (v.is_boolean()) {
      kv.values[key] = v.get<bool>() ? "true" : "false";
    } else if (v.is_string()) {
      kv.values[key] = v.get<std::string>();
    } else if (v.is_number_integer()) {
      kv.values[key] = std::to_string(v.get<long long>());
    } else {
      kv.values[key] = format_double(v.get<double>());
    }
  }
}

ProblemKind parse_problem_kind(const std::string& s) {
  if (s == "exp_quartic") return ProblemKind::kExpQuartic;
  if (s == "toggle_switch") return ProblemKind::kToggleSwitch;
  if (s == "elliptic_pde") return ProblemKind::kEllipticPde;
  if (s == "gaussian_test") return ProblemKind::kGaussianTest;
  throw ConfigError("config key 'problem': unknown problem '" + s + "'");
}

std::string problem_kind_name(ProblemKind k) {
  switch (k) {
    case ProblemKind::kExpQuartic: return "exp_quartic";
    case ProblemKind::kToggleSwitch: return "toggle_switch";
    case ProblemKind::kEllipticPde: return "elliptic_pde";
    case ProblemKind::kGaussianTest: return "gaussian_test";
  }
  return "";
}

ApproxKind parse_approx_kind(const std::string& s) {
  if (s == "linear") return ApproxKind::kLinear;
  if (s == "quadratic") return ApproxKind::kQuadratic;
  if (s == "gaussian_process") return ApproxKind::kGaussianProcess;
  throw ConfigError("config key 'approx_kind': unknown kind '" + s + "'");
}

std::string approx_kind_name(ApproxKind k) {
  switch (k) {
    case ApproxKind::kLinear: return "linear";
    case ApproxKind::kQuadratic: return "quadratic";
    case ApproxKind::kGaussianProcess: return "gaussian_process";
  }
  return "";
}

std::string vector_literal(const Vector& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_double(v[i]);
  }
  return s + "]";
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << text;
  }
  fs::rename(tmp, path);
}

const char* cause_name(RefinementCause c) {
  switch (c) {
    case RefinementCause::kNone: return "none";
    case RefinementCause::kRandom: return "random";
    case RefinementCause::kCrossValidation: return "cv";
  }
  return "";
}

const char* site_name(RefinementSite s) {
  switch (s) {
    case RefinementSite::kNone: return "none";
    case RefinementSite::kPlus: return "plus";
    case RefinementSite::kMinus: return "minus";
  }
  return "";
}

}  // namespace

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  auto veq = [](const Vector& a, const Vector& b) {
    return a.size() == b.size() && (a.size() == 0 || a == b);
  };
  return name == o.name && problem == o.problem && n_chains == o.n_chains &&
         chain_length == o.chain_length && master_seed == o.master_seed &&
         output_dir == o.output_dir && reference_mode == o.reference_mode &&
         approx_kind == o.approx_kind && proposal_type == o.proposal_type &&
         proposal_variance == o.proposal_variance && adaptation_start == o.adaptation_start &&
         adaptation_epsilon == o.adaptation_epsilon && schedule.beta0 == o.schedule.beta0 &&
         schedule.beta_exp == o.schedule.beta_exp && schedule.gamma0 == o.schedule.gamma0 &&
         schedule.gamma_exp == o.schedule.gamma_exp &&
         max_refinements_per_step == o.max_refinements_per_step && seed_mode == o.seed_mode &&
         seed_radius == o.seed_radius && seed_count == o.seed_count &&
         gaussian_dim == o.gaussian_dim && data_seed == o.data_seed &&
         veq(theta_true, o.theta_true) && veq(iptg_list, o.iptg_list) &&
         veq(obs_sds, o.obs_sds) && mesh_nx == o.mesh_nx && kl_modes == o.kl_modes &&
         kl_lengthscale == o.kl_lengthscale && kl_variance == o.kl_variance &&
         obs_sd == o.obs_sd && burn_in_fraction == o.burn_in_fraction &&
         error_grid_points == o.error_grid_points && refinement_window == o.refinement_window;
}

std::string ExperimentConfig::effective_name() const {
  if (!name.empty()) return name;
  std::string n = problem_kind_name(problem);
  n += reference_mode ? "_reference" : "_" + approx_kind_name(approx_kind);
  return n;
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  KeyValues kv;
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config JSON parse error: ") + e.what());
    }
    flatten_json(j, "", kv);
  } else {
    kv = parse_keyvalue_text(text);
  }

  ExperimentConfig c;
  c.name = kv.get_string("name", c.name);
  c.problem = parse_problem_kind(kv.get_string("problem", problem_kind_name(c.problem)));
  c.n_chains = static_cast<int>(kv.get_int("n_chains", c.n_chains));
  c.chain_length = kv.get_int("chain_length", c.chain_length);
  c.master_seed = static_cast<std::uint64_t>(kv.get_int("seed", c.master_seed));
  c.output_dir = kv.get_string("output_dir", c.output_dir);
  c.reference_mode = kv.get_bool("reference_mode", c.reference_mode);
  c.approx_kind = parse_approx_kind(kv.get_string("approx_kind", approx_kind_name(c.approx_kind)));

  c.proposal_type = kv.get_string("proposal.type", c.proposal_type);
  if (c.proposal_type != "random_walk" && c.proposal_type != "adaptive_metropolis") {
    throw ConfigError("config key 'proposal.type': unknown type '" + c.proposal_type + "'");
  }
  c.proposal_variance = kv.get_double("proposal.variance", c.proposal_variance);
  c.adaptation_start = kv.get_int("proposal.adaptation_start", c.adaptation_start);
  c.adaptation_epsilon = kv.get_double("proposal.epsilon", c.adaptation_epsilon);

  c.schedule.beta0 = kv.get_double("schedule.beta0", c.schedule.beta0);
  c.schedule.beta_exp = kv.get_double("schedule.beta_exp", c.schedule.beta_exp);
  c.schedule.gamma0 = kv.get_double("schedule.gamma0", c.schedule.gamma0);
  c.schedule.gamma_exp = kv.get_double("schedule.gamma_exp", c.schedule.gamma_exp);
  c.max_refinements_per_step =
      static_cast<int>(kv.get_int("refinement.max_per_step", c.max_refinements_per_step));

  const std::string seed_mode = kv.get_string(
      "seeding.mode", c.seed_mode == SeedMode::kAroundStart ? "around_start" : "from_prior");
  if (seed_mode == "around_start") {
    c.seed_mode = SeedMode::kAroundStart;
  } else if (seed_mode == "from_prior") {
    c.seed_mode = SeedMode::kFromPrior;
  } else {
    throw ConfigError("config key 'seeding.mode': unknown mode '" + seed_mode + "'");
  }
  c.seed_radius = kv.get_double("seeding.radius", c.seed_radius);
  c.seed_count = static_cast<int>(kv.get_int("seeding.count", c.seed_count));

  c.gaussian_dim = static_cast<int>(kv.get_int("problem_options.gaussian_dim", c.gaussian_dim));
  c.data_seed = static_cast<std::uint64_t>(
      kv.get_int("problem_options.data_seed", static_cast<long long>(c.data_seed)));
  c.theta_true = kv.get_vector("problem_options.theta_true", c.theta_true);
  c.iptg_list = kv.get_vector("problem_options.iptg", c.iptg_list);
  c.obs_sds = kv.get_vector("problem_options.obs_sds", c.obs_sds);
  c.mesh_nx = static_cast<int>(kv.get_int("problem_options.mesh_nx", c.mesh_nx));
  c.kl_modes = static_cast<int>(kv.get_int("problem_options.kl_modes", c.kl_modes));
  c.kl_lengthscale = kv.get_double("problem_options.kl_lengthscale", c.kl_lengthscale);
  c.kl_variance = kv.get_double("problem_options.kl_variance", c.kl_variance);
  c.obs_sd = kv.get_double("problem_options.obs_sd", c.obs_sd);

  c.burn_in_fraction = kv.get_double("report.burn_in_fraction", c.burn_in_fraction);
  c.error_grid_points = static_cast<int>(kv.get_int("report.error_grid_points", c.error_grid_points));
  c.refinement_window = kv.get_int("report.refinement_window", c.refinement_window);

  for (const auto& [key, value] : kv.values) {
    if (!kv.consumed.count(key)) throw ConfigError("config key '" + key + "' is not recognized");
  }

  if (c.n_chains < 1) throw ConfigError("config key 'n_chains': must be >= 1");
  if (c.chain_length < 0) throw ConfigError("config key 'chain_length': must be >= 0");
  if (c.proposal_variance <= 0) throw ConfigError("config key 'proposal.variance': must be > 0");
  if (c.schedule.beta0 < 0 || c.schedule.beta0 > 1) {
    throw ConfigError("config key 'schedule.beta0': must be in [0, 1]");
  }
  if (c.schedule.gamma0 <= 0) throw ConfigError("config key 'schedule.gamma0': must be > 0");
  if (c.burn_in_fraction < 0 || c.burn_in_fraction >= 1) {
    throw ConfigError("config key 'report.burn_in_fraction': must be in [0, 1)");
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << is.rdbuf();
  return parse_experiment_config(buffer.str());
}

std::string serialize_experiment_config(const ExperimentConfig& c) {
  std::ostringstream os;
  if (!c.name.empty()) os << "name = \"" << c.name << "\"\n";
  os << "problem = \"" << problem_kind_name(c.problem) << "\"\n";
  os << "n_chains = " << c.n_chains << "\n";
  os << "chain_length = " << c.chain_length << "\n";
  os << "seed = " << c.master_seed << "\n";
  os << "output_dir = \"" << c.output_dir << "\"\n";
  os << "reference_mode = " << (c.reference_mode ? "true" : "false") << "\n";
  os << "approx_kind = \"" << approx_kind_name(c.approx_kind) << "\"\n";
  os << "\n[proposal]\n";
  os << "type = \"" << c.proposal_type << "\"\n";
  os << "variance = " << format_double(c.proposal_variance) << "\n";
  os << "adaptation_start = " << c.adaptation_start << "\n";
  os << "epsilon = " << format_double(c.adaptation_epsilon) << "\n";
  os << "\n[schedule]\n";
  os << "beta0 = " << format_double(c.schedule.beta0) << "\n";
  os << "beta_exp = " << format_double(c.schedule.beta_exp) << "\n";
  os << "gamma0 = " << format_double(c.schedule.gamma0) << "\n";
  os << "gamma_exp = " << format_double(c.schedule.gamma_exp) << "\n";
  os << "\n[refinement]\n";
  os << "max_per_step = " << c.max_refinements_per_step << "\n";
  os << "\n[seeding]\n";
  os << "mode = \"" << (c.seed_mode == SeedMode::kAroundStart ? "around_start" : "from_prior")
     << "\"\n";
  os << "radius = " << format_double(c.seed_radius) << "\n";
  os << "count = " << c.seed_count << "\n";
  os << "\n[problem_options]\n";
  os << "gaussian_dim = " << c.gaussian_dim << "\n";
  os << "data_seed = " << c.data_seed << "\n";
  if (c.theta_true.size() > 0) os << "theta_true = " << vector_literal(c.theta_true) << "\n";
  os << "iptg = " << vector_literal(c.iptg_list) << "\n";
  if (c.obs_sds.size() > 0) os << "obs_sds = " << vector_literal(c.obs_sds) << "\n";
  os << "mesh_nx = " << c.mesh_nx << "\n";
  os << "kl_modes = " << c.kl_modes << "\n";
  os << "kl_lengthscale = " << format_double(c.kl_lengthscale) << "\n";
  os << "kl_variance = " << format_double(c.kl_variance) << "\n";
  os << "obs_sd = " << format_double(c.obs_sd) << "\n";
  os << "\n[report]\n";
  os << "burn_in_fraction = " << format_double(c.burn_in_fraction) << "\n";
  os << "error_grid_points = " << c.error_grid_points << "\n";
  os << "refinement_window = " << c.refinement_window << "\n";
  return os.str();
}

ProblemSpec build_problem(const ExperimentConfig& c) {
  switch (c.problem) {
    case ProblemKind::kExpQuartic:
      return make_exp_quartic_problem();
    case ProblemKind::kGaussianTest:
      return make_gaussian_test_problem(c.gaussian_dim);
    case ProblemKind::kToggleSwitch: {
      Vector theta_true = c.theta_true.size() > 0 ? c.theta_true : Vector::Zero(6);
      Vector sds = c.obs_sds.size() > 0 ? c.obs_sds : toggle_default_sds();
      return make_toggle_problem(
          toggle_synthetic_config(theta_true, c.iptg_list, sds, c.data_seed));
    }
    case ProblemKind::kEllipticPde: {
      EllipticConfig ec;
      ec.mesh_nx = c.mesh_nx;
      ec.variance = c.kl_variance;
      ec.lengthscale = c.kl_lengthscale;
      ec.modes = c.kl_modes;
      ec.obs_sd = c.obs_sd;
      ec.data_seed = c.data_seed;
      ec.theta_true = c.theta_true;
      return make_elliptic_problem(ec);
    }
  }
  throw ConfigError("config key 'problem': unhandled problem kind");
}

ChainConfig build_chain_config(const ExperimentConfig& c, int chain_index, int dimension) {
  ChainConfig cfg;
  cfg.approx_kind = c.approx_kind;
  const Matrix cov = c.proposal_variance * Matrix::Identity(dimension, dimension);
  if (c.proposal_type == "adaptive_metropolis") {
    cfg.proposal = AdaptiveMetropolisProposal{cov, c.adaptation_start, c.adaptation_epsilon};
  } else {
    cfg.proposal = RandomWalkProposal{cov};
  }
  if (c.max_refinements_per_step > 0) {
    cfg.max_refinements_per_step = c.max_refinements_per_step;
  } else {
    cfg.max_refinements_per_step.reset();
  }
  cfg.schedule = c.schedule;
  cfg.seed = c.master_seed + static_cast<std::uint64_t>(chain_index);
  cfg.chain_length = c.chain_length;
  cfg.reference_mode = c.reference_mode;
  cfg.seed_mode = c.seed_mode;
  cfg.seed_radius = c.seed_radius;
  cfg.seed_count = c.seed_count;
  return cfg;
}

namespace {

void write_samples_csv(const fs::path& path, const Matrix& positions) {
  std::ostringstream os;
  os << "step";
  for (Eigen::Index j = 0; j < positions.cols(); ++j) os << ",theta_" << (j + 1);
  os << "\n";
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    os << (i + 1);
    for (Eigen::Index j = 0; j < positions.cols(); ++j) {
      os << ',' << format_double(positions(i, j));
    }
    os << "\n";
  }
  write_text_atomic(path, os.str());
}

void write_trace_csv(const fs::path& path, const std::vector<StepRecord>& records) {
  std::ostringstream os;
  os << "step,accepted,cumulative_model_evals,eps_plus,eps_minus,refinement_cause,"
        "refinement_site\n";
  for (const auto& r : records) {
    os << r.step << ',' << (r.accepted ? 1 : 0) << ',' << r.cumulative_model_evals << ','
       << format_double(r.eps_plus) << ',' << format_double(r.eps_minus) << ','
       << cause_name(r.cause) << ',' << site_name(r.site) << "\n";
  }
  write_text_atomic(path, os.str());
}

nlohmann::json covariance_json(const Matrix& cov) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < cov.cols(); ++j) row.push_back(cov(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::string run_experiment(const ExperimentConfig& config) {
  const ProblemSpec problem = build_problem(config);
  const fs::path dir = fs::path(config.output_dir) / config.effective_name();
  fs::create_directories(dir);
  write_text_atomic(dir / "config.toml", serialize_experiment_config(config));

  nlohmann::json summary;
  summary["config"] = serialize_experiment_config(config);
  summary["problem"] = problem.name;
  summary["chains"] = nlohmann::json::array();
  if (config.problem == ProblemKind::kEllipticPde) {
    EllipticConfig ec;
    ec.data_seed = config.data_seed;
    ec.modes = config.kl_modes;
    ec.theta_true = config.theta_true;
    const Vector tt = elliptic_resolve_theta_true(ec);
    summary["theta_true"] = std::vector<double>(tt.data(), tt.data() + tt.size());
  }

  std::vector<Matrix> chains;
  std::vector<std::vector<StepRecord>> all_records;
  std::vector<std::vector<RefinementWindow>> breakdowns;
  for (int k = 0; k < config.n_chains; ++k) {
    nlohmann::json entry;
    entry["index"] = k;
    const ChainConfig cc = build_chain_config(config, k, problem.dimension);
    entry["seed"] = cc.seed;
    const fs::path chain_dir = dir / ("chain_" + std::to_string(k));
    try {
      const ChainRun run = run_chain(cc, problem, Vector::Zero(problem.dimension));
      fs::create_directories(chain_dir);
      write_samples_csv(chain_dir / "samples.csv", run.positions);
      write_trace_csv(chain_dir / "trace.csv", run.records);
      long accepted = 0;
      for (const auto& r : run.records) accepted += r.accepted ? 1 : 0;
      entry["model_evals"] = run.final_state.model_eval_count;
      entry["seed_evals"] = run.final_state.seed_count;
      entry["acceptance_rate"] =
          run.records.empty() ? 0.0 : static_cast<double>(accepted) / run.records.size();
      entry["refinements"] = run.final_state.refinement_log.size();
      breakdowns.push_back(refinement_breakdown(run.final_state.refinement_log,
                                                config.chain_length, config.refinement_window));
      chains.push_back(run.positions);
      all_records.push_back(run.records);
    } catch (const std::exception& e) {
      entry["error"] = e.what();
    }
    summary["chains"].push_back(entry);
  }

  if (!chains.empty()) {
    try {
      const Matrix ref = pooled_reference(chains, config.burn_in_fraction);
      summary["pooled_covariance"] = covariance_json(ref);
      std::vector<std::vector<ErrorTracePoint>> traces;
      nlohmann::json final_errors = nlohmann::json::array();
      for (const auto& chain : chains) {
        traces.push_back(relative_cov_error_trace(chain, ref, config.burn_in_fraction,
                                                  config.error_grid_points));
        final_errors.push_back(traces.back().empty() ? -1.0 : traces.back().back().error);
      }
      summary["final_relative_errors"] = final_errors;
      std::ostringstream err;
      write_error_trace_csv(err, traces);
      write_text_atomic(dir / "error_trace.csv", err.str());
    } catch (const std::exception& e) {
      summary["report_error"] = e.what();
    }
    std::ostringstream cost;
    write_cost_trace_csv(cost, all_records, config.error_grid_points);
    write_text_atomic(dir / "cost_trace.csv", cost.str());
    std::ostringstream refcsv;
    write_refinements_csv(refcsv, breakdowns);
    write_text_atomic(dir / "refinements.csv", refcsv.str());
  }

  write_text_atomic(dir / "summary.json", summary.dump(2) + "\n");
  return dir.string();
}

void recompute_report(const std::string& experiment_dir, double burn_in_fraction,
                      int grid_points) {
  std::vector<Matrix> chains;
  std::vector<fs::path> chain_dirs;
  for (int k = 0;; ++k) {
    const fs::path p = fs::path(experiment_dir) / ("chain_" + std::to_string(k)) / "samples.csv";
    if (!fs::exists(p)) break;
    chain_dirs.push_back(p);
  }
  if (chain_dirs.empty()) {
    throw std::runtime_error("no chain_*/samples.csv under " + experiment_dir);
  }
  for (const auto& p : chain_dirs) {
    std::ifstream is(p);
    std::string header;
    std::getline(is, header);
    int d = -1;  // columns after "step"
    for (char ch : header) d += ch == ',' ? 1 : 0;
    ++d;
    std::vector<double> flat;
    std::string line;
    while (std::getline(is, line)) {
      std::stringstream ss(line);
      std::string tok;
      std::getline(ss, tok, ',');  // step
      while (std::getline(ss, tok, ',')) flat.push_back(std::stod(tok));
    }
    const long rows = static_cast<long>(flat.size()) / d;
    Matrix chain(rows, d);
    for (long i = 0; i < rows; ++i) {
      for (int j = 0; j < d; ++j) chain(i, j) = flat[i * d + j];
    }
    chains.push_back(std::move(chain));
  }
  const Matrix ref = pooled_reference(chains, burn_in_fraction);
  std::vector<std::vector<ErrorTracePoint>> traces;
  nlohmann::json report;
  nlohmann::json final_errors = nlohmann::json::array();
  for (const auto& chain : chains) {
    traces.push_back(relative_cov_error_trace(chain, ref, burn_in_fraction, grid_points));
    final_errors.push_back(traces.back().empty() ? -1.0 : traces.back().back().error);
  }
  std::ostringstream err;
  write_error_trace_csv(err, traces);
  write_text_atomic(fs::path(experiment_dir) / "error_trace.csv", err.str());
  report["pooled_covariance"] = covariance_json(ref);
  report["final_relative_errors"] = final_errors;
  write_text_atomic(fs::path(experiment_dir) / "report.json", report.dump(2) + "\n");
}

}  // namespace lamcmc
