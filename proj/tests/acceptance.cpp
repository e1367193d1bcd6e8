// End-to-end acceptance battery. Each criterion prints exactly one
// PASS/FAIL line; the exit status is the number of failed criteria.
//
// The statistical experiments reproduce the benchmark protocol at desk
// scale: pooled true-model reference chains, 10% burn-in, relative
// covariance error in the Frobenius norm, and cumulative model-evaluation
// counts. All tolerances are pinned constants below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "lamcmc/chain.hpp"
#include "lamcmc/elliptic_fem.hpp"
#include "lamcmc/harness.hpp"

using namespace lamcmc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct GroupResult {
  std::vector<Matrix> positions;
  std::vector<double> model_evals;
  std::vector<std::vector<RefinementEvent>> logs;
};

// n chains with seeds master+0..n-1, all started at `start`.
GroupResult run_group(const ProblemSpec& problem, const ChainConfig& base, int n,
                      std::uint64_t master_seed, const Vector& start) {
  GroupResult group;
  for (int k = 0; k < n; ++k) {
    ChainConfig cfg = base;
    cfg.seed = master_seed + static_cast<std::uint64_t>(k);
    ChainRun run = run_chain(cfg, problem, start);
    group.positions.push_back(std::move(run.positions));
    group.model_evals.push_back(static_cast<double>(run.final_state.model_eval_count));
    group.logs.push_back(std::move(run.final_state.refinement_log));
  }
  return group;
}

std::vector<double> final_errors(const std::vector<Matrix>& chains, const Matrix& reference) {
  std::vector<double> errors;
  for (const auto& chain : chains) {
    const auto trace = relative_cov_error_trace(chain, reference, 0.10, 200);
    errors.push_back(trace.empty() ? kInf : trace.back().error);
  }
  return errors;
}

int g_failures = 0;

void report(int id, const char* label, bool pass, const std::string& detail) {
  if (!pass) ++g_failures;
  std::printf("criterion %2d %-34s %s  (%s)\n", id, label, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
}

void run_criterion(int id, const char* label,
                   const std::function<std::pair<bool, std::string>()>& body) {
  const auto start = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    std::tie(pass, detail) = body();
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char timing[32];
  std::snprintf(timing, sizeof(timing), "; %.1fs", secs);
  report(id, label, pass, detail + timing);
}

// 2-D Gaussian with correlation rho: a globally quadratic log-target.
ProblemSpec correlated_gaussian(double rho) {
  ProblemSpec p;
  p.name = "correlated_gaussian";
  p.dimension = 2;
  p.output_dim = 1;
  p.target_mode = TargetMode::kLogPosterior;
  const double det = 1.0 - rho * rho;
  p.evaluate = [rho, det](const Vector& t) {
    const double q = (t[0] * t[0] - 2.0 * rho * t[0] * t[1] + t[1] * t[1]) / det;
    return Vector::Constant(1, -0.5 * q);
  };
  p.log_prior = [](const Vector&) { return 0.0; };
  p.log_likelihood = [](const Vector& out) { return out[0]; };
  return p;
}

// --- criterion 1: exact pairing of surrogate and true chains ---

std::pair<bool, std::string> criterion_paired_exactness() {
  const auto problem = correlated_gaussian(0.3);
  ChainConfig cfg;
  cfg.approx_kind = ApproxKind::kQuadratic;
  cfg.proposal = RandomWalkProposal{Matrix::Identity(2, 2)};
  cfg.schedule.beta0 = 0.0;
  cfg.seed = 101;
  cfg.chain_length = 10000;
  cfg.seed_radius = 0.5;
  ChainConfig ref = cfg;
  ref.reference_mode = true;
  const ChainRun a = run_chain(cfg, problem, Vector::Zero(2));
  const ChainRun b = run_chain(ref, problem, Vector::Zero(2));
  long mismatches = 0;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    mismatches += a.records[i].accepted != b.records[i].accepted ? 1 : 0;
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "%ld/10000 decision mismatches, refinements=%zu",
                mismatches, a.final_state.refinement_log.size());
  return {mismatches == 0, detail};
}

// --- criteria 2 and 3: exponential-quartic cost reduction and cause trend ---

GroupResult g_quartic_surrogate;  // shared between criteria 2 and 3

std::pair<bool, std::string> criterion_quartic_cost() {
  const auto problem = make_exp_quartic_problem();
  const long T = 100000;
  ChainConfig base;
  base.proposal = RandomWalkProposal{4.0 * Matrix::Identity(2, 2)};
  base.chain_length = T;
  base.seed_radius = 1.0;

  ChainConfig ref = base;
  ref.reference_mode = true;
  const GroupResult baseline = run_group(problem, ref, 10, 2000, Vector::Zero(2));

  ChainConfig surr = base;
  surr.approx_kind = ApproxKind::kQuadratic;
  surr.max_refinements_per_step.reset();  // unconstrained refinement loop
  g_quartic_surrogate = run_group(problem, surr, 10, 1000, Vector::Zero(2));

  const Matrix reference = pooled_reference(baseline.positions, 0.10);
  const double base_err = median(final_errors(baseline.positions, reference));
  const double surr_err = median(final_errors(g_quartic_surrogate.positions, reference));
  const double base_evals = median(baseline.model_evals);
  const double surr_evals = median(g_quartic_surrogate.model_evals);
  double max_evals = 0;
  for (double e : g_quartic_surrogate.model_evals) max_evals = std::max(max_evals, e);

  const bool cost_ok = max_evals <= base_evals / 30.0;
  const bool err_ok = surr_err <= 2.0 * base_err;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "median evals %.0f vs %.0f (max %.0f, bar %.0f); median err %.4f vs %.4f",
                surr_evals, base_evals, max_evals, base_evals / 30.0, surr_err, base_err);
  return {cost_ok && err_ok, detail};
}

std::pair<bool, std::string> criterion_refinement_trend() {
  if (g_quartic_surrogate.logs.empty()) return {false, "quartic run unavailable"};
  const long T = 100000;
  int rising = 0;
  for (const auto& log : g_quartic_surrogate.logs) {
    const auto windows = refinement_breakdown(log, T, T / 4);
    const auto first = windows.front().random_share();
    const auto last = windows.back().random_share();
    if (first && last && *last > *first) ++rising;
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "%d/10 chains with rising random share", rising);
  return {rising >= 7, detail};
}

// --- criteria 4 and 5: benchmark protocol on the two inverse problems ---

struct ProtocolBars {
  double quadratic;  // minimum eval-reduction factor
  double gp;
  double linear;
  double error_factor;  // surrogate median error <= factor * baseline median
};

std::pair<bool, std::string> run_protocol(const ProblemSpec& problem, ChainConfig base, long T,
                                          int n_chains, std::uint64_t seed_base,
                                          const ProtocolBars& bars, const Vector& start) {
  base.chain_length = T;
  ChainConfig ref = base;
  ref.reference_mode = true;
  const GroupResult baseline = run_group(problem, ref, n_chains, seed_base, start);
  const Matrix reference = pooled_reference(baseline.positions, 0.10);
  const double base_err = median(final_errors(baseline.positions, reference));
  const double base_evals = median(baseline.model_evals);

  struct KindResult {
    const char* name;
    double reduction;
    double err;
    bool ok;
  };
  std::vector<KindResult> results;
  const struct {
    ApproxKind kind;
    const char* name;
    double bar;
  } kinds[] = {{ApproxKind::kQuadratic, "quad", bars.quadratic},
               {ApproxKind::kGaussianProcess, "gp", bars.gp},
               {ApproxKind::kLinear, "linear", bars.linear}};
  bool all_ok = true;
  std::string detail;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "base evals %.0f err %.4f", base_evals, base_err);
  detail = buf;
  for (const auto& k : kinds) {
    ChainConfig cfg = base;
    cfg.approx_kind = k.kind;
    const GroupResult group = run_group(problem, cfg, n_chains, seed_base + 500, start);
    const double evals = median(group.model_evals);
    const double err = median(final_errors(group.positions, reference));
    const double reduction = base_evals / evals;
    const bool ok = reduction >= k.bar && err <= bars.error_factor * base_err;
    all_ok = all_ok && ok;
    std::snprintf(buf, sizeof(buf), "; %s %.1fx (bar %.0fx) err %.4f%s", k.name, reduction,
                  k.bar, err, ok ? "" : " [fail]");
    detail += buf;
  }
  return {all_ok, detail};
}

std::pair<bool, std::string> criterion_toggle() {
  const Vector iptg = (Vector(6) << 1e-6, 2e-5, 4e-5, 8e-5, 2e-4, 6e-3).finished();
  // theta_true puts the first observation in the low state and the rest
  // across the switching transition, matching the experimental regime, and
  // keeps the posterior well clear of the basin boundary of the pinned
  // fixed-point iteration; chains start at theta_true.
  const Vector theta_true = (Vector(6) << 0.95, -0.1, -0.3, 0.0, 0.0, 0.0).finished();
  const auto problem = make_toggle_problem(
      toggle_synthetic_config(theta_true, iptg, toggle_default_sds(), 424242));
  ChainConfig base;
  base.proposal = AdaptiveMetropolisProposal{0.04 * Matrix::Identity(6, 6), 500, 1e-8};
  base.seed_mode = SeedMode::kFromPrior;
  // With only a 10-chain baseline (instead of 30) the error-overlap
  // tolerance widens from 2x to 3x.
  return run_protocol(problem, base, 100000, 10, 3000, {10.0, 10.0, 2.0, 3.0}, theta_true);
}

std::pair<bool, std::string> criterion_elliptic() {
  EllipticConfig ec;
  ec.data_seed = 99;
  const auto problem = make_elliptic_problem(ec);
  ChainConfig base;
  base.proposal = AdaptiveMetropolisProposal{0.04 * Matrix::Identity(6, 6), 500, 1e-8};
  base.seed_mode = SeedMode::kFromPrior;
  return run_protocol(problem, base, 30000, 10, 4000, {50.0, 50.0, 10.0, 3.0},
                      Vector::Zero(6));
}

// --- criterion 6: cubic convergence of the quadratic local fit ---

std::pair<bool, std::string> criterion_fit_convergence() {
  RngStream rng(606);
  std::vector<double> max_errors;
  for (double radius : {0.4, 0.2, 0.1}) {
    SampleSet set(2, 1);
    while (set.size() < 40) {
      Vector x(2);
      x[0] = rng.uniform(-radius, radius);
      x[1] = rng.uniform(-radius, radius);
      if (x.norm() > radius) continue;
      set.insert({x, Vector::Constant(1, std::exp(x[0]))});
    }
    const Vector center = Vector::Zero(2);
    const auto spec = sample_counts(2, PolyOrder::kQuadratic);
    const auto model =
        fit(set, set.nearest(center, spec.n_regression), center, PolyOrder::kQuadratic);
    if (!model) return {false, "fit failed"};
    double max_err = 0;
    for (int i = 0; i < 400; ++i) {
      Vector x(2);
      x[0] = rng.uniform(-radius, radius);
      x[1] = rng.uniform(-radius, radius);
      if (x.norm() > radius) continue;
      max_err = std::max(max_err, std::abs(model->evaluate(x)[0] - std::exp(x[0])));
    }
    max_errors.push_back(max_err);
  }
  const double f1 = max_errors[0] / max_errors[1];
  const double f2 = max_errors[1] / max_errors[2];
  char detail[96];
  std::snprintf(detail, sizeof(detail), "halving factors %.1f, %.1f (bar 6)", f1, f2);
  return {f1 >= 6.0 && f2 >= 6.0, detail};
}

// --- criterion 7: cross-validation indicator algebra ---

std::pair<bool, std::string> criterion_cv_algebra() {
  // Coinciding variants give a zero indicator.
  if (cv_indicator_from_logposts(0.4, -1.2, {-1.2, -1.2, -1.2}, true) != 0.0) {
    return {false, "nonzero indicator for coinciding variants"};
  }
  // Bounded by 2 under arbitrary perturbations.
  RngStream rng(707);
  for (int i = 0; i < 2000; ++i) {
    const double fixed = rng.uniform(-50, 50);
    const double nominal = rng.uniform(-50, 50);
    std::vector<double> variants{rng.uniform(-50, 50), rng.uniform(-50, 50)};
    const double eps = cv_indicator_from_logposts(fixed, nominal, variants, i % 2 == 0);
    if (!(eps >= 0.0 && eps <= 2.0)) return {false, "indicator out of [0, 2]"};
  }
  // Swap symmetry on a real fit pair.
  const auto problem = make_exp_quartic_problem();
  RngStream seed_rng(708), fit_rng(709);
  const auto set =
      seed_sample_set(problem, Vector::Zero(2), 15, SeedMode::kAroundStart, 1.5, seed_rng);
  SurrogateEngine ea(ApproxKind::kLinear, TargetMode::kLogPosterior, problem);
  SurrogateEngine eb(ApproxKind::kLinear, TargetMode::kLogPosterior, problem);
  const Vector plus = (Vector(2) << 0.7, -0.2).finished();
  const Vector minus = (Vector(2) << -0.5, 0.6).finished();
  const auto [ep, em] = cv_indicators(plus, minus, set, ea, fit_rng);
  const auto [ep2, em2] = cv_indicators(minus, plus, set, eb, fit_rng);
  if (ep != em2 || em != ep2) return {false, "relabeling did not swap the pair exactly"};
  // Hand-computed value: zeta = 1 with one variant at e^{0.1}.
  const double hand = cv_indicator_from_logposts(0.0, 0.0, {0.1}, true);
  const double expected = 1.0 - std::exp(-0.1);
  char detail[96];
  std::snprintf(detail, sizeof(detail), "hand value %.9f vs %.9f", hand, expected);
  return {std::abs(hand - expected) < 1e-9, detail};
}

// --- criterion 8: FEM correctness ---

std::pair<bool, std::string> criterion_fem() {
  const FemMesh mesh(30);
  const Vector k_unit = Vector::Ones(mesh.node_count());
  const Vector u = fem_solve(k_unit, mesh);
  double centerline_dev = 0;
  for (int i = 0; i <= mesh.nx; ++i) {
    centerline_dev = std::max(centerline_dev, std::abs(u[mesh.node_index(i, 15)] - 0.5));
  }
  const double lo = u.minCoeff(), hi = u.maxCoeff();
  const bool bounds_ok = lo >= -1e-9 && hi <= 1.0 + 1e-9;

  RngStream rng(808);
  Vector k_random(mesh.node_count());
  for (int i = 0; i < k_random.size(); ++i) k_random[i] = std::exp(0.5 * rng.normal());
  const Eigen::SparseMatrix<double> stiff = assemble_stiffness(k_random, mesh);
  const double asym = Matrix(stiff - Eigen::SparseMatrix<double>(stiff.transpose()))
                          .cwiseAbs()
                          .maxCoeff();

  EllipticConfig coarse;
  coarse.data_seed = 99;
  const Vector theta = elliptic_resolve_theta_true(coarse);
  const EllipticForward f30(coarse);
  EllipticConfig fine = coarse;
  fine.mesh_nx = 60;
  const EllipticForward f60(fine);
  const double drift = (f30(theta) - f60(theta)).cwiseAbs().maxCoeff();

  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "centerline dev %.2e, range [%.1e, 1+%.1e], asym %.1e, drift %.2e",
                centerline_dev, lo, hi - 1.0, asym, drift);
  return {centerline_dev <= 1e-8 && bounds_ok && asym <= 1e-12 && drift < 1e-3, detail};
}

// --- criterion 9: KL basis ---

std::pair<bool, std::string> criterion_kl() {
  const FemMesh mesh(30);
  const KLBasis a = build_kl_basis(mesh, 1.0, 0.2, 6);
  const KLBasis b = build_kl_basis(mesh, 1.0, 0.2, 6);
  const bool deterministic =
      a.eigenvalues == b.eigenvalues && a.eigenfunctions == b.eigenfunctions;
  const double trace_err = std::abs(a.total_trace - 1.0);
  double ortho_err = 0;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      const double ip = (a.eigenfunctions.col(i).array() * a.eigenfunctions.col(j).array() *
                         a.quad_weights.array())
                            .sum();
      ortho_err = std::max(ortho_err, std::abs(ip - (i == j ? 1.0 : 0.0)));
    }
  }
  bool signs_ok = true;
  for (int m = 0; m < 6; ++m) {
    for (int i = 0; i < a.eigenfunctions.rows(); ++i) {
      if (std::abs(a.eigenfunctions(i, m)) > 1e-8) {
        signs_ok = signs_ok && a.eigenfunctions(i, m) > 0;
        break;
      }
    }
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "trace err %.4f, ortho err %.1e, deterministic=%d",
                trace_err, ortho_err, deterministic ? 1 : 0);
  return {trace_err <= 0.02 && ortho_err <= 1e-6 && deterministic && signs_ok, detail};
}

// --- criterion 10: known-target sanity ---

std::pair<bool, std::string> criterion_known_target() {
  const auto problem = make_gaussian_test_problem(2);
  ChainConfig cfg;
  cfg.reference_mode = true;
  cfg.proposal = RandomWalkProposal{4.0 * Matrix::Identity(2, 2)};
  cfg.seed = 1010;
  cfg.chain_length = 50000;
  const ChainRun run = run_chain(cfg, problem, Vector::Zero(2));
  const Vector mean = run.positions.colwise().mean();

  // Batch-means Monte Carlo standard error (50 batches).
  const long n_batch = 50, batch = cfg.chain_length / n_batch;
  bool mean_ok = true;
  double worst_z = 0;
  for (int j = 0; j < 2; ++j) {
    double m2 = 0;
    for (long b = 0; b < n_batch; ++b) {
      const double bm = run.positions.col(j).segment(b * batch, batch).mean() - mean[j];
      m2 += bm * bm;
    }
    const double se = std::sqrt(m2 / (n_batch - 1) / n_batch);
    const double z = std::abs(mean[j]) / se;
    worst_z = std::max(worst_z, z);
    mean_ok = mean_ok && z <= 3.0;
  }
  bool var_ok = true;
  double worst_var = 1;
  for (int j = 0; j < 2; ++j) {
    const double var = (run.positions.col(j).array() - mean[j]).square().mean();
    if (std::abs(var - 1.0) > std::abs(worst_var - 1.0)) worst_var = var;
    var_ok = var_ok && std::abs(var - 1.0) <= 0.10;
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "worst |z| %.2f (bar 3), worst variance %.3f", worst_z,
                worst_var);
  return {mean_ok && var_ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select a subset of criteria (3 implies 2).
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  const auto selected = [&](int id) {
    return wanted.empty() || std::find(wanted.begin(), wanted.end(), id) != wanted.end() ||
           (id == 2 && std::find(wanted.begin(), wanted.end(), 3) != wanted.end());
  };
  const struct {
    int id;
    const char* label;
    std::pair<bool, std::string> (*body)();
  } criteria[] = {
      {1, "paired surrogate exactness", criterion_paired_exactness},
      {2, "quartic target cost reduction", criterion_quartic_cost},
      {3, "random-refinement share trend", criterion_refinement_trend},
      {4, "toggle-switch protocol", criterion_toggle},
      {5, "elliptic-PDE protocol", criterion_elliptic},
      {6, "local-fit convergence order", criterion_fit_convergence},
      {7, "cv indicator algebra", criterion_cv_algebra},
      {8, "FEM correctness", criterion_fem},
      {9, "KL basis", criterion_kl},
      {10, "known-target sanity", criterion_known_target},
  };
  int n_run = 0;
  for (const auto& c : criteria) {
    if (!selected(c.id)) continue;
    run_criterion(c.id, c.label, c.body);
    ++n_run;
  }
  std::printf("%d of %d criteria failed\n", g_failures, n_run);
  return g_failures;
}
