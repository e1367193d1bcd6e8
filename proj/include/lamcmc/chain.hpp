#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "lamcmc/surrogate.hpp"

namespace lamcmc {

// beta(t) = beta0 * t^-beta_exp drives random refinements, gamma(t) =
// gamma0 * t^-gamma_exp thresholds the cross-validation indicators; t is the
// MCMC step index starting at 1.
struct RefinementSchedule {
  double beta0 = 0.01;
  double beta_exp = 0.2;
  double gamma0 = 0.1;
  double gamma_exp = 0.1;

  double beta(long t) const;
  double gamma(long t) const;
};

struct RandomWalkProposal {
  Matrix covariance;
};

// Haario-style adaptive Metropolis: fixed covariance for the first
// adaptation_start steps, then s_d * (empirical covariance + epsilon I)
// with s_d = 2.4^2 / d, running moments updated each step.
struct AdaptiveMetropolisProposal {
  Matrix initial_covariance;
  long adaptation_start = 1000;
  double epsilon = 1e-6;
};

using ProposalConfig = std::variant<RandomWalkProposal, AdaptiveMetropolisProposal>;

enum class SeedMode { kAroundStart, kFromPrior };

struct ChainConfig {
  ApproxKind approx_kind = ApproxKind::kQuadratic;
  ProposalConfig proposal;
  std::optional<int> max_refinements_per_step = 2;
  RefinementSchedule schedule;
  std::uint64_t seed = 0;
  long chain_length = 0;
  // Reference mode evaluates the true model at every proposal instead of
  // fitting surrogates; the refinement machinery is bypassed entirely.
  bool reference_mode = false;
  SeedMode seed_mode = SeedMode::kAroundStart;
  double seed_radius = 0.2;
  int seed_count = 0;  // 0: one more than the regression sample count
  // Chain fits are warm-started from the previous step, so a short
  // hyperparameter search suffices; fewer selection batches keep the
  // per-step neighbor search cheap.
  GPFitOptions gp_options = [] {
    GPFitOptions o;
    o.max_evals_per_start = 25;
    return o;
  }();
  int gp_batches = 2;
};

enum class RefinementCause { kNone, kRandom, kCrossValidation };
enum class RefinementSite { kNone, kPlus, kMinus };

struct RefinementEvent {
  long step;
  RefinementCause cause;
  RefinementSite site;
};

// Running mean and scatter for the adaptive proposal, updated once per
// kernel step with the returned position.
struct ProposalMoments {
  long count = 0;
  Vector mean;
  Matrix scatter;  // sum of centered outer products

  void update(const Vector& x);
  Matrix covariance() const;
};

struct ChainState {
  Vector position;
  long step = 0;              // completed kernel applications
  SampleSet sample_set;
  long model_eval_count = 0;  // every true-model call, seeds included
  long seed_count = 0;
  std::vector<RefinementEvent> refinement_log;
  ProposalMoments proposal_moments;
  // Log-posterior at `position` under the true model; reference mode only,
  // so each step costs one evaluation instead of two.
  std::optional<double> current_logpost;
};

// Per-step trace record. eps_plus/eps_minus are the indicators computed
// before any refinement in the step; the refinement fields describe the
// first refinement of the step (the per-event list lives in ChainState).
struct StepRecord {
  long step;
  bool accepted;
  long cumulative_model_evals;
  double eps_plus = 0.0;
  double eps_minus = 0.0;
  RefinementCause cause = RefinementCause::kNone;
  RefinementSite site = RefinementSite::kNone;
};

struct AcceptanceQuantities {
  double zeta;
  double alpha;
};

// zeta = exp(lp_plus - lp_minus), alpha = min(1, zeta); minus-side -inf with
// finite plus accepts surely, both -inf stays put.
AcceptanceQuantities acceptance_quantities(double logpost_plus, double logpost_minus);

// Evaluates the true model at `count` points near `start` (uniform in a ball
// of seed_radius) or drawn from the prior support box, inserting each into a
// fresh set. Points where the model fails are redrawn, up to 100 attempts
// each.
SampleSet seed_sample_set(const ProblemSpec& problem, const Vector& start, int count,
                          SeedMode mode, double radius, RngStream& rng);

// One-sided error indicator: the largest change of the acceptance
// probability, in both labelings of the pair, as the varied point's
// log-posterior moves through its perturbed variants while the other point's
// value stays fixed.
double cv_indicator_from_logposts(double lp_fixed, double lp_nominal,
                                  const std::vector<double>& lp_variants, bool varied_is_plus);

// Cross-validation error indicators: how much the acceptance probability (in
// both labelings) can move under the fit variations at each point. A failed
// fit yields +infinity on that side.
std::pair<double, double> cv_indicators(const Vector& theta_plus, const Vector& theta_minus,
                                        const SampleSet& set, SurrogateEngine& engine,
                                        RngStream& rng);

// Space-filling refinement: local maximin of the distance to the existing
// samples over the ball around theta whose radius is the engine's
// neighborhood radius, pattern search initialized at theta. Evaluates the
// true model at the selected point and inserts it. Returns the number of
// true-model calls made (0 when every candidate failed or deduplicated).
int refine_near(const Vector& theta, SampleSet& set, const ProblemSpec& problem,
                int n_neighbors, RngStream& rng);

// The random streams one chain consumes, all derived from the config seed.
// Proposal and acceptance streams are separate from the refinement and
// surrogate streams so that a no-refinement surrogate chain consumes exactly
// the same proposal/acceptance randomness as a reference chain with the same
// seed.
struct ChainRngs {
  RngStream proposal;
  RngStream accept;
  RngStream refine;
  RngStream surrogate;
  RngStream seeding;

  explicit ChainRngs(std::uint64_t seed);
};

Vector propose(const ChainConfig& config, const ChainState& state, RngStream& rng);

// One application of the approximate transition kernel (or plain MH in
// reference mode). Mutates state in place and returns the step's record.
StepRecord kernel_step(ChainState& state, const ChainConfig& config, const ProblemSpec& problem,
                       SurrogateEngine* engine, ChainRngs& rngs);

struct ChainRun {
  Matrix positions;  // T x d, row t = position after step t+1
  std::vector<StepRecord> records;
  ChainState final_state;
};

ChainRun run_chain(const ChainConfig& config, const ProblemSpec& problem, const Vector& initial);

}  // namespace lamcmc
