#include "lamcmc/chain.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lamcmc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double RefinementSchedule::beta(long t) const {
  return std::min(1.0, beta0 * std::pow(static_cast<double>(t), -beta_exp));
}

double RefinementSchedule::gamma(long t) const {
  return gamma0 * std::pow(static_cast<double>(t), -gamma_exp);
}

void ProposalMoments::update(const Vector& x) {
  if (count == 0) {
    mean = Vector::Zero(x.size());
    scatter = Matrix::Zero(x.size(), x.size());
  }
  ++count;
  const Vector delta = x - mean;
  mean += delta / static_cast<double>(count);
  scatter += delta * (x - mean).transpose();
}

Matrix ProposalMoments::covariance() const {
  if (count < 2) return Matrix::Zero(mean.size(), mean.size());
  return scatter / static_cast<double>(count - 1);
}

AcceptanceQuantities acceptance_quantities(double logpost_plus, double logpost_minus) {
  if (std::isinf(logpost_minus) && logpost_minus < 0) {
    if (std::isinf(logpost_plus) && logpost_plus < 0) return {0.0, 0.0};
    return {kInf, 1.0};
  }
  const double zeta = std::exp(logpost_plus - logpost_minus);
  return {zeta, std::min(1.0, zeta)};
}

SampleSet seed_sample_set(const ProblemSpec& problem, const Vector& start, int count,
                          SeedMode mode, double radius, RngStream& rng) {
  const int d = problem.dimension;
  SampleSet set(d, problem.output_dim);
  auto draw_point = [&]() {
    Vector x(d);
    if (mode == SeedMode::kAroundStart) {
      // Uniform in the ball: random direction scaled by radius * U^{1/d}.
      for (int i = 0; i < d; ++i) x[i] = rng.normal();
      const double norm = x.norm();
      const double r = radius * std::pow(rng.uniform(), 1.0 / d);
      x = norm > 0 ? Vector(start + (r / norm) * x) : start;
    } else if (problem.support_box) {
      for (int i = 0; i < d; ++i) {
        x[i] = rng.uniform(problem.support_box->first[i], problem.support_box->second[i]);
      }
    } else {
      for (int i = 0; i < d; ++i) x[i] = rng.normal();
    }
    return x;
  };
  while (set.size() < count) {
    bool inserted = false;
    for (int attempt = 0; attempt < 100 && !inserted; ++attempt) {
      const Vector x = draw_point();
      if (problem.log_prior(x) == -kInf) continue;
      try {
        inserted = set.insert({x, problem.evaluate(x)});
      } catch (const ModelFailure&) {
      }
    }
    if (!inserted) throw std::runtime_error("seed_sample_set: no viable seed point in 100 draws");
  }
  return set;
}

namespace {

// min(1, zeta) and min(1, 1/zeta) from the two log-posteriors, evaluated in
// log space so huge differences never overflow.
struct AlphaPair {
  double forward;   // min(1, zeta)
  double backward;  // min(1, 1/zeta)
};

AlphaPair alpha_pair(double lp_plus, double lp_minus) {
  if (std::isinf(lp_plus) && std::isinf(lp_minus)) return {0.0, 0.0};
  const double dl = lp_plus - lp_minus;
  return {std::exp(std::min(0.0, dl)), std::exp(std::min(0.0, -dl))};
}

}  // namespace

double cv_indicator_from_logposts(double lp_fixed, double lp_varied_nominal,
                                  const std::vector<double>& lp_variants, bool varied_is_plus) {
  const AlphaPair base = varied_is_plus ? alpha_pair(lp_varied_nominal, lp_fixed)
                                        : alpha_pair(lp_fixed, lp_varied_nominal);
  double eps = 0.0;
  for (double lp_j : lp_variants) {
    const AlphaPair v =
        varied_is_plus ? alpha_pair(lp_j, lp_fixed) : alpha_pair(lp_fixed, lp_j);
    eps = std::max(eps, std::abs(base.forward - v.forward) +
                            std::abs(base.backward - v.backward));
  }
  return eps;
}

std::pair<double, double> cv_indicators(const Vector& theta_plus, const Vector& theta_minus,
                                        const SampleSet& set, SurrogateEngine& engine,
                                        RngStream& rng) {
  const auto fit_plus = engine.fit_at(set, theta_plus, rng);
  const auto fit_minus = engine.fit_at(set, theta_minus, rng);
  double eps_plus = fit_plus ? 0.0 : kInf;
  double eps_minus = fit_minus ? 0.0 : kInf;
  if (fit_plus && fit_minus) {
    eps_plus = cv_indicator_from_logposts(fit_minus->nominal, fit_plus->nominal, fit_plus->variants,
                                   /*varied_is_plus=*/true);
    eps_minus = cv_indicator_from_logposts(fit_plus->nominal, fit_minus->nominal, fit_minus->variants,
                                    /*varied_is_plus=*/false);
  }
  return {eps_plus, eps_minus};
}

namespace {

// Keep a trail of evaluated candidates so dedup rejections and model
// failures can fall back to the next-best distinct point.
struct MaximinTrail {
  std::vector<std::pair<double, Vector>> points;  // (objective, location)

  void add(double value, const Vector& x) { points.emplace_back(value, x); }
  void sort_desc() {
    std::stable_sort(points.begin(), points.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
  }
};

}  // namespace

int refine_near(const Vector& theta, SampleSet& set, const ProblemSpec& problem,
                int n_neighbors, RngStream& rng) {
  const int d = set.dimension();
  double ball = 0.0;
  set.nearest(theta, std::min(n_neighbors, set.size()), &ball);
  if (ball <= 0.0) ball = 1.0;
  // Search only the inner portion of the neighborhood ball. A point near the
  // boundary carries almost no regression weight, so filling gaps there does
  // little to reduce the error indicator at theta.
  const double radius = 0.3 * ball;
  const auto candidates = set.within_ball(theta, 3.0 * ball);

  auto project = [&](Vector x) {
    const double dist = (x - theta).norm();
    if (dist > radius) x = theta + (radius / dist) * (x - theta);
    if (problem.support_box) {
      for (int i = 0; i < d; ++i) {
        x[i] = std::clamp(x[i], problem.support_box->first[i], problem.support_box->second[i]);
      }
    }
    return x;
  };
  auto objective = [&](const Vector& x) { return set.min_distance(x, candidates); };

  MaximinTrail trail;
  Vector best = project(theta);
  double best_value = objective(best);
  trail.add(best_value, best);

  int evals = 1;
  double step = 0.5 * radius;
  const int budget = 200;
  while (evals < budget && step > 1e-3 * radius) {
    // Poll the coordinate directions plus one random diagonal pair.
    std::vector<Vector> dirs;
    dirs.reserve(2 * d + 2);
    for (int i = 0; i < d; ++i) {
      dirs.push_back(step * Vector::Unit(d, i));
      dirs.push_back(-step * Vector::Unit(d, i));
    }
    Vector diag(d);
    for (int i = 0; i < d; ++i) diag[i] = rng.normal();
    if (diag.norm() > 0) {
      diag *= step / diag.norm();
      dirs.push_back(diag);
      dirs.push_back(-diag);
    }
    Vector poll_best = best;
    double poll_best_value = best_value;
    for (const Vector& dir : dirs) {
      if (evals >= budget) break;
      const Vector x = project(best + dir);
      const double value = objective(x);
      ++evals;
      trail.add(value, x);
      if (value > poll_best_value) {
        poll_best_value = value;
        poll_best = x;
      }
    }
    if (poll_best_value > best_value) {
      best = poll_best;
      best_value = poll_best_value;
    } else {
      step *= 0.5;
    }
  }

  trail.sort_desc();
  int calls = 0;
  int failures = 0;
  for (const auto& [value, x] : trail.points) {
    (void)value;
    if (failures > 1) break;
    if (!set.within_ball(x, set.dedup_tolerance()).empty()) continue;
    try {
      Vector outputs = problem.evaluate(x);
      ++calls;
      set.insert({x, std::move(outputs)});
      return calls;
    } catch (const ModelFailure&) {
      ++calls;
      ++failures;
    }
  }
  return calls;
}

ChainRngs::ChainRngs(std::uint64_t seed)
    : proposal(RngStream::derive(seed, "chain-proposal")),
      accept(RngStream::derive(seed, "chain-accept")),
      refine(RngStream::derive(seed, "chain-refine")),
      surrogate(RngStream::derive(seed, "chain-surrogate")),
      seeding(RngStream::derive(seed, "chain-seeding")) {}

namespace {

Matrix cholesky_factor(const Matrix& cov, double epsilon) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Matrix inflated = cov + epsilon * Matrix::Identity(cov.rows(), cov.cols());
  Eigen::LLT<Matrix> retry(inflated);
  if (retry.info() != Eigen::Success) {
    throw std::runtime_error("proposal covariance is not positive definite");
  }
  return retry.matrixL();
}

}  // namespace

Vector propose(const ChainConfig& config, const ChainState& state, RngStream& rng) {
  const int d = static_cast<int>(state.position.size());
  Matrix factor;
  if (const auto* rw = std::get_if<RandomWalkProposal>(&config.proposal)) {
    factor = cholesky_factor(rw->covariance, 0.0);
  } else {
    const auto& am = std::get<AdaptiveMetropolisProposal>(config.proposal);
    if (state.step < am.adaptation_start || state.proposal_moments.count < 2) {
      factor = cholesky_factor(am.initial_covariance, am.epsilon);
    } else {
      const double s_d = 2.4 * 2.4 / d;
      Matrix cov = s_d * (state.proposal_moments.covariance() +
                          am.epsilon * Matrix::Identity(d, d));
      factor = cholesky_factor(cov, am.epsilon);
    }
  }
  Vector z(d);
  for (int i = 0; i < d; ++i) z[i] = rng.normal();
  return state.position + factor * z;
}

StepRecord kernel_step(ChainState& state, const ChainConfig& config, const ProblemSpec& problem,
                       SurrogateEngine* engine, ChainRngs& rngs) {
  const long t = state.step + 1;
  StepRecord rec;
  rec.step = t;
  rec.accepted = false;

  const Vector theta_minus = state.position;
  const Vector theta_plus = propose(config, state, rngs.proposal);

  if (problem.log_prior(theta_plus) == -kInf) {
    // Zero-prior proposals are rejected outright, with no model or surrogate
    // work and no acceptance draw.
  } else if (config.reference_mode) {
    if (!state.current_logpost) {
      state.current_logpost = problem.log_posterior(theta_minus);
      ++state.model_eval_count;
    }
    const double lp_plus = problem.log_posterior(theta_plus);
    ++state.model_eval_count;
    const auto aq = acceptance_quantities(lp_plus, *state.current_logpost);
    if (rngs.accept.uniform() < aq.alpha) {
      rec.accepted = true;
      state.position = theta_plus;
      state.current_logpost = lp_plus;
    }
  } else {
    int refinements = 0;
    bool first_pass = true;
    while (true) {
      const auto [eps_plus, eps_minus] =
          cv_indicators(theta_plus, theta_minus, state.sample_set, *engine, rngs.surrogate);
      if (first_pass) {
        rec.eps_plus = eps_plus;
        rec.eps_minus = eps_minus;
        first_pass = false;
      }
      const bool may_refine =
          !config.max_refinements_per_step || refinements < *config.max_refinements_per_step;
      if (may_refine) {
        RefinementCause cause = RefinementCause::kNone;
        RefinementSite site = RefinementSite::kNone;
        const double gamma = config.schedule.gamma(t);
        if (rngs.refine.uniform() < config.schedule.beta(t)) {
          cause = RefinementCause::kRandom;
          site = rngs.refine.uniform() < 0.5 ? RefinementSite::kPlus : RefinementSite::kMinus;
        } else if (eps_plus >= eps_minus && eps_plus >= gamma) {
          cause = RefinementCause::kCrossValidation;
          site = RefinementSite::kPlus;
        } else if (eps_minus > eps_plus && eps_minus >= gamma) {
          cause = RefinementCause::kCrossValidation;
          site = RefinementSite::kMinus;
        }
        if (site != RefinementSite::kNone) {
          const Vector& where = site == RefinementSite::kPlus ? theta_plus : theta_minus;
          state.model_eval_count +=
              refine_near(where, state.sample_set, problem, engine->sample_count(), rngs.refine);
          state.refinement_log.push_back({t, cause, site});
          if (rec.cause == RefinementCause::kNone) {
            rec.cause = cause;
            rec.site = site;
          }
          ++refinements;
          continue;
        }
      }
      const auto fit_plus = engine->fit_at(state.sample_set, theta_plus, rngs.surrogate);
      const auto fit_minus = engine->fit_at(state.sample_set, theta_minus, rngs.surrogate);
      const double lp_plus = fit_plus ? fit_plus->nominal : -kInf;
      const double lp_minus = fit_minus ? fit_minus->nominal : -kInf;
      const auto aq = acceptance_quantities(lp_plus, lp_minus);
      if (rngs.accept.uniform() < aq.alpha) {
        rec.accepted = true;
        state.position = theta_plus;
      }
      break;
    }
  }

  state.step = t;
  state.proposal_moments.update(state.position);
  rec.cumulative_model_evals = state.model_eval_count;
  return rec;
}

ChainRun run_chain(const ChainConfig& config, const ProblemSpec& problem, const Vector& initial) {
  ChainRngs rngs(config.seed);
  ChainState state{initial, 0, SampleSet(problem.dimension, problem.output_dim)};
  std::optional<SurrogateEngine> engine;
  if (!config.reference_mode) {
    engine.emplace(config.approx_kind, problem.target_mode, problem, config.gp_options,
                   config.gp_batches);
    const int count = config.seed_count > 0 ? config.seed_count : engine->sample_count() + 1;
    state.sample_set = seed_sample_set(problem, initial, count, config.seed_mode,
                                       config.seed_radius, rngs.seeding);
    state.seed_count = state.sample_set.size();
    state.model_eval_count = state.seed_count;
  }

  ChainRun run{Matrix(config.chain_length, problem.dimension), {}, std::move(state)};
  run.records.reserve(config.chain_length);
  for (long step = 0; step < config.chain_length; ++step) {
    run.records.push_back(kernel_step(run.final_state, config, problem,
                                      engine ? &*engine : nullptr, rngs));
    run.positions.row(step) = run.final_state.position;
  }
  return run;
}

}  // namespace lamcmc
