#include "lamcmc/surrogate.hpp"

namespace lamcmc {

namespace {
constexpr std::size_t kCacheSize = 8;
}

SurrogateEngine::SurrogateEngine(ApproxKind kind, TargetMode mode, const ProblemSpec& problem,
                                 GPFitOptions gp_options, int gp_batches)
    : kind_(kind),
      mode_(mode),
      problem_(&problem),
      gp_options_(std::move(gp_options)),
      gp_batches_(gp_batches) {
  if (kind == ApproxKind::kGaussianProcess) {
    sample_count_ = gp_sample_count(problem.dimension);
  } else {
    const PolyOrder order =
        kind == ApproxKind::kLinear ? PolyOrder::kLinear : PolyOrder::kQuadratic;
    sample_count_ = sample_counts(problem.dimension, order).n_regression;
  }
}

double SurrogateEngine::compose(const Vector& theta, const Vector& outputs) const {
  if (mode_ == TargetMode::kLogPosterior) return outputs[0];
  return problem_->log_posterior_from_outputs(theta, outputs);
}

std::optional<LocalFit> SurrogateEngine::fit_at(const SampleSet& set, const Vector& theta,
                                                RngStream& rng) {
  for (const auto& entry : cache_) {
    if (entry.version == set.version() && entry.theta == theta) return entry.fit;
  }
  std::optional<LocalFit> result;
  if (set.size() >= sample_count_) {
    result = kind_ == ApproxKind::kGaussianProcess ? fit_gaussian_process(set, theta, rng)
                                                   : fit_poly(set, theta);
  }
  cache_.push_back({theta, set.version(), result});
  if (cache_.size() > kCacheSize) cache_.pop_front();
  return result;
}

std::optional<LocalFit> SurrogateEngine::fit_poly(const SampleSet& set, const Vector& theta) {
  const PolyOrder order =
      kind_ == ApproxKind::kLinear ? PolyOrder::kLinear : PolyOrder::kQuadratic;
  const auto neighbors = set.nearest(theta, sample_count_);
  const auto loo = loo_center_values(set, neighbors, theta, order);
  if (!loo) return std::nullopt;
  LocalFit fit;
  fit.nominal = compose(theta, loo->nominal);
  fit.variants.reserve(loo->leave_one_out.rows());
  for (Eigen::Index j = 0; j < loo->leave_one_out.rows(); ++j) {
    fit.variants.push_back(compose(theta, loo->leave_one_out.row(j).transpose()));
  }
  return fit;
}

std::optional<LocalFit> SurrogateEngine::fit_gaussian_process(const SampleSet& set,
                                                              const Vector& theta,
                                                              RngStream& rng) {
  GPFitOptions opts = gp_options_;
  opts.init_lengthscales = last_lengthscales_;
  opts.init_nugget = last_nugget_;
  // Hyperparameters only need re-optimizing after the training set changes;
  // between refinements the stored values are carried over unchanged.
  opts.reuse_init = last_lengthscales_.has_value() && set.version() == last_gp_version_;
  const auto neighbors = select_neighbors(set, theta, sample_count_, gp_batches_, rng, opts);
  const auto model = fit_gp(set, neighbors, theta, opts, rng);
  if (!model) return std::nullopt;
  last_lengthscales_ = model->lengthscales();
  last_nugget_ = model->nugget();
  last_gp_version_ = set.version();
  LocalFit fit;
  fit.nominal = compose(theta, model->predict(theta).mean);
  fit.variants.reserve(sample_count_);
  for (int j = 0; j < sample_count_; ++j) {
    fit.variants.push_back(compose(theta, model->draw(theta, rng)));
  }
  return fit;
}

}  // namespace lamcmc
