#include "lamcmc/local_gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lamcmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Matrix correlation_matrix(const Matrix& x, const Vector& lengthscales) {
  const int n = static_cast<int>(x.rows());
  Matrix k(n, n);
  for (int i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      double q = 0;
      for (int c = 0; c < x.cols(); ++c) {
        const double dz = (x(i, c) - x(j, c)) / lengthscales[c];
        q += dz * dz;
      }
      k(i, j) = k(j, i) = std::exp(-0.5 * q);
    }
  }
  return k;
}

Vector correlation_vector(const Matrix& x, const Vector& lengthscales, const Vector& point) {
  const int n = static_cast<int>(x.rows());
  Vector k(n);
  for (int i = 0; i < n; ++i) {
    double q = 0;
    for (int c = 0; c < x.cols(); ++c) {
      const double dz = (x(i, c) - point[c]) / lengthscales[c];
      q += dz * dz;
    }
    k[i] = std::exp(-0.5 * q);
  }
  return k;
}

struct Objective {
  const Matrix& x;        // N x d inputs
  const Matrix& yc;       // N x n centered outputs
  const GPHyperPriors& priors;
  double ball_radius;     // lengthscale prior is expressed in these units

  // Profile log-posterior over (lengthscales, nugget), with the per-output
  // variance plugged in at its analytic inverse-gamma MAP.
  double operator()(const Vector& lengthscales, double nugget) const {
    const int n = static_cast<int>(x.rows());
    const int n_out = static_cast<int>(yc.cols());
    Matrix c = correlation_matrix(x, lengthscales);
    c.diagonal().array() += nugget;
    Eigen::LLT<Matrix> llt(c);
    if (llt.info() != Eigen::Success) return kNegInf;
    double logdet = 0;
    for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixLLT()(i, i));
    logdet *= 2.0;

    const double a = priors.variance_shape, b = priors.variance_scale;
    double total = 0;
    const Matrix solved = llt.solve(yc);
    for (int j = 0; j < n_out; ++j) {
      const double q = yc.col(j).dot(solved.col(j));
      const double var_map = (b + 0.5 * q) / (a + 0.5 * n + 1.0);
      total += -0.5 * logdet - 0.5 * n * std::log(var_map) - 0.5 * q / var_map;
      total += -(a + 1.0) * std::log(var_map) - b / var_map;  // IG prior, up to const
    }
    for (int i = 0; i < lengthscales.size(); ++i) {
      const double r = lengthscales[i] / ball_radius;
      total += (priors.lengthscale_shape - 1.0) * std::log(r) - priors.lengthscale_rate * r;
    }
    total += (priors.nugget_shape - 1.0) * std::log(nugget) - priors.nugget_rate * nugget;
    return std::isfinite(total) ? total : kNegInf;
  }
};

// Derivative-free coordinate search in log-parameter space.
struct SearchResult {
  Vector log_params;  // d lengthscales then nugget
  double value;
};

SearchResult coordinate_search(const Objective& obj, Vector log_params, const Vector& lo,
                               const Vector& hi, int max_evals) {
  const int d = static_cast<int>(log_params.size()) - 1;
  auto eval = [&](const Vector& lp) {
    return obj(lp.head(d).array().exp().matrix(), std::exp(lp[d]));
  };
  double best = eval(log_params);
  int evals = 1;
  double step = 0.6;
  while (step > 0.02 && evals < max_evals) {
    bool improved = false;
    for (int i = 0; i < log_params.size() && evals < max_evals; ++i) {
      for (double sign : {1.0, -1.0}) {
        Vector trial = log_params;
        trial[i] = std::clamp(trial[i] + sign * step, lo[i], hi[i]);
        if (trial[i] == log_params[i]) continue;
        const double v = eval(trial);
        ++evals;
        if (v > best) {
          best = v;
          log_params = trial;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return {log_params, best};
}

double ball_radius_of(const std::vector<SampleSet::Neighbor>& subset) {
  double r = 0;
  for (const auto& nb : subset) r = std::max(r, nb.distance);
  return r > 0 ? r : 1.0;
}

}  // namespace

int gp_sample_count(int d, int floor) {
  if (d < 1) throw std::invalid_argument("gp_sample_count: d must be positive");
  const int n = static_cast<int>(std::ceil(std::pow(static_cast<double>(d), 2.5)));
  return std::max(n, floor);
}

std::optional<GPModel> fit_gp(const SampleSet& set, const std::vector<SampleSet::Neighbor>& subset,
                              const Vector& center, const GPFitOptions& opts, RngStream& rng) {
  const int n = static_cast<int>(subset.size());
  if (n < 3) throw std::invalid_argument("fit_gp: subset must hold at least 3 samples");
  const int d = set.dimension();
  const int n_out = set.output_dim();

  Matrix x(n, d), y(n, n_out);
  for (int i = 0; i < n; ++i) {
    x.row(i) = set[subset[i].index].location.transpose();
    y.row(i) = set[subset[i].index].values.transpose();
  }
  const Vector means = y.colwise().mean().transpose();
  const Matrix yc = y.rowwise() - means.transpose();
  const double radius = ball_radius_of(subset);

  Objective obj{x, yc, opts.priors, radius};

  Vector init(d + 1);
  if (opts.init_lengthscales) {
    init.head(d) = opts.init_lengthscales->array().log().matrix();
  } else {
    init.head(d).setConstant(std::log(0.5 * radius));
  }
  init[d] = std::log(opts.init_nugget.value_or(0.01));
  const Vector lo = init.array() - opts.log_bound;
  const Vector hi = init.array() + opts.log_bound;

  const bool warm = opts.init_lengthscales.has_value();
  SearchResult best{init, kNegInf};
  if (warm && opts.reuse_init) {
    best.value = obj(init.head(d).array().exp().matrix(), std::exp(init[d]));
  } else {
    const int starts = warm ? 1 : std::max(1, opts.multistarts);
    for (int s = 0; s < starts; ++s) {
      Vector start = init;
      if (s > 0) {
        for (int i = 0; i < start.size(); ++i) start[i] += rng.uniform(-1.2, 1.2);
        start = start.cwiseMax(lo).cwiseMin(hi);
      }
      SearchResult r = coordinate_search(obj, start, lo, hi, opts.max_evals_per_start);
      if (r.value > best.value) best = r;
    }
  }
  if (best.value == kNegInf) return std::nullopt;

  GPModel model;
  model.inputs_ = std::move(x);
  model.output_means_ = means;
  model.lengthscales_ = best.log_params.head(d).array().exp().matrix();
  model.nugget_ = std::exp(best.log_params[d]);

  // Jitter ladder: inflate the nugget on factorization failure before
  // declaring the fit unusable.
  for (int attempt = 0; attempt <= 3; ++attempt) {
    Matrix c = correlation_matrix(model.inputs_, model.lengthscales_);
    c.diagonal().array() += model.nugget_;
    model.chol_.compute(c);
    if (model.chol_.info() == Eigen::Success) break;
    if (attempt == 3) return std::nullopt;
    model.nugget_ *= 10.0;
  }

  model.alpha_ = model.chol_.solve(yc);
  model.signal_variances_.resize(n_out);
  const double a = opts.priors.variance_shape, b = opts.priors.variance_scale;
  for (int j = 0; j < n_out; ++j) {
    const double q = yc.col(j).dot(model.alpha_.col(j));
    model.signal_variances_[j] = (b + 0.5 * q) / (a + 0.5 * n + 1.0);
  }
  return model;
}

GPModel::Prediction GPModel::predict(const Vector& point) const {
  const Vector k = correlation_vector(inputs_, lengthscales_, point);
  const Vector solved = chol_.solve(k);
  const double s = std::max(0.0, 1.0 - k.dot(solved));
  Prediction p;
  p.mean = output_means_ + alpha_.transpose() * k;
  p.variance = signal_variances_ * s;
  return p;
}

Vector GPModel::draw(const Vector& point, RngStream& rng) const {
  Prediction p = predict(point);
  Vector out(p.mean.size());
  for (int j = 0; j < out.size(); ++j) out[j] = p.mean[j] + std::sqrt(p.variance[j]) * rng.normal();
  return out;
}

std::vector<SampleSet::Neighbor> select_neighbors(const SampleSet& set, const Vector& center,
                                                  int n, int batches, RngStream& rng,
                                                  const GPFitOptions& opts) {
  if (n > set.size()) throw std::invalid_argument("select_neighbors: insufficient samples");
  if (batches < 1) throw std::invalid_argument("select_neighbors: batches must be positive");
  if (n == set.size()) return set.nearest(center, n);

  const int first = n - (batches - 1) * (n / batches);
  std::vector<SampleSet::Neighbor> chosen = set.nearest(center, std::max(first, std::min(3, n)));

  std::vector<char> taken(set.size(), 0);
  for (const auto& nb : chosen) taken[nb.index] = 1;

  const bool frozen = opts.reuse_init && opts.init_lengthscales.has_value();
  Vector lengthscales = frozen ? *opts.init_lengthscales
                               : Vector::Constant(set.dimension(), ball_radius_of(chosen));
  for (int batch = 1; batch < batches && static_cast<int>(chosen.size()) < n; ++batch) {
    // Re-estimate hyperparameters on the current subset; a short warm-started
    // search is enough to steer the distance metric.
    if (!frozen && static_cast<int>(chosen.size()) >= 3) {
      GPFitOptions batch_opts = opts;
      batch_opts.init_lengthscales = lengthscales;
      batch_opts.max_evals_per_start = std::min(opts.max_evals_per_start, 12);
      if (auto m = fit_gp(set, chosen, center, batch_opts, rng)) lengthscales = m->lengthscales();
    }

    const int want = std::min(n / batches, n - static_cast<int>(chosen.size()));
    // Weighted sampling without replacement, weight = exp(-d^2) in the
    // lengthscale-scaled metric.
    std::vector<int> pool;
    std::vector<double> weight;
    for (int i = 0; i < set.size(); ++i) {
      if (taken[i]) continue;
      double q = 0;
      for (int c = 0; c < set.dimension(); ++c) {
        const double dz = (set[i].location[c] - center[c]) / lengthscales[c];
        q += dz * dz;
      }
      pool.push_back(i);
      weight.push_back(std::exp(-q));
    }
    for (int pick = 0; pick < want && !pool.empty(); ++pick) {
      double total = 0;
      for (double w : weight) total += w;
      int sel;
      if (total <= 0) {
        // Degenerate weights: fall back to the nearest remaining point.
        sel = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
          const double dist = (set[pool[i]].location - center).norm();
          if (dist < best) {
            best = dist;
            sel = i;
          }
        }
      } else {
        const double u = rng.uniform() * total;
        double acc = 0;
        sel = static_cast<int>(pool.size()) - 1;
        for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
          acc += weight[i];
          if (u <= acc) {
            sel = i;
            break;
          }
        }
      }
      const int idx = pool[sel];
      chosen.push_back({idx, (set[idx].location - center).norm()});
      taken[idx] = 1;
      pool.erase(pool.begin() + sel);
      weight.erase(weight.begin() + sel);
    }
  }
  // Top up with nearest remaining points if rounding left a shortfall.
  if (static_cast<int>(chosen.size()) < n) {
    auto all = set.nearest(center, set.size());
    for (const auto& nb : all) {
      if (static_cast<int>(chosen.size()) >= n) break;
      if (!taken[nb.index]) {
        chosen.push_back(nb);
        taken[nb.index] = 1;
      }
    }
  }
  std::stable_sort(chosen.begin(), chosen.end(), [](const auto& a, const auto& b) {
    return a.distance < b.distance;
  });
  return chosen;
}

}  // namespace lamcmc
