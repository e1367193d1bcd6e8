#include "lamcmc/harness.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace lamcmc {

namespace {

// Welford-style running mean and scatter over matrix rows.
struct RunningCov {
  long count = 0;
  Vector mean;
  Matrix scatter;

  void init(int d) {
    mean = Vector::Zero(d);
    scatter = Matrix::Zero(d, d);
  }
  void add(const Vector& x) {
    ++count;
    const Vector delta = x - mean;
    mean += delta / static_cast<double>(count);
    scatter += delta * (x - mean).transpose();
  }
  Matrix covariance() const {
    if (count < 2) return Matrix::Zero(mean.size(), mean.size());
    return scatter / static_cast<double>(count - 1);
  }
};

// Roughly `points` step indices in [1, n], geometric spacing, always
// including n, strictly increasing.
std::vector<long> geometric_grid(long n, int points) {
  std::vector<long> grid;
  if (n <= 0) return grid;
  if (points <= 0 || n <= points) {
    for (long i = 1; i <= n; ++i) grid.push_back(i);
    return grid;
  }
  const double ratio = std::pow(static_cast<double>(n), 1.0 / points);
  double value = 1.0;
  for (int i = 0; i < points; ++i) {
    value *= ratio;
    const long step = std::min(n, static_cast<long>(std::llround(value)));
    if (grid.empty() || step > grid.back()) grid.push_back(step);
  }
  if (grid.back() != n) grid.push_back(n);
  return grid;
}

}  // namespace

long burn_in_steps(long chain_length, double burn_in_fraction) {
  return static_cast<long>(std::floor(chain_length * burn_in_fraction));
}

Matrix pooled_reference(const std::vector<Matrix>& chains, double burn_in_fraction) {
  if (chains.empty()) throw std::invalid_argument("pooled_reference: no chains");
  const int d = static_cast<int>(chains.front().cols());
  RunningCov acc;
  acc.init(d);
  for (const auto& chain : chains) {
    const long skip = burn_in_steps(chain.rows(), burn_in_fraction);
    for (long i = skip; i < chain.rows(); ++i) acc.add(chain.row(i).transpose());
  }
  if (acc.count < d + 2) {
    throw std::invalid_argument("pooled_reference: too few post-burn-in samples");
  }
  return acc.covariance();
}

std::vector<ErrorTracePoint> relative_cov_error_trace(const Matrix& chain,
                                                      const Matrix& reference_cov,
                                                      double burn_in_fraction, int grid_points) {
  const long skip = burn_in_steps(chain.rows(), burn_in_fraction);
  const long n = chain.rows() - skip;
  const double ref_norm = reference_cov.norm();
  std::vector<ErrorTracePoint> trace;
  if (n <= 0 || ref_norm == 0.0) return trace;

  const auto grid = geometric_grid(n, grid_points);
  RunningCov acc;
  acc.init(static_cast<int>(chain.cols()));
  std::size_t next = 0;
  for (long i = 0; i < n && next < grid.size(); ++i) {
    acc.add(chain.row(skip + i).transpose());
    if (i + 1 == grid[next]) {
      trace.push_back({i + 1, (acc.covariance() - reference_cov).norm() / ref_norm});
      ++next;
    }
  }
  return trace;
}

std::optional<double> RefinementWindow::random_share() const {
  if (total == 0) return std::nullopt;
  return static_cast<double>(random) / static_cast<double>(total);
}

std::vector<RefinementWindow> refinement_breakdown(const std::vector<RefinementEvent>& log,
                                                   long chain_length, long window) {
  std::vector<RefinementWindow> windows;
  for (long begin = 1; begin <= chain_length; begin += window) {
    windows.push_back({begin, std::min(begin + window - 1, chain_length), 0, 0});
  }
  for (const auto& ev : log) {
    if (ev.step < 1 || ev.step > chain_length) continue;
    auto& w = windows[(ev.step - 1) / window];
    ++w.total;
    if (ev.cause == RefinementCause::kRandom) ++w.random;
  }
  return windows;
}

void write_error_trace_csv(std::ostream& os,
                           const std::vector<std::vector<ErrorTracePoint>>& traces) {
  os << "chain,step,relative_error\n";
  for (std::size_t c = 0; c < traces.size(); ++c) {
    for (const auto& p : traces[c]) os << c << ',' << p.step << ',' << p.error << '\n';
  }
}

void write_cost_trace_csv(std::ostream& os, const std::vector<std::vector<StepRecord>>& records,
                          int grid_points) {
  os << "chain,step,cumulative_model_evals\n";
  for (std::size_t c = 0; c < records.size(); ++c) {
    const auto grid = geometric_grid(static_cast<long>(records[c].size()), grid_points);
    for (long step : grid) {
      os << c << ',' << step << ',' << records[c][step - 1].cumulative_model_evals << '\n';
    }
  }
}

void write_refinements_csv(std::ostream& os,
                           const std::vector<std::vector<RefinementWindow>>& breakdowns) {
  os << "chain,window_begin,window_end,refinements,random_cause,random_share\n";
  for (std::size_t c = 0; c < breakdowns.size(); ++c) {
    for (const auto& w : breakdowns[c]) {
      os << c << ',' << w.begin << ',' << w.end << ',' << w.total << ',' << w.random << ',';
      if (auto share = w.random_share()) os << *share;
      os << '\n';
    }
  }
}

}  // namespace lamcmc
