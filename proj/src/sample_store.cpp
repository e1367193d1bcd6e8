#include "lamcmc/sample_store.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace lamcmc {

SampleSet::SampleSet(int dimension, int output_dim, double dedup_tolerance)
    : dimension_(dimension), output_dim_(output_dim), dedup_tolerance_(dedup_tolerance) {
  if (dimension < 1 || output_dim < 1) throw std::invalid_argument("SampleSet: dimensions must be positive");
  if (dedup_tolerance < 0) throw std::invalid_argument("SampleSet: dedup tolerance must be nonnegative");
}

bool SampleSet::insert(const Sample& s) {
  if (s.location.size() != dimension_ || s.values.size() != output_dim_)
    throw std::invalid_argument("SampleSet::insert: dimension mismatch");
  if (!s.location.allFinite() || !s.values.allFinite())
    throw std::invalid_argument("SampleSet::insert: non-finite entries");
  for (const Sample& existing : samples_) {
    if ((existing.location - s.location).norm() <= dedup_tolerance_) return false;
  }
  samples_.push_back(s);
  ++version_;
  return true;
}

std::vector<SampleSet::Neighbor> SampleSet::nearest(const Vector& center, int k, double* radius) const {
  if (center.size() != dimension_) throw std::invalid_argument("SampleSet::nearest: dimension mismatch");
  if (k < 1) throw std::invalid_argument("SampleSet::nearest: k must be positive");
  if (k > size()) throw std::invalid_argument("SampleSet::nearest: k exceeds set size");
  std::vector<Neighbor> all(samples_.size());
  for (int i = 0; i < size(); ++i) all[i] = {i, (samples_[i].location - center).norm()};
  // stable_sort keeps insertion order among exact distance ties.
  std::stable_sort(all.begin(), all.end(),
                   [](const Neighbor& a, const Neighbor& b) { return a.distance < b.distance; });
  all.resize(k);
  if (radius) *radius = all.back().distance;
  return all;
}

std::vector<SampleSet::Neighbor> SampleSet::within_ball(const Vector& center, double radius) const {
  if (center.size() != dimension_) throw std::invalid_argument("SampleSet::within_ball: dimension mismatch");
  if (radius < 0) throw std::invalid_argument("SampleSet::within_ball: radius must be nonnegative");
  std::vector<Neighbor> hits;
  for (int i = 0; i < size(); ++i) {
    const double dist = (samples_[i].location - center).norm();
    if (dist <= radius) hits.push_back({i, dist});
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const Neighbor& a, const Neighbor& b) { return a.distance < b.distance; });
  return hits;
}

double SampleSet::min_distance(const Vector& point, const std::vector<Neighbor>& candidates) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Neighbor& c : candidates) {
    best = std::min(best, (samples_[c.index].location - point).norm());
  }
  return best;
}

void SampleSet::write_csv(std::ostream& os) const {
  os << "index";
  for (int j = 0; j < dimension_; ++j) os << ",theta_" << (j + 1);
  for (int j = 0; j < output_dim_; ++j) os << ",f_" << (j + 1);
  os << "\n";
  os.precision(17);
  for (int i = 0; i < size(); ++i) {
    os << i;
    for (int j = 0; j < dimension_; ++j) os << "," << samples_[i].location[j];
    for (int j = 0; j < output_dim_; ++j) os << "," << samples_[i].values[j];
    os << "\n";
  }
}

SampleSet SampleSet::read_csv(std::istream& is, double dedup_tolerance) {
  std::string header;
  if (!std::getline(is, header)) throw std::runtime_error("SampleSet::read_csv: empty input");
  int d = 0, n = 0;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (col.rfind("theta_", 0) == 0) ++d;
      if (col.rfind("f_", 0) == 0) ++n;
    }
  }
  if (d == 0 || n == 0) throw std::runtime_error("SampleSet::read_csv: malformed header");
  SampleSet set(d, n, dedup_tolerance);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');  // insertion index, implicit in row order
    Sample s{Vector(d), Vector(n)};
    for (int j = 0; j < d; ++j) {
      std::getline(ss, field, ',');
      s.location[j] = std::stod(field);
    }
    for (int j = 0; j < n; ++j) {
      std::getline(ss, field, ',');
      s.values[j] = std::stod(field);
    }
    set.insert(s);
  }
  return set;
}

}  // namespace lamcmc
