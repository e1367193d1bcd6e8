#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

namespace lamcmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// One evaluated point: a parameter-space location and the model outputs there
// (or the 1-vector holding the log-target value when the log-posterior itself
// is the approximation target).
struct Sample {
  Vector location;
  Vector values;
};

// The growing set of true-model evaluations. All local approximations are
// built from metric queries against this set. Locations closer than the
// dedup tolerance are treated as identical and rejected on insert, which
// keeps the regression systems nonsingular.
//
// Storage is a flat array with linear-scan queries; sets stay in the
// thousands and d <= ~10, so exact scans are cheap and trivially
// deterministic. Queries break distance ties by insertion order.
class SampleSet {
 public:
  SampleSet(int dimension, int output_dim, double dedup_tolerance = 1e-10);

  int dimension() const { return dimension_; }
  int output_dim() const { return output_dim_; }
  int size() const { return static_cast<int>(samples_.size()); }
  double dedup_tolerance() const { return dedup_tolerance_; }
  const Sample& operator[](int i) const { return samples_[i]; }

  // Monotonically increasing revision counter; bumps on every successful
  // insert. Lets callers cache fitted models keyed on set contents.
  std::uint64_t version() const { return version_; }

  // Appends s unless an existing location lies within the dedup tolerance.
  // Returns true when the sample was actually stored.
  bool insert(const Sample& s);

  struct Neighbor {
    int index;        // position in the set
    double distance;  // Euclidean distance to the query center
  };

  // The k nearest samples, sorted by increasing distance (ties by insertion
  // order). Throws std::invalid_argument if k exceeds the set size; callers
  // treat that as "seed or refine first". Also reports the k-th distance,
  // the ball radius R of the paper's neighborhoods.
  std::vector<Neighbor> nearest(const Vector& center, int k, double* radius = nullptr) const;

  // All samples with distance <= radius, sorted by distance.
  std::vector<Neighbor> within_ball(const Vector& center, double radius) const;

  // Distance from `point` to the closest stored location, restricted to the
  // candidate indices (the maximin refinement objective). Empty candidate
  // list yields +infinity.
  double min_distance(const Vector& point, const std::vector<Neighbor>& candidates) const;

  // CSV round-trip: columns index, theta_1..theta_d, f_1..f_n.
  void write_csv(std::ostream& os) const;
  static SampleSet read_csv(std::istream& is, double dedup_tolerance = 1e-10);

 private:
  int dimension_;
  int output_dim_;
  double dedup_tolerance_;
  std::uint64_t version_ = 0;
  std::vector<Sample> samples_;
};

}  // namespace lamcmc
