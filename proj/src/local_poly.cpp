#include "lamcmc/local_poly.hpp"

#include <cmath>
#include <stdexcept>

namespace lamcmc {

namespace {

// Fills one row of the basis matrix for the scaled coordinate theta_hat.
// Column order: 1, theta_1..theta_d, (1/2)theta_1^2..(1/2)theta_d^2,
// then cross terms theta_i*theta_j for i<j in lexicographic order.
Eigen::RowVectorXd basis_row(const Vector& theta_hat, PolyOrder order) {
  const int d = static_cast<int>(theta_hat.size());
  Eigen::RowVectorXd row(basis_size(d, order));
  row[0] = 1.0;
  row.segment(1, d) = theta_hat.transpose();
  if (order == PolyOrder::kQuadratic) {
    for (int i = 0; i < d; ++i) row[1 + d + i] = 0.5 * theta_hat[i] * theta_hat[i];
    int c = 1 + 2 * d;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) row[c++] = theta_hat[i] * theta_hat[j];
  }
  return row;
}

struct Design {
  Matrix phi;      // N x M basis rows (scaled coordinates)
  Matrix outputs;  // N x n
  Vector weights;  // tricube weights per row
  double radius;   // scaling radius (distance of farthest neighbor)
};

Design build_design(const SampleSet& set, const std::vector<SampleSet::Neighbor>& neighbors,
                    const Vector& center, PolyOrder order) {
  const int d = set.dimension();
  const int n_rows = static_cast<int>(neighbors.size());
  const FitSpec spec = sample_counts(d, order);
  if (n_rows < spec.n_def) throw std::invalid_argument("local_poly: insufficient neighbors");

  Design dz;
  dz.radius = neighbors.back().distance;
  if (dz.radius <= 0) throw std::invalid_argument("local_poly: degenerate neighborhood radius");
  const double r_def = neighbors[spec.n_def - 1].distance;

  const int m = basis_size(d, order);
  dz.phi.resize(n_rows, m);
  dz.outputs.resize(n_rows, set.output_dim());
  dz.weights.resize(n_rows);
  for (int i = 0; i < n_rows; ++i) {
    const Sample& s = set[neighbors[i].index];
    const Vector theta_hat = (s.location - center) / dz.radius;
    dz.phi.row(i) = basis_row(theta_hat, order);
    dz.outputs.row(i) = s.values.transpose();
    dz.weights[i] = tricube_weight(neighbors[i].distance, r_def, dz.radius);
  }
  return dz;
}

// Unpacks a solved coefficient matrix (scaled coordinates) into a PolyModel
// expressed in raw coordinates, so that evaluate() consumes unscaled points.
PolyModel unpack(const Matrix& coeffs, const Vector& center, double radius, PolyOrder order,
                 int d, int n_out) {
  PolyModel model;
  model.order = order;
  model.center = center;
  model.radius = radius;
  model.constants = coeffs.row(0).transpose();
  model.linear_terms = coeffs.middleRows(1, d).transpose() / radius;
  if (order == PolyOrder::kQuadratic) {
    model.hessians.resize(n_out);
    const double r2 = radius * radius;
    for (int j = 0; j < n_out; ++j) {
      Matrix h = Matrix::Zero(d, d);
      for (int i = 0; i < d; ++i) h(i, i) = coeffs(1 + d + i, j);
      int c = 1 + 2 * d;
      for (int i = 0; i < d; ++i)
        for (int k = i + 1; k < d; ++k) {
          h(i, k) = h(k, i) = coeffs(c++, j);
        }
      model.hessians[j] = h / r2;
    }
  }
  return model;
}

bool rank_ok(const Eigen::ColPivHouseholderQR<Matrix>& qr, int m, double tol) {
  const Matrix& qrm = qr.matrixQR();
  double largest = 0.0, smallest = 0.0;
  for (int i = 0; i < m; ++i) {
    const double v = std::abs(qrm(i, i));
    if (i == 0) largest = v;
    smallest = v;
  }
  return smallest > tol * largest;
}

}  // namespace

FitSpec sample_counts(int d, PolyOrder order, double low_d_floor) {
  if (d < 1) throw std::invalid_argument("sample_counts: d must be positive");
  FitSpec spec;
  spec.n_def = (order == PolyOrder::kLinear) ? d + 1 : (d + 1) * (d + 2) / 2;
  const double multiplier = std::max(std::sqrt(static_cast<double>(d)), low_d_floor);
  spec.n_regression = static_cast<int>(std::ceil(multiplier * spec.n_def));
  return spec;
}

int basis_size(int d, PolyOrder order) {
  return (order == PolyOrder::kLinear) ? d + 1 : (d + 1) * (d + 2) / 2;
}

double tricube_weight(double dist, double r_def, double r) {
  if (dist <= r_def) return 1.0;
  if (dist > r) return 0.0;
  if (r == r_def) return 1.0;  // degenerate plateau, dist <= r here
  const double s = (dist - r_def) / (r - r_def);
  const double t = 1.0 - s * s * s;
  return t * t * t;
}

Vector PolyModel::evaluate(const Vector& point) const {
  const Vector delta = point - center;
  Vector out = constants + linear_terms * delta;
  if (order == PolyOrder::kQuadratic) {
    for (int j = 0; j < out.size(); ++j) out[j] += 0.5 * delta.dot(hessians[j] * delta);
  }
  return out;
}

std::optional<PolyModel> fit(const SampleSet& set, const std::vector<SampleSet::Neighbor>& neighbors,
                             const Vector& center, PolyOrder order, std::optional<int> omit_index,
                             double rank_tolerance) {
  const Design dz = build_design(set, neighbors, center, order);
  const int n_rows = static_cast<int>(neighbors.size());
  const int m = static_cast<int>(dz.phi.cols());

  int kept = n_rows;
  if (omit_index) {
    if (*omit_index < 0 || *omit_index >= n_rows)
      throw std::invalid_argument("fit: omit_index out of range");
    kept = n_rows - 1;
    if (kept < sample_counts(set.dimension(), order).n_def)
      throw std::invalid_argument("fit: too few neighbors after omission");
  }

  Matrix a(kept, m);
  Matrix b(kept, set.output_dim());
  int r = 0;
  for (int i = 0; i < n_rows; ++i) {
    if (omit_index && i == *omit_index) continue;
    const double sw = std::sqrt(dz.weights[i]);
    a.row(r) = sw * dz.phi.row(i);
    b.row(r) = sw * dz.outputs.row(i);
    ++r;
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  if (!rank_ok(qr, m, rank_tolerance)) return std::nullopt;
  const Matrix coeffs = qr.solve(b);
  return unpack(coeffs, center, dz.radius, order, set.dimension(), set.output_dim());
}

std::optional<LooCenterValues> loo_center_values(const SampleSet& set,
                                                 const std::vector<SampleSet::Neighbor>& neighbors,
                                                 const Vector& center, PolyOrder order,
                                                 double rank_tolerance) {
  const Design dz = build_design(set, neighbors, center, order);
  const int n_rows = static_cast<int>(neighbors.size());
  const int m = static_cast<int>(dz.phi.cols());
  const int n_out = set.output_dim();

  Matrix a(n_rows, m);
  Matrix b(n_rows, n_out);
  for (int i = 0; i < n_rows; ++i) {
    const double sw = std::sqrt(dz.weights[i]);
    a.row(i) = sw * dz.phi.row(i);
    b.row(i) = sw * dz.outputs.row(i);
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  if (!rank_ok(qr, m, rank_tolerance)) return std::nullopt;
  const Matrix coeffs = qr.solve(b);  // M x n, scaled coordinates

  LooCenterValues out;
  out.nominal = coeffs.row(0).transpose();
  out.leave_one_out.resize(n_rows, n_out);

  // Normal matrix A = Phi^T W Phi factors through the pivoted QR as
  // A = P R^T R P^T. Downdating row j is a rank-one update of A, so the
  // j-deleted solution follows from Sherman-Morrison; only its first
  // component (the value at the center) is needed.
  const Matrix r_upper = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  const auto perm = qr.colsPermutation();
  const Matrix phi_perm = (dz.phi * perm).transpose();  // M x N
  const Matrix g = r_upper.transpose().triangularView<Eigen::Lower>().solve(phi_perm);

  Vector e1 = Vector::Zero(m);
  e1[0] = 1.0;
  const Vector e1_perm = perm.transpose() * e1;
  const Vector u = r_upper.transpose().triangularView<Eigen::Lower>().solve(e1_perm);

  const Matrix residuals = dz.outputs - dz.phi * coeffs;  // N x n (unweighted)
  for (int j = 0; j < n_rows; ++j) {
    const double w = dz.weights[j];
    if (w == 0.0) {
      out.leave_one_out.row(j) = out.nominal.transpose();
      continue;
    }
    const double h = w * g.col(j).squaredNorm();
    if (1.0 - h < 1e-8) {
      // Near-interpolating row; the identity is ill-conditioned, refit.
      const auto refit = fit(set, neighbors, center, order, j, rank_tolerance);
      if (!refit) return std::nullopt;
      out.leave_one_out.row(j) = refit->constants.transpose();
      continue;
    }
    const double c = u.dot(g.col(j));
    out.leave_one_out.row(j) =
        out.nominal.transpose() - (c * w / (1.0 - h)) * residuals.row(j);
  }
  return out;
}

}  // namespace lamcmc
