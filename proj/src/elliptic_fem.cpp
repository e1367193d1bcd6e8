#include "lamcmc/elliptic_fem.hpp"

#include <Eigen/Sparse>
#include <cmath>

#include "lamcmc/rng.hpp"

namespace lamcmc {

namespace {

// Trapezoid weight per node: h^2 with factor 1/2 on each boundary direction.
Vector trapezoid_weights(const FemMesh& mesh) {
  const int n = mesh.nodes_per_side();
  Vector w(mesh.node_count());
  const double h2 = mesh.h() * mesh.h();
  for (int j = 0; j < n; ++j) {
    const double cj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
    for (int i = 0; i < n; ++i) {
      const double ci = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      w[mesh.node_index(i, j)] = h2 * ci * cj;
    }
  }
  return w;
}

}  // namespace

KLBasis build_kl_basis(const FemMesh& mesh, double variance, double lengthscale, int mode_count) {
  if (mode_count < 1) throw std::invalid_argument("build_kl_basis: mode_count must be positive");
  const int n = mesh.node_count();
  const Vector w = trapezoid_weights(mesh);
  const Vector sqrt_w = w.array().sqrt();

  // Symmetrized Nystrom operator B = W^{1/2} C W^{1/2}.
  Matrix b(n, n);
  const int side = mesh.nodes_per_side();
  for (int p = 0; p < n; ++p) {
    const double xp = mesh.node_x(p % side), yp = mesh.node_y(p / side);
    for (int q = p; q < n; ++q) {
      const double xq = mesh.node_x(q % side), yq = mesh.node_y(q / side);
      const double dx = xp - xq, dy = yp - yq;
      const double c = variance * std::exp(-(dx * dx + dy * dy) / (2.0 * lengthscale * lengthscale));
      b(p, q) = b(q, p) = sqrt_w[p] * c * sqrt_w[q];
    }
  }
  b.diagonal().array() += 1e-12;

  Eigen::SelfAdjointEigenSolver<Matrix> solver(b);
  if (solver.info() != Eigen::Success) throw std::runtime_error("build_kl_basis: eigensolve failed");

  KLBasis basis;
  basis.quad_weights = w;
  basis.total_trace = solver.eigenvalues().sum();
  basis.eigenvalues.resize(mode_count);
  basis.eigenfunctions.resize(n, mode_count);
  // Eigen returns ascending order; take the top modes.
  for (int m = 0; m < mode_count; ++m) {
    const int src = n - 1 - m;
    basis.eigenvalues[m] = solver.eigenvalues()[src];
    Vector phi = solver.eigenvectors().col(src).cwiseQuotient(sqrt_w);
    // Deterministic sign: first component with magnitude above threshold is positive.
    for (int i = 0; i < n; ++i) {
      if (std::abs(phi[i]) > 1e-8) {
        if (phi[i] < 0) phi = -phi;
        break;
      }
    }
    basis.eigenfunctions.col(m) = phi;
  }
  return basis;
}

Vector diffusivity_field(const Vector& theta, const KLBasis& basis) {
  if (theta.size() != basis.eigenvalues.size())
    throw std::invalid_argument("diffusivity_field: dimension mismatch");
  Vector log_k = Vector::Zero(basis.eigenfunctions.rows());
  for (int m = 0; m < theta.size(); ++m)
    log_k += theta[m] * std::sqrt(basis.eigenvalues[m]) * basis.eigenfunctions.col(m);
  return log_k.array().min(40.0).max(-40.0).exp();
}

Eigen::SparseMatrix<double> assemble_stiffness(const Vector& k_nodal, const FemMesh& mesh) {
  const int n_nodes = mesh.node_count();
  if (k_nodal.size() != n_nodes) {
    throw std::invalid_argument("assemble_stiffness: field size mismatch");
  }
  const double h = mesh.h();

  // Bilinear shape functions on the reference square [-1,1]^2, 2x2 Gauss.
  const double g = 1.0 / std::sqrt(3.0);
  const double gauss[4][2] = {{-g, -g}, {g, -g}, {g, g}, {-g, g}};
  const double corner[4][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(16 * mesh.nx * mesh.nx);
  for (int ej = 0; ej < mesh.nx; ++ej) {
    for (int ei = 0; ei < mesh.nx; ++ei) {
      const int nodes[4] = {mesh.node_index(ei, ej), mesh.node_index(ei + 1, ej),
                            mesh.node_index(ei + 1, ej + 1), mesh.node_index(ei, ej + 1)};
      double ke[4][4] = {};
      for (const auto& q : gauss) {
        double shape[4], dx[4], dy[4], k_q = 0;
        for (int a = 0; a < 4; ++a) {
          const double xa = corner[a][0], ya = corner[a][1];
          shape[a] = 0.25 * (1 + xa * q[0]) * (1 + ya * q[1]);
          // physical gradients: d/ds = (2/h) d/dxi
          dx[a] = 0.25 * xa * (1 + ya * q[1]) * 2.0 / h;
          dy[a] = 0.25 * ya * (1 + xa * q[0]) * 2.0 / h;
          k_q += shape[a] * k_nodal[nodes[a]];
        }
        const double jac = h * h / 4.0;  // quadrature weight is 1 at each point
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) ke[a][b] += k_q * (dx[a] * dx[b] + dy[a] * dy[b]) * jac;
      }
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) triplets.emplace_back(nodes[a], nodes[b], ke[a][b]);
    }
  }
  Eigen::SparseMatrix<double> stiffness(n_nodes, n_nodes);
  stiffness.setFromTriplets(triplets.begin(), triplets.end());
  return stiffness;
}

Vector fem_solve(const Vector& k_nodal, const FemMesh& mesh) {
  const int n_nodes = mesh.node_count();
  const int side = mesh.nodes_per_side();
  const Eigen::SparseMatrix<double> stiffness = assemble_stiffness(k_nodal, mesh);

  // Dirichlet data: u = s1 at the bottom edge, u = 1 - s1 at the top.
  Vector u = Vector::Zero(n_nodes);
  std::vector<char> constrained(n_nodes, 0);
  for (int i = 0; i < side; ++i) {
    u[mesh.node_index(i, 0)] = mesh.node_x(i);
    u[mesh.node_index(i, mesh.nx)] = 1.0 - mesh.node_x(i);
    constrained[mesh.node_index(i, 0)] = 1;
    constrained[mesh.node_index(i, mesh.nx)] = 1;
  }

  std::vector<int> free_of(n_nodes, -1);
  int n_free = 0;
  for (int i = 0; i < n_nodes; ++i)
    if (!constrained[i]) free_of[i] = n_free++;

  std::vector<Eigen::Triplet<double>> free_triplets;
  Vector rhs = Vector::Zero(n_free);
  for (int col = 0; col < stiffness.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(stiffness, col); it; ++it) {
      const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
      if (constrained[r]) continue;
      if (constrained[c])
        rhs[free_of[r]] -= it.value() * u[c];
      else
        free_triplets.emplace_back(free_of[r], free_of[c], it.value());
    }
  }
  Eigen::SparseMatrix<double> a_ff(n_free, n_free);
  a_ff.setFromTriplets(free_triplets.begin(), free_triplets.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a_ff);
  if (solver.info() != Eigen::Success) throw std::runtime_error("fem_solve: factorization failed");
  const Vector u_free = solver.solve(rhs);
  if (solver.info() != Eigen::Success) throw std::runtime_error("fem_solve: solve failed");

  for (int i = 0; i < n_nodes; ++i)
    if (!constrained[i]) u[i] = u_free[free_of[i]];
  return u;
}

Vector observe(const Vector& u_nodal, const FemMesh& mesh, int obs_per_side) {
  Vector out(obs_per_side * obs_per_side);
  const double h = mesh.h();
  int idx = 0;
  for (int j = 0; j < obs_per_side; ++j) {
    const double y = static_cast<double>(j) / (obs_per_side - 1);
    for (int i = 0; i < obs_per_side; ++i) {
      const double x = static_cast<double>(i) / (obs_per_side - 1);
      const int ei = std::min(static_cast<int>(x / h), mesh.nx - 1);
      const int ej = std::min(static_cast<int>(y / h), mesh.nx - 1);
      const double xi = (x - ei * h) / h;   // in [0,1] within the element
      const double eta = (y - ej * h) / h;
      const double v00 = u_nodal[mesh.node_index(ei, ej)];
      const double v10 = u_nodal[mesh.node_index(ei + 1, ej)];
      const double v11 = u_nodal[mesh.node_index(ei + 1, ej + 1)];
      const double v01 = u_nodal[mesh.node_index(ei, ej + 1)];
      out[idx++] = v00 * (1 - xi) * (1 - eta) + v10 * xi * (1 - eta) + v11 * xi * eta +
                   v01 * (1 - xi) * eta;
    }
  }
  return out;
}

EllipticForward::EllipticForward(const EllipticConfig& config)
    : mesh_(config.mesh_nx),
      basis_(build_kl_basis(mesh_, config.variance, config.lengthscale, config.modes)),
      obs_per_side_(config.obs_per_side) {}

Vector EllipticForward::operator()(const Vector& theta) const {
  return observe(fem_solve(diffusivity_field(theta, basis_), mesh_), mesh_, obs_per_side_);
}

Vector elliptic_resolve_theta_true(const EllipticConfig& config) {
  if (config.theta_true.size() > 0) return config.theta_true;
  RngStream rng = RngStream::derive(config.data_seed, "elliptic-theta-true");
  Vector theta(config.modes);
  for (int i = 0; i < theta.size(); ++i) theta[i] = rng.normal();
  return theta;
}

ProblemSpec make_elliptic_problem(const EllipticConfig& config) {
  auto forward = std::make_shared<EllipticForward>(config);

  const Vector theta_true = elliptic_resolve_theta_true(config);
  Vector data = (*forward)(theta_true);
  RngStream noise_rng = RngStream::derive(config.data_seed, "elliptic-data-noise");
  for (int i = 0; i < data.size(); ++i) data[i] += config.obs_sd * noise_rng.normal();

  GaussianNoiseModel noise{data, Vector::Constant(data.size(), config.obs_sd)};

  ProblemSpec p;
  p.name = "elliptic_pde";
  p.dimension = config.modes;
  p.output_dim = static_cast<int>(data.size());
  p.target_mode = TargetMode::kForwardModel;
  p.evaluate = [forward](const Vector& theta) { return (*forward)(theta); };
  p.log_prior = [](const Vector& theta) { return -0.5 * theta.squaredNorm(); };
  p.log_likelihood = [noise](const Vector& outputs) { return gaussian_loglike(outputs, noise); };
  return p;
}

}  // namespace lamcmc
