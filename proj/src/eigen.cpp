#include "fdblowup/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <set>

#include "fdblowup/errors.hpp"
#include "fdblowup/io_format.hpp"

namespace fdblowup {

namespace {

double sup_abs(const Eigen::MatrixXd& m) {
  return m.rowwise().lpNorm<1>().maxCoeff();
}

Eigen::LDLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.rows() != m.cols()) throw DomainError("eigen solver needs a nonempty square matrix");
  if (!m.isApprox(m.transpose(), 0.0)) throw DomainError("eigen solver needs a symmetric matrix");
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any())
    throw NumericError("Dirichlet matrix is not positive definite");
  return ldlt;
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

long squared(const LatticeIndex& a) {
  long r = 0;
  for (long x : a) r += x * x;
  return r;
}

}  // namespace

DirichletProblem::DirichletProblem(WeightKernel kernel, std::vector<LatticeIndex> nodes,
                                   std::optional<double> radius)
    : kernel_(std::move(kernel)), nodes_(std::move(nodes)), radius_(radius) {}

DirichletProblem DirichletProblem::ball(const WeightKernel& kernel, double radius) {
  if (!(radius > 0.0)) throw DomainError("ball radius must be positive");
  const double h = kernel.h();
  const long a = std::max(1L, static_cast<long>(std::ceil(radius / h)));
  const LatticeBox box(kernel.dim(), a);
  std::vector<LatticeIndex> nodes;
  for (std::size_t k = 0; k < box.size(); ++k) {
    LatticeIndex alpha = box.index(k);
    if (h * h * static_cast<double>(squared(alpha)) < radius * radius) nodes.push_back(std::move(alpha));
  }
  if (nodes.empty()) throw DomainError("ball contains no lattice node");
  return {kernel, std::move(nodes), radius};
}

DirichletProblem DirichletProblem::from_nodes(const WeightKernel& kernel, std::vector<LatticeIndex> nodes) {
  if (nodes.empty()) throw DomainError("Dirichlet problem needs at least one node");
  std::set<LatticeIndex> seen;
  for (const auto& a : nodes) {
    if (static_cast<int>(a.size()) != kernel.dim()) throw DomainError("node dimension mismatch");
    if (!seen.insert(a).second) throw DomainError("repeated node in Dirichlet problem");
  }
  return {kernel, std::move(nodes), std::nullopt};
}

Eigen::MatrixXd assemble_dirichlet_matrix(const DirichletProblem& problem, std::size_t size_cap) {
  const std::size_t n = problem.size();
  if (n > size_cap) throw DomainError("Dirichlet matrix of size " + std::to_string(n) + " exceeds the cap");
  const auto& nodes = problem.nodes();
  const auto& k = problem.kernel();
  const int dim = k.dim();
  Eigen::MatrixXd m(n, n);
  LatticeIndex diff(dim);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = k.l1_norm();
    for (std::size_t j = i + 1; j < n; ++j) {
      for (int d = 0; d < dim; ++d) diff[d] = nodes[i][d] - nodes[j][d];
      const double w = -k.weight(diff);
      m(i, j) = w;
      m(j, i) = w;
    }
  }
  return m;
}

EigenPair smallest_eigenpair(const Eigen::MatrixXd& m, double tol, long max_iterations) {
  const auto ldlt = factor(m);
  const Eigen::Index n = m.rows();
  const double scale = std::max(1.0, sup_abs(m));

  EigenPair out;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double residual = INFINITY;
  long it = 0;
  for (; it < max_iterations; ++it) {
    v = ldlt.solve(v);
    v.normalize();
    out.lambda = v.dot(m * v);
    residual = (m * v - out.lambda * v).cwiseAbs().maxCoeff();
    if (residual <= tol * scale) break;
  }
  if (!(residual <= tol * scale))
    throw NumericError("inverse iteration did not converge, last residual " + format_sci(residual));
  if (v.sum() < 0.0) v = -v;
  out.vector = v;
  out.residual = residual;
  out.iterations = it + 1;

  if (n > 1) {
    std::mt19937_64 rng(12345);
    Eigen::VectorXd w = random_vector(rng, n);
    double lambda2 = 0.0;
    for (long j = 0; j < max_iterations; ++j) {
      w -= v.dot(w) * v;
      w = ldlt.solve(w);
      w -= v.dot(w) * v;
      w.normalize();
      lambda2 = w.dot(m * w);
      if ((m * w - lambda2 * w).cwiseAbs().maxCoeff() <= tol * scale) break;
    }
    out.gap = lambda2 - out.lambda;
    out.simple = out.gap >= tol * scale;
  } else {
    out.gap = INFINITY;
    out.simple = true;
  }

  std::mt19937_64 rng(2024);
  for (int probe = 0; probe < 20; ++probe) {
    const Eigen::VectorXd x = random_vector(rng, n);
    const double q = x.dot(m * x) / x.squaredNorm();
    out.rayleigh_ok = out.rayleigh_ok && out.lambda <= q + tol * scale;
  }
  return out;
}

std::vector<double> lowest_eigenvalues(const Eigen::MatrixXd& m, int k, double tol, long max_iterations) {
  const auto ldlt = factor(m);
  const Eigen::Index n = m.rows();
  const Eigen::Index kk = std::min<Eigen::Index>(std::max(k, 1), n);
  const double scale = std::max(1.0, sup_abs(m));

  std::mt19937_64 rng(99);
  Eigen::MatrixXd v(n, kk);
  for (Eigen::Index c = 0; c < kk; ++c) v.col(c) = random_vector(rng, n);
  Eigen::VectorXd theta;
  for (long it = 0; it < max_iterations; ++it) {
    Eigen::MatrixXd w = ldlt.solve(v);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
    v = qr.householderQ() * Eigen::MatrixXd::Identity(n, kk);
    const Eigen::MatrixXd h = v.transpose() * m * v;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(0.5 * (h + h.transpose()));
    theta = ritz.eigenvalues();
    v = v * ritz.eigenvectors();
    const Eigen::MatrixXd r = m * v - v * theta.asDiagonal();
    if (r.cwiseAbs().maxCoeff() <= tol * scale) break;
  }
  return {theta.data(), theta.data() + theta.size()};
}

EigenResult solve(const DirichletProblem& problem, Normalization normalization, double tol,
                  std::size_t size_cap) {
  const Eigen::MatrixXd m = assemble_dirichlet_matrix(problem, size_cap);
  const EigenPair pair = smallest_eigenpair(m, tol);
  const auto& nodes = problem.nodes();
  const double h = problem.kernel().h();
  const int dim = problem.kernel().dim();

  long a = 1;
  for (const auto& alpha : nodes)
    for (long x : alpha) a = std::max(a, std::abs(x));
  const LatticeBox box(dim, a);
  std::vector<double> values(box.size(), 0.0);
  const double cell = std::pow(h, dim);
  double norm_value = 0.0;
  if (normalization == Normalization::L1) {
    norm_value = cell * pair.vector.sum();
  } else {
    norm_value = std::sqrt(cell * pair.vector.squaredNorm());
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) values[box.flat(nodes[i])] = pair.vector[i] / norm_value;

  return EigenResult{pair.lambda,
                     LatticeField(h, box, Extension::Zero, std::move(values)),
                     nodes,
                     pair.residual,
                     normalization,
                     pair.gap,
                     pair.simple,
                     pair.rayleigh_ok,
                     pair.iterations};
}

ScalingStudy scaling_study(const WeightKernel& kernel, const std::vector<double>& R_list, double s,
                           std::size_t size_cap) {
  if (!(s > 0.0 && s <= 1.0)) throw DomainError("scaling order s must lie in (0,1]");
  if (R_list.empty()) throw DomainError("scaling study needs at least one radius");
  for (std::size_t i = 1; i < R_list.size(); ++i)
    if (!(R_list[i] > R_list[i - 1])) throw DomainError("radii must be strictly increasing");

  ScalingStudy study;
  study.s = s;
  for (double r : R_list) {
    const EigenResult e = solve(DirichletProblem::ball(kernel, r), Normalization::L1, 1e-12, size_cap);
    study.rows.push_back({r, e.lambda, e.lambda * std::pow(r, 2.0 * s), e.residual});
  }
  study.bounded = true;
  study.strictly_decreasing = true;
  for (std::size_t i = 1; i < study.rows.size(); ++i) {
    const double ratio = study.rows[i].product / study.rows[i - 1].product;
    study.bounded = study.bounded && ratio >= 0.3 && ratio <= 2.0;
    study.strictly_decreasing = study.strictly_decreasing && study.rows[i].lambda < study.rows[i - 1].lambda;
  }
  return study;
}

ShapeReport eigen_shape_checks(const EigenResult& result) {
  ShapeReport rep;
  const auto& phi = result.eigenfunction;
  std::vector<std::pair<long, double>> by_radius;
  double sup = 0.0;
  rep.positive_interior = true;
  for (const auto& a : result.nodes) {
    const double v = phi.at(a);
    rep.positive_interior = rep.positive_interior && v > 0.0;
    sup = std::max(sup, std::abs(v));
    by_radius.emplace_back(squared(a), v);
  }
  const LatticeIndex origin(phi.dim(), 0);
  const bool has_origin = std::find(result.nodes.begin(), result.nodes.end(), origin) != result.nodes.end();
  const double center = has_origin ? phi.at(origin) : 0.0;
  const double slack = 1e-10 * sup;
  rep.max_at_center = has_origin && center >= sup - slack;
  rep.renormalized_center_value = sup > 0.0 ? center / sup : 0.0;

  std::sort(by_radius.begin(), by_radius.end());
  rep.radially_nonincreasing = true;
  double running_min = INFINITY;
  std::size_t i = 0;
  while (i < by_radius.size()) {
    std::size_t j = i;
    double lo = INFINITY, hi = -INFINITY;
    while (j < by_radius.size() && by_radius[j].first == by_radius[i].first) {
      lo = std::min(lo, by_radius[j].second);
      hi = std::max(hi, by_radius[j].second);
      ++j;
    }
    rep.radially_nonincreasing = rep.radially_nonincreasing && hi <= running_min + slack;
    running_min = std::min(running_min, lo);
    i = j;
  }
  return rep;
}

std::vector<double> renormalized_profile(const EigenResult& result, const std::vector<LatticeIndex>& nodes) {
  double sup = 0.0;
  for (double v : result.eigenfunction.values()) sup = std::max(sup, std::abs(v));
  std::vector<double> out;
  for (const auto& a : nodes) out.push_back(sup > 0.0 ? result.eigenfunction.at(a) / sup : 0.0);
  return out;
}

void write_scaling_csv(std::ostream& out, const ScalingStudy& study) {
  out << "R,lambda,lambda_R2s,residual\n";
  for (const auto& r : study.rows)
    out << format_sci(r.R) << ',' << format_sci(r.lambda) << ',' << format_sci(r.product) << ','
        << format_sci(r.residual) << '\n';
}

}  // namespace fdblowup
