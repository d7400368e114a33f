#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <vector>

#include "fdblowup/lattice.hpp"
#include "fdblowup/weights.hpp"

namespace fdblowup {

/// Dirichlet problem -L_h phi = lambda phi on the nodes of a bounded domain, phi = 0 elsewhere.
class DirichletProblem {
 public:
  /// Nodes x_alpha with |x_alpha| < R (open ball).
  static DirichletProblem ball(const WeightKernel& kernel, double radius);
  /// Explicit node list; throws DomainError when empty, repeated or of the wrong dimension.
  static DirichletProblem from_nodes(const WeightKernel& kernel, std::vector<LatticeIndex> nodes);

  [[nodiscard]] const WeightKernel& kernel() const { return kernel_; }
  [[nodiscard]] const std::vector<LatticeIndex>& nodes() const { return nodes_; }
  [[nodiscard]] std::optional<double> radius() const { return radius_; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

 private:
  DirichletProblem(WeightKernel kernel, std::vector<LatticeIndex> nodes, std::optional<double> radius);

  WeightKernel kernel_;
  std::vector<LatticeIndex> nodes_;
  std::optional<double> radius_;
};

inline constexpr std::size_t kDefaultMatrixCap = 20000;

/// M_ii = l1_norm, M_ij = -omega(alpha_i - alpha_j). Throws DomainError above the cap.
Eigen::MatrixXd assemble_dirichlet_matrix(const DirichletProblem& problem,
                                          std::size_t size_cap = kDefaultMatrixCap);

struct EigenPair {
  double lambda = 0.0;
  Eigen::VectorXd vector;   ///< sign-normalized (nonnegative sum), unit l2 norm
  double residual = 0.0;    ///< sup |M v - lambda v|
  double gap = 0.0;         ///< lambda_2 - lambda_1 from a deflated iteration
  bool simple = true;       ///< false when gap < tol
  bool rayleigh_ok = true;  ///< lambda <= v'Mv/v'v for the random probes
  long iterations = 0;
};

/// Inverse iteration (shift 0, LDLT) on a symmetric positive definite matrix.
/// Throws NumericError when the residual does not reach tol within the iteration cap.
EigenPair smallest_eigenpair(const Eigen::MatrixXd& m, double tol = 1e-12, long max_iterations = 100000);

/// The k lowest eigenvalues by orthogonal inverse iteration with a Rayleigh-Ritz step.
std::vector<double> lowest_eigenvalues(const Eigen::MatrixXd& m, int k, double tol = 1e-13,
                                       long max_iterations = 100000);

enum class Normalization { L1, L2 };

struct EigenResult {
  double lambda = 0.0;
  LatticeField eigenfunction;  ///< zero outside the domain
  std::vector<LatticeIndex> nodes;
  double residual = 0.0;
  Normalization normalization = Normalization::L1;
  double gap = 0.0;
  bool simple = true;
  bool rayleigh_ok = true;
  long iterations = 0;
};

/// L1: h^N sum phi = 1. L2: h^N sum phi^2 = 1.
EigenResult solve(const DirichletProblem& problem, Normalization normalization = Normalization::L1,
                  double tol = 1e-12, std::size_t size_cap = kDefaultMatrixCap);

struct ScalingRow {
  double R = 0.0;
  double lambda = 0.0;
  double product = 0.0;  ///< lambda R^{2s}
  double residual = 0.0;
};

struct ScalingStudy {
  double s = 1.0;
  std::vector<ScalingRow> rows;
  bool bounded = false;              ///< consecutive product ratios within [0.3, 2]
  bool strictly_decreasing = false;  ///< lambda strictly decreasing in R
};

/// Throws DomainError unless R_list is strictly increasing and s lies in (0,1].
ScalingStudy scaling_study(const WeightKernel& kernel, const std::vector<double>& R_list, double s,
                           std::size_t size_cap = kDefaultMatrixCap);

struct ShapeReport {
  bool positive_interior = false;
  bool max_at_center = false;
  bool radially_nonincreasing = false;
  double renormalized_center_value = 0.0;  ///< phi(0) / sup phi
};

ShapeReport eigen_shape_checks(const EigenResult& result);

/// phi(alpha) / sup phi at the requested nodes (0 outside the domain).
std::vector<double> renormalized_profile(const EigenResult& result, const std::vector<LatticeIndex>& nodes);

/// Rows R, lambda, lambda_R2s, residual.
void write_scaling_csv(std::ostream& out, const ScalingStudy& study);

}  // namespace fdblowup
