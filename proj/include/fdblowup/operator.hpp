#pragma once

#include <complex>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fdblowup/lattice.hpp"
#include "fdblowup/weights.hpp"

namespace fdblowup {

enum class ApplyPath { Direct, FFT, Auto };

/// L_h bound to one kernel and one box, reusable across many applications.
///
/// With v = u - c (c the exterior constant, 0 for Zero extension) the result is
///   L_h u(alpha) = sum_{0 < |beta|_inf <= reach} omega(beta) v(alpha+beta) - l1_norm * v(alpha),
/// where reach = min(cutoff, 2A) and l1_norm includes the analytic tail. Offsets
/// beyond 2A only read the exterior, where v vanishes.
///
/// Not safe for concurrent use of one instance: the FFT path owns scratch buffers.
class LatticeOperator {
 public:
  LatticeOperator(const WeightKernel& kernel, const LatticeBox& box, ApplyPath path = ApplyPath::Auto);
  ~LatticeOperator();
  LatticeOperator(LatticeOperator&&) noexcept;
  LatticeOperator& operator=(LatticeOperator&&) noexcept;
  LatticeOperator(const LatticeOperator&) = delete;
  LatticeOperator& operator=(const LatticeOperator&) = delete;

  [[nodiscard]] ApplyPath path() const { return path_; }
  [[nodiscard]] const LatticeBox& box() const { return box_; }
  [[nodiscard]] long reach() const { return reach_; }
  [[nodiscard]] double l1_norm() const { return l1_; }
  [[nodiscard]] std::size_t stencil_size() const { return offsets_.size(); }

  /// out = L_h u for stored values u with the given exterior constant.
  void apply(std::span<const double> u, double exterior, std::span<double> out);

 private:
  struct FftState;

  void convolve_direct(std::span<const double> v, std::span<double> out) const;
  void convolve_fft(std::span<const double> v, std::span<double> out);

  LatticeBox box_;
  ApplyPath path_;
  long reach_;
  double l1_;
  std::vector<LatticeIndex> offsets_;
  std::vector<double> weights_;
  std::unique_ptr<FftState> fft_;
  std::vector<double> scratch_;
};

struct ApplyResult {
  LatticeField field;             ///< L_h u on the box, Zero extension
  bool truncation_warning = false;
};

/// One-shot application. Throws DomainError for mismatched h or dimension.
/// The warning is raised for the FFT path with a nonzero constant exterior and a
/// heavy-tailed kernel, and whenever the stencil is cut short inside the box reach.
ApplyResult apply(const WeightKernel& kernel, const LatticeField& field,
                  ApplyPath path = ApplyPath::Auto);

using Frequency = std::vector<double>;

struct FourierSymbol {
  double h = 0.0;
  int dim = 1;
  std::vector<Frequency> xi_samples;
  std::vector<double> values;
  std::optional<double> s_hint;
  double tail_bound = 0.0;  ///< |m - m_exact| <= tail_bound at every sample
  double fitted_K_lower = 0.0;
  double fitted_K_upper = 0.0;
};

/// m(xi) = -sum omega(beta)(1 - cos(xi . x_beta)) over the table, minus the tail mass
/// for xi != 0. m(0) = 0 exactly. Throws DomainError outside Q_h.
double symbol_value(const WeightKernel& kernel, std::span<const double> xi);
FourierSymbol symbol(const WeightKernel& kernel, std::vector<Frequency> xi_samples);

/// count samples t*e_1, t from lo to hi (linear or geometric spacing).
std::vector<Frequency> axis_samples(int dim, double lo, double hi, int count, bool geometric = false);

struct BoundReport {
  double s = 1.0;
  double K_upper = 0.0;   ///< min of -m/|xi|^{2s}: m <= -K_upper |xi|^{2s}
  double K_lower = 0.0;   ///< max of -m/|xi|^{2s}: m >= -K_lower |xi|^{2s}
  double limit_K = 0.0;   ///< extrapolated lim_{xi->0} -m/|xi|^{2s}
  bool s1_certified = false;
  bool s2_certified = false;
  std::size_t samples_used = 0;
};

/// Throws DomainError when no nonzero sample is present or s is outside (0,1].
BoundReport symbol_bounds(const FourierSymbol& sym, double s);

void write_symbol_csv(std::ostream& out, const FourierSymbol& sym);

/// F_h[phi](xi) = h^N sum phi(x_alpha) e^{-i xi.x_alpha}.
std::complex<double> fourier_transform(const LatticeField& phi, std::span<const double> xi);

struct SpectralSolution {
  std::vector<double> values;   ///< z(x_alpha, t_j) at the requested nodes
  double imag_residue = 0.0;    ///< max |Im| of the quadrature before discarding it
};

/// z(x_alpha, t_j) = (2 pi)^{-N} int_{Q_h} (1 + tau m)^j F_h[phi] e^{i xi.x_alpha} by the
/// periodic trapezoid rule with quad_points per axis. Throws DomainError for a CFL
/// violation, quad_points < 16 or a phi without Zero extension; NumericError when the
/// imaginary residue exceeds 1e-10.
SpectralSolution spectral_linear_solution(const WeightKernel& kernel, const LatticeField& phi,
                                          double tau, long steps,
                                          const std::vector<LatticeIndex>& eval_nodes,
                                          int quad_points);

enum class ConsistencyCase { GaussianLaplacian, FineGridReference, Affine };

/// GaussianLaplacian: sup |Delta f - L_h f| for f = exp(-|x|^2).
/// FineGridReference: sup |L_h f - L_{h/4} f| over coarse nodes with |x| <= 4.
/// Affine: sup |L_h f| at nodes whose stencil stays in the box, f = 1 + sum x_i / 2.
double consistency_error(const WeightKernel& kernel, ConsistencyCase test_case, double h);

}  // namespace fdblowup
