#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fdblowup/lattice.hpp"

namespace fdblowup {

/// Central differences: weight 1/h^2 on the 2N axis neighbours.
struct LaplacianSpec {};

/// Bare fractional kernel |y|^{-N-2s}, no normalising constant.
struct FractionalSpec {
  double s = 0.5;
};

enum class RadialProfile { Gaussian, Indicator };

/// Integrable radial profile J: Gaussian amplitude*exp(-|y|^2/width^2), or
/// Indicator amplitude*1{|y| <= width}.
struct ZeroOrderSpec {
  RadialProfile profile = RadialProfile::Gaussian;
  double amplitude = 1.0;
  double width = 1.0;
};

/// Point masses at lattice offsets (weights used as given, no h scaling).
struct DiscreteDeltaSpec {
  std::vector<LatticeIndex> offsets;
  std::vector<double> masses;
  bool symmetrize = false;  ///< add missing mirrors instead of rejecting them
};

struct MixedComponent;
struct MixedSpec {
  std::vector<MixedComponent> components;
};

using KernelSpec =
    std::variant<LaplacianSpec, FractionalSpec, ZeroOrderSpec, DiscreteDeltaSpec, MixedSpec>;

struct MixedComponent {
  double coefficient = 1.0;
  KernelSpec kernel;
};

std::string describe(const KernelSpec& spec);

/// One nonzero weight of the stencil, with its lattice offset.
struct StencilEntry {
  LatticeIndex offset;
  double weight;
};

/// The weight family omega(alpha, h) of a discrete Levy operator on hZ^N.
///
/// Weights inside the cutoff cube |alpha|_inf <= cutoff are tabulated. Sums over
/// the lattice use the table plus, for heavy-tailed families, an analytic estimate
/// of the remainder beyond the cutoff: l1_norm() = truncated_l1() + tail_mass().
class WeightKernel {
 public:
  [[nodiscard]] const KernelSpec& spec() const { return spec_; }
  [[nodiscard]] double h() const { return h_; }
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] long cutoff_radius() const { return cutoff_; }

  /// omega(alpha, h) from the family formula; valid for any alpha.
  [[nodiscard]] double weight(std::span<const long> alpha) const;

  /// Tabulated weights over the cutoff cube, flattened like a LatticeBox.
  [[nodiscard]] std::span<const double> table() const { return table_; }
  [[nodiscard]] const LatticeBox& table_box() const { return table_box_; }

  [[nodiscard]] double l1_norm() const { return truncated_l1_ + tail_mass_; }
  [[nodiscard]] double truncated_l1() const { return truncated_l1_; }
  [[nodiscard]] double tail_mass() const { return tail_mass_; }
  [[nodiscard]] double tail_bound() const { return tail_bound_; }

  /// M2(h) = sum omega(alpha,h)|x_alpha|^2; +inf when the series diverges.
  [[nodiscard]] double second_moment() const { return second_moment_; }

  /// s when the weights decay like h^N |x|^{-N-2s}; empty for light tails.
  [[nodiscard]] std::optional<double> tail_order() const { return tail_order_; }
  [[nodiscard]] bool heavy_tailed() const { return tail_order_.has_value(); }

  /// Largest |alpha|_inf carrying weight; cutoff for families with unbounded support.
  [[nodiscard]] long support_radius() const { return support_radius_; }

  /// Sum of tabulated weights with 0 < |alpha|_inf <= radius.
  [[nodiscard]] double partial_l1(long radius) const;

  /// Nonzero tabulated weights with |alpha|_inf <= radius, in table order.
  [[nodiscard]] std::vector<StencilEntry> stencil(long radius) const;

  /// Same family at another step size and cutoff.
  [[nodiscard]] WeightKernel rebuilt(double h, long cutoff_radius) const;

  friend WeightKernel build_kernel(const KernelSpec& spec, double h, int dim, long cutoff_radius);

 private:
  WeightKernel(KernelSpec spec, double h, int dim, long cutoff);

  KernelSpec spec_;
  double h_;
  int dim_;
  long cutoff_;
  LatticeBox table_box_;
  std::vector<double> table_;
  std::vector<double> shell_l1_;  // shell_l1_[r] = sum of weights with |alpha|_inf == r
  double truncated_l1_ = 0.0;
  double tail_mass_ = 0.0;
  double tail_bound_ = 0.0;
  double second_moment_ = 0.0;
  std::optional<double> tail_order_;
  long support_radius_ = 0;
};

/// Builds and tabulates a kernel. Compact families extend the cutoff to cover
/// their support. Throws DomainError for s outside (0,1), h <= 0, nonpositive
/// coefficients, negative masses, or a delta offset list lacking mirrors.
WeightKernel build_kernel(const KernelSpec& spec, double h, int dim, long cutoff_radius);

/// Cutoff used when none is configured: 4A for heavy tails, 7 widths for a Gaussian
/// profile, 1 for compact families (extended to their support by build_kernel).
long default_cutoff(const KernelSpec& spec, double h, long box_radius);

enum class Verdict { Holds, Fails, Undetermined };
std::string to_string(Verdict v);

struct TailFit {
  double s = 0.0;            ///< order from the fitted exponent -N-2s
  double exponent = 0.0;     ///< fitted log-log slope of omega against |x|
  double c_lower = 0.0;      ///< C1 in C1 h^N |x|^{-N-2s} <= omega
  double c_upper = 0.0;      ///< C2 in omega <= C2 h^N |x|^{-N-2s}
  double onset_radius = 0.0; ///< |x| from which the power law is observed
};

struct AssumptionReport {
  bool a1_symmetric_nonnegative = false;
  bool a2_axis_positive = false;
  bool a3_radially_nonincreasing = false;
  Verdict a4_power_tail = Verdict::Undetermined;
  std::optional<TailFit> a4_fit;
  Verdict a5_second_moment = Verdict::Undetermined;
  double second_moment = 0.0;
};

/// Exhaustive checks over the cutoff cube plus tail classification from the family.
AssumptionReport validate_assumptions(const WeightKernel& kernel);

/// Largest admissible base step: 1 / (4 * l1_norm). Throws DomainError for a zero norm.
double cfl_tau_max(const WeightKernel& kernel);

/// Audit table: alpha (per axis), omega. Nonzero entries only.
void write_kernel_csv(std::ostream& out, const WeightKernel& kernel);

}  // namespace fdblowup
