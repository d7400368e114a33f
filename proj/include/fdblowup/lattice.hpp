#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

namespace fdblowup {

/// Multi-index alpha in Z^N.
using LatticeIndex = std::vector<long>;

/// How a field is read outside its stored box.
enum class Extension { Zero, Constant };

struct SupNorm {};
struct LpNorm {
  double p = 1.0;
};
using NormKind = std::variant<SupNorm, LpNorm>;

/// The symmetric index cube [-A, A]^N, flattened row-major (last axis fastest).
class LatticeBox {
 public:
  LatticeBox(int dim, long radius);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] long radius() const { return radius_; }
  [[nodiscard]] long side() const { return 2 * radius_ + 1; }
  [[nodiscard]] std::size_t size() const { return size_; }

  [[nodiscard]] bool contains(std::span<const long> alpha) const;
  [[nodiscard]] std::size_t flat(std::span<const long> alpha) const;
  [[nodiscard]] LatticeIndex index(std::size_t flat) const;

  friend bool operator==(const LatticeBox&, const LatticeBox&) = default;

 private:
  int dim_;
  long radius_;
  std::size_t size_;
};

/// Values on hZ^N restricted to a box, with a declared exterior.
///
/// Immutable once built. With Extension::Zero the field is finitely supported;
/// with Extension::Constant every node outside the box holds exterior_value().
class LatticeField {
 public:
  LatticeField(double h, LatticeBox box, Extension extension, std::vector<double> values,
               double exterior_value = 0.0);

  static LatticeField zeros(double h, LatticeBox box, Extension extension = Extension::Zero,
                            double exterior_value = 0.0);

  [[nodiscard]] double h() const { return h_; }
  [[nodiscard]] int dim() const { return box_.dim(); }
  [[nodiscard]] long box_radius() const { return box_.radius(); }
  [[nodiscard]] const LatticeBox& box() const { return box_; }
  [[nodiscard]] Extension extension() const { return extension_; }
  [[nodiscard]] double exterior_value() const { return exterior_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }

  /// Value at any lattice node, reading the exterior outside the box.
  [[nodiscard]] double at(std::span<const long> alpha) const;
  [[nodiscard]] double operator[](std::size_t flat) const { return values_[flat]; }

  /// Physical coordinate x_alpha = h * alpha of a stored node.
  [[nodiscard]] std::vector<double> coordinate(std::size_t flat) const;

  /// Same geometry and extension, new values.
  [[nodiscard]] LatticeField with_values(std::vector<double> values) const;
  [[nodiscard]] LatticeField scaled(double c) const;

  /// Moves the value storage out; the field is left empty.
  std::vector<double> release() && { return std::move(values_); }

 private:
  double h_;
  LatticeBox box_;
  Extension extension_;
  double exterior_;
  std::vector<double> values_;
};

using SpatialFunction = std::function<double(std::span<const double>)>;

/// Samples f at x_alpha = h*alpha for every node of the box.
/// Throws DomainError naming the node when f is non-finite there.
LatticeField restrict_function(const SpatialFunction& f, double h, LatticeBox box,
                               Extension extension, double exterior_value = 0.0);

/// Sup norm or (h^N sum |u|^p)^(1/p). Summation runs in flat order, compensated.
/// Throws DomainError for an Lp norm of a field with nonzero constant exterior.
double norm(const LatticeField& field, NormKind kind);

/// h^N * sum of stored values (signed).
double lattice_mass(const LatticeField& field);

/// CSV rows: index, coordinate, value (per-axis columns when N > 1).
void write_csv(std::ostream& out, const LatticeField& field);

/// Binary snapshot: magic "FDBL", version, h, N, A, extension, exterior value, values.
/// All numbers little-endian as stored by the host (x86-64 / aarch64).
void write_snapshot(std::ostream& out, const LatticeField& field);
LatticeField read_snapshot(std::istream& in);

/// 0.9 (1 - |x|^2)_+ : the bump datum used across the experiment suite.
double bump_datum(std::span<const double> x);

}  // namespace fdblowup
