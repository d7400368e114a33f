#include "fdblowup/lattice.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "fdblowup/errors.hpp"
#include "fdblowup/io_format.hpp"
#include "fdblowup/summation.hpp"

namespace fdblowup {

namespace {

std::string format_index(std::span<const long> alpha) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (i) os << ',';
    os << alpha[i];
  }
  os << ')';
  return os.str();
}

constexpr std::array<char, 4> kMagic = {'F', 'D', 'B', 'L'};
constexpr std::uint32_t kSnapshotVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DomainError("truncated lattice snapshot");
  return v;
}

}  // namespace

LatticeBox::LatticeBox(int dim, long radius) : dim_(dim), radius_(radius), size_(1) {
  if (dim < 1) throw DomainError("lattice dimension must be >= 1");
  if (radius < 1) throw DomainError("box radius must be >= 1");
  for (int i = 0; i < dim; ++i) size_ *= static_cast<std::size_t>(side());
}

bool LatticeBox::contains(std::span<const long> alpha) const {
  return std::all_of(alpha.begin(), alpha.end(),
                     [this](long a) { return a >= -radius_ && a <= radius_; });
}

std::size_t LatticeBox::flat(std::span<const long> alpha) const {
  std::size_t k = 0;
  for (int i = 0; i < dim_; ++i) k = k * side() + static_cast<std::size_t>(alpha[i] + radius_);
  return k;
}

LatticeIndex LatticeBox::index(std::size_t flat) const {
  LatticeIndex alpha(dim_);
  for (int i = dim_ - 1; i >= 0; --i) {
    alpha[i] = static_cast<long>(flat % side()) - radius_;
    flat /= side();
  }
  return alpha;
}

LatticeField::LatticeField(double h, LatticeBox box, Extension extension,
                           std::vector<double> values, double exterior_value)
    : h_(h), box_(box), extension_(extension), exterior_(exterior_value),
      values_(std::move(values)) {
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("lattice step h must be positive");
  if (values_.size() != box_.size()) throw DomainError("value count does not match the box");
  if (extension_ == Extension::Zero && exterior_ != 0.0)
    throw DomainError("zero extension with nonzero exterior value");
  if (!std::isfinite(exterior_)) throw DomainError("exterior value must be finite");
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k]))
      throw DomainError("non-finite value at node " + format_index(box_.index(k)));
  }
}

LatticeField LatticeField::zeros(double h, LatticeBox box, Extension extension,
                                 double exterior_value) {
  return {h, box, extension, std::vector<double>(box.size(), 0.0), exterior_value};
}

double LatticeField::at(std::span<const long> alpha) const {
  if (static_cast<int>(alpha.size()) != dim()) throw DomainError("index dimension mismatch");
  return box_.contains(alpha) ? values_[box_.flat(alpha)] : exterior_;
}

std::vector<double> LatticeField::coordinate(std::size_t flat) const {
  const LatticeIndex alpha = box_.index(flat);
  std::vector<double> x(alpha.size());
  std::transform(alpha.begin(), alpha.end(), x.begin(),
                 [this](long a) { return h_ * static_cast<double>(a); });
  return x;
}

LatticeField LatticeField::with_values(std::vector<double> values) const {
  return {h_, box_, extension_, std::move(values), exterior_};
}

LatticeField LatticeField::scaled(double c) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= c;
  return {h_, box_, extension_, std::move(v), exterior_ * c};
}

LatticeField restrict_function(const SpatialFunction& f, double h, LatticeBox box,
                               Extension extension, double exterior_value) {
  if (!(h > 0.0)) throw DomainError("lattice step h must be positive");
  std::vector<double> values(box.size());
  std::vector<double> x(box.dim());
  for (std::size_t k = 0; k < box.size(); ++k) {
    const LatticeIndex alpha = box.index(k);
    for (int i = 0; i < box.dim(); ++i) x[i] = h * static_cast<double>(alpha[i]);
    const double v = f(x);
    if (!std::isfinite(v))
      throw DomainError("function is not finite at node " + format_index(alpha));
    values[k] = v;
  }
  return {h, box, extension, std::move(values), exterior_value};
}

double norm(const LatticeField& field, NormKind kind) {
  if (std::holds_alternative<SupNorm>(kind)) {
    double m = std::abs(field.exterior_value());
    for (double v : field.values()) m = std::max(m, std::abs(v));
    return m;
  }
  const double p = std::get<LpNorm>(kind).p;
  if (!(p >= 1.0)) throw DomainError("Lp norm needs p >= 1");
  if (field.extension() == Extension::Constant && field.exterior_value() != 0.0)
    throw DomainError("Lp norm of a field with nonzero constant exterior is infinite");
  const double cell = std::pow(field.h(), field.dim());
  CompensatedSum acc;
  if (p == 1.0) {
    for (double v : field.values()) acc.add(std::abs(v));
    return cell * acc.value();
  }
  if (p == 2.0) {
    for (double v : field.values()) acc.add(v * v);
    return std::sqrt(cell * acc.value());
  }
  for (double v : field.values()) acc.add(std::pow(std::abs(v), p));
  return std::pow(cell * acc.value(), 1.0 / p);
}

double lattice_mass(const LatticeField& field) {
  return std::pow(field.h(), field.dim()) * compensated_sum(field.values());
}

void write_csv(std::ostream& out, const LatticeField& field) {
  const int n = field.dim();
  if (n == 1) {
    out << "index,coordinate,value\n";
  } else {
    for (int i = 0; i < n; ++i) out << "index_" << i << ',';
    for (int i = 0; i < n; ++i) out << "coordinate_" << i << ',';
    out << "value\n";
  }
  for (std::size_t k = 0; k < field.size(); ++k) {
    const LatticeIndex alpha = field.box().index(k);
    for (long a : alpha) out << a << ',';
    for (long a : alpha) out << format_sci(field.h() * static_cast<double>(a)) << ',';
    out << format_sci(field[k]) << '\n';
  }
}

void write_snapshot(std::ostream& out, const LatticeField& field) {
  out.write(kMagic.data(), kMagic.size());
  put(out, kSnapshotVersion);
  put(out, field.h());
  put(out, static_cast<std::uint32_t>(field.dim()));
  put(out, static_cast<std::int64_t>(field.box_radius()));
  put(out, static_cast<std::uint8_t>(field.extension() == Extension::Zero ? 0 : 1));
  put(out, field.exterior_value());
  out.write(reinterpret_cast<const char*>(field.values().data()),
            static_cast<std::streamsize>(field.size() * sizeof(double)));
}

LatticeField read_snapshot(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DomainError("not a lattice snapshot");
  if (get<std::uint32_t>(in) != kSnapshotVersion) throw DomainError("unsupported snapshot version");
  const auto h = get<double>(in);
  const auto dim = get<std::uint32_t>(in);
  const auto radius = get<std::int64_t>(in);
  const auto ext = get<std::uint8_t>(in);
  const auto exterior = get<double>(in);
  if (ext > 1) throw DomainError("bad extension tag in snapshot");
  LatticeBox box(static_cast<int>(dim), static_cast<long>(radius));
  std::vector<double> values(box.size());
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw DomainError("truncated lattice snapshot");
  return {h, box, ext == 0 ? Extension::Zero : Extension::Constant, std::move(values), exterior};
}

double bump_datum(std::span<const double> x) {
  double r2 = 0.0;
  for (double xi : x) r2 += xi * xi;
  return 0.9 * std::max(0.0, 1.0 - r2);
}

}  // namespace fdblowup
