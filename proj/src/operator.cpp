#include "fdblowup/operator.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <ostream>

#include "fdblowup/errors.hpp"
#include "fdblowup/io_format.hpp"
#include "fdblowup/summation.hpp"

namespace fdblowup {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

long inf_norm(std::span<const long> a) {
  long m = 0;
  for (long x : a) m = std::max(m, std::abs(x));
  return m;
}

/// Smallest m >= n whose only prime factors are 2, 3, 5, 7.
int smooth_size(long n) {
  for (long m = std::max(n, 1L);; ++m) {
    long r = m;
    for (long p : {2L, 3L, 5L, 7L})
      while (r % p == 0) r /= p;
    if (r == 1) return static_cast<int>(m);
  }
}

/// Nonzero weights as (physical offset, weight) for symbol sums.
struct SymbolTerms {
  std::vector<double> coords;  // dim values per term
  std::vector<double> weights;
  int dim = 1;
  double h = 1.0;
  double tail_mass = 0.0;

  explicit SymbolTerms(const WeightKernel& k) : dim(k.dim()), h(k.h()), tail_mass(k.tail_mass()) {
    const auto table = k.table();
    const auto& box = k.table_box();
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (table[i] == 0.0) continue;
      for (long a : box.index(i)) coords.push_back(h * static_cast<double>(a));
      weights.push_back(table[i]);
    }
  }

  void check(std::span<const double> xi) const {
    if (static_cast<int>(xi.size()) != dim) throw DomainError("frequency dimension mismatch");
    const double edge = std::numbers::pi / h * (1.0 + 1e-12);
    for (double x : xi)
      if (!(std::abs(x) <= edge)) throw DomainError("frequency sample outside the Brillouin cell");
  }

  [[nodiscard]] double eval(std::span<const double> xi) const {
    if (std::all_of(xi.begin(), xi.end(), [](double x) { return x == 0.0; })) return 0.0;
    CompensatedSum acc;
    for (std::size_t t = 0; t < weights.size(); ++t) {
      double phase = 0.0;
      for (int i = 0; i < dim; ++i) phase += xi[i] * coords[t * dim + i];
      const double sn = std::sin(0.5 * phase);
      acc.add(weights[t] * 2.0 * sn * sn);
    }
    return -acc.value() - tail_mass;
  }
};

}  // namespace

struct LatticeOperator::FftState {
  std::vector<int> dims;
  std::size_t real_size = 1;
  std::size_t complex_size = 1;
  double* real = nullptr;
  fftw_complex* spectrum = nullptr;
  std::vector<std::complex<double>> kernel_hat;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  ~FftState() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
    fftw_free(real);
    fftw_free(spectrum);
  }
};

LatticeOperator::LatticeOperator(const WeightKernel& kernel, const LatticeBox& box, ApplyPath path)
    : box_(box), path_(path), reach_(std::min(kernel.cutoff_radius(), 2 * box.radius())),
      l1_(kernel.l1_norm()) {
  if (kernel.dim() != box.dim()) throw DomainError("kernel and box dimensions differ");
  for (auto& e : kernel.stencil(reach_)) {
    offsets_.push_back(std::move(e.offset));
    weights_.push_back(e.weight);
  }
  if (path_ == ApplyPath::Auto) path_ = offsets_.size() <= 64 ? ApplyPath::Direct : ApplyPath::FFT;
  scratch_.resize(box_.size());
  if (path_ != ApplyPath::FFT) return;

  const int n = box_.dim();
  fft_ = std::make_unique<FftState>();
  for (int i = 0; i < n; ++i) fft_->dims.push_back(smooth_size(box_.side() + reach_));
  for (int i = 0; i < n; ++i) fft_->real_size *= static_cast<std::size_t>(fft_->dims[i]);
  for (int i = 0; i + 1 < n; ++i) fft_->complex_size *= static_cast<std::size_t>(fft_->dims[i]);
  fft_->complex_size *= static_cast<std::size_t>(fft_->dims[n - 1] / 2 + 1);
  {
    std::lock_guard lock(planner_mutex());
    fft_->real = fftw_alloc_real(fft_->real_size);
    fft_->spectrum = fftw_alloc_complex(fft_->complex_size);
    fft_->forward = fftw_plan_dft_r2c(n, fft_->dims.data(), fft_->real, fft_->spectrum, FFTW_ESTIMATE);
    fft_->backward = fftw_plan_dft_c2r(n, fft_->dims.data(), fft_->spectrum, fft_->real, FFTW_ESTIMATE);
  }
  if (!fft_->forward || !fft_->backward) throw NumericError("FFTW planning failed");

  std::fill(fft_->real, fft_->real + fft_->real_size, 0.0);
  for (std::size_t t = 0; t < offsets_.size(); ++t) {
    std::size_t k = 0;
    for (int i = 0; i < n; ++i) {
      const long m = fft_->dims[i];
      k = k * static_cast<std::size_t>(m) + static_cast<std::size_t>(((offsets_[t][i] % m) + m) % m);
    }
    fft_->real[k] = weights_[t];
  }
  fftw_execute(fft_->forward);
  const double scale = 1.0 / static_cast<double>(fft_->real_size);
  fft_->kernel_hat.resize(fft_->complex_size);
  for (std::size_t k = 0; k < fft_->complex_size; ++k)
    fft_->kernel_hat[k] = scale * std::complex<double>(fft_->spectrum[k][0], fft_->spectrum[k][1]);
}

LatticeOperator::~LatticeOperator() = default;
LatticeOperator::LatticeOperator(LatticeOperator&&) noexcept = default;
LatticeOperator& LatticeOperator::operator=(LatticeOperator&&) noexcept = default;

void LatticeOperator::convolve_direct(std::span<const double> v, std::span<double> out) const {
  const int n = box_.dim();
  const long side = box_.side();
  std::vector<long> stride(n, 1);
  for (int i = n - 2; i >= 0; --i) stride[i] = stride[i + 1] * side;
  std::fill(out.begin(), out.end(), 0.0);

  std::vector<long> lo(n), hi(n), pos(n);
  for (std::size_t t = 0; t < offsets_.size(); ++t) {
    const auto& b = offsets_[t];
    const double w = weights_[t];
    long delta = 0;
    bool empty = false;
    for (int i = 0; i < n; ++i) {
      lo[i] = std::max(0L, -b[i]);
      hi[i] = std::min(side - 1, side - 1 - b[i]);
      empty = empty || lo[i] > hi[i];
      delta += b[i] * stride[i];
    }
    if (empty) continue;
    for (int i = 0; i < n; ++i) pos[i] = lo[i];
    while (true) {
      long base = 0;
      for (int i = 0; i + 1 < n; ++i) base += pos[i] * stride[i];
      for (long q = lo[n - 1]; q <= hi[n - 1]; ++q) out[base + q] += w * v[base + delta + q];
      int i = n - 2;
      while (i >= 0 && ++pos[i] > hi[i]) {
        pos[i] = lo[i];
        --i;
      }
      if (i < 0) break;
    }
  }
}

void LatticeOperator::convolve_fft(std::span<const double> v, std::span<double> out) {
  const int n = box_.dim();
  const long side = box_.side();
  auto& f = *fft_;
  std::fill(f.real, f.real + f.real_size, 0.0);
  // Box rows are contiguous along the last axis in both layouts.
  const std::size_t rows = box_.size() / static_cast<std::size_t>(side);
  std::vector<long> pos(n, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t k = 0;
    for (int i = 0; i + 1 < n; ++i) k = k * static_cast<std::size_t>(f.dims[i]) + static_cast<std::size_t>(pos[i]);
    k *= static_cast<std::size_t>(f.dims[n - 1]);
    std::copy_n(v.data() + r * side, side, f.real + k);
    for (int i = n - 2; i >= 0; --i) {
      if (++pos[i] < side) break;
      pos[i] = 0;
    }
  }
  fftw_execute(f.forward);
  for (std::size_t k = 0; k < f.complex_size; ++k) {
    const std::complex<double> z =
        std::complex<double>(f.spectrum[k][0], f.spectrum[k][1]) * f.kernel_hat[k];
    f.spectrum[k][0] = z.real();
    f.spectrum[k][1] = z.imag();
  }
  fftw_execute(f.backward);
  std::fill(pos.begin(), pos.end(), 0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t k = 0;
    for (int i = 0; i + 1 < n; ++i) k = k * static_cast<std::size_t>(f.dims[i]) + static_cast<std::size_t>(pos[i]);
    k *= static_cast<std::size_t>(f.dims[n - 1]);
    std::copy_n(f.real + k, side, out.data() + r * side);
    for (int i = n - 2; i >= 0; --i) {
      if (++pos[i] < side) break;
      pos[i] = 0;
    }
  }
  // Nonnegative weights on nonnegative input: rounding must not create negative values.
  if (std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; }))
    for (double& x : out) x = std::max(x, 0.0);
}

void LatticeOperator::apply(std::span<const double> u, double exterior, std::span<double> out) {
  if (u.size() != box_.size() || out.size() != box_.size())
    throw DomainError("field size does not match the operator box");
  for (std::size_t k = 0; k < u.size(); ++k) scratch_[k] = u[k] - exterior;
  if (path_ == ApplyPath::FFT) {
    convolve_fft(scratch_, out);
  } else {
    convolve_direct(scratch_, out);
  }
  for (std::size_t k = 0; k < u.size(); ++k) out[k] -= l1_ * scratch_[k];
}

ApplyResult apply(const WeightKernel& kernel, const LatticeField& field, ApplyPath path) {
  if (kernel.h() != field.h()) throw DomainError("kernel and field use different steps h");
  if (kernel.dim() != field.dim()) throw DomainError("kernel and field dimensions differ");
  LatticeOperator op(kernel, field.box(), path);
  std::vector<double> out(field.size());
  op.apply(field.values(), field.exterior_value(), out);
  bool warn = kernel.heavy_tailed() && kernel.cutoff_radius() < 2 * field.box_radius();
  warn = warn || (op.path() == ApplyPath::FFT && field.extension() == Extension::Constant &&
                  field.exterior_value() != 0.0 && kernel.heavy_tailed());
  return {LatticeField(field.h(), field.box(), Extension::Zero, std::move(out)), warn};
}

double symbol_value(const WeightKernel& kernel, std::span<const double> xi) {
  SymbolTerms terms(kernel);
  terms.check(xi);
  return terms.eval(xi);
}

FourierSymbol symbol(const WeightKernel& kernel, std::vector<Frequency> xi_samples) {
  SymbolTerms terms(kernel);
  FourierSymbol sym;
  sym.h = kernel.h();
  sym.dim = kernel.dim();
  sym.values.reserve(xi_samples.size());
  for (const auto& xi : xi_samples) {
    terms.check(xi);
    sym.values.push_back(terms.eval(xi));
  }
  sym.xi_samples = std::move(xi_samples);
  sym.tail_bound = 2.0 * kernel.tail_bound();
  if (kernel.tail_order()) {
    sym.s_hint = kernel.tail_order();
  } else if (std::isfinite(kernel.second_moment())) {
    sym.s_hint = 1.0;
  }
  const bool any_nonzero = std::any_of(sym.xi_samples.begin(), sym.xi_samples.end(), [](const Frequency& x) {
    return std::any_of(x.begin(), x.end(), [](double v) { return v != 0.0; });
  });
  if (sym.s_hint && any_nonzero) {
    const BoundReport b = symbol_bounds(sym, *sym.s_hint);
    sym.fitted_K_lower = b.K_lower;
    sym.fitted_K_upper = b.K_upper;
  }
  return sym;
}

std::vector<Frequency> axis_samples(int dim, double lo, double hi, int count, bool geometric) {
  if (count < 1) throw DomainError("sample count must be positive");
  if (geometric && !(lo > 0.0 && hi > 0.0)) throw DomainError("geometric samples need positive ends");
  std::vector<Frequency> out;
  for (int k = 0; k < count; ++k) {
    const double t = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
    Frequency xi(dim, 0.0);
    xi[0] = geometric ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t;
    out.push_back(std::move(xi));
  }
  return out;
}

BoundReport symbol_bounds(const FourierSymbol& sym, double s) {
  if (!(s > 0.0 && s <= 1.0)) throw DomainError("order s must lie in (0,1]");
  BoundReport rep;
  rep.s = s;
  std::vector<std::pair<double, double>> pts;  // (|xi|^{2s}, -m/|xi|^{2s})
  rep.K_upper = std::numeric_limits<double>::infinity();
  rep.K_lower = 0.0;
  for (std::size_t k = 0; k < sym.values.size(); ++k) {
    double r2 = 0.0;
    for (double x : sym.xi_samples[k]) r2 += x * x;
    if (r2 == 0.0) continue;
    const double r = std::pow(r2, s);
    const double q = -sym.values[k] / r;
    rep.K_upper = std::min(rep.K_upper, q);
    rep.K_lower = std::max(rep.K_lower, q);
    pts.emplace_back(r, q);
  }
  if (pts.empty()) throw DomainError("symbol_bounds needs at least one nonzero sample");
  rep.samples_used = pts.size();
  rep.s1_certified = rep.K_upper > 0.0;
  rep.s2_certified = std::isfinite(rep.K_lower) && rep.K_lower > 0.0;

  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) { return a.first == b.first; }),
            pts.end());
  const std::size_t m = std::min<std::size_t>(3, pts.size());
  // Lagrange interpolation through the m smallest radii, evaluated at r = 0.
  double limit = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double li = 1.0;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) li *= (0.0 - pts[j].first) / (pts[i].first - pts[j].first);
    limit += li * pts[i].second;
  }
  rep.limit_K = limit;
  return rep;
}

void write_symbol_csv(std::ostream& out, const FourierSymbol& sym) {
  if (sym.dim == 1) {
    out << "xi,m\n";
  } else {
    for (int i = 0; i < sym.dim; ++i) out << "xi_" << i << ',';
    out << "m\n";
  }
  for (std::size_t k = 0; k < sym.values.size(); ++k) {
    for (double x : sym.xi_samples[k]) out << format_sci(x) << ',';
    out << format_sci(sym.values[k]) << '\n';
  }
}

std::complex<double> fourier_transform(const LatticeField& phi, std::span<const double> xi) {
  if (static_cast<int>(xi.size()) != phi.dim()) throw DomainError("frequency dimension mismatch");
  std::complex<double> acc = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    if (phi[k] == 0.0) continue;
    const auto a = phi.box().index(k);
    double phase = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) phase += xi[i] * phi.h() * static_cast<double>(a[i]);
    acc += phi[k] * std::polar(1.0, -phase);
  }
  return std::pow(phi.h(), phi.dim()) * acc;
}

SpectralSolution spectral_linear_solution(const WeightKernel& kernel, const LatticeField& phi,
                                          double tau, long steps,
                                          const std::vector<LatticeIndex>& eval_nodes,
                                          int quad_points) {
  if (phi.extension() != Extension::Zero) throw DomainError("spectral solution needs a Zero-extended datum");
  if (kernel.h() != phi.h() || kernel.dim() != phi.dim()) throw DomainError("kernel and datum grids differ");
  if (quad_points < 16) throw DomainError("spectral quadrature needs at least 16 points per axis");
  if (steps < 0) throw DomainError("step count must be nonnegative");
  if (!(tau > 0.0) || tau > cfl_tau_max(kernel) * (1.0 + 1e-12))
    throw DomainError("time step violates the CFL bound");

  const SymbolTerms terms(kernel);
  const int n = kernel.dim();
  const double h = kernel.h();

  std::vector<double> src_x, src_v;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    if (phi[k] == 0.0) continue;
    for (double x : phi.coordinate(k)) src_x.push_back(x);
    src_v.push_back(phi[k]);
  }
  std::vector<double> dst_x;
  for (const auto& a : eval_nodes) {
    if (static_cast<int>(a.size()) != n) throw DomainError("evaluation node dimension mismatch");
    for (long ai : a) dst_x.push_back(h * static_cast<double>(ai));
  }

  std::vector<std::complex<double>> acc(eval_nodes.size(), 0.0);
  std::vector<int> idx(n, 0);
  Frequency xi(n);
  const double dxi = 2.0 * std::numbers::pi / (h * quad_points);
  const double cell = std::pow(h, n);
  while (true) {
    for (int i = 0; i < n; ++i) xi[i] = -std::numbers::pi / h + dxi * idx[i];
    const double g = std::pow(1.0 + tau * terms.eval(xi), static_cast<double>(steps));
    std::complex<double> F = 0.0;
    for (std::size_t k = 0; k < src_v.size(); ++k) {
      double phase = 0.0;
      for (int i = 0; i < n; ++i) phase += xi[i] * src_x[k * n + i];
      F += src_v[k] * std::polar(1.0, -phase);
    }
    const std::complex<double> gF = g * cell * F;
    for (std::size_t e = 0; e < acc.size(); ++e) {
      double phase = 0.0;
      for (int i = 0; i < n; ++i) phase += xi[i] * dst_x[e * n + i];
      acc[e] += gF * std::polar(1.0, phase);
    }
    int i = n - 1;
    while (i >= 0 && ++idx[i] == quad_points) idx[i--] = 0;
    if (i < 0) break;
  }
  const double weight = std::pow(h * quad_points, -n);
  SpectralSolution out;
  out.values.reserve(acc.size());
  for (const auto& z : acc) {
    out.values.push_back(weight * z.real());
    out.imag_residue = std::max(out.imag_residue, weight * std::abs(z.imag()));
  }
  if (out.imag_residue > 1e-10)
    throw NumericError("spectral quadrature left an imaginary residue of " + format_sci(out.imag_residue));
  return out;
}

namespace {

double gaussian_bump(std::span<const double> x) {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return std::exp(-r2);
}

std::vector<double> apply_on(const WeightKernel& k, const LatticeField& f) {
  LatticeOperator op(k, f.box());
  std::vector<double> out(f.size());
  op.apply(f.values(), f.exterior_value(), out);
  return out;
}

}  // namespace

double consistency_error(const WeightKernel& kernel, ConsistencyCase test_case, double h) {
  if (!(h > 0.0)) throw DomainError("lattice step h must be positive");
  const int n = kernel.dim();
  const KernelSpec& spec = kernel.spec();

  if (test_case == ConsistencyCase::Affine) {
    const WeightKernel k = kernel.rebuilt(h, kernel.cutoff_radius());
    const long reach = k.support_radius();
    const LatticeBox box(n, reach + 4);
    const auto f = restrict_function(
        [](std::span<const double> x) {
          double v = 1.0;
          for (double xi : x) v += 0.5 * xi;
          return v;
        },
        h, box, Extension::Constant, 1.0);
    const auto lf = apply_on(k, f);
    double err = 0.0;
    for (std::size_t i = 0; i < box.size(); ++i)
      if (inf_norm(box.index(i)) + reach <= box.radius()) err = std::max(err, std::abs(lf[i]));
    return err;
  }

  const long a = static_cast<long>(std::ceil(8.0 / h));
  const LatticeBox box(n, a);
  const WeightKernel k = kernel.rebuilt(h, default_cutoff(spec, h, a));
  const auto f = restrict_function(gaussian_bump, h, box, Extension::Zero);
  const auto lf = apply_on(k, f);

  double err = 0.0;
  if (test_case == ConsistencyCase::GaussianLaplacian) {
    for (std::size_t i = 0; i < box.size(); ++i) {
      const auto x = f.coordinate(i);
      double r2 = 0.0;
      for (double v : x) r2 += v * v;
      const double lap = (4.0 * r2 - 2.0 * n) * std::exp(-r2);
      err = std::max(err, std::abs(lap - lf[i]));
    }
    return err;
  }

  const double hf = h / 4.0;
  const LatticeBox fine_box(n, 4 * a);
  const WeightKernel kf = kernel.rebuilt(hf, default_cutoff(spec, hf, 4 * a));
  const auto ff = restrict_function(gaussian_bump, hf, fine_box, Extension::Zero);
  const auto lff = apply_on(kf, ff);
  for (std::size_t i = 0; i < box.size(); ++i) {
    LatticeIndex alpha = box.index(i);
    double r2 = 0.0;
    for (long ai : alpha) r2 += h * h * static_cast<double>(ai * ai);
    if (r2 > 16.0) continue;
    for (long& ai : alpha) ai *= 4;
    err = std::max(err, std::abs(lf[i] - lff[fine_box.flat(alpha)]));
  }
  return err;
}

}  // namespace fdblowup
