#include "fdblowup/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>

#include "fdblowup/errors.hpp"
#include "fdblowup/io_format.hpp"
#include "fdblowup/summation.hpp"

namespace fdblowup {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

long inf_norm(std::span<const long> a) {
  long m = 0;
  for (long x : a) m = std::max(m, std::abs(x));
  return m;
}

long squared_norm(std::span<const long> a) {
  long r = 0;
  for (long x : a) r += x * x;
  return r;
}

void check_spec(const KernelSpec& spec, int dim) {
  std::visit(overloaded{
                 [](const LaplacianSpec&) {},
                 [](const FractionalSpec& f) {
                   if (!(f.s > 0.0 && f.s < 1.0))
                     throw DomainError("fractional order s must lie in (0,1)");
                 },
                 [](const ZeroOrderSpec& z) {
                   if (!(z.amplitude > 0.0) || !(z.width > 0.0))
                     throw DomainError("zero-order profile needs positive amplitude and width");
                 },
                 [dim](const DiscreteDeltaSpec& d) {
                   if (d.offsets.empty() || d.offsets.size() != d.masses.size())
                     throw DomainError("discrete delta needs one mass per offset");
                   for (std::size_t i = 0; i < d.offsets.size(); ++i) {
                     if (static_cast<int>(d.offsets[i].size()) != dim)
                       throw DomainError("discrete delta offset has the wrong dimension");
                     if (inf_norm(d.offsets[i]) == 0)
                       throw DomainError("discrete delta offset at the origin");
                     if (!(d.masses[i] >= 0.0) || !std::isfinite(d.masses[i]))
                       throw DomainError("negative mass in discrete delta");
                   }
                 },
                 [dim](const MixedSpec& m) {
                   if (m.components.empty()) throw DomainError("mixed kernel without components");
                   for (const auto& c : m.components) {
                     if (!(c.coefficient > 0.0))
                       throw DomainError("mixed kernel coefficients must be positive");
                     check_spec(c.kernel, dim);
                   }
                 },
             },
             spec);
}

/// Offset -> mass with mirrors resolved. Throws on an unmatched or unequal mirror.
std::map<LatticeIndex, double> delta_masses(const DiscreteDeltaSpec& d) {
  std::map<LatticeIndex, double> m;
  for (std::size_t i = 0; i < d.offsets.size(); ++i) m[d.offsets[i]] += d.masses[i];
  std::map<LatticeIndex, double> out = m;
  for (const auto& [off, mass] : m) {
    LatticeIndex mirror(off.size());
    std::transform(off.begin(), off.end(), mirror.begin(), [](long a) { return -a; });
    auto it = m.find(mirror);
    if (it == m.end()) {
      if (!d.symmetrize) throw DomainError("asymmetric discrete delta offsets without mirror");
      out[mirror] = mass;
    } else if (it->second != mass) {
      throw DomainError("discrete delta mirror offsets carry different masses");
    }
  }
  return out;
}

double eval_weight(const KernelSpec& spec, double h, int dim, std::span<const long> a) {
  const long r2 = squared_norm(a);
  if (r2 == 0) return 0.0;
  return std::visit(
      overloaded{
          [&](const LaplacianSpec&) { return r2 == 1 ? 1.0 / (h * h) : 0.0; },
          [&](const FractionalSpec& f) {
            const double r = std::sqrt(static_cast<double>(r2));
            return std::pow(h, -2.0 * f.s) * std::pow(r, -dim - 2.0 * f.s);
          },
          [&](const ZeroOrderSpec& z) {
            const double y2 = h * h * static_cast<double>(r2);
            const double cell = std::pow(h, dim);
            if (z.profile == RadialProfile::Gaussian)
              return cell * z.amplitude * std::exp(-y2 / (z.width * z.width));
            return y2 <= z.width * z.width ? cell * z.amplitude : 0.0;
          },
          [&](const DiscreteDeltaSpec& d) {
            const auto masses = delta_masses(d);
            auto it = masses.find(LatticeIndex(a.begin(), a.end()));
            return it == masses.end() ? 0.0 : it->second;
          },
          [&](const MixedSpec& m) {
            double w = 0.0;
            for (const auto& c : m.components) w += c.coefficient * eval_weight(c.kernel, h, dim, a);
            return w;
          },
      },
      spec);
}

/// Largest |alpha|_inf with nonzero weight, when the support is bounded.
std::optional<long> compact_radius(const KernelSpec& spec, double h) {
  return std::visit(overloaded{
                        [](const LaplacianSpec&) -> std::optional<long> { return 1; },
                        [](const FractionalSpec&) -> std::optional<long> { return std::nullopt; },
                        [&](const ZeroOrderSpec& z) -> std::optional<long> {
                          if (z.profile == RadialProfile::Gaussian) return std::nullopt;
                          return static_cast<long>(std::floor(z.width / h + 1e-12));
                        },
                        [](const DiscreteDeltaSpec& d) -> std::optional<long> {
                          long r = 0;
                          for (const auto& o : d.offsets) r = std::max(r, inf_norm(o));
                          return r;
                        },
                        [&](const MixedSpec& m) -> std::optional<long> {
                          long r = 0;
                          for (const auto& c : m.components) {
                            auto cr = compact_radius(c.kernel, h);
                            if (!cr) return std::nullopt;
                            r = std::max(r, *cr);
                          }
                          return r;
                        },
                    },
                    spec);
}

std::optional<double> family_tail_order(const KernelSpec& spec) {
  return std::visit(overloaded{
                        [](const FractionalSpec& f) -> std::optional<double> { return f.s; },
                        [](const MixedSpec& m) -> std::optional<double> {
                          std::optional<double> s;
                          for (const auto& c : m.components) {
                            auto cs = family_tail_order(c.kernel);
                            if (cs) s = s ? std::min(*s, *cs) : *cs;
                          }
                          return s;
                        },
                        [](const auto&) -> std::optional<double> { return std::nullopt; },
                    },
                    spec);
}

/// sum_{k=c+1}^inf k^{-q}: explicit terms up to 64, Euler-Maclaurin beyond.
double power_tail(double q, long c) {
  const long m = std::max(c + 1, 64L);
  CompensatedSum acc;
  for (long k = m - 1; k >= c + 1; --k) acc.add(std::pow(static_cast<double>(k), -q));
  const double a = static_cast<double>(m);
  const double f = std::pow(a, -q);
  const double d1 = -q * f / a;
  const double d3 = -q * (q + 1) * (q + 2) * f / (a * a * a);
  const double d5 = -q * (q + 1) * (q + 2) * (q + 3) * (q + 4) * f / std::pow(a, 5);
  acc.add(f * a / (q - 1.0) + f / 2.0 - d1 / 12.0 + d3 / 720.0 - d5 / 30240.0);
  return acc.value();
}

/// Integral of |y|^{-N-2s} outside the cube [-1,1]^N.
double cube_exterior_constant(int dim, double s) {
  if (dim == 1) return 1.0 / s;
  using Rule = boost::math::quadrature::gauss<double, 20>;
  std::vector<double> nodes, weights;
  const auto& x = Rule::abscissa();
  const auto& w = Rule::weights();
  for (std::size_t i = 0; i < x.size(); ++i) {
    nodes.push_back(x[i]);
    weights.push_back(w[i]);
    if (x[i] != 0.0) {
      nodes.push_back(-x[i]);
      weights.push_back(w[i]);
    }
  }
  const int m = dim - 1;
  const std::size_t n = nodes.size();
  std::vector<std::size_t> idx(m, 0);
  double total = 0.0;
  while (true) {
    double r2 = 1.0, wt = 1.0;
    for (int k = 0; k < m; ++k) {
      r2 += nodes[idx[k]] * nodes[idx[k]];
      wt *= weights[idx[k]];
    }
    total += wt * std::pow(r2, -0.5 * dim - s);
    int k = 0;
    while (k < m && ++idx[k] == n) idx[k++] = 0;
    if (k == m) break;
  }
  return dim / s * total;
}

struct TailInfo {
  double mass = 0.0;
  double bound = 0.0;
};

/// Sums sum_{k in Z} (hk)^{2j} exp(-(hk)^2/w^2) for |k| <= c (or to convergence when c < 0).
double gaussian_axis_sum(double h, double w, long c, int moment) {
  CompensatedSum acc;
  const double x0 = moment == 0 ? 1.0 : 0.0;
  acc.add(x0);
  for (long k = 1; c < 0 || k <= c; ++k) {
    const double y = h * static_cast<double>(k);
    const double g = std::exp(-(y * y) / (w * w));
    if (g == 0.0) break;
    acc.add(2.0 * (moment == 0 ? g : y * y * g));
  }
  return acc.value();
}

TailInfo family_tail(const KernelSpec& spec, double h, int dim, long c) {
  return std::visit(
      overloaded{
          [&](const FractionalSpec& f) {
            TailInfo t;
            const double scale = std::pow(h, -2.0 * f.s);
            if (dim == 1) {
              t.mass = 2.0 * scale * power_tail(1.0 + 2.0 * f.s, c);
              t.bound = scale * std::pow(static_cast<double>(c), -2.0 * f.s) / f.s;
            } else {
              const double cn = cube_exterior_constant(dim, f.s);
              t.mass = scale * cn * std::pow(c + 0.5, -2.0 * f.s);
              t.bound = scale * cn * std::pow(static_cast<double>(c), -2.0 * f.s);
            }
            return t;
          },
          [&](const ZeroOrderSpec& z) {
            TailInfo t;
            if (z.profile == RadialProfile::Gaussian) {
              const double all = gaussian_axis_sum(h, z.width, -1, 0);
              const double inner = gaussian_axis_sum(h, z.width, c, 0);
              t.mass = std::pow(h, dim) * z.amplitude * (std::pow(all, dim) - std::pow(inner, dim));
              t.bound = t.mass * (1.0 + 1e-12) + std::numeric_limits<double>::denorm_min();
            }
            return t;
          },
          [&](const MixedSpec& m) {
            TailInfo t;
            for (const auto& comp : m.components) {
              const TailInfo ct = family_tail(comp.kernel, h, dim, c);
              t.mass += comp.coefficient * ct.mass;
              t.bound += comp.coefficient * ct.bound;
            }
            return t;
          },
          [](const auto&) { return TailInfo{}; },
      },
      spec);
}

double family_second_moment(const KernelSpec& spec, double h, int dim,
                            std::span<const double> table, const LatticeBox& box) {
  if (family_tail_order(spec)) return std::numeric_limits<double>::infinity();
  if (const auto* z = std::get_if<ZeroOrderSpec>(&spec);
      z != nullptr && z->profile == RadialProfile::Gaussian) {
    const double s0 = gaussian_axis_sum(h, z->width, -1, 0);
    const double s2 = gaussian_axis_sum(h, z->width, -1, 2);
    return std::pow(h, dim) * z->amplitude * dim * s2 * std::pow(s0, dim - 1);
  }
  if (const auto* m = std::get_if<MixedSpec>(&spec)) {
    double total = 0.0;
    for (const auto& c : m->components) {
      // Components are light-tailed here; recompute each from the family formula.
      std::vector<double> sub(box.size());
      for (std::size_t k = 0; k < box.size(); ++k) sub[k] = eval_weight(c.kernel, h, dim, box.index(k));
      total += c.coefficient * family_second_moment(c.kernel, h, dim, sub, box);
    }
    return total;
  }
  CompensatedSum acc;
  for (std::size_t k = 0; k < box.size(); ++k) {
    if (table[k] == 0.0) continue;
    acc.add(table[k] * h * h * static_cast<double>(squared_norm(box.index(k))));
  }
  return acc.value();
}

}  // namespace

std::string describe(const KernelSpec& spec) {
  return std::visit(overloaded{
                        [](const LaplacianSpec&) { return std::string("laplacian"); },
                        [](const FractionalSpec& f) {
                          std::ostringstream os;
                          os << "fractional(s=" << f.s << ")";
                          return os.str();
                        },
                        [](const ZeroOrderSpec& z) {
                          std::ostringstream os;
                          os << "zero_order("
                             << (z.profile == RadialProfile::Gaussian ? "gaussian" : "indicator")
                             << ", amplitude=" << z.amplitude << ", width=" << z.width << ")";
                          return os.str();
                        },
                        [](const DiscreteDeltaSpec& d) {
                          std::ostringstream os;
                          os << "discrete_delta(" << d.offsets.size() << " offsets)";
                          return os.str();
                        },
                        [](const MixedSpec& m) {
                          std::ostringstream os;
                          os << "mixed(";
                          for (std::size_t i = 0; i < m.components.size(); ++i) {
                            if (i) os << " + ";
                            os << m.components[i].coefficient << "*"
                               << describe(m.components[i].kernel);
                          }
                          os << ")";
                          return os.str();
                        },
                    },
                    spec);
}

WeightKernel::WeightKernel(KernelSpec spec, double h, int dim, long cutoff)
    : spec_(std::move(spec)), h_(h), dim_(dim), cutoff_(cutoff), table_box_(dim, cutoff) {}

double WeightKernel::weight(std::span<const long> alpha) const {
  if (static_cast<int>(alpha.size()) != dim_) throw DomainError("offset dimension mismatch");
  if (table_box_.contains(alpha)) return table_[table_box_.flat(alpha)];
  return eval_weight(spec_, h_, dim_, alpha);
}

double WeightKernel::partial_l1(long radius) const {
  radius = std::clamp(radius, 0L, cutoff_);
  CompensatedSum acc;
  for (long r = 1; r <= radius; ++r) acc.add(shell_l1_[r]);
  return acc.value();
}

std::vector<StencilEntry> WeightKernel::stencil(long radius) const {
  std::vector<StencilEntry> out;
  radius = std::min(radius, cutoff_);
  for (std::size_t k = 0; k < table_.size(); ++k) {
    if (table_[k] == 0.0) continue;
    LatticeIndex a = table_box_.index(k);
    if (inf_norm(a) <= radius) out.push_back({std::move(a), table_[k]});
  }
  return out;
}

WeightKernel WeightKernel::rebuilt(double h, long cutoff_radius) const {
  return build_kernel(spec_, h, dim_, cutoff_radius);
}

WeightKernel build_kernel(const KernelSpec& spec, double h, int dim, long cutoff_radius) {
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("lattice step h must be positive");
  if (dim < 1) throw DomainError("dimension must be >= 1");
  check_spec(spec, dim);
  if (const auto* d = std::get_if<DiscreteDeltaSpec>(&spec)) (void)delta_masses(*d);

  const auto compact = compact_radius(spec, h);
  long cutoff = std::max(cutoff_radius, 1L);
  if (compact) cutoff = std::max(cutoff, std::max(*compact, 1L));

  WeightKernel k(spec, h, dim, cutoff);
  const LatticeBox& box = k.table_box_;
  k.table_.assign(box.size(), 0.0);
  k.shell_l1_.assign(static_cast<std::size_t>(cutoff) + 1, 0.0);

  // Delta kernels are tabulated from the resolved map to avoid a lookup per node.
  if (const auto* d = std::get_if<DiscreteDeltaSpec>(&spec)) {
    for (const auto& [off, mass] : delta_masses(*d)) k.table_[box.flat(off)] = mass;
  } else {
    for (std::size_t i = 0; i < box.size(); ++i) k.table_[i] = eval_weight(spec, h, dim, box.index(i));
  }

  std::vector<CompensatedSum> shells(k.shell_l1_.size());
  long support = 0;
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (k.table_[i] == 0.0) continue;
    const long r = inf_norm(box.index(i));
    shells[r].add(k.table_[i]);
    support = std::max(support, r);
  }
  CompensatedSum total;
  for (std::size_t r = 0; r < shells.size(); ++r) {
    k.shell_l1_[r] = shells[r].value();
    total.add(k.shell_l1_[r]);
  }
  k.truncated_l1_ = total.value();
  const TailInfo tail = family_tail(spec, h, dim, cutoff);
  k.tail_mass_ = tail.mass;
  k.tail_bound_ = tail.bound;
  k.tail_order_ = family_tail_order(spec);
  k.support_radius_ = compact ? support : cutoff;
  k.second_moment_ = family_second_moment(spec, h, dim, k.table_, box);

  if (!(k.l1_norm() > 0.0) || !std::isfinite(k.l1_norm()))
    throw DomainError("kernel has zero or non-finite l1 norm: " + describe(spec));
  return k;
}

long default_cutoff(const KernelSpec& spec, double h, long box_radius) {
  return std::visit(overloaded{
                        [&](const FractionalSpec&) { return 4 * box_radius; },
                        [&](const ZeroOrderSpec& z) {
                          if (z.profile == RadialProfile::Indicator) return 1L;
                          return std::max(1L, static_cast<long>(std::ceil(7.0 * z.width / h)));
                        },
                        [&](const MixedSpec& m) {
                          long c = 1;
                          for (const auto& comp : m.components)
                            c = std::max(c, default_cutoff(comp.kernel, h, box_radius));
                          return c;
                        },
                        [](const auto&) { return 1L; },
                    },
                    spec);
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds:
      return "holds";
    case Verdict::Fails:
      return "fails";
    case Verdict::Undetermined:
      return "undetermined";
  }
  return "undetermined";
}

AssumptionReport validate_assumptions(const WeightKernel& kernel) {
  AssumptionReport rep;
  const auto& box = kernel.table_box();
  const auto table = kernel.table();
  const int n = kernel.dim();

  bool a1 = table[box.flat(LatticeIndex(n, 0))] == 0.0;
  for (std::size_t k = 0; k < table.size() && a1; ++k) {
    LatticeIndex a = box.index(k);
    for (long& x : a) x = -x;
    a1 = table[k] >= 0.0 && table[k] == table[box.flat(a)];
  }
  rep.a1_symmetric_nonnegative = a1 && kernel.l1_norm() > 0.0 && std::isfinite(kernel.l1_norm());

  rep.a2_axis_positive = true;
  for (int i = 0; i < n; ++i) {
    LatticeIndex e(n, 0);
    e[i] = 1;
    rep.a2_axis_positive = rep.a2_axis_positive && kernel.weight(e) > 0.0;
  }

  // Sort by |alpha|^2; each radius group must not exceed the minimum of all
  // strictly smaller radii, and a tie group must be constant.
  {
    std::vector<std::pair<long, double>> by_radius;
    by_radius.reserve(table.size());
    for (std::size_t k = 0; k < table.size(); ++k) {
      const long r2 = squared_norm(box.index(k));
      if (r2 > 0) by_radius.emplace_back(r2, table[k]);
    }
    std::sort(by_radius.begin(), by_radius.end());
    bool ok = true;
    double running_min = std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    while (i < by_radius.size() && ok) {
      std::size_t j = i;
      double lo = by_radius[i].second, hi = by_radius[i].second;
      while (j < by_radius.size() && by_radius[j].first == by_radius[i].first) {
        lo = std::min(lo, by_radius[j].second);
        hi = std::max(hi, by_radius[j].second);
        ++j;
      }
      ok = lo == hi && hi <= running_min;
      running_min = std::min(running_min, lo);
      i = j;
    }
    rep.a3_radially_nonincreasing = ok;
  }

  rep.second_moment = kernel.second_moment();
  if (const auto s = kernel.tail_order()) {
    rep.a5_second_moment = Verdict::Fails;
    // Log-log regression along the first axis over the outer half of the cutoff.
    const long c = kernel.cutoff_radius();
    const double expected = -n - 2.0 * *s;
    std::vector<double> lx, lw;
    TailFit fit;
    fit.c_lower = std::numeric_limits<double>::infinity();
    fit.c_upper = 0.0;
    fit.onset_radius = std::numeric_limits<double>::infinity();
    const double cell = std::pow(kernel.h(), n);
    double prev_log_x = 0.0, prev_log_w = 0.0;
    bool have_prev = false;
    for (long k = 1; k <= c; k = std::max(k + 1, static_cast<long>(k * 1.1))) {
      LatticeIndex a(n, 0);
      a[0] = k;
      const double w = kernel.weight(a);
      const double x = kernel.h() * static_cast<double>(k);
      if (w <= 0.0) {
        have_prev = false;
        continue;
      }
      const double log_x = std::log(x), log_w = std::log(w);
      if (have_prev) {
        const double local = (log_w - prev_log_w) / (log_x - prev_log_x);
        if (std::abs(local - expected) > 1e-3) fit.onset_radius = std::numeric_limits<double>::infinity();
        else if (!std::isfinite(fit.onset_radius)) fit.onset_radius = std::exp(prev_log_x);
      }
      prev_log_x = log_x;
      prev_log_w = log_w;
      have_prev = true;
      if (k >= std::max(c / 2, 1L)) {
        lx.push_back(log_x);
        lw.push_back(log_w);
      }
      const double ratio = w / (cell * std::pow(x, expected));
      if (std::isfinite(fit.onset_radius) && x >= fit.onset_radius) {
        fit.c_lower = std::min(fit.c_lower, ratio);
        fit.c_upper = std::max(fit.c_upper, ratio);
      }
    }
    if (lx.size() >= 2) {
      const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
      const double my = std::accumulate(lw.begin(), lw.end(), 0.0) / lw.size();
      double sxy = 0.0, sxx = 0.0;
      for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (lw[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
      }
      fit.exponent = sxy / sxx;
      fit.s = -(fit.exponent + n) / 2.0;
    }
    const bool ok = std::isfinite(fit.onset_radius) && fit.c_lower > 0.0 &&
                    std::isfinite(fit.c_upper) && lx.size() >= 2;
    rep.a4_power_tail = ok ? Verdict::Holds : Verdict::Undetermined;
    rep.a4_fit = fit;
  } else {
    // Compact or Gaussian-type support: the power-law lower bound cannot hold.
    rep.a4_power_tail = Verdict::Fails;
    rep.a5_second_moment = std::isfinite(kernel.second_moment()) ? Verdict::Holds : Verdict::Fails;
  }
  return rep;
}

double cfl_tau_max(const WeightKernel& kernel) {
  const double l1 = kernel.l1_norm();
  if (!(l1 > 0.0)) throw DomainError("kernel with zero l1 norm has no CFL bound");
  return 1.0 / (4.0 * l1);
}

void write_kernel_csv(std::ostream& out, const WeightKernel& kernel) {
  const int n = kernel.dim();
  if (n == 1) {
    out << "alpha,omega\n";
  } else {
    for (int i = 0; i < n; ++i) out << "alpha_" << i << ',';
    out << "omega\n";
  }
  const auto& box = kernel.table_box();
  const auto table = kernel.table();
  for (std::size_t k = 0; k < table.size(); ++k) {
    if (table[k] == 0.0) continue;
    for (long a : box.index(k)) out << a << ',';
    out << format_sci(table[k]) << '\n';
  }
}

}  // namespace fdblowup
