#include "fdblowup/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <ostream>
#include <unordered_set>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "fdblowup/errors.hpp"
#include "fdblowup/io_format.hpp"
#include "fdblowup/odekit.hpp"
#include "fdblowup/summation.hpp"

namespace fdblowup {

namespace {

constexpr double kPi = std::numbers::pi;

double power(double u, double p) {
  if (p == 2.0) return u * u;
  return std::pow(u, p);
}

double sup_of(std::span<const double> u, double exterior) {
  double m = std::abs(exterior);
  for (double v : u) m = std::max(m, std::abs(v));
  return m;
}

double l1_of(std::span<const double> u, double cell) {
  CompensatedSum acc;
  for (double v : u) acc.add(std::abs(v));
  return cell * acc.value();
}

void check_cfl(const WeightKernel& kernel, double tau) {
  if (!(tau > 0.0)) throw DomainError("time step must be positive");
  if (tau > cfl_tau_max(kernel) * (1.0 + 1e-12))
    throw DomainError("time step " + format_sci(tau) + " exceeds the CFL bound " + format_sci(cfl_tau_max(kernel)));
}

void check_grid(const WeightKernel& kernel, const LatticeField& field) {
  if (kernel.h() != field.h()) throw DomainError("kernel and field use different steps h");
  if (kernel.dim() != field.dim()) throw DomainError("kernel and field dimensions differ");
}

/// u <- u + dt (L_h u + u^p) in place, exterior constant following the reaction ODE.
void update(LatticeOperator& op, std::vector<double>& u, double& exterior, std::vector<double>& lu,
            double p, double dt, bool reaction) {
  op.apply(u, exterior, lu);
  if (reaction) {
    for (std::size_t k = 0; k < u.size(); ++k) u[k] += dt * (lu[k] + power(u[k], p));
    exterior += dt * power(exterior, p);
  } else {
    for (std::size_t k = 0; k < u.size(); ++k) u[k] += dt * lu[k];
  }
}

}  // namespace

void validate(const SchemeConfig& config, const WeightKernel& kernel) {
  if (!(config.p > 1.0)) throw DomainError("reaction exponent p must exceed 1");
  check_cfl(kernel, config.tau);
  if (!(config.u_max > 1.0)) throw DomainError("blow-up threshold must exceed 1");
  if (config.global_window < 1) throw DomainError("global window must be positive");
  if (config.trace_stride < 1) throw DomainError("trace stride must be positive");
  if (config.max_steps < 0) throw DomainError("step cap must be nonnegative");
  if (!(config.horizon_time > 0.0)) throw DomainError("horizon must be positive");
}

std::string to_string(RunVerdict v) {
  switch (v) {
    case RunVerdict::BlownUp:
      return "BlownUp";
    case RunVerdict::GlobalSuspected:
      return "GlobalSuspected";
    case RunVerdict::HorizonReached:
      return "HorizonReached";
  }
  return "HorizonReached";
}

StepResult step(const WeightKernel& kernel, const LatticeField& field, double p, double tau) {
  check_grid(kernel, field);
  check_cfl(kernel, tau);
  if (!(p > 1.0)) throw DomainError("reaction exponent p must exceed 1");
  if (field.exterior_value() < 0.0 ||
      std::any_of(field.values().begin(), field.values().end(), [](double v) { return v < 0.0; }))
    throw DomainError("step needs a nonnegative field");
  const double sup = norm(field, SupNorm{});
  const double tau_j = sup > 0.0 ? tau * std::min(1.0, std::pow(sup, 1.0 - p)) : tau;
  LatticeOperator op(kernel, field.box());
  std::vector<double> u(field.values().begin(), field.values().end()), lu(u.size());
  double c = field.exterior_value();
  update(op, u, c, lu, p, tau_j, true);
  for (double v : u)
    if (!std::isfinite(v)) throw NumericError("non-finite value after the step (overflow)");
  if (!std::isfinite(c)) throw NumericError("non-finite exterior after the step (overflow)");
  return {LatticeField(field.h(), field.box(), field.extension(), std::move(u), c), tau_j};
}

LatticeField advance(const WeightKernel& kernel, const LatticeField& field, double p, double dt, bool reaction) {
  check_grid(kernel, field);
  check_cfl(kernel, dt);
  LatticeOperator op(kernel, field.box());
  std::vector<double> u(field.values().begin(), field.values().end()), lu(u.size());
  double c = field.exterior_value();
  update(op, u, c, lu, p, dt, reaction);
  return {field.h(), field.box(), field.extension(), std::move(u), c};
}

SemilinearRun run_semilinear(const WeightKernel& kernel, const LatticeField& u0, const SchemeConfig& config) {
  check_grid(kernel, u0);
  validate(config, kernel);
  if (u0.exterior_value() < 0.0 ||
      std::any_of(u0.values().begin(), u0.values().end(), [](double v) { return v < 0.0; }))
    throw DomainError("initial datum must be nonnegative");
  if (!(norm(u0, SupNorm{}) > 0.0)) throw DomainError("initial datum must be nontrivial");

  const double p = config.p;
  const double tau = config.tau;
  const double l1w = kernel.l1_norm();
  const double cell = std::pow(u0.h(), u0.dim());
  LatticeOperator op(kernel, u0.box(), config.path);
  std::vector<double> u(u0.values().begin(), u0.values().end()), lu(u.size());
  double c = u0.exterior_value();

  SemilinearRun run{{}, {}, u0};
  auto& rep = run.report;
  rep.g_tau = rate_factor(tau, p);
  CompensatedSum time;
  std::deque<double> window;
  double prev_sup = 0.0, prev_t = 0.0;
  std::optional<double> prev_eps;
  double prev_sp = 0.0;

  for (long j = 0;; ++j) {
    const double t = time.value();
    const double sup = sup_of(u, c);
    if (!std::isfinite(sup)) throw NumericError("non-finite value at step " + std::to_string(j));
    const double sp = std::pow(sup, p - 1.0);
    const double tau_j = sup > 0.0 ? tau * std::min(1.0, 1.0 / sp) : tau;
    std::optional<double> eps;
    if (sp > l1w) eps = 1.0 - l1w / sp;  // monotone in sp under rounding

    if (rep.trigger_step) {
      // 1 - eps = l1 / sup^{p-1} shrinks exactly when sup grows; rounded eps may tie at 1
      const bool ok = sup > prev_sup && sp > prev_sp && eps && prev_eps && *eps >= *prev_eps && *eps <= 1.0;
      rep.post_trigger_monotone = rep.post_trigger_monotone && ok;
    } else if (eps) {
      rep.trigger_step = j;
    }

    const bool blown = sup >= config.u_max;
    const bool horizon = !blown && (t >= config.horizon_time || j >= config.max_steps);
    const bool keep = j % config.trace_stride == 0 || blown || horizon || (rep.trigger_step && *rep.trigger_step == j);
    if (keep) run.trace.records.push_back({j, t, tau_j, sup, l1_of(u, cell), eps});

    window.push_back(sup);
    if (static_cast<long>(window.size()) > config.global_window + 1) window.pop_front();

    if (blown || horizon) {
      rep.steps = j;
      rep.T_lower = t;
      rep.final_sup = sup;
      if (blown) {
        rep.verdict = RunVerdict::BlownUp;
        rep.T_estimate = t + rep.g_tau * std::pow(sup, 1.0 - p);
        if (j > 0) rep.rate_constant = (*rep.T_estimate - prev_t) * std::pow(prev_sup, p - 1.0);
      } else {
        bool nonincreasing = static_cast<long>(window.size()) == config.global_window + 1;
        for (std::size_t k = 1; k < window.size() && nonincreasing; ++k)
          nonincreasing = window[k] <= window[k - 1];
        rep.verdict = nonincreasing ? RunVerdict::GlobalSuspected : RunVerdict::HorizonReached;
      }
      break;
    }

    update(op, u, c, lu, p, tau_j, true);
    time.add(tau_j);
    prev_sup = sup;
    prev_t = t;
    prev_eps = eps;
    prev_sp = sp;
  }
  run.final_field = LatticeField(u0.h(), u0.box(), u0.extension(), std::move(u), c);
  return run;
}

DiffusionRun run_diffusion(const WeightKernel& kernel, const LatticeField& phi, double tau, long steps,
                           const std::vector<long>& sample_steps, long trace_stride, ApplyPath path) {
  check_grid(kernel, phi);
  check_cfl(kernel, tau);
  if (phi.extension() != Extension::Zero) throw DomainError("diffusion datum must have Zero extension");
  if (steps < 0) throw DomainError("step count must be nonnegative");
  if (trace_stride < 1) throw DomainError("trace stride must be positive");

  const double cell = std::pow(phi.h(), phi.dim());
  LatticeOperator op(kernel, phi.box(), path);
  std::vector<double> z(phi.values().begin(), phi.values().end()), lz(z.size());
  double c = 0.0;
  const std::unordered_set<long> wanted(sample_steps.begin(), sample_steps.end());

  DiffusionRun run;
  run.initial_mass = lattice_mass(phi);
  CompensatedSum time;
  for (long j = 0;; ++j) {
    const double t = time.value();
    if (j % trace_stride == 0 || j == steps)
      run.trace.records.push_back({j, t, tau, sup_of(z, 0.0), l1_of(z, cell), std::nullopt});
    if (wanted.contains(j)) run.samples.emplace_back(t, LatticeField(phi.h(), phi.box(), Extension::Zero, z));
    if (j == steps) break;
    update(op, z, c, lz, 1.0, tau, false);
    time.add(tau);
  }
  run.final_mass = cell * compensated_sum(z);
  return run;
}

namespace {

void check_gamma_args(double t, double K, double s, int dim) {
  if (!(t > 0.0)) throw DomainError("heat kernel needs t > 0");
  if (!(K > 0.0)) throw DomainError("heat kernel needs K > 0");
  if (!(s > 0.0 && s <= 1.0)) throw DomainError("heat kernel order must lie in (0,1]");
  if (dim < 1) throw DomainError("dimension must be >= 1");
}

double radius_of(std::span<const double> x) {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return std::sqrt(r2);
}

}  // namespace

double gamma_s(std::span<const double> x, double t, double K, double s, int dim) {
  check_gamma_args(t, K, s, dim);
  if (static_cast<int>(x.size()) != dim) throw DomainError("position dimension mismatch");
  const double r = radius_of(x);
  if (s == 1.0) return std::pow(4.0 * kPi * K * t, -0.5 * dim) * std::exp(-r * r / (4.0 * K * t));
  if (s == 0.5 && dim == 1) {
    const double kt = K * t;
    return kt / (kPi * (kt * kt + r * r));
  }
  return gamma_s_quadrature(x, t, K, s, dim);
}

double gamma_s_quadrature(std::span<const double> x, double t, double K, double s, int dim) {
  check_gamma_args(t, K, s, dim);
  if (static_cast<int>(x.size()) != dim) throw DomainError("position dimension mismatch");
  const double r = radius_of(x);
  const double a = K * t;
  const double n = static_cast<double>(dim);
  if (r == 0.0) {
    // (2 pi)^{-N} |S^{N-1}| int rho^{N-1} e^{-a rho^{2s}} d rho
    const double sphere = 2.0 * std::pow(kPi, n / 2.0) / std::tgamma(n / 2.0);
    return std::pow(2.0 * kPi, -n) * sphere * std::tgamma(n / (2.0 * s)) / (2.0 * s * std::pow(a, n / (2.0 * s)));
  }
  // Radial Fourier inversion: (2 pi)^{-N/2} r^{1-N/2} int e^{-a rho^{2s}} rho^{N/2} J_{N/2-1}(r rho) d rho,
  // which is (1/pi) int e^{-a rho^{2s}} cos(r rho) d rho in 1D.
  auto integrand = [&](double rho) {
    const double damp = std::exp(-a * std::pow(rho, 2.0 * s));
    if (dim == 1) return damp * std::cos(r * rho);
    return damp * std::pow(rho, n / 2.0) * std::cyl_bessel_j(n / 2.0 - 1.0, r * rho);
  };
  const double rho_max = std::pow(42.0 / a, 1.0 / (2.0 * s));
  const double panel = std::min(kPi / r, rho_max / 8.0);
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  CompensatedSum acc;
  // rho^{2s} is not smooth at 0; tanh-sinh absorbs the endpoint singularity of the first panel.
  boost::math::quadrature::tanh_sinh<double> ts;
  acc.add(ts.integrate(integrand, 0.0, panel, 1e-13));
  for (double lo = panel; lo < rho_max; lo += panel) {
    const double hi = std::min(rho_max, lo + panel);
    acc.add(GK::integrate(integrand, lo, hi, 8, 1e-13));
  }
  if (dim == 1) return acc.value() / kPi;
  return std::pow(2.0 * kPi, -n / 2.0) * std::pow(r, 1.0 - n / 2.0) * acc.value();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("slope needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw DomainError("log-log slope needs positive data");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw DomainError("slope needs distinct abscissae");
  return sxy / sxx;
}

DecayProfile decay_profile(const std::vector<std::pair<double, LatticeField>>& samples, double phi_mass,
                           double K, double s, std::optional<double> fit_from) {
  DecayProfile prof;
  for (const auto& [t, z] : samples) {
    if (!(t > 0.0)) continue;
    const double scale = std::pow(t, z.dim() / (2.0 * s));
    double disc = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      const auto x = z.coordinate(k);
      disc = std::max(disc, std::abs(z[k] - phi_mass * gamma_s(x, t, K, s, z.dim())));
    }
    const double sup = norm(z, SupNorm{});
    prof.rows.push_back({t, scale * disc, scale * sup, sup});
  }
  if (prof.rows.size() >= 2) {
    const double t0 = prof.rows.front().t, t1 = prof.rows.back().t;
    const double from = fit_from.value_or(t0 + 0.5 * (t1 - t0));
    std::vector<double> ts, ys;
    for (const auto& r : prof.rows)
      if (r.t >= from) {
        ts.push_back(r.t);
        ys.push_back(r.sup);
      }
    if (ts.size() >= 2) prof.slope = loglog_slope(ts, ys);
  }
  return prof;
}

RateSeries rate_series(const SimulationTrace& trace, const BlowUpReport& report, double p) {
  if (report.verdict != RunVerdict::BlownUp || !report.T_estimate)
    throw DomainError("rate series needs a blow-up report");
  if (trace.records.empty()) throw DomainError("rate series needs a nonempty trace");
  RateSeries rs;
  rs.g_tau = report.g_tau;
  const auto& last = trace.records.back();
  CompensatedSum tail;
  for (const auto& rec : trace.records) {
    const double value = (*report.T_estimate - rec.t) * std::pow(rec.sup_norm, p - 1.0);
    rs.rows.emplace_back(rec.t, value);
    if (rec.j < last.j && rec.sup_norm >= last.sup_norm / 10.0) {
      tail.add(value);
      ++rs.tail_count;
    }
  }
  if (rs.tail_count == 0) throw DomainError("trace has no records in the last decade of growth");
  rs.tail_mean = tail.value() / static_cast<double>(rs.tail_count);
  const double q = std::pow(2.0, p - 1.0);
  rs.in_bracket = rs.tail_mean >= 1.0 / (p - 1.0) && rs.tail_mean <= q / (q - 1.0);
  return rs;
}

KaplanResult kaplan_check(const LatticeField& u0, const EigenResult& eig, double p) {
  if (!(p > 1.0)) throw DomainError("reaction exponent p must exceed 1");
  const auto& phi = eig.eigenfunction;
  if (phi.h() != u0.h() || phi.dim() != u0.dim()) throw DomainError("datum and eigenfunction grids differ");
  const double cell = std::pow(phi.h(), phi.dim());
  CompensatedSum mass, inner;
  for (const auto& a : eig.nodes) {
    const double v = phi.at(a);
    if (v < 0.0) throw DomainError("Kaplan check needs a nonnegative eigenfunction");
    mass.add(v);
    inner.add(u0.at(a) * v);
  }
  if (std::abs(cell * mass.value() - 1.0) > 1e-10) throw DomainError("eigenfunction is not l1-normalized");
  KaplanResult out;
  out.I0 = cell * inner.value();
  out.threshold = std::pow(eig.lambda, 1.0 / (p - 1.0));
  out.guaranteed = out.I0 > out.threshold;
  return out;
}

bool check_initial_condition_b(const WeightKernel& kernel, const LatticeField& u0, double epsilon, double p) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in (0,1)");
  const auto lu = apply(kernel, u0).field;
  for (std::size_t k = 0; k < u0.size(); ++k)
    if (lu[k] + (1.0 - epsilon) * std::pow(std::max(u0[k], 0.0), p) < -1e-12) return false;
  return true;
}

void write_trace_csv(std::ostream& out, const SimulationTrace& trace) {
  out << "j,t,tau_j,sup_norm,l1_norm,eps_j\n";
  for (const auto& r : trace.records) {
    out << r.j << ',' << format_sci(r.t) << ',' << format_sci(r.tau_j) << ',' << format_sci(r.sup_norm) << ','
        << format_sci(r.l1_norm) << ',';
    if (r.eps) out << format_sci(*r.eps);
    out << '\n';
  }
}

}  // namespace fdblowup
