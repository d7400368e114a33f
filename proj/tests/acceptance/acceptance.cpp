// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "fdblowup/cli.hpp"
#include "fdblowup/eigen.hpp"
#include "fdblowup/errors.hpp"
#include "fdblowup/evolution.hpp"
#include "fdblowup/odekit.hpp"
#include "fdblowup/operator.hpp"

using namespace fdblowup;

namespace {

constexpr double kPi = std::numbers::pi;

struct Check {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

long nodes_for(double half_width, double h) { return static_cast<long>(std::ceil(half_width / h - 1e-9)); }

WeightKernel kernel_for(const KernelSpec& spec, double h, double half_width) {
  return build_kernel(spec, h, 1, default_cutoff(spec, h, nodes_for(half_width, h)));
}

LatticeField bump_on(double h, double half_width) {
  return restrict_function(bump_datum, h, LatticeBox(1, nodes_for(half_width, h)), Extension::Zero);
}

SchemeConfig auto_scheme(const WeightKernel& k, double p) {
  SchemeConfig s;
  s.p = p;
  s.tau = 0.9 * cfl_tau_max(k);
  return s;
}

double sup_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// 1. Constant datum against the closed-form discrete ODE.
void ode_equivalence(Check& v) {
  const auto k = build_kernel(LaplacianSpec{}, 1.0, 1, 1);
  const LatticeBox box(1, 2);
  const LatticeField u0(1.0, box, Extension::Constant, std::vector<double>(box.size(), 1.0), 1.0);
  SchemeConfig cfg;
  cfg.p = 2.0;
  cfg.tau = 0.1;
  double worst = 0.0, prev_err = INFINITY;
  for (double umax : {1e4, 1e6, 1e8, 1e10}) {
    cfg.u_max = umax;
    const auto run = run_semilinear(k, u0, cfg);
    v.require(run.report.verdict == RunVerdict::BlownUp, "constant datum blows up");
    for (const auto& r : run.trace.records)
      if (r.j <= 100) worst = std::max(worst, std::abs(r.sup_norm - std::pow(1.1, r.j)) / std::pow(1.1, r.j));
    const double err = std::abs(*run.report.T_estimate - blowup_times({1.0, 2.0, 0.1}).T_tau);
    v.require(run.report.T_lower <= *run.report.T_estimate, "T_lower <= T_estimate");
    v.require(err <= rate_factor(0.1, 2.0) / umax + 1e-12, "T_estimate within the bracket g(tau) U_max^{1-p}");
    prev_err = err;
  }
  v.require(worst <= 1e-10, "sup norm equals 1.1^j within 1e-10");
  v.require(prev_err <= 1e-6, "T_estimate within 1e-6 of T_tau at U_max = 1e10");
  v.detail << "max rel sup error " << worst << ", |T_est - 1.1| = " << prev_err;
}

// 2. Blow-up rate constant against g(tau).
void blowup_rate(Check& v) {
  const double h = 0.25;
  const auto k = kernel_for(LaplacianSpec{}, h, 10.0);
  const auto cfg = auto_scheme(k, 2.0);
  const auto run = run_semilinear(k, bump_on(h, 10.0), cfg);
  v.require(run.report.verdict == RunVerdict::BlownUp, "bump blows up");
  if (run.report.verdict != RunVerdict::BlownUp) return;
  const auto rs = rate_series(run.trace, run.report, 2.0);
  const double g = 1.0 + cfg.tau;
  v.require(std::abs(rs.g_tau - g) <= 1e-12, "g(tau) = 1 + tau at p = 2");
  v.require(std::abs(rs.tail_mean - g) <= 0.02 * g, "tail mean within 2% of g(tau)");
  v.require(rs.in_bracket && rs.tail_mean >= 1.0 && rs.tail_mean <= 2.0, "tail mean in [1, 2]");
  v.detail << "tau " << cfg.tau << ", tail mean " << rs.tail_mean << " over " << rs.tail_count
           << " steps, g(tau) " << g;
}

// 3. Fujita dichotomy with the bump datum.
void fujita(Check& v) {
  struct Case {
    std::string name;
    KernelSpec spec;
    double h, half_width, p;
    RunVerdict expected;
  };
  const std::vector<Case> cases = {
      {"Laplacian p=2", LaplacianSpec{}, 0.25, 40.0, 2.0, RunVerdict::BlownUp},
      {"Laplacian p=5", LaplacianSpec{}, 0.25, 40.0, 5.0, RunVerdict::GlobalSuspected},
      {"Fractional p=1.5", FractionalSpec{0.5}, 0.5, 512.0, 1.5, RunVerdict::BlownUp},
      {"Fractional p=5", FractionalSpec{0.5}, 0.5, 512.0, 5.0, RunVerdict::GlobalSuspected},
      {"Gaussian p=2.5", ZeroOrderSpec{RadialProfile::Gaussian, 1.0, 1.0}, 0.25, 200.0, 2.5, RunVerdict::BlownUp}};
  for (const auto& c : cases) {
    const auto k = kernel_for(c.spec, c.h, c.half_width);
    auto cfg = auto_scheme(k, c.p);
    cfg.horizon_time = 50.0;
    cfg.trace_stride = 1000;
    const auto run = run_semilinear(k, bump_on(c.h, c.half_width), cfg);
    v.require(run.report.verdict == c.expected, c.name + " gives " + to_string(c.expected));
    if (c.expected == RunVerdict::BlownUp)
      v.require(run.report.post_trigger_monotone, c.name + " post-trigger monotone");
    v.detail << c.name << ": " << to_string(run.report.verdict);
    if (run.report.T_estimate) v.detail << " T=" << *run.report.T_estimate;
    v.detail << "; ";
  }
}

// 4. Exact eigenvalues of the disconnected example, ground-state shape for connected kernels.
void eigen_exactness(Check& v) {
  const auto jump = build_kernel(DiscreteDeltaSpec{{{2}, {-2}}, {1.0, 1.0}, false}, 1.0, 1, 2);
  const auto problem = DirichletProblem::from_nodes(jump, {{-1}, {0}, {1}, {2}});
  const auto m = assemble_dirichlet_matrix(problem);
  const auto lows = lowest_eigenvalues(m, 4);
  const double expect[] = {1.0, 1.0, 3.0, 3.0};
  double err = 0.0;
  for (int i = 0; i < 4; ++i) err = std::max(err, std::abs(lows[i] - expect[i]));
  v.require(err <= 1e-12, "eigenvalues {1,1,3,3} within 1e-12");
  const auto ground = smallest_eigenpair(m);
  v.require(!ground.simple, "ground eigenvalue flagged non-simple");
  v.detail << "4x4 error " << err << ", gap " << ground.gap << "; ";

  const std::vector<std::pair<std::string, KernelSpec>> families = {
      {"Laplacian", LaplacianSpec{}},
      {"Fractional(0.5)", FractionalSpec{0.5}},
      {"Gaussian", ZeroOrderSpec{RadialProfile::Gaussian, 1.0, 1.0}}};
  for (const auto& [name, spec] : families) {
    const auto k = kernel_for(spec, 0.25, 4.0);
    const auto res = solve(DirichletProblem::ball(k, 4.0));
    const auto shape = eigen_shape_checks(res);
    v.require(res.lambda > 0.0, name + " lambda > 0");
    v.require(shape.positive_interior, name + " interior-positive eigenfunction");
    v.require(shape.max_at_center, name + " max at center");
    v.detail << name << " lambda " << res.lambda << "; ";
  }
}

// 5. Dilation scaling of the ground eigenvalue.
void eigen_scaling(Check& v) {
  const std::vector<double> radii = {2.0, 4.0, 8.0, 16.0};
  const auto lap = scaling_study(kernel_for(LaplacianSpec{}, 0.25, 16.0), radii, 1.0);
  const auto frac = scaling_study(kernel_for(FractionalSpec{0.5}, 0.25, 16.0), radii, 0.5);
  for (const auto* st : {&lap, &frac}) {
    const std::string name = st == &lap ? "Laplacian" : "Fractional(0.5)";
    v.require(st->bounded, name + " product ratios in [0.3, 2]");
    v.require(st->strictly_decreasing, name + " lambda strictly decreasing");
    v.detail << name << " lambda R^2s:";
    for (const auto& r : st->rows) v.detail << ' ' << r.product;
    v.detail << "; ";
  }
}

// 6. Linear decay rate and convergence to the heat kernel profile.
void linear_decay(Check& v) {
  struct Case {
    std::string name;
    KernelSpec spec;
    double s, half_width, expected_slope;
  };
  const std::vector<Case> cases = {{"Laplacian", LaplacianSpec{}, 1.0, 200.0, -0.5},
                                   {"Fractional(0.5)", FractionalSpec{0.5}, 0.5, 24000.0, -1.0}};
  const double h = 0.5;
  const std::vector<double> times = {10, 15, 20, 25, 30, 40, 50, 60, 70, 80, 90, 100};
  for (const auto& c : cases) {
    const auto k = kernel_for(c.spec, h, c.half_width);
    const auto phi = bump_on(h, c.half_width);
    const double K = symbol_bounds(symbol(k, axis_samples(1, 0.01, 2.0 * kPi, 200)), c.s).limit_K;
    const double tau = 0.9 * cfl_tau_max(k);
    std::vector<long> steps;
    for (double t : times) steps.push_back(std::lround(t / tau));
    const auto run = run_diffusion(k, phi, tau, steps.back(), steps, 1000);
    const auto prof = decay_profile(run.samples, lattice_mass(phi), K, c.s, 10.0 - 1e-9);
    v.require(std::abs(prof.slope - c.expected_slope) <= 0.1 * std::abs(c.expected_slope),
              c.name + " slope within 10%");
    bool decreasing = true;
    for (std::size_t i = 1; i < prof.rows.size(); ++i)
      decreasing = decreasing && prof.rows[i].rescaled_discrepancy < prof.rows[i - 1].rescaled_discrepancy;
    v.require(decreasing, c.name + " rescaled discrepancy decreasing on [10, 100]");
    v.detail << c.name << " K " << K << " slope " << prof.slope << " discrepancy "
             << prof.rows.front().rescaled_discrepancy << " -> " << prof.rows.back().rescaled_discrepancy << "; ";
  }
}

// 7. Fourier-side solution against the direct linear evolution.
void spectral_oracle(Check& v) {
  const double h = 1.0;
  const long a = 40;
  const auto k = build_kernel(LaplacianSpec{}, h, 1, 1);
  const LatticeBox box(1, a);
  std::vector<double> vals(box.size(), 0.0);
  vals[box.flat(LatticeIndex{0})] = 1.0;
  const LatticeField phi(h, box, Extension::Zero, std::move(vals));
  const double tau = 0.9 * cfl_tau_max(k);
  std::vector<LatticeIndex> nodes;
  for (std::size_t i = 0; i < box.size(); ++i) nodes.push_back(box.index(i));
  // The support grows by one node per step; it reaches the boundary at step a.
  std::vector<long> steps;
  for (long j = 0; j < a; ++j) steps.push_back(j);
  const auto direct = run_diffusion(k, phi, tau, a - 1, steps);
  double worst = 0.0, residue = 0.0;
  for (const auto& [t, z] : direct.samples) {
    const long j = std::lround(t / tau);
    const auto spec = spectral_linear_solution(k, phi, tau, j, nodes, 256);
    worst = std::max(worst, sup_diff(spec.values, z.values()));
    residue = std::max(residue, spec.imag_residue);
  }
  v.require(worst <= 1e-8, "sup difference within 1e-8");
  v.detail << "steps 0.." << a - 1 << ", max sup difference " << worst << ", imag residue " << residue;
}

// 8. Blow-up times converge under grid refinement.
void butimes(Check& v) {
  cli::ExperimentConfig c;
  c.command = cli::Command::Butimes;
  c.kernel = LaplacianSpec{};
  c.p = 2.0;
  c.box_radius = 10.0;
  c.h_list = {0.5, 0.25, 0.125, 0.0625, 0.03125};
  c.reference_h = 0.0078125;
  const auto table = cli::butimes_study(c);
  v.require(table.strictly_decreasing, "differences strictly decreasing");
  v.require(table.slope && *table.slope > 0.0, "positive log-log slope");
  v.detail << "T(ref) " << table.reference_T << ", differences:";
  for (const auto& r : table.rows) v.detail << ' ' << r.difference;
  if (table.slope) v.detail << ", slope " << *table.slope;
}

// 9. Symbol closed form, bound certification, near-zero limit and CFL margin.
void symbol_bounds_check(Check& v) {
  const double h = 0.25;
  const auto lap = build_kernel(LaplacianSpec{}, h, 1, 1);
  const auto lap_sym = symbol(lap, axis_samples(1, 0.01, kPi / h, 100));
  double err = 0.0;
  for (std::size_t i = 0; i < lap_sym.values.size(); ++i) {
    const double xi = lap_sym.xi_samples[i][0];
    err = std::max(err, std::abs(lap_sym.values[i] + 2.0 / (h * h) * (1.0 - std::cos(h * xi))));
  }
  v.require(lap_sym.values.size() == 100 && err <= 1e-12, "Laplacian closed form within 1e-12");

  const auto frac = build_kernel(FractionalSpec{0.5}, 0.5, 1, 40000);
  const auto frac_sym = symbol(frac, axis_samples(1, 0.01, 2.0 * kPi, 200));
  const auto fb = symbol_bounds(frac_sym, 0.5);
  v.require(fb.s1_certified && fb.s2_certified, "Fractional(0.5) certifies S1 and S2");
  v.require(std::isfinite(fb.K_upper) && fb.K_upper > 0.0 && std::isfinite(fb.K_lower) && fb.K_lower > 0.0,
            "finite positive fitted constants");

  const auto gauss = build_kernel(ZeroOrderSpec{RadialProfile::Gaussian, 1.0, 1.0}, h, 1, 28);
  const auto g_sym = symbol(gauss, axis_samples(1, 0.01, kPi / h, 200));
  const double limit = symbol_bounds(g_sym, 1.0).limit_K;
  const double target = gauss.second_moment() / 2.0;
  v.require(std::abs(limit - target) <= 0.01 * target, "Gaussian near-zero limit within 1% of M2/(2N)");

  double margin = INFINITY;
  for (const auto* pair : {&lap_sym, &frac_sym, &g_sym}) {
    const WeightKernel& k = pair == &lap_sym ? lap : pair == &frac_sym ? frac : gauss;
    const double tau = cfl_tau_max(k);
    for (double m : pair->values) margin = std::min(margin, 1.0 + tau * m);
  }
  v.require(margin >= 0.5, "1 + tau m >= 1/2 at the CFL step");
  v.detail << "Laplacian error " << err << "; Fractional K in [" << fb.K_upper << ", " << fb.K_lower
           << "]; Gaussian limit " << limit << " vs " << target << "; min 1+tau m " << margin;
}

// 10. Randomized properties of the monotone scheme.
void property_suite(Check& v) {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto pick_spec = [&](double h) -> KernelSpec {
    switch (rng() % 5) {
      case 0:
        return LaplacianSpec{};
      case 1:
        return FractionalSpec{0.1 + 0.85 * unif(rng)};
      case 2:
        return ZeroOrderSpec{RadialProfile::Gaussian, 0.5 + unif(rng), 0.5 + unif(rng)};
      case 3:
        return ZeroOrderSpec{RadialProfile::Indicator, 0.5 + unif(rng), 1.5 * h + 2.0 * unif(rng)};
      default:
        return MixedSpec{{{1.0, LaplacianSpec{}}, {0.5, FractionalSpec{0.3 + 0.6 * unif(rng)}}}};
    }
  };
  auto random_field = [&](double h, long a, double amp) {
    const LatticeBox box(1, a);
    std::vector<double> vals(box.size());
    for (auto& x : vals) x = unif(rng) < 0.3 ? 0.0 : amp * unif(rng);
    return LatticeField(h, box, Extension::Zero, std::move(vals));
  };
  const int n = 100;
  int fail_pos = 0, fail_contract = 0, fail_mass = 0, fail_growth = 0, fail_paths = 0;
  double worst_mass = 0.0, worst_path = 0.0;
  for (int i = 0; i < n; ++i) {
    const double h = 0.25 + 0.5 * unif(rng);
    const long a = 10 + static_cast<long>(rng() % 30);
    const auto spec = pick_spec(h);
    const auto k = build_kernel(spec, h, 1, default_cutoff(spec, h, a));
    const double p = 1.2 + 3.0 * unif(rng);

    // Positivity of the adaptive step.
    const auto u = random_field(h, a, 5.0 * unif(rng));
    const auto next = step(k, u, p, cfl_tau_max(k) * (0.1 + 0.9 * unif(rng)));
    if (std::any_of(next.field.values().begin(), next.field.values().end(), [](double x) { return x < 0.0; }))
      ++fail_pos;

    // Sup-norm contraction of the diffusion step.
    const auto z = advance(k, u, 1.0, cfl_tau_max(k), false);
    if (norm(z, SupNorm{}) > norm(u, SupNorm{}) * (1.0 + 1e-14)) ++fail_contract;

    // Mass balance: the change equals the flux leaving the box through the truncated stencil.
    {
      const double tau = cfl_tau_max(k);
      const auto& box = u.box();
      const long reach = std::min(k.cutoff_radius(), 2 * a);
      double predicted = 0.0;
      for (std::size_t g = 0; g < box.size(); ++g) {
        const long gamma = box.index(g)[0];
        double inside = 0.0;
        for (long b = -reach; b <= reach; ++b) {
          if (b == 0 || std::abs(gamma + b) > a) continue;
          const long off[] = {b};
          inside += k.weight(off);
        }
        predicted += u[g] * (k.l1_norm() - inside);
      }
      predicted *= tau * h;
      const double change = lattice_mass(u) - lattice_mass(z);
      const double err = std::abs(change - predicted) / std::max(lattice_mass(u), 1e-300);
      worst_mass = std::max(worst_mass, err);
      if (err > 1e-10) ++fail_mass;
    }

    // Post-trigger growth: the datum already satisfies the blow-up condition.
    {
      const double amp = std::pow(k.l1_norm() * (1.1 + unif(rng)), 1.0 / (p - 1.0));
      const double width = 0.5 + 2.0 * unif(rng);
      const auto u0 = restrict_function(
          [&](std::span<const double> x) { return amp * std::max(0.0, 1.0 - (x[0] * x[0]) / (width * width)); }, h,
          LatticeBox(1, a), Extension::Zero);
      auto cfg = auto_scheme(k, p);
      cfg.trace_stride = 1;
      const auto run = run_semilinear(k, u0, cfg);
      const auto& last = run.trace.records.back();
      const double gap = k.l1_norm() / std::pow(last.sup_norm, p - 1.0);  // 1 - eps without cancellation
      const bool ok = run.report.verdict == RunVerdict::BlownUp && run.report.trigger_step == 0L &&
                      run.report.post_trigger_monotone && last.eps &&
                      gap > 0.0 && gap <= k.l1_norm() * std::pow(cfg.u_max, 1.0 - p);
      if (!ok) ++fail_growth;
    }

    // Direct and FFT paths agree.
    {
      const double ext = unif(rng) < 0.5 ? 0.0 : 2.0 * unif(rng);
      const auto w = random_field(h, a, 3.0);
      const LatticeField f(h, w.box(), ext > 0.0 ? Extension::Constant : Extension::Zero,
                           std::vector<double>(w.values().begin(), w.values().end()), ext);
      const auto d = apply(k, f, ApplyPath::Direct).field;
      const auto ff = apply(k, f, ApplyPath::FFT).field;
      const double scale = std::max(1.0, k.l1_norm() * std::max(norm(f, SupNorm{}), 1.0));
      const double err = sup_diff(d.values(), ff.values()) / scale;
      worst_path = std::max(worst_path, err);
      if (err > 1e-12) ++fail_paths;
    }
  }
  v.require(fail_pos == 0, "positivity");
  v.require(fail_contract == 0, "sup-norm contraction");
  v.require(fail_mass == 0, "mass balance");
  v.require(fail_growth == 0, "post-trigger growth and eps -> 1");
  v.require(fail_paths == 0, "direct/FFT equality");
  v.detail << n << " instances each; failures pos " << fail_pos << ", contraction " << fail_contract << ", mass "
           << fail_mass << " (worst " << worst_mass << "), growth " << fail_growth << ", paths " << fail_paths
           << " (worst " << worst_path << ")";
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    double budget_seconds;
    std::function<void(Check&)> run;
  };
  const std::vector<Criterion> criteria = {
      {"ODE oracle equivalence", 1.0, ode_equivalence},
      {"Blow-up rate limit", 30.0, blowup_rate},
      {"Fujita dichotomy", 300.0, fujita},
      {"Eigen exactness", 1.0, eigen_exactness},
      {"Eigenvalue scaling", 60.0, eigen_scaling},
      {"Linear decay", 120.0, linear_decay},
      {"Spectral oracle", 30.0, spectral_oracle},
      {"Convergence of blow-up times", 600.0, butimes},
      {"Symbol bounds", 10.0, symbol_bounds_check},
      {"Monotone-scheme property suite", 120.0, property_suite},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    Check v;
    v.detail.precision(6);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_seconds) v.require(false, "runtime above " + std::to_string(c.budget_seconds) + " s");
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS " : "FAIL ") << i + 1 << ". " << c.name << " (" << secs << " s): " << v.detail.str()
              << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
