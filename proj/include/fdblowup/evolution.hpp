#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fdblowup/eigen.hpp"
#include "fdblowup/lattice.hpp"
#include "fdblowup/operator.hpp"
#include "fdblowup/weights.hpp"

namespace fdblowup {

struct SchemeConfig {
  double p = 2.0;
  double tau = 0.0;  ///< base step, at most cfl_tau_max(kernel)
  double horizon_time = std::numeric_limits<double>::infinity();
  long max_steps = 10'000'000;
  double u_max = 1e8;
  long global_window = 100;
  long trace_stride = 1;  ///< keep every k-th record (trigger and final records always kept)
  ApplyPath path = ApplyPath::Auto;
};

/// Throws DomainError for p <= 1, tau outside (0, cfl], u_max <= 1, or nonpositive window/stride.
void validate(const SchemeConfig& config, const WeightKernel& kernel);

struct TraceRecord {
  long j = 0;
  double t = 0.0;
  double tau_j = 0.0;
  double sup_norm = 0.0;
  double l1_norm = 0.0;          ///< h^N sum |u| over the stored box
  std::optional<double> eps;     ///< (sup^{p-1} - l1(omega)) / sup^{p-1} when positive
};

struct SimulationTrace {
  std::vector<TraceRecord> records;
};

enum class RunVerdict { BlownUp, GlobalSuspected, HorizonReached };
std::string to_string(RunVerdict v);

struct BlowUpReport {
  RunVerdict verdict = RunVerdict::HorizonReached;
  std::optional<long> trigger_step;    ///< first j with sup^{p-1} > l1(omega)
  double T_lower = 0.0;                ///< t at the last computed step
  std::optional<double> T_estimate;    ///< T_lower + g(tau) sup^{1-p}, blow-up runs only
  std::optional<double> rate_constant; ///< (T_estimate - t_{J-1}) sup_{J-1}^{p-1}
  double g_tau = 0.0;                  ///< tau (1+tau)^{p-1} / ((1+tau)^{p-1} - 1)
  long steps = 0;
  double final_sup = 0.0;
  bool post_trigger_monotone = true;   ///< sup strictly increasing and eps increasing in (0,1)
};

struct SemilinearRun {
  SimulationTrace trace;
  BlowUpReport report;
  LatticeField final_field;
};

struct StepResult {
  LatticeField field;
  double tau_j = 0.0;
};

/// One explicit step with tau_j = tau min{1, sup^{1-p}}. Throws DomainError for negative
/// input or tau above the CFL bound, NumericError for a non-finite update.
StepResult step(const WeightKernel& kernel, const LatticeField& field, double p, double tau);

/// One explicit step with a prescribed dt (no adaptive rule). Constant exteriors follow the
/// reaction ODE. p = 1 with reaction = false gives the pure diffusion step.
LatticeField advance(const WeightKernel& kernel, const LatticeField& field, double p, double dt,
                     bool reaction = true);

/// Iterates the adaptive scheme until sup >= u_max or the horizon.
SemilinearRun run_semilinear(const WeightKernel& kernel, const LatticeField& u0, const SchemeConfig& config);

struct DiffusionRun {
  SimulationTrace trace;
  std::vector<std::pair<double, LatticeField>> samples;  ///< (t, z) at the requested steps
  double initial_mass = 0.0;
  double final_mass = 0.0;
};

/// Fixed-step linear evolution z_{j+1} = z_j + tau L_h z_j for a Zero-extended datum.
DiffusionRun run_diffusion(const WeightKernel& kernel, const LatticeField& phi, double tau, long steps,
                           const std::vector<long>& sample_steps = {}, long trace_stride = 1,
                           ApplyPath path = ApplyPath::Auto);

/// Fundamental solution of d_t G = -K(-Delta)^s G. Closed forms for s = 1 and for s = 1/2
/// in 1D, Fourier inversion otherwise. Throws DomainError for t <= 0 or bad s, K, dim.
double gamma_s(std::span<const double> x, double t, double K, double s, int dim);

/// Fourier inversion regardless of closed forms (tolerance about 1e-10 absolute).
double gamma_s_quadrature(std::span<const double> x, double t, double K, double s, int dim);

struct DecayRow {
  double t = 0.0;
  double rescaled_discrepancy = 0.0;  ///< t^{N/2s} sup |z - mass Gamma_s|
  double rescaled_sup = 0.0;          ///< t^{N/2s} sup |z|
  double sup = 0.0;
};

struct DecayProfile {
  std::vector<DecayRow> rows;
  double slope = 0.0;  ///< log-log slope of sup over rows with t >= fit_from
};

/// Rows for every sample with t > 0; the slope is fitted over the second half of the time
/// range unless fit_from is given.
DecayProfile decay_profile(const std::vector<std::pair<double, LatticeField>>& samples, double phi_mass,
                           double K, double s, std::optional<double> fit_from = std::nullopt);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct RateSeries {
  std::vector<std::pair<double, double>> rows;  ///< (t_j, (T_estimate - t_j) sup_j^{p-1})
  double tail_mean = 0.0;   ///< mean over the last decade of sup growth, final record excluded
  std::size_t tail_count = 0;
  double g_tau = 0.0;
  bool in_bracket = false;  ///< tail mean within [1/(p-1), 2^{p-1}/(2^{p-1}-1)]
};

/// Throws DomainError unless the report is a blow-up.
RateSeries rate_series(const SimulationTrace& trace, const BlowUpReport& report, double p);

struct KaplanResult {
  double I0 = 0.0;
  double threshold = 0.0;  ///< lambda^{1/(p-1)}
  bool guaranteed = false;
};

/// I0 = h^N sum u0 phi over the eigen domain. Throws DomainError when phi is negative
/// or its l1 normalization is off by more than 1e-10.
KaplanResult kaplan_check(const LatticeField& u0, const EigenResult& eig, double p);

/// True iff L_h u0 + (1 - eps) u0^p >= -1e-12 at every stored node.
bool check_initial_condition_b(const WeightKernel& kernel, const LatticeField& u0, double epsilon, double p);

/// Trace CSV: j, t, tau_j, sup_norm, l1_norm, eps_j (empty when unset).
void write_trace_csv(std::ostream& out, const SimulationTrace& trace);

}  // namespace fdblowup
