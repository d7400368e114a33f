#pragma once

namespace fdblowup {

/// Y_{j+1} = Y_j + tau_j Y_j^p with tau_j = tau Y_j^{1-p}: the scheme for spatially
/// constant data once Y >= 1, solved in closed form.
struct OdeClosedForm {
  double Y0 = 1.0;
  double p = 2.0;
  double tau = 0.1;
};

struct OdeState {
  double t = 0.0;
  double Y = 0.0;
};

struct OdeBlowupTimes {
  double T_tau = 0.0;   ///< sum of all steps of the discrete recursion
  double T_cont = 0.0;  ///< blow-up time of Y' = Y^p
};

/// Throws DomainError unless Y0 > 0, p > 1 and tau > 0.
void validate(const OdeClosedForm& ode);

/// Y_j = (1+tau)^j Y0, t_j = tau Y0^{1-p} (1 - r^j)/(1 - r) with r = (1+tau)^{1-p}.
OdeState state_at(const OdeClosedForm& ode, long j);

OdeBlowupTimes blowup_times(const OdeClosedForm& ode);

/// g(tau) = tau (1+tau)^{p-1} / ((1+tau)^{p-1} - 1), the limit of (T - t_j) Y_j^{p-1}.
double rate_factor(double tau, double p);

}  // namespace fdblowup
