#include "fdblowup/odekit.hpp"

#include <cmath>

#include "fdblowup/errors.hpp"

namespace fdblowup {

void validate(const OdeClosedForm& ode) {
  if (!(ode.Y0 > 0.0) || !std::isfinite(ode.Y0)) throw DomainError("ODE datum Y0 must be positive");
  if (!(ode.p > 1.0)) throw DomainError("ODE exponent p must exceed 1");
  if (!(ode.tau > 0.0)) throw DomainError("ODE step tau must be positive");
}

OdeState state_at(const OdeClosedForm& ode, long j) {
  validate(ode);
  if (j < 0) throw DomainError("step index must be nonnegative");
  const double lg = std::log1p(ode.tau);
  const double jd = static_cast<double>(j);
  // 1 - r^j and 1 - r through expm1 to keep small tau accurate.
  const double num = -std::expm1(jd * (1.0 - ode.p) * lg);
  const double den = -std::expm1((1.0 - ode.p) * lg);
  OdeState s;
  s.Y = ode.Y0 * std::pow(1.0 + ode.tau, jd);
  s.t = j == 0 ? 0.0 : ode.tau * std::pow(ode.Y0, 1.0 - ode.p) * num / den;
  return s;
}

OdeBlowupTimes blowup_times(const OdeClosedForm& ode) {
  validate(ode);
  const double scale = std::pow(ode.Y0, 1.0 - ode.p);
  const double den = -std::expm1((1.0 - ode.p) * std::log1p(ode.tau));
  return {ode.tau * scale / den, scale / (ode.p - 1.0)};
}

double rate_factor(double tau, double p) {
  if (!(tau > 0.0) || !(p > 1.0)) throw DomainError("rate factor needs tau > 0 and p > 1");
  const double lg = (p - 1.0) * std::log1p(tau);
  return tau * std::exp(lg) / std::expm1(lg);
}

}  // namespace fdblowup
