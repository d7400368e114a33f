#include <cmath>

#include "doctest.h"
#include "fdblowup/errors.hpp"
#include "fdblowup/odekit.hpp"

using namespace fdblowup;

namespace {

// Plain recursion Y_{j+1} = Y_j + tau_j Y_j^p, tau_j = tau Y_j^{1-p}.
OdeState recurse(const OdeClosedForm& ode, long j) {
  OdeState s{0.0, ode.Y0};
  for (long k = 0; k < j; ++k) {
    const double tj = ode.tau * std::pow(s.Y, 1.0 - ode.p);
    s.Y += tj * std::pow(s.Y, ode.p);
    s.t += tj;
  }
  return s;
}

}  // namespace

TEST_CASE("state_at small cases") {
  const auto s0 = state_at({1.0, 2.0, 0.1}, 0);
  CHECK(s0.t == 0.0);
  CHECK(s0.Y == 1.0);
  const auto s1 = state_at({1.0, 2.0, 0.1}, 1);
  CHECK(s1.t == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s1.Y == doctest::Approx(1.1).epsilon(1e-15));
  const auto s2 = state_at({2.0, 2.0, 0.1}, 2);
  CHECK(s2.t == doctest::Approx(0.05 + 0.05 / 1.1).epsilon(1e-14));
  CHECK(s2.Y == doctest::Approx(2.42).epsilon(1e-14));
}

TEST_CASE("blow-up times") {
  auto b = blowup_times({1.0, 2.0, 0.1});
  CHECK(b.T_tau == doctest::Approx(1.1).epsilon(1e-14));
  CHECK(b.T_cont == doctest::Approx(1.0).epsilon(1e-15));
  b = blowup_times({2.0, 2.0, 0.1});
  CHECK(b.T_tau == doctest::Approx(0.55).epsilon(1e-14));
  CHECK(b.T_cont == doctest::Approx(0.5).epsilon(1e-15));
  for (double tau : {0.1, 0.01, 0.001}) {
    const auto bt = blowup_times({1.0, 2.0, tau});
    CHECK(bt.T_tau - bt.T_cont == doctest::Approx(tau).epsilon(1e-9));
  }
}

TEST_CASE("closed form matches the recursion") {
  for (double p : {1.5, 2.0, 3.0, 5.0})
    for (double Y0 : {0.5, 1.0, 3.0})
      for (double tau : {0.01, 0.1, 0.5}) {
        const OdeClosedForm ode{Y0, p, tau};
        for (long j : {0L, 1L, 7L, 50L, 200L}) {
          const auto a = state_at(ode, j), b = recurse(ode, j);
          CHECK(std::abs(a.Y - b.Y) <= 1e-12 * b.Y);
          CHECK(std::abs(a.t - b.t) <= 1e-12 * std::max(1.0, b.t));
        }
      }
}

TEST_CASE("partial sums increase to T_tau from below") {
  const OdeClosedForm ode{1.0, 2.5, 0.2};
  const double T = blowup_times(ode).T_tau;
  double prev_gap = INFINITY;
  for (long j = 0; j <= 80; j += 5) {
    const double t = state_at(ode, j).t;
    CHECK(t <= T);
    CHECK(T - t < prev_gap);
    prev_gap = T - t;
  }
  CHECK(prev_gap < 1e-8);
}

TEST_CASE("T_tau increases with tau and approaches T_cont") {
  double prev = 0.0;
  for (double tau : {1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0}) {
    const auto b = blowup_times({1.5, 3.0, tau});
    CHECK(b.T_tau > prev);
    CHECK(b.T_tau >= b.T_cont);
    prev = b.T_tau;
  }
  const auto b = blowup_times({1.5, 3.0, 1e-8});
  CHECK(b.T_tau == doctest::Approx(b.T_cont).epsilon(1e-7));
}

TEST_CASE("rate factor") {
  CHECK(rate_factor(0.1, 2.0) == doctest::Approx(1.1).epsilon(1e-14));
  for (double p : {1.5, 2.0, 4.0}) {
    const double q = std::pow(2.0, p - 1.0);
    CHECK(rate_factor(1.0, p) == doctest::Approx(q / (q - 1.0)).epsilon(1e-13));
    CHECK(rate_factor(1e-9, p) == doctest::Approx(1.0 / (p - 1.0)).epsilon(1e-7));
    // (T_tau - t_j) Y_j^{p-1} is exactly g(tau) for the ODE.
    const OdeClosedForm ode{1.0, p, 0.3};
    const double T = blowup_times(ode).T_tau;
    for (long j : {0L, 3L, 8L}) {
      const auto s = state_at(ode, j);
      CHECK((T - s.t) * std::pow(s.Y, p - 1.0) == doctest::Approx(rate_factor(0.3, p)).epsilon(1e-10));
    }
  }
}

TEST_CASE("invalid parameters") {
  CHECK_THROWS_AS(validate({0.0, 2.0, 0.1}), DomainError);
  CHECK_THROWS_AS(validate({1.0, 1.0, 0.1}), DomainError);
  CHECK_THROWS_AS(validate({1.0, 2.0, 0.0}), DomainError);
  CHECK_THROWS_AS(state_at({1.0, 2.0, 0.1}, -1), DomainError);
}
