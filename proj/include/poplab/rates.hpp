#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

namespace poplab {

enum class Sex { male, female };

// Survival function pi(a) = exp(-mu0*a) * ((A-a)/A)^c for the mortality
// family mu(a) = mu0 + c/(A-a). Mortality is only ever evaluated through
// survival ratios, never pointwise, since mu is unbounded near a = A.
struct SurvivalCurve {
  double A = 1.0;
  double mu0 = 0.0;
  double c = 1.0;

  double pi(double a) const {
    if (a <= 0.0) return 1.0;
    if (a >= A) return c > 0.0 ? 0.0 : std::exp(-mu0 * A);
    double p = std::exp(-mu0 * a);
    if (c != 0.0) p *= std::pow((A - a) / A, c);
    return p;
  }

  // pi(a+delta)/pi(a), in closed form.
  double ratio(double a, double delta) const {
    if (a < 0.0 || delta < 0.0 || a + delta > A + 1e-12)
      throw std::out_of_range("SurvivalCurve::ratio: need 0 <= a <= a+delta <= A");
    if (delta == 0.0) return 1.0;
    double r = std::exp(-mu0 * delta);
    if (c != 0.0) {
      const double top = A - a - delta;
      if (top <= 0.0) return 0.0;
      r *= std::pow(top / (A - a), c);
    }
    return r;
  }

  // L1 norm of mu over (0, a0), a0 < A; used by initial-state estimates.
  double mu_l1(double a0) const {
    return mu0 * a0 + (c != 0.0 ? -c * std::log((A - a0) / A) : 0.0);
  }
};

// Demographic data: survival curves, birth rate beta(a,p), male fertility
// lambda(a), sex ratio and diffusivities.
//
// Default families:
//   beta(a,p)  = beta0(a) * p+ / (1 + p+/sat), beta0 a smooth bump on (b, A)
//   lambda(a)  = lambda_amp * sin^2(pi a / A)
struct RateTable {
  double A = 1.0;
  double gamma = 0.5;      // fraction of newborns that are female
  double K_m = 0.01;
  double K_f = 0.01;
  SurvivalCurve survival_m;
  SurvivalCurve survival_f;

  double beta_b = 0.5;     // support threshold: beta(a,.) = 0 for a < b
  double beta_amp = 1.0;
  double beta_sat = 1.0;   // saturation constant of the p-response
  double lambda_amp = 1.0;
  double lipschitz_L = 1.0;

  // Overridable for tests; defaults installed by make().
  std::function<double(double, double)> beta;   // beta(a, p)
  std::function<double(double)> lambda_fert;    // lambda(a)

  double beta_max() const { return beta_amp * beta_sat; }

  double default_beta0(double a) const {
    if (a <= beta_b || a >= A) return 0.0;
    const double u = std::sin(std::numbers::pi * (a - beta_b) / (A - beta_b));
    return beta_amp * u * u;
  }

  const SurvivalCurve& survival(Sex s) const { return s == Sex::male ? survival_m : survival_f; }

  static RateTable make(double A, double gamma, double K_m, double K_f,
                        SurvivalCurve sm, SurvivalCurve sf,
                        double beta_b, double beta_amp, double beta_sat,
                        double lambda_amp) {
    RateTable r;
    r.A = A;
    r.gamma = gamma;
    r.K_m = K_m;
    r.K_f = K_f;
    r.survival_m = sm;
    r.survival_f = sf;
    r.survival_m.A = A;
    r.survival_f.A = A;
    r.beta_b = beta_b;
    r.beta_amp = beta_amp;
    r.beta_sat = beta_sat;
    r.lambda_amp = lambda_amp;
    r.lipschitz_L = beta_amp;  // |d/dp p/(1+p/s)| <= 1
    r.beta = [r2 = r](double a, double p) {
      const double pp = p > 0.0 ? p : 0.0;
      return r2.default_beta0(a) * pp / (1.0 + pp / r2.beta_sat);
    };
    r.lambda_fert = [A, lambda_amp](double a) {
      const double u = std::sin(std::numbers::pi * a / A);
      return lambda_amp * u * u;
    };
    return r;
  }
};

// survival_ratio operation of the core module.
inline double survival_ratio(const RateTable& rates, Sex sex, double a, double delta) {
  return rates.survival(sex).ratio(a, delta);
}

}  // namespace poplab
