#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "poplab/rates.hpp"
#include "poplab/windows.hpp"

namespace poplab {

struct ValidationItem {
  std::string id;
  bool pass = true;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationItem> items;

  bool pass() const {
    return std::all_of(items.begin(), items.end(), [](const auto& i) { return i.pass; });
  }
  void add(std::string id, bool ok, std::string detail) {
    items.push_back({std::move(id), ok, std::move(detail)});
  }
};

namespace detail {

inline bool interval_inside(const Interval& in, const Interval& out) {
  return in.lo >= out.lo && in.hi <= out.hi;
}

}  // namespace detail

// Checks the demographic hypotheses on the concrete rate families (sampled on
// a fine age grid) plus the geometric and time conditions of the selected
// variant. Violations are reported, never thrown.
inline ValidationReport validate(const RateTable& rates, const ControlWindows& w, double T) {
  ValidationReport rep;
  const double A = rates.A;
  const int ns = 400;
  const double h = A / ns;

  // basic parameter sanity
  rep.add("params", rates.gamma > 0.0 && rates.gamma < 1.0 && rates.K_m > 0.0 &&
                        rates.K_f > 0.0 && A > 0.0,
          "0<gamma<1, K_m>0, K_f>0, A>0");

  // H1: pi(0)=1, pi nonincreasing, pi(A)=0 for both sexes
  {
    bool ok = true;
    for (Sex s : {Sex::male, Sex::female}) {
      const auto& pi = rates.survival(s);
      if (std::abs(pi.pi(0.0) - 1.0) > 1e-12) ok = false;
      if (pi.pi(A) != 0.0) ok = false;
      double prev = pi.pi(0.0);
      for (int i = 1; i <= ns; ++i) {
        const double cur = pi.pi(i * h);
        if (cur > prev + 1e-12) ok = false;
        prev = cur;
      }
    }
    rep.add("H1", ok, "pi(0)=1, pi nonincreasing, pi(A)=0 (finite life span)");
  }

  // H2: beta continuous >= 0 with beta(a,0)=0
  {
    bool ok = true;
    for (int i = 0; i <= ns; ++i) {
      const double a = i * h;
      if (std::abs(rates.beta(a, 0.0)) > 1e-12) ok = false;
      for (double p : {0.3, 1.0, 7.5})
        if (rates.beta(a, p) < -1e-12) ok = false;
    }
    rep.add("H2", ok, "beta >= 0 and beta(a,0)=0 on (0,A)");
  }

  // H3-(i): beta vanishes below the support threshold b
  {
    bool ok = true;
    for (int i = 0; i <= ns; ++i) {
      const double a = i * h;
      if (a >= rates.beta_b) break;
      for (double p : {0.5, 2.0, 10.0})
        if (std::abs(rates.beta(a, p)) > 1e-12) ok = false;
    }
    rep.add("H3-i", ok, "beta(a,p)=0 for a < b");
  }

  // H3-(ii): Lipschitz in p with constant lipschitz_L
  {
    bool ok = true;
    const double L = rates.lipschitz_L;
    const double ps[] = {0.0, 0.05, 0.3, 0.9, 1.7, 4.0, 12.0};
    for (int i = 0; i <= ns; ++i) {
      const double a = i * h;
      for (double p : ps)
        for (double q : ps) {
          if (p == q) continue;
          const double d = std::abs(rates.beta(a, p) - rates.beta(a, q));
          if (d > L * std::abs(p - q) * (1.0 + 1e-9) + 1e-12) ok = false;
        }
    }
    rep.add("H3-ii", ok, "|beta(a,p)-beta(a,q)| <= L|p-q|");
  }

  // H3-(iii): 0 <= beta <= beta_max
  {
    bool ok = true;
    const double bmax = rates.beta_max();
    for (int i = 0; i <= ns; ++i) {
      const double a = i * h;
      for (double p : {0.1, 1.0, 5.0, 100.0, 1e6}) {
        const double b = rates.beta(a, p);
        if (b < -1e-12 || b > bmax * (1.0 + 1e-9)) ok = false;
      }
    }
    rep.add("H3-iii", ok, "0 <= beta <= beta_max");
  }

  // H4: lambda >= 0 with lambda(0)=lambda(A)=0
  {
    bool ok = std::abs(rates.lambda_fert(0.0)) <= 1e-12 &&
              std::abs(rates.lambda_fert(A)) <= 1e-12;
    for (int i = 0; i <= ns; ++i)
      if (rates.lambda_fert(i * h) < -1e-12) ok = false;
    rep.add("H4", ok, "lambda >= 0, lambda(0)=lambda(A)=0");
  }

  // H5: lambda*mu_m integrable. With mu = mu0 + c/(A-a) this holds iff c=0 or
  // lambda vanishes at A (lambda is C1, so lambda(a) = O(A-a) there).
  {
    const bool ok = rates.survival_m.c == 0.0 || std::abs(rates.lambda_fert(A)) <= 1e-12;
    rep.add("H5", ok, "lambda*mu_m in L1(0,A)");
  }

  // window geometry common to all variants
  {
    const Interval unit{0.0, 1.0};
    const Interval ages{0.0, A};
    auto proper = [](const Interval& i, const Interval& parent) {
      return i.lo >= parent.lo && i.hi <= parent.hi && i.lo < i.hi &&
             !(i.lo == parent.lo && i.hi == parent.hi);
    };
    bool ok = proper(w.omega, unit) && proper(w.age_m, ages);
    if (w.variant != Variant::male_only)
      ok = ok && proper(w.omega_prime, unit) && proper(w.age_f, ages);
    rep.add("windows", ok, "control windows nonempty and strictly inside their parents");
  }

  // variant-specific geometric and time conditions (strict inequalities)
  switch (w.variant) {
    case Variant::both_sexes: {
      rep.add("geometry", w.age_m.lo < rates.beta_b &&
                              detail::interval_inside(w.age_m, w.age_f),
              "a1 < b and (a1,a2) inside (b1,b2)");
      const double tmin = w.age_m.lo + A - w.age_m.hi;
      rep.add("time", T > tmin, "T > a1 + A - a2 = " + std::to_string(tmin));
      break;
    }
    case Variant::male_only: {
      rep.add("geometry", w.rho > 0.0, "rho > 0");
      const double tmin = A - w.age_m.hi;
      rep.add("time", T > tmin, "T > A - a2 = " + std::to_string(tmin));
      break;
    }
    case Variant::female_only: {
      const double tmin = w.age_f.lo + A - w.age_f.hi;
      rep.add("time", T > tmin, "T > b1 + A - b2 = " + std::to_string(tmin));
      break;
    }
  }

  return rep;
}

}  // namespace poplab
