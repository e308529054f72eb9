#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "poplab/adjoint.hpp"
#include "poplab/forward.hpp"
#include "poplab/grid.hpp"
#include "poplab/operators.hpp"

namespace poplab {

// Adjoint final data probe, normalized to unit combined Q_A norm.
struct Probe {
  Field n_T, l_T;
  std::string kind;
};

struct ProbeSet {
  std::vector<Probe> probes;
  uint64_t seed = 0;
};

namespace probedetail {

inline Field random_smooth(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  Field f(g);
  const int modes = 3;
  for (int kx = 1; kx <= modes; ++kx)
    for (int ka = 1; ka <= modes; ++ka) {
      const double c = coef(rng) / (kx * ka);
      for (int i = 0; i <= g.na; ++i) {
        const double sa = std::sin(ka * std::numbers::pi * g.age(i) / g.A);
        auto row = f.row(i);
        for (int j = 0; j < g.nx; ++j)
          row[j] += c * sa * std::sin(kx * std::numbers::pi * g.x(j));
      }
    }
  return f;
}

inline Field age_bump(const Grid& g, double lo, double hi, int kx = 1) {
  Field f(g);
  if (hi <= lo) return f;
  for (int i = 0; i <= g.na; ++i) {
    const double a = g.age(i);
    if (a <= lo || a >= hi) continue;
    const double u = std::sin(std::numbers::pi * (a - lo) / (hi - lo));
    auto row = f.row(i);
    for (int j = 0; j < g.nx; ++j)
      row[j] = u * u * std::sin(kx * std::numbers::pi * g.x(j));
  }
  return f;
}

inline void normalize(Probe& p, const Grid& g) {
  const double n = std::sqrt(dot_qa(p.n_T, p.n_T, g) + dot_qa(p.l_T, p.l_T, g));
  if (n > 0.0) {
    p.n_T *= 1.0 / n;
    p.l_T *= 1.0 / n;
  }
}

}  // namespace probedetail

// Spatial eigenmodes x age bumps, random smooth fields, and adversarial
// age-localized data near the geometric thresholds.
inline ProbeSet make_probe_set(const Grid& g, const ControlWindows& w, int count, uint64_t seed) {
  ProbeSet set;
  set.seed = seed;
  std::mt19937_64 rng(seed);
  const double a2 = w.age_m.hi;
  for (int i = 0; i < count; ++i) {
    Probe p;
    switch (i % 4) {
      case 0:
        p.kind = "eigenmode-bump";
        p.n_T = probedetail::age_bump(g, 0.1 * g.A, 0.9 * g.A, 1 + i % 3);
        p.l_T = probedetail::age_bump(g, 0.2 * g.A, 0.8 * g.A, 1 + (i / 2) % 3);
        break;
      case 1:
        p.kind = "random-smooth";
        p.n_T = probedetail::random_smooth(g, rng);
        p.l_T = probedetail::random_smooth(g, rng);
        break;
      case 2:
        p.kind = "age-localized-high";
        p.n_T = probedetail::age_bump(g, std::min(a2 + 0.05 * g.A, 0.95 * g.A), g.A);
        p.l_T = Field(g);
        break;
      default:
        p.kind = "age-localized-low";
        p.n_T = probedetail::age_bump(g, 0.0, std::max(w.age_m.lo, 0.1 * g.A));
        p.l_T = probedetail::random_smooth(g, rng);
        break;
    }
    probedetail::normalize(p, g);
    set.probes.push_back(std::move(p));
  }
  return set;
}

struct RatioResult {
  double ratio = 0.0;
  bool infinite = false;    // numerator > 0 with exactly zero denominator
  bool degenerate = false;  // 0/0 probe
  double numerator = 0.0;
  double denominator = 0.0;
};

inline RatioResult ratio_of(double num, double den) {
  RatioResult r;
  r.numerator = num;
  r.denominator = den;
  if (den > 0.0)
    r.ratio = num / den;
  else if (num > 0.0)
    r.infinite = true;
  else
    r.degenerate = true;
  return r;
}

// (||n(0)||^2 + ||l(0)||^2) / (obs energy on Xi + obs energy on Xi').
inline RatioResult observability_ratio(const RateTable& rates, const Grid& g,
                                       const ControlWindows& w, const SpaceTimeProfile& p,
                                       const Probe& probe) {
  AdjointProblem ap{&rates, g, w, probe.n_T, probe.l_T, &p};
  const AdjointResult ar = solve_adjoint(ap);
  const double num =
      dot_qa(ar.n.slices[0], ar.n.slices[0], g) + dot_qa(ar.l.slices[0], ar.l.slices[0], g);
  return ratio_of(num, ar.obs_energy_m + ar.obs_energy_f);
}

// Trace estimate: energy of n(x,0,t) over (0, T-eta) against the Xi
// observation energy.
inline RatioResult trace_estimate(const RateTable& rates, const Grid& g, const ControlWindows& w,
                                  const SpaceTimeProfile& p, const Probe& probe, double eta) {
  if (eta <= w.age_m.lo || eta >= g.T)
    throw std::out_of_range("trace_estimate: need a1 < eta < T");
  AdjointProblem ap{&rates, g, w, probe.n_T, probe.l_T, &p};
  const AdjointResult ar = solve_adjoint(ap);
  double num = 0.0;
  for (int k = 0; k <= g.nt; ++k) {
    if (g.time(k) > g.T - eta) break;
    const auto tr = ar.n.renewal_trace.slice(k);
    for (int j = 0; j < g.nx; ++j) num += tr[j] * tr[j];
  }
  num *= g.dx() * g.dt();
  return ratio_of(num, ar.obs_energy_m);
}

struct BlowupScan {
  std::vector<double> eta;      // descending towards a1
  std::vector<double> constant; // max trace ratio per eta
  double slope = 0.0;           // of log C against 1/(eta - a1)
  double intercept = 0.0;
  bool monotone = false;        // C nondecreasing as eta decreases
};

// Estimates C(eta) = max trace ratio over the probe set on an eta grid and
// fits log C against 1/(eta - a1).
inline BlowupScan blowup_scan(const RateTable& rates, const Grid& g, const ControlWindows& w,
                              const SpaceTimeProfile& p, const ProbeSet& probes,
                              std::vector<double> eta_grid) {
  if (eta_grid.size() < 3) throw std::invalid_argument("blowup_scan: need at least 3 eta points");
  std::sort(eta_grid.begin(), eta_grid.end(), std::greater<>());
  BlowupScan scan;
  scan.eta = eta_grid;
  for (double eta : eta_grid) {
    double cmax = 0.0;
    for (const Probe& pr : probes.probes) {
      const RatioResult r = trace_estimate(rates, g, w, p, pr, eta);
      if (!r.infinite && !r.degenerate) cmax = std::max(cmax, r.ratio);
    }
    scan.constant.push_back(cmax);
  }
  scan.monotone = true;
  for (size_t i = 1; i < scan.constant.size(); ++i)
    if (scan.constant[i] < scan.constant[i - 1] * (1.0 - 1e-12)) scan.monotone = false;

  // least squares on (1/(eta-a1), log C)
  const double a1 = w.age_m.lo;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (size_t i = 0; i < scan.eta.size(); ++i) {
    if (scan.constant[i] <= 0.0) continue;
    const double x = 1.0 / (scan.eta[i] - a1);
    const double y = std::log(scan.constant[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++n;
  }
  if (n >= 2 && sxx * n - sx * sx > 0.0) {
    scan.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    scan.intercept = (sy - scan.slope * sx) / n;
  }
  return scan;
}

struct SupportCheck {
  double max_residual = 0.0;      // max |n(x,a,0)| over ages in (a0, A)
  double a0 = 0.0;
  double l_oracle_error = 0.0;    // discrepancy of the l(x,a,0) reconstruction
  double l_oracle_norm = 0.0;
};

// Support verification: n(x,a,0) must vanish exactly on ages
// (a0, A) with a0 = a2 - kappa; the l rows there are reconstructed from the
// recorded age-0 traces through the characteristic representation.
inline SupportCheck support_check(const RateTable& rates, const Grid& g, const ControlWindows& w,
                                  const SpaceTimeProfile& p, const Probe& probe, double kappa) {
  const double a2 = w.age_m.hi;
  const double a0 = a2 - kappa;
  if (!(g.T > g.A - a2))
    throw std::invalid_argument("support_check: geometry requires T > A - a2");

  AdjointProblem ap{&rates, g, w, probe.n_T, probe.l_T, &p};
  const AdjointResult ar = solve_adjoint(ap);

  SupportCheck out;
  out.a0 = a0;
  const Field& n0 = ar.n.slices[0];
  for (int i = 0; i <= g.na; ++i) {
    const double a = g.age(i);
    if (a <= a0 || !(g.A - a < g.T)) continue;
    for (int j = 0; j < g.nx; ++j)
      out.max_residual = std::max(out.max_residual, std::abs(n0.at(i, j)));
  }

  // l(x,a,0) reconstruction on (a0, A) from the traces:
  //   integral over s in (0, A-a) of pi2(a+s)/pi2(a) e^{s K_f Lap}
  //   beta(a+s, p(x,s)) ((1-gamma) n(x,0,s) + gamma l(x,0,s))
  const SpectralHeat heat(g);
  double err2 = 0.0, ref2 = 0.0;
  for (int i = 0; i <= g.na; ++i) {
    const double a = g.age(i);
    if (a <= a0 || !(g.A - a < g.T)) continue;
    const int smax = g.na - i;
    std::vector<double> recon(g.nx, 0.0);
    for (int s = 1; s <= std::min(smax, g.nt); ++s) {
      const double ratio = rates.survival_f.ratio(a, s * g.da());
      std::vector<double> src(g.nx, 0.0);
      for (int j = 0; j < g.nx; ++j) {
        const double b = rates.beta(a + s * g.da(), p.at(s, j));
        src[j] = b * ((1.0 - rates.gamma) * ar.n.renewal_trace.at(s, j) +
                      rates.gamma * ar.l.renewal_trace.at(s, j));
      }
      const auto prop = heat.propagate(src, rates.K_f, s * g.dt());
      const double wq = (s == smax || s == g.nt) ? 0.5 * g.da() : g.da();
      for (int j = 0; j < g.nx; ++j) recon[j] += wq * ratio * prop[j];
    }
    for (int j = 0; j < g.nx; ++j) {
      const double d = recon[j] - ar.l.slices[0].at(i, j);
      err2 += d * d;
      ref2 += ar.l.slices[0].at(i, j) * ar.l.slices[0].at(i, j);
    }
  }
  out.l_oracle_error = std::sqrt(err2 * g.dx() * g.da());
  out.l_oracle_norm = std::sqrt(ref2 * g.dx() * g.da());
  return out;
}

// Discrete residual of the aggregated equation for Y = integral of lambda*m:
//   Y_t - K_m Lap Y + int mu_m lambda m da = int lambda' m da + int chi lambda v da.
// The diffusivity is K_m, matching the aggregated male density.
inline double aggregate_residual(const RateTable& rates, const Grid& g, const ControlWindows& w,
                                 const ForwardResult& run, const ControlField* control_m) {
  const double dd = 1e-6 * g.A;
  auto lam = [&](double a) { return rates.lambda_fert(a); };
  auto lam_prime = [&](double a) {
    const double lo = std::max(0.0, a - dd), hi = std::min(g.A, a + dd);
    return (rates.lambda_fert(hi) - rates.lambda_fert(lo)) / (hi - lo);
  };
  auto mu_lam = [&](double a) {
    if (a >= g.A) return 0.0;  // lambda is O((A-a)^2), the product vanishes
    const auto& s = rates.survival_m;
    return (s.mu0 + s.c / (g.A - a)) * rates.lambda_fert(a);
  };
  const Mask mask = male_mask(w, g);
  const double inv_dx2 = 1.0 / (g.dx() * g.dx());

  double res2 = 0.0;
  for (int k = 0; k < g.nt; ++k) {
    const Field& m1 = run.m.slices[k + 1];
    const auto y0 = age_integral(run.m.slices[k], g, lam);
    const auto y1 = age_integral(m1, g, lam);
    const auto s1 = age_integral(m1, g, mu_lam);
    const auto r1 = age_integral(m1, g, lam_prime);
    std::vector<double> ctrl(g.nx, 0.0);
    if (control_m != nullptr && !control_m->empty()) {
      const std::vector<double> tw = trapezoid_weights(g);
      const Field& v = control_m->slices[k];
      for (int i = 0; i <= g.na; ++i) {
        if (!mask.age[i]) continue;
        const double c = tw[i] * rates.lambda_fert(g.age(i));
        for (int j = 0; j < g.nx; ++j)
          if (mask.space[j]) ctrl[j] += c * v.at(i, j);
      }
    }
    for (int j = 0; j < g.nx; ++j) {
      const double left = j > 0 ? y1[j - 1] : 0.0;
      const double right = j + 1 < g.nx ? y1[j + 1] : 0.0;
      const double lap = (left - 2.0 * y1[j] + right) * inv_dx2;
      const double r =
          (y1[j] - y0[j]) / g.dt() - rates.K_m * lap + s1[j] - r1[j] - ctrl[j];
      res2 += r * r;
    }
  }
  return std::sqrt(res2 * g.dx() * g.dt());
}

}  // namespace poplab
