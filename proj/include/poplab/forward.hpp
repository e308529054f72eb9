#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "poplab/grid.hpp"
#include "poplab/operators.hpp"
#include "poplab/rates.hpp"
#include "poplab/windows.hpp"

namespace poplab {

struct SolverAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Frozen-nonlinearity auxiliary problem when frozen_p is set; full nonlinear
// problem (p = M computed on the fly, lagged one step) when it is absent.
struct ForwardProblem {
  const RateTable* rates = nullptr;
  Grid grid;
  ControlWindows windows;
  Field m0, f0;
  const ControlField* control_m = nullptr;
  const ControlField* control_f = nullptr;
  const SpaceTimeProfile* frozen_p = nullptr;
};

struct ForwardResult {
  SexTrajectory m, f;
  SpaceTimeProfile M;       // integral of lambda * m per slice
  SpaceTimeProfile N;       // birth integral per slice
  SpaceTimeProfile p_used;  // profile fed to beta at each renewal (index = slice)
};

namespace detail {

inline void check_finite(const Field& f, int step) {
  double s = 0.0;
  for (double x : f.v) s += x * x;
  if (!std::isfinite(s))
    throw SolverAbort("forward solve diverged at step " + std::to_string(step));
}

// Split step, without the renewal row: exact age shift, survival decay of the
// shifted row, implicit diffusion rowwise, then the dt-weighted masked source.
// The age-0 row is left at zero for the renewal stage.
inline Field advance_no_renewal(const Field& u, const Grid& g, const SurvivalCurve& surv,
                                const DiffusionOp& diff, const ControlField* ctrl,
                                const Mask& mask, int k) {
  Field nu(g);
  const double da = g.da();
  for (int i = g.na; i >= 1; --i) {
    const double s = surv.ratio(g.age(i - 1), da);
    const auto src = u.row(i - 1);
    auto dst = nu.row(i);
    for (int j = 0; j < g.nx; ++j) dst[j] = s * src[j];
    diff.apply_inplace(dst);
  }
  if (ctrl != nullptr && !ctrl->empty()) {
    const Field& v = ctrl->slices[k];
    const double dt = g.dt();
    for (int i = 1; i <= g.na; ++i) {
      if (!mask.age[i]) continue;
      auto dst = nu.row(i);
      const auto sv = v.row(i);
      for (int j = 0; j < g.nx; ++j)
        if (mask.space[j]) dst[j] += dt * sv[j];
    }
  }
  return nu;
}

// Trapezoid birth integral of the female slice against beta(., p).
inline std::vector<double> birth_integral(const Field& f, const Grid& g, const RateTable& rates,
                                          std::span<const double> p,
                                          const std::vector<double>& w) {
  std::vector<double> out(g.nx, 0.0);
  for (int i = 0; i <= g.na; ++i) {
    const double a = g.age(i);
    const auto row = f.row(i);
    for (int j = 0; j < g.nx; ++j) {
      const double b = rates.beta(a, p[j]);
      if (b != 0.0) out[j] += w[i] * b * row[j];
    }
  }
  return out;
}

}  // namespace detail

inline ForwardResult solve_forward(const ForwardProblem& pb) {
  const Grid& g = pb.grid;
  const RateTable& rates = *pb.rates;
  const bool nonlinear = pb.frozen_p == nullptr;

  const DiffusionOp diff_m = DiffusionOp::for_grid(g, rates.K_m);
  const DiffusionOp diff_f = DiffusionOp::for_grid(g, rates.K_f);
  const Mask mask_m = male_mask(pb.windows, g);
  const Mask mask_f = female_mask(pb.windows, g);
  const std::vector<double> w = trapezoid_weights(g);
  auto lam = [&](double a) { return rates.lambda_fert(a); };

  ForwardResult res;
  res.m.slices.reserve(g.nt + 1);
  res.f.slices.reserve(g.nt + 1);
  res.m.renewal_trace = SpaceTimeProfile(g);
  res.f.renewal_trace = SpaceTimeProfile(g);
  res.M = SpaceTimeProfile(g);
  res.N = SpaceTimeProfile(g);
  res.p_used = SpaceTimeProfile(g);

  res.m.slices.push_back(pb.m0);
  res.f.slices.push_back(pb.f0);

  auto record = [&](int k) {
    const Field& mk = res.m.slices[k];
    const Field& fk = res.f.slices[k];
    const auto Mk = age_integral(mk, g, lam);
    for (int j = 0; j < g.nx; ++j) {
      res.M.at(k, j) = Mk[j];
      res.m.renewal_trace.at(k, j) = mk.at(0, j);
      res.f.renewal_trace.at(k, j) = fk.at(0, j);
    }
  };
  record(0);

  for (int k = 0; k < g.nt; ++k) {
    // profile fed to beta for the renewal of slice k+1: frozen p at the new
    // time, or the lagged M of the previous slice in nonlinear mode
    std::vector<double> p(g.nx, 0.0);
    if (nonlinear) {
      for (int j = 0; j < g.nx; ++j) p[j] = res.M.at(k, j);
    } else {
      const auto ps = pb.frozen_p->slice(k + 1);
      p.assign(ps.begin(), ps.end());
    }
    for (int j = 0; j < g.nx; ++j) res.p_used.at(k + 1, j) = p[j];

    Field fn = detail::advance_no_renewal(res.f.slices[k], g, rates.survival_f, diff_f,
                                          pb.control_f, mask_f, k);
    const std::vector<double> births = detail::birth_integral(fn, g, rates, p, w);
    for (int j = 0; j < g.nx; ++j) {
      fn.at(0, j) = rates.gamma * births[j];
      res.N.at(k + 1, j) = births[j];
    }

    Field mn = detail::advance_no_renewal(res.m.slices[k], g, rates.survival_m, diff_m,
                                          pb.control_m, mask_m, k);
    for (int j = 0; j < g.nx; ++j) mn.at(0, j) = (1.0 - rates.gamma) * births[j];

    detail::check_finite(fn, k + 1);
    detail::check_finite(mn, k + 1);
    res.f.slices.push_back(std::move(fn));
    res.m.slices.push_back(std::move(mn));
    record(k + 1);
  }
  // N at t=0, for reporting only
  {
    std::vector<double> p0(g.nx, 0.0);
    if (nonlinear) {
      for (int j = 0; j < g.nx; ++j) p0[j] = res.M.at(0, j);
    } else {
      const auto ps = pb.frozen_p->slice(0);
      p0.assign(ps.begin(), ps.end());
    }
    const auto n0 = detail::birth_integral(res.f.slices[0], g, rates, p0, w);
    for (int j = 0; j < g.nx; ++j) res.N.at(0, j) = n0[j];
  }
  return res;
}

// Discrete norms reported for the well-posedness sanity checks.
struct EnergyReport {
  double l2_q_m = 0.0, l2_q_f = 0.0;          // L2 over Q = Omega x (0,A) x (0,T)
  double h1_semi_m = 0.0, h1_semi_f = 0.0;    // dx-forward-difference seminorm over Q
  double final_m = 0.0, final_f = 0.0;        // L2(Q_A) of the final slices
};

inline EnergyReport energy_report(const ForwardResult& r, const Grid& g) {
  EnergyReport e;
  auto accum = [&](const SexTrajectory& tr, double& l2, double& h1) {
    double s2 = 0.0, sh = 0.0;
    const double inv_dx = 1.0 / g.dx();
    for (const Field& f : tr.slices) {
      for (double x : f.v) s2 += x * x;
      for (int i = 0; i <= g.na; ++i) {
        const auto row = f.row(i);
        double prev = 0.0;  // Dirichlet end
        for (int j = 0; j < g.nx; ++j) {
          const double d = (row[j] - prev) * inv_dx;
          sh += d * d;
          prev = row[j];
        }
        sh += (0.0 - prev) * inv_dx * (0.0 - prev) * inv_dx;
      }
    }
    const double wq = g.dx() * g.da() * g.dt();
    l2 = std::sqrt(s2 * wq);
    h1 = std::sqrt(sh * wq);
  };
  accum(r.m, e.l2_q_m, e.h1_semi_m);
  accum(r.f, e.l2_q_f, e.h1_semi_f);
  e.final_m = norm_qa(r.m.final_slice(), g);
  e.final_f = norm_qa(r.f.final_slice(), g);
  return e;
}

}  // namespace poplab
