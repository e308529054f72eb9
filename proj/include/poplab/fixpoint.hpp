#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "poplab/forward.hpp"
#include "poplab/grid.hpp"
#include "poplab/hum.hpp"

namespace poplab {

struct FixedPointConfig {
  double damping = 0.5;        // rho in (0,1]
  double tol = 1e-8;           // relative L2(Q_T) residual
  int max_outer_iters = 30;
  bool start_from_free_run = false;  // initial p: zero, or M of the free run
  // Inexact iteration: the inner CG tolerance tightens with the outer
  // residual so synthesis noise never floors the Picard decrease.
  double inner_tol_factor = 1e-2;
  double inner_tol_min = 1e-11;
};

struct FixedPointResult {
  bool converged = false;
  int iterations = 0;
  std::vector<double> residuals;    // relative update norm per outer iteration
  SpaceTimeProfile p_star;
  HUMResult hum;                    // synthesis at the final p
  // nonlinear re-solve with the synthesized controls
  double consistency_residual = 0.0;  // ||M_nonlinear - p*|| over Q_T
  double nonlinear_final_m = 0.0;
  double nonlinear_final_f = 0.0;
};

// The map p -> integral of lambda against the controlled male trajectory,
// where the controls are synthesized for the frozen profile p.
inline SpaceTimeProfile lambda_map(const RateTable& rates, const Grid& grid,
                                   const ControlWindows& windows, const SpaceTimeProfile& p,
                                   const Field& m0, const Field& f0, const HUMConfig& cfg,
                                   HUMResult* out_hum = nullptr,
                                   const krylov::Deflation* pre = nullptr) {
  HUMResult hum = synthesize(rates, grid, windows, p, m0, f0, cfg, pre);
  SpaceTimeProfile next = hum.controlled.M;
  if (out_hum != nullptr) *out_hum = std::move(hum);
  return next;
}

// Damped Picard iteration p^{k+1} = (1-rho) p^k + rho * Lambda(p^k).
inline FixedPointResult iterate(const RateTable& rates, const Grid& grid,
                                const ControlWindows& windows, const Field& m0, const Field& f0,
                                const FixedPointConfig& fp_cfg, const HUMConfig& hum_cfg) {
  FixedPointResult res;
  SpaceTimeProfile p(grid);
  if (fp_cfg.start_from_free_run) {
    ForwardProblem free_pb;
    free_pb.rates = &rates;
    free_pb.grid = grid;
    free_pb.windows = windows;
    free_pb.m0 = m0;
    free_pb.f0 = f0;
    p = solve_forward(free_pb).M;  // nonlinear free run
  }

  // deflation basis built once at the initial profile; the Gram operator
  // depends on p only through the renewal coupling, so the stale basis stays
  // an effective preconditioner across the outer updates
  const krylov::Deflation pre =
      HUMSolver(rates, grid, windows, p, hum_cfg).make_deflation();

  HUMResult last_hum;
  HUMConfig inner_cfg = hum_cfg;
  for (int it = 0; it < fp_cfg.max_outer_iters; ++it) {
    if (!res.residuals.empty())
      inner_cfg.cg_tol = std::clamp(fp_cfg.inner_tol_factor * res.residuals.back(),
                                    fp_cfg.inner_tol_min, hum_cfg.cg_tol);
    const SpaceTimeProfile mapped =
        lambda_map(rates, grid, windows, p, m0, f0, inner_cfg, &last_hum, &pre);
    SpaceTimeProfile next = p;
    for (size_t i = 0; i < next.v.size(); ++i)
      next.v[i] = (1.0 - fp_cfg.damping) * p.v[i] + fp_cfg.damping * mapped.v[i];

    SpaceTimeProfile diff = next;
    for (size_t i = 0; i < diff.v.size(); ++i) diff.v[i] -= p.v[i];
    const double rel = norm_qt(diff, grid) / std::max(1.0, norm_qt(p, grid));
    res.residuals.push_back(rel);
    res.iterations = it + 1;
    p = std::move(next);
    if (rel <= fp_cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.p_star = p;
  res.hum = std::move(last_hum);

  // nonlinear consistency: drive system (1) with the synthesized controls
  ForwardProblem nl;
  nl.rates = &rates;
  nl.grid = grid;
  nl.windows = windows;
  nl.m0 = m0;
  nl.f0 = f0;
  if (!res.hum.control_m.empty()) nl.control_m = &res.hum.control_m;
  if (!res.hum.control_f.empty()) nl.control_f = &res.hum.control_f;
  const ForwardResult nl_run = solve_forward(nl);
  SpaceTimeProfile cdiff = nl_run.M;
  for (size_t i = 0; i < cdiff.v.size(); ++i) cdiff.v[i] -= res.p_star.v[i];
  res.consistency_residual = norm_qt(cdiff, grid);
  if (hum_cfg.variant == Variant::male_only)
    res.nonlinear_final_m =
        norm_qa_ages(nl_run.m.final_slice(), grid, hum_cfg.rho, rates.A + grid.da());
  else
    res.nonlinear_final_m = norm_qa(nl_run.m.final_slice(), grid);
  res.nonlinear_final_f = norm_qa(nl_run.f.final_slice(), grid);
  return res;
}

}  // namespace poplab
