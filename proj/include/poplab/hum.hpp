#pragma once

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "poplab/adjoint.hpp"
#include "poplab/forward.hpp"
#include "poplab/grid.hpp"
#include "poplab/krylov.hpp"
#include "poplab/windows.hpp"

namespace poplab {

struct HUMConfig {
  double epsilon = 1e-6;
  double theta = 1e-6;
  double cg_tol = 1e-8;
  int cg_max_iters = 500;
  Variant variant = Variant::both_sexes;
  double rho = 0.0;  // male-only target floor
  // Spectral deflation of the Gram operator's dominant cluster; at epsilon ~
  // 1e-6 plain CG needs the preconditioner to meet the iteration budget.
  int precond_steps = 1000;      // Lanczos budget; 0 disables deflation
  double precond_cutoff = 3e-4;  // keep Ritz values >= cutoff * lambda_max
};

struct HUMResult {
  ControlField control_m, control_f;  // masked controls over Q
  ForwardResult controlled;           // trajectories of the controlled run
  Field n_T, l_T;                     // adjoint final data (dual minimizer)
  double final_norm_m = 0.0;          // ||m(T)|| (restricted to (rho,A) in male-only)
  double final_norm_f = 0.0;
  double control_energy = 0.0;        // integral of v_m^2 over Xi + v_f^2 over Xi'
  double optimality_residual_m = 0.0; // ||m(T) + eps*n_T||
  double optimality_residual_f = 0.0; // ||f(T) + theta*l_T||
  bool converged = false;
  int cg_iterations = 0;
  std::vector<double> cg_residuals;   // relative residual history
};

// Shared scaffolding for the three synthesis variants. The dual variable is
// the adjoint final data; the Gram operator maps it through the backward
// solve, the control extraction and the zero-data forward solve.
class HUMSolver {
 public:
  HUMSolver(const RateTable& rates, const Grid& grid, const ControlWindows& windows,
            const SpaceTimeProfile& p, HUMConfig cfg)
      : rates_(&rates), grid_(grid), windows_(windows), p_(&p), cfg_(cfg) {
    windows_.variant = cfg.variant;
    windows_.rho = cfg.rho;
  }

  bool use_n() const { return cfg_.variant != Variant::female_only; }
  bool use_l() const {
    return cfg_.variant == Variant::both_sexes || cfg_.variant == Variant::female_only;
  }
  size_t block_size() const { return static_cast<size_t>(grid_.na + 1) * grid_.nx; }
  size_t stacked_size() const {
    return (use_n() ? block_size() : 0) + (use_l() ? block_size() : 0);
  }

  // One Gram application on explicit final data; exposed for the symmetry
  // and coercivity probes.
  std::pair<Field, Field> gram_apply(const Field& phi_n, const Field& phi_l) const {
    AdjointResult ar = run_adjoint(phi_n, phi_l);
    ForwardResult fr = run_forward(Field(grid_), Field(grid_), ar);
    Field gm = fr.m.final_slice();
    Field gl = fr.f.final_slice();
    project_target(gm);
    Field en = phi_n;
    en *= cfg_.epsilon;
    Field el = phi_l;
    el *= female_penalty();
    gm += en;
    gl += el;
    if (cfg_.variant == Variant::female_only) gm = Field(grid_);
    return {std::move(gm), std::move(gl)};
  }

  std::vector<double> stacked_apply(const std::vector<double>& x) const {
    auto [phi_n, phi_l] = unpack(x);
    auto [gn, gl] = gram_apply(phi_n, phi_l);
    return pack(gn, gl);
  }

  // Deflation basis of the dominant Gram eigenvalues; deterministic start
  // vector, confined to the male-only constrained subspace so exact zero
  // rows of the dual variable survive preconditioning bitwise.
  krylov::Deflation make_deflation() const {
    if (cfg_.precond_steps <= 0) return {};
    std::mt19937_64 rng(0x517cc1b727220a95ull);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Field sn(grid_), sl(grid_);
    for (double& x : sn.v) x = u(rng);
    for (double& x : sl.v) x = u(rng);
    project_target(sn);
    auto apply = [this](const std::vector<double>& x) { return stacked_apply(x); };
    return krylov::lanczos_deflation(apply, pack(sn, sl), cfg_.precond_steps,
                                     cfg_.precond_cutoff);
  }

  HUMResult synthesize(const Field& m0, const Field& f0,
                       const krylov::Deflation* pre = nullptr) const {
    // right-hand side: minus the free final state, masked to the target
    ForwardProblem free_pb = base_forward(m0, f0);
    ForwardResult free_run = solve_forward(free_pb);
    Field bm = free_run.m.final_slice();
    Field bf = free_run.f.final_slice();
    project_target(bm);
    bm *= -1.0;
    bf *= -1.0;
    if (cfg_.variant == Variant::female_only) bm = Field(grid_);
    const std::vector<double> b = pack(bm, bf);

    auto apply = [this](const std::vector<double>& x) { return stacked_apply(x); };
    krylov::Deflation local;
    if (pre == nullptr && cfg_.precond_steps > 0) {
      local = make_deflation();
      pre = &local;
    }
    std::vector<double> x;
    const krylov::CGOutcome cg =
        krylov::conjugate_gradient(apply, b, x, cfg_.cg_tol, cfg_.cg_max_iters, pre);

    HUMResult res;
    res.converged = cg.converged;
    res.cg_iterations = cg.iterations;
    res.cg_residuals = std::move(cg.residuals);
    auto [phi_n, phi_l] = unpack(x);
    res.n_T = phi_n;
    res.l_T = phi_l;

    AdjointResult ar = run_adjoint(phi_n, phi_l);
    res.control_m = use_n() ? ar.obs_m : ControlField{};
    res.control_f = use_l() ? ar.obs_f : ControlField{};

    ForwardProblem ctrl_pb = base_forward(m0, f0);
    if (use_n()) ctrl_pb.control_m = &res.control_m;
    if (use_l()) ctrl_pb.control_f = &res.control_f;
    res.controlled = solve_forward(ctrl_pb);

    const Field& mT = res.controlled.m.final_slice();
    const Field& fT = res.controlled.f.final_slice();
    if (cfg_.variant == Variant::male_only)
      res.final_norm_m = norm_qa_ages(mT, grid_, cfg_.rho, rates_->A + grid_.da());
    else
      res.final_norm_m = norm_qa(mT, grid_);
    res.final_norm_f = norm_qa(fT, grid_);

    if (use_n()) {
      Field om = mT;
      project_target(om);
      Field en = phi_n;
      en *= cfg_.epsilon;
      om += en;
      res.optimality_residual_m = norm_qa(om, grid_);
      res.control_energy += dot_q(res.control_m, res.control_m, grid_);
    }
    if (use_l()) {
      Field of = fT;
      Field el = phi_l;
      el *= female_penalty();
      of += el;
      res.optimality_residual_f = norm_qa(of, grid_);
      res.control_energy += dot_q(res.control_f, res.control_f, grid_);
    }
    return res;
  }

  const ControlWindows& windows() const { return windows_; }

 private:
  double female_penalty() const {
    return cfg_.variant == Variant::female_only ? cfg_.epsilon : cfg_.theta;
  }

  std::vector<double> pack(const Field& n, const Field& l) const {
    std::vector<double> x(stacked_size(), 0.0);
    size_t off = 0;
    if (use_n()) {
      std::copy(n.v.begin(), n.v.end(), x.begin());
      off = block_size();
    }
    if (use_l()) std::copy(l.v.begin(), l.v.end(), x.begin() + off);
    return x;
  }

  std::pair<Field, Field> unpack(const std::vector<double>& x) const {
    Field n(grid_), l(grid_);
    size_t off = 0;
    if (use_n()) {
      std::copy(x.begin(), x.begin() + block_size(), n.v.begin());
      off = block_size();
    }
    if (use_l()) std::copy(x.begin() + off, x.begin() + off + block_size(), l.v.begin());
    return {std::move(n), std::move(l)};
  }

  ForwardProblem base_forward(const Field& m0, const Field& f0) const {
    ForwardProblem pb;
    pb.rates = rates_;
    pb.grid = grid_;
    pb.windows = windows_;
    pb.m0 = m0;
    pb.f0 = f0;
    pb.frozen_p = p_;
    return pb;
  }

  // Target projection of the male channel: identity except in the male-only
  // variant, where the penalty and the dual variable live on ages (rho, A).
  void project_target(Field& f) const {
    if (cfg_.variant == Variant::male_only)
      restrict_ages(f, grid_, cfg_.rho, rates_->A + grid_.da());
  }

  AdjointResult run_adjoint(const Field& phi_n, const Field& phi_l) const {
    AdjointProblem ap;
    ap.rates = rates_;
    ap.grid = grid_;
    ap.windows = windows_;
    ap.p = p_;
    ap.final_n = phi_n;
    project_target(ap.final_n);
    if (cfg_.variant == Variant::female_only) ap.final_n = Field(grid_);
    ap.final_l = phi_l;
    return solve_adjoint(ap);
  }

  ForwardResult run_forward(const Field& m0, const Field& f0, const AdjointResult& ar) const {
    ForwardProblem pb = base_forward(m0, f0);
    if (cfg_.variant != Variant::female_only) pb.control_m = &ar.obs_m;
    if (cfg_.variant != Variant::male_only) pb.control_f = &ar.obs_f;
    return solve_forward(pb);
  }

  const RateTable* rates_;
  Grid grid_;
  ControlWindows windows_;
  const SpaceTimeProfile* p_;
  HUMConfig cfg_;
};

inline HUMResult synthesize(const RateTable& rates, const Grid& grid,
                            const ControlWindows& windows, const SpaceTimeProfile& p,
                            const Field& m0, const Field& f0, const HUMConfig& cfg,
                            const krylov::Deflation* pre = nullptr) {
  return HUMSolver(rates, grid, windows, p, cfg).synthesize(m0, f0, pre);
}

}  // namespace poplab
