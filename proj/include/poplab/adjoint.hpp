#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "poplab/forward.hpp"
#include "poplab/grid.hpp"
#include "poplab/operators.hpp"
#include "poplab/rates.hpp"
#include "poplab/windows.hpp"

namespace poplab {

// Backward cascade problem: final data (n_T, l_T) at t = T, frozen profile p.
// The male-only (h,g) system is the same cascade with masked final data; the
// female-only system is the l-equation with n forced to zero.
struct AdjointProblem {
  const RateTable* rates = nullptr;
  Grid grid;
  ControlWindows windows;
  Field final_n, final_l;
  const SpaceTimeProfile* p = nullptr;
};

struct AdjointResult {
  SexTrajectory n, l;        // slices indexed 0..nt like the forward
  ControlField obs_m, obs_f; // masked observation fields; index k pairs with
                             // the forward control slice k in the duality sum
  double obs_energy_m = 0.0; // dx.da.dt energy of obs over Xi / Theta
  double obs_energy_f = 0.0; // dx.da.dt energy over Xi'
};

// Marches backward from t=T, each step the algebraic transpose of the forward
// step: transposed renewal (the age-0 traces scatter through the quadrature
// weights into a distributed source), transposed diffusion (self-adjoint
// solve), transposed survival decay and transposed age shift. The l-equation
// receives (1-gamma)*beta*n(x,0,t) + gamma*beta*l(x,0,t) from the slice of
// the previous backward step; n(x,A,t) = l(x,A,t) = 0 is enforced by the
// shift transpose.
inline AdjointResult solve_adjoint(const AdjointProblem& pb) {
  const Grid& g = pb.grid;
  const RateTable& rates = *pb.rates;
  if (pb.p == nullptr) throw std::invalid_argument("solve_adjoint: frozen profile p required");

  const DiffusionOp diff_m = DiffusionOp::for_grid(g, rates.K_m);
  const DiffusionOp diff_f = DiffusionOp::for_grid(g, rates.K_f);
  const Mask mask_m = male_mask(pb.windows, g);
  const Mask mask_f = female_mask(pb.windows, g);
  const std::vector<double> w = trapezoid_weights(g);
  const double da = g.da();

  AdjointResult res;
  res.n.slices.assign(g.nt + 1, Field(g));
  res.l.slices.assign(g.nt + 1, Field(g));
  res.n.renewal_trace = SpaceTimeProfile(g);
  res.l.renewal_trace = SpaceTimeProfile(g);
  res.obs_m = ControlField(g);
  res.obs_f = ControlField(g);
  res.n.slices[g.nt] = pb.final_n;
  res.l.slices[g.nt] = pb.final_l;

  auto record_trace = [&](int k) {
    for (int j = 0; j < g.nx; ++j) {
      res.n.renewal_trace.at(k, j) = res.n.slices[k].at(0, j);
      res.l.renewal_trace.at(k, j) = res.l.slices[k].at(0, j);
    }
  };
  record_trace(g.nt);

  for (int k = g.nt - 1; k >= 0; --k) {
    const Field& n1 = res.n.slices[k + 1];
    const Field& l1 = res.l.slices[k + 1];

    // pre-transport intermediates: row 0 zeroed, scatter of the age-0 traces
    Field wn = n1;
    for (int j = 0; j < g.nx; ++j) wn.at(0, j) = 0.0;

    Field wl = l1;
    for (int j = 0; j < g.nx; ++j) wl.at(0, j) = 0.0;
    for (int i = 0; i <= g.na; ++i) {
      const double a = g.age(i);
      auto row = wl.row(i);
      for (int j = 0; j < g.nx; ++j) {
        const double b = rates.beta(a, pb.p->at(k + 1, j));
        if (b == 0.0) continue;
        row[j] += w[i] * b *
                  ((1.0 - rates.gamma) * n1.at(0, j) + rates.gamma * l1.at(0, j));
      }
    }

    // observation fields: the transposed source-injection applied to the
    // intermediates, restricted to the control masks
    Field om = wn;
    apply_mask(om, mask_m);
    Field of = wl;
    apply_mask(of, mask_f);
    res.obs_energy_m += dot_qa(om, om, g) * g.dt();
    res.obs_energy_f += dot_qa(of, of, g) * g.dt();
    res.obs_m.slices[k] = std::move(om);
    res.obs_f.slices[k] = std::move(of);

    // transposed diffusion, then transposed survival decay and age shift
    Field nk(g), lk(g);
    for (int i = 0; i <= g.na; ++i) {
      diff_m.apply_inplace(wn.row(i));
      diff_f.apply_inplace(wl.row(i));
    }
    for (int i = 0; i < g.na; ++i) {
      const double sm = rates.survival_m.ratio(g.age(i), da);
      const double sf = rates.survival_f.ratio(g.age(i), da);
      const auto srcn = wn.row(i + 1);
      const auto srcl = wl.row(i + 1);
      auto dn = nk.row(i);
      auto dl = lk.row(i);
      for (int j = 0; j < g.nx; ++j) {
        dn[j] = sm * srcn[j];
        dl[j] = sf * srcl[j];
      }
    }
    detail::check_finite(nk, k);
    detail::check_finite(lk, k);
    res.n.slices[k] = std::move(nk);
    res.l.slices[k] = std::move(lk);
    record_trace(k);
  }
  return res;
}

// Closed-form characteristic representation of the source-free n-equation:
// age shift of n_T, survival ratio in closed form, heat semigroup via the
// spectral propagator; zero where A - a < T - t.
inline Field characteristic_oracle(const Field& n_T, const Grid& g, const RateTable& rates,
                                   int time_index) {
  const SpectralHeat heat(g);
  const int shift = g.nt - time_index;
  const double tau = shift * g.dt();
  Field out(g);
  for (int i = 0; i <= g.na; ++i) {
    if (i + shift > g.na) continue;  // A - a < T - t
    const double ratio = rates.survival_m.ratio(g.age(i), shift * g.da());
    const auto prop = heat.propagate(n_T.row(i + shift), rates.K_m, tau);
    auto row = out.row(i);
    for (int j = 0; j < g.nx; ++j) row[j] = ratio * prop[j];
  }
  return out;
}

// Discrete Green's identity defect between a forward run (controls v, data
// m0,f0) and an adjoint run (final data n_T,l_T), same grid and same p.
struct DualityGap {
  double absolute = 0.0;
  double scale = 0.0;  // sum of the magnitudes of the pairing terms
  double relative() const { return scale > 0.0 ? absolute / scale : absolute; }
};

inline DualityGap duality_gap(const ForwardProblem& fp, const ForwardResult& fr,
                              const AdjointProblem& ap, const AdjointResult& ar) {
  const Grid& g = fp.grid;
  if (g.nx != ap.grid.nx || g.na != ap.grid.na || g.nt != ap.grid.nt)
    throw std::invalid_argument("duality_gap: grid mismatch");

  const double tf_m = dot_qa(fr.m.final_slice(), ap.final_n, g);
  const double tf_f = dot_qa(fr.f.final_slice(), ap.final_l, g);
  const double t0_m = dot_qa(fp.m0, ar.n.slices[0], g);
  const double t0_f = dot_qa(fp.f0, ar.l.slices[0], g);
  double tc_m = 0.0, tc_f = 0.0;
  if (fp.control_m != nullptr && !fp.control_m->empty())
    tc_m = dot_q(*fp.control_m, ar.obs_m, g);
  if (fp.control_f != nullptr && !fp.control_f->empty())
    tc_f = dot_q(*fp.control_f, ar.obs_f, g);

  DualityGap gap;
  gap.absolute = std::abs(tf_m + tf_f - t0_m - t0_f - tc_m - tc_f);
  gap.scale = std::abs(tf_m) + std::abs(tf_f) + std::abs(t0_m) + std::abs(t0_f) +
              std::abs(tc_m) + std::abs(tc_f);
  return gap;
}

}  // namespace poplab
