#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "poplab/adjoint.hpp"
#include "poplab/scenario.hpp"

using namespace poplab;

namespace {

Field random_field(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Field f(g);
  for (double& x : f.v) x = u(rng);
  return f;
}

ControlField random_control(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ControlField c(g);
  for (auto& s : c.slices)
    for (double& x : s.v) x = u(rng);
  return c;
}

SpaceTimeProfile random_profile(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  SpaceTimeProfile p(g);
  for (double& x : p.v) x = u(rng);
  return p;
}

struct Setup {
  ScenarioConfig cfg;
  Grid grid;
  RateTable rates;
  ControlWindows windows;
};

Setup make_setup(int nx, int na, double T) {
  Setup s{bundled_scenario("thm11-desk"), Grid(), RateTable{}, ControlWindows{}};
  s.cfg.nx = nx;
  s.cfg.na = na;
  s.cfg.T = T;
  s.grid = make_grid(s.cfg);
  s.rates = make_rates(s.cfg);
  s.windows = make_windows(s.cfg);
  return s;
}

}  // namespace

TEST_CASE("discrete Green's identity holds to roundoff on random data") {
  std::mt19937_64 rng(20240817);
  for (auto [nx, na, T] : {std::tuple{8, 8, 1.0}, {32, 40, 0.6}}) {
    Setup s = make_setup(nx, na, T);
    for (int trial = 0; trial < 20; ++trial) {
      const SpaceTimeProfile p = random_profile(s.grid, rng);
      ControlField vm = random_control(s.grid, rng);
      ControlField vf = random_control(s.grid, rng);
      ForwardProblem fp;
      fp.rates = &s.rates;
      fp.grid = s.grid;
      fp.windows = s.windows;
      fp.m0 = random_field(s.grid, rng);
      fp.f0 = random_field(s.grid, rng);
      fp.control_m = &vm;
      fp.control_f = &vf;
      fp.frozen_p = &p;
      const ForwardResult fr = solve_forward(fp);

      AdjointProblem ap;
      ap.rates = &s.rates;
      ap.grid = s.grid;
      ap.windows = s.windows;
      ap.final_n = random_field(s.grid, rng);
      ap.final_l = random_field(s.grid, rng);
      ap.p = &p;
      const AdjointResult ar = solve_adjoint(ap);

      const DualityGap gap = duality_gap(fp, fr, ap, ar);
      INFO("grid ", nx, "x", na, " trial ", trial);
      CHECK(gap.relative() <= 1e-12);
    }
  }
}

TEST_CASE("zero final data gives identically zero adjoint and observations") {
  Setup s = make_setup(6, 8, 0.5);
  const SpaceTimeProfile p(s.grid);
  AdjointProblem ap;
  ap.rates = &s.rates;
  ap.grid = s.grid;
  ap.windows = s.windows;
  ap.final_n = Field(s.grid);
  ap.final_l = Field(s.grid);
  ap.p = &p;
  const AdjointResult ar = solve_adjoint(ap);
  CHECK(ar.obs_energy_m == 0.0);
  CHECK(ar.obs_energy_f == 0.0);
  for (const Field& f : ar.n.slices)
    for (double x : f.v) CHECK(x == 0.0);
}

TEST_CASE("observation fields are supported on the control masks") {
  std::mt19937_64 rng(5);
  Setup s = make_setup(10, 10, 0.5);
  const SpaceTimeProfile p = random_profile(s.grid, rng);
  AdjointProblem ap;
  ap.rates = &s.rates;
  ap.grid = s.grid;
  ap.windows = s.windows;
  ap.final_n = random_field(s.grid, rng);
  ap.final_l = random_field(s.grid, rng);
  ap.p = &p;
  const AdjointResult ar = solve_adjoint(ap);
  const Mask mm = male_mask(s.windows, s.grid);
  const Mask mf = female_mask(s.windows, s.grid);
  for (int k = 0; k < s.grid.nt; ++k)
    for (int i = 0; i <= s.grid.na; ++i)
      for (int j = 0; j < s.grid.nx; ++j) {
        if (!mm.on(i, j)) CHECK(ar.obs_m.slices[k].at(i, j) == 0.0);
        if (!mf.on(i, j)) CHECK(ar.obs_f.slices[k].at(i, j) == 0.0);
      }
}

TEST_CASE("male adjoint converges to the characteristic representation at order >= 0.9") {
  std::mt19937_64 rng(77);
  double prev_err = 0.0;
  std::vector<double> errs;
  for (int na : {16, 32, 64}) {
    Setup s = make_setup(12, na, 0.5);
    // smooth final datum so the modal content is resolved
    Field nT(s.grid);
    for (int i = 0; i <= s.grid.na; ++i)
      for (int j = 0; j < s.grid.nx; ++j)
        nT.at(i, j) = std::sin(std::numbers::pi * s.grid.age(i)) *
                      std::sin(std::numbers::pi * s.grid.x(j));
    const SpaceTimeProfile p(s.grid);
    AdjointProblem ap;
    ap.rates = &s.rates;
    ap.grid = s.grid;
    ap.windows = s.windows;
    ap.final_n = nT;
    ap.final_l = Field(s.grid);
    ap.p = &p;
    const AdjointResult ar = solve_adjoint(ap);
    Field diff = ar.n.slices[0];
    diff -= characteristic_oracle(nT, s.grid, s.rates, 0);
    errs.push_back(norm_qa(diff, s.grid));
    prev_err = errs.back();
  }
  (void)prev_err;
  REQUIRE(errs.size() == 3);
  CHECK(errs[0] > errs[1]);
  CHECK(errs[1] > errs[2]);
  const double order1 = std::log2(errs[0] / errs[1]);
  const double order2 = std::log2(errs[1] / errs[2]);
  INFO("orders ", order1, " ", order2);
  CHECK(order1 >= 0.9);
  CHECK(order2 >= 0.9);
}

TEST_CASE("duality gap rejects mismatched grids") {
  Setup a = make_setup(8, 8, 0.5);
  Setup b = make_setup(8, 16, 0.5);
  ForwardProblem fp;
  fp.grid = a.grid;
  AdjointProblem ap;
  ap.grid = b.grid;
  CHECK_THROWS_AS(duality_gap(fp, ForwardResult{}, ap, AdjointResult{}), std::invalid_argument);
}
