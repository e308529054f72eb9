#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "poplab/forward.hpp"
#include "poplab/harness.hpp"

using namespace poplab;

namespace {

RateTable plain_rates(double A, double K, double mu0, double c) {
  RateTable r = RateTable::make(A, 0.5, K, K, SurvivalCurve{A, mu0, c},
                                SurvivalCurve{A, mu0, c}, 0.5 * A, 1.0, 1.0, 1.0);
  r.beta = [](double, double) { return 0.0; };
  return r;
}

ControlWindows default_windows() {
  ControlWindows w;
  w.omega = {0.25, 0.75};
  w.omega_prime = {0.25, 0.75};
  w.age_m = {0.2, 0.8};
  w.age_f = {0.1, 0.9};
  return w;
}

Field random_field(const Grid& g, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Field f(g);
  for (double& x : f.v) x = u(rng);
  return f;
}

}  // namespace

TEST_CASE("pure transport is a bitwise index shift") {
  const Grid g(6, 12, 1.0, 0.25);  // 3 steps
  const RateTable rates = plain_rates(1.0, 0.0, 0.0, 0.0);
  ForwardProblem pb;
  pb.rates = &rates;
  pb.grid = g;
  pb.windows = default_windows();
  pb.m0 = random_field(g, 3);
  pb.f0 = random_field(g, 4);
  const ForwardResult r = solve_forward(pb);
  for (int k = 0; k <= g.nt; ++k)
    for (int i = 0; i <= g.na; ++i)
      for (int j = 0; j < g.nx; ++j) {
        const double expect = i >= k ? pb.m0.at(i - k, j) : 0.0;
        CHECK(r.m.slices[k].at(i, j) == expect);  // exact, not approximate
      }
}

TEST_CASE("survival decay telescopes to the closed-form ratio") {
  const Grid g(4, 20, 1.0, 0.25);  // 5 steps
  const RateTable rates = plain_rates(1.0, 0.0, 0.4, 1.5);
  ForwardProblem pb;
  pb.rates = &rates;
  pb.grid = g;
  pb.windows = default_windows();
  pb.m0 = random_field(g, 5);
  pb.f0 = Field(g);
  const ForwardResult r = solve_forward(pb);
  const int k = g.nt;
  for (int i = k; i <= g.na; ++i) {
    const double ratio = rates.survival_m.ratio(g.age(i - k), k * g.da());
    for (int j = 0; j < g.nx; ++j)
      CHECK(r.m.slices[k].at(i, j) ==
            doctest::Approx(pb.m0.at(i - k, j) * ratio).epsilon(1e-13));
  }
}

TEST_CASE("diffusion factors accumulate per step on eigenmodes") {
  const Grid g(15, 8, 1.0, 0.25);  // 2 steps
  const double K = 0.1;
  const RateTable rates = plain_rates(1.0, K, 0.0, 0.0);
  ForwardProblem pb;
  pb.rates = &rates;
  pb.grid = g;
  pb.windows = default_windows();
  pb.m0 = Field(g);
  for (int i = 0; i <= g.na; ++i)
    for (int j = 0; j < g.nx; ++j)
      pb.m0.at(i, j) = std::sin(std::numbers::pi * g.x(j));
  pb.f0 = Field(g);
  const ForwardResult r = solve_forward(pb);
  const DiffusionOp op = DiffusionOp::for_grid(g, K);
  const double fac = op.eigen_factor(1, g.dx());
  const int k = g.nt;
  for (int i = k; i <= g.na; ++i)
    for (int j = 0; j < g.nx; ++j)
      CHECK(r.m.slices[k].at(i, j) ==
            doctest::Approx(std::pow(fac, k) * pb.m0.at(i, j)).epsilon(1e-12));
}

TEST_CASE("renewal splits births by sex ratio against an independent quadrature") {
  const Grid g(5, 10, 1.0, 0.2);
  RateTable rates = plain_rates(1.0, 0.0, 0.0, 0.0);
  rates.gamma = 0.4;
  rates.beta = [](double a, double) { return a * (1.0 - a); };  // p-independent
  ForwardProblem pb;
  pb.rates = &rates;
  pb.grid = g;
  pb.windows = default_windows();
  pb.m0 = Field(g);
  pb.f0 = random_field(g, 9);
  const ForwardResult r = solve_forward(pb);
  for (int k = 1; k <= g.nt; ++k) {
    // trapezoid of beta * f over age, on the post-transport female slice
    for (int j = 0; j < g.nx; ++j) {
      double births = 0.0;
      for (int i = 0; i <= g.na; ++i) {
        const double w = (i == 0 || i == g.na) ? 0.5 * g.da() : g.da();
        births += w * rates.beta(g.age(i), 0.0) * r.f.slices[k].at(i, j);
      }
      CHECK(r.m.slices[k].at(0, j) == doctest::Approx((1.0 - rates.gamma) * births).epsilon(1e-10));
      CHECK(r.f.slices[k].at(0, j) == doctest::Approx(rates.gamma * births).epsilon(1e-10));
      CHECK(r.N.at(k, j) == doctest::Approx(births).epsilon(1e-10));
    }
  }
}

TEST_CASE("control source enters with dt weight inside the mask only") {
  const Grid g(9, 10, 1.0, 0.1);  // 1 step
  const RateTable rates = plain_rates(1.0, 0.0, 0.0, 0.0);
  ControlWindows w = default_windows();
  w.omega = {0.35, 0.75};
  ControlField ctrl(g);
  for (auto& s : ctrl.slices)
    for (double& x : s.v) x = 1.0;
  ForwardProblem pb;
  pb.rates = &rates;
  pb.grid = g;
  pb.windows = w;
  pb.m0 = Field(g);
  pb.f0 = Field(g);
  pb.control_m = &ctrl;
  const ForwardResult r = solve_forward(pb);
  const Mask mask = male_mask(w, g);
  for (int i = 0; i <= g.na; ++i)
    for (int j = 0; j < g.nx; ++j) {
      const double expect = (i >= 1 && mask.on(i, j)) ? g.dt() : 0.0;
      CHECK(r.m.slices[1].at(i, j) == expect);
    }
}

TEST_CASE("nonlinear mode lags the profile by one slice and re-runs frozen") {
  const ScenarioConfig cfg = [] {
    ScenarioConfig c = bundled_scenario("thm11-desk");
    c.nx = 8;
    c.na = 10;
    return c;
  }();
  const Grid g = make_grid(cfg);
  const RateTable rates = make_rates(cfg);
  ForwardProblem pb;
  pb.rates = &rates;
  pb.grid = g;
  pb.windows = make_windows(cfg);
  pb.m0 = initial_data(cfg, g, Sex::male);
  pb.f0 = initial_data(cfg, g, Sex::female);
  const ForwardResult nl = solve_forward(pb);
  for (int k = 0; k < g.nt; ++k)
    for (int j = 0; j < g.nx; ++j)
      CHECK(nl.p_used.at(k + 1, j) == nl.M.at(k, j));

  ForwardProblem frozen = pb;
  frozen.frozen_p = &nl.p_used;
  const ForwardResult fz = solve_forward(frozen);
  for (int k = 0; k <= g.nt; ++k)
    for (size_t i = 0; i < fz.m.slices[k].v.size(); ++i) {
      CHECK(fz.m.slices[k].v[i] == nl.m.slices[k].v[i]);
      CHECK(fz.f.slices[k].v[i] == nl.f.slices[k].v[i]);
    }
}

TEST_CASE("manufactured transport-diffusion error at the default grid") {
  const double err = manufactured_error(64, 80, 1.0, 0.25, 0.02);
  CHECK(err <= 1e-3);
  CHECK(err > 0.0);
}

TEST_CASE("energy report vanishes on the zero scenario") {
  const Grid g(6, 8, 1.0, 0.25);
  const RateTable rates = plain_rates(1.0, 0.01, 0.1, 1.0);
  ForwardProblem pb;
  pb.rates = &rates;
  pb.grid = g;
  pb.windows = default_windows();
  pb.m0 = Field(g);
  pb.f0 = Field(g);
  const EnergyReport e = energy_report(solve_forward(pb), g);
  CHECK(e.l2_q_m == 0.0);
  CHECK(e.h1_semi_f == 0.0);
  CHECK(e.final_m == 0.0);
}
