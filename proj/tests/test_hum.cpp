#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "poplab/hum.hpp"
#include "poplab/scenario.hpp"

using namespace poplab;

namespace {

struct Setup {
  ScenarioConfig cfg;
  Grid grid;
  RateTable rates;
  ControlWindows windows;
  SpaceTimeProfile p;
  Field m0, f0;
};

Setup make_setup(int nx, int na, Variant variant = Variant::both_sexes) {
  Setup s;
  s.cfg = bundled_scenario(variant == Variant::male_only ? "thm12-male-desk" : "thm11-desk");
  if (variant == Variant::female_only) s.cfg = bundled_scenario("thm12-female-desk");
  s.cfg.nx = nx;
  s.cfg.na = na;
  s.grid = make_grid(s.cfg);
  s.rates = make_rates(s.cfg);
  s.windows = make_windows(s.cfg);
  s.m0 = initial_data(s.cfg, s.grid, Sex::male);
  s.f0 = initial_data(s.cfg, s.grid, Sex::female);
  // frozen profile: the free nonlinear run
  ForwardProblem pb;
  pb.rates = &s.rates;
  pb.grid = s.grid;
  pb.windows = s.windows;
  pb.m0 = s.m0;
  pb.f0 = s.f0;
  s.p = solve_forward(pb).M;
  return s;
}

Field random_field(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Field f(g);
  for (double& x : f.v) x = u(rng);
  return f;
}

}  // namespace

TEST_CASE("conjugate gradient solves a small SPD system") {
  // A = M^T M + I via its action, against a dense oracle solve by elimination
  const int n = 12;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> M(n * n);
  for (double& x : M) x = u(rng);
  auto apply = [&](const std::vector<double>& x) {
    std::vector<double> mx(n, 0.0), out(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) mx[i] += M[i * n + j] * x[j];
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) out[j] += M[i * n + j] * mx[i];
      out[j] += x[j];
    }
    return out;
  };
  std::vector<double> b(n);
  for (double& x : b) x = u(rng);
  std::vector<double> x;
  const krylov::CGOutcome out = krylov::conjugate_gradient(apply, b, x, 1e-12, 200);
  CHECK(out.converged);
  const auto ax = apply(x);
  for (int i = 0; i < n; ++i) CHECK(ax[i] == doctest::Approx(b[i]).epsilon(1e-9));

  std::vector<double> x0;
  const auto trivial = krylov::conjugate_gradient(apply, std::vector<double>(n, 0.0), x0,
                                                    1e-12, 200);
  CHECK(trivial.converged);
  CHECK(trivial.iterations == 0);
}

TEST_CASE("Gram operator is symmetric and eps-coercive on random probes") {
  Setup s = make_setup(8, 10);
  HUMConfig cfg;
  cfg.epsilon = 1e-4;
  cfg.theta = 1e-4;
  const HUMSolver solver(s.rates, s.grid, s.windows, s.p, cfg);
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const Field an = random_field(s.grid, rng), al = random_field(s.grid, rng);
    const Field bn = random_field(s.grid, rng), bl = random_field(s.grid, rng);
    const auto [gan, gal] = solver.gram_apply(an, al);
    const auto [gbn, gbl] = solver.gram_apply(bn, bl);
    const double lhs = dot_qa(gan, bn, s.grid) + dot_qa(gal, bl, s.grid);
    const double rhs = dot_qa(an, gbn, s.grid) + dot_qa(al, gbl, s.grid);
    const double scale = std::abs(lhs) + std::abs(rhs);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (scale > 0.0 ? scale : 1.0));

    const double quad = dot_qa(gan, an, s.grid) + dot_qa(gal, al, s.grid);
    const double nrm2 = dot_qa(an, an, s.grid) + dot_qa(al, al, s.grid);
    CHECK(quad >= cfg.epsilon * nrm2 * (1.0 - 1e-10));
  }
}

TEST_CASE("synthesis beats the free run and satisfies the optimality relation") {
  Setup s = make_setup(16, 20);
  HUMConfig cfg;
  cfg.variant = Variant::both_sexes;
  const HUMResult res = synthesize(s.rates, s.grid, s.windows, s.p, s.m0, s.f0, cfg);
  CHECK(res.converged);
  CHECK(res.cg_iterations <= cfg.cg_max_iters);

  ForwardProblem free_pb;
  free_pb.rates = &s.rates;
  free_pb.grid = s.grid;
  free_pb.windows = s.windows;
  free_pb.m0 = s.m0;
  free_pb.f0 = s.f0;
  free_pb.frozen_p = &s.p;
  const ForwardResult free_run = solve_forward(free_pb);
  CHECK(res.final_norm_m < 0.1 * norm_qa(free_run.m.final_slice(), s.grid));
  CHECK(res.final_norm_f < 0.1 * norm_qa(free_run.f.final_slice(), s.grid));

  // m(T) = -eps n_T at the optimum
  CHECK(res.optimality_residual_m <= 1e-4 * res.final_norm_m);
  CHECK(res.optimality_residual_f <= 1e-4 * res.final_norm_f);
  CHECK(res.control_energy > 0.0);
}

TEST_CASE("zero initial data synthesizes the zero control") {
  Setup s = make_setup(8, 10);
  HUMConfig cfg;
  const HUMResult res =
      synthesize(s.rates, s.grid, s.windows, s.p, Field(s.grid), Field(s.grid), cfg);
  CHECK(res.converged);
  CHECK(res.cg_iterations == 0);
  CHECK(res.final_norm_m == 0.0);
  CHECK(res.control_energy == 0.0);
}

TEST_CASE("male-only synthesis keeps the dual datum zero below the floor") {
  Setup s = make_setup(12, 20, Variant::male_only);
  HUMConfig cfg;
  cfg.variant = Variant::male_only;
  cfg.rho = s.cfg.target_floor;
  const HUMResult res = synthesize(s.rates, s.grid, s.windows, s.p, s.m0, s.f0, cfg);
  CHECK(res.converged);
  for (int i = 0; i <= s.grid.na; ++i) {
    if (s.grid.age(i) > cfg.rho) break;
    for (int j = 0; j < s.grid.nx; ++j) CHECK(res.n_T.at(i, j) == 0.0);
  }
  // no female control in this variant
  CHECK(res.control_f.empty());
}

TEST_CASE("female-only synthesis controls f through Xi' only") {
  Setup s = make_setup(12, 20, Variant::female_only);
  HUMConfig cfg;
  cfg.variant = Variant::female_only;
  const HUMResult res = synthesize(s.rates, s.grid, s.windows, s.p, s.m0, s.f0, cfg);
  CHECK(res.converged);
  CHECK(res.control_m.empty());
  CHECK(res.final_norm_f < 0.05 * norm_qa(s.f0, s.grid));
  CHECK(res.optimality_residual_f <= 1e-4 * res.final_norm_f);
}
