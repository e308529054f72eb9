#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "poplab/grid.hpp"
#include "poplab/hum.hpp"
#include "poplab/fixpoint.hpp"
#include "poplab/rates.hpp"
#include "poplab/windows.hpp"

namespace poplab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat declarative scenario: demographic rates, geometry, grid, synthesis and
// iteration settings, initial-data family, probe-set spec. Defaults are the
// documented desk-scale values (grid 64x80, epsilon=theta=1e-6, damping=0.5,
// cg_tol=1e-8).
struct ScenarioConfig {
  std::string name = "custom";
  std::string pipeline = "fixpoint";  // validate | hum | fixpoint | obslab
  std::string variant = "both-sexes";

  int nx = 64;
  int na = 80;
  double A = 1.0;
  double T = 0.5;

  double gamma = 0.5;
  double K_m = 0.02;
  double K_f = 0.02;
  double mu0_m = 0.1, c_m = 1.0;
  double mu0_f = 0.1, c_f = 1.0;
  double beta_b = 0.5;
  double beta_amp = 1.0;
  double beta_sat = 1.0;
  double lambda_amp = 1.0;

  double omega_lo = 0.3, omega_hi = 0.7;
  double omega_prime_lo = 0.25, omega_prime_hi = 0.75;
  double a1 = 0.2, a2 = 0.8;
  double b1 = 0.1, b2 = 0.9;
  double target_floor = 0.0;  // male-only age floor

  double epsilon = 1e-6;
  double theta = 1e-6;
  double cg_tol = 1e-8;
  int cg_max_iters = 500;

  double damping = 0.5;
  double fp_tol = 1e-8;
  int max_outer_iters = 30;
  bool start_from_free_run = false;

  std::string init_family = "bump";  // bump | uniform | eigenmode | zero
  double init_amp_m = 1.0;
  double init_amp_f = 1.0;
  double init_center = 0.3;  // age center of the bump, fraction of A
  double init_width = 0.15;  // age width, fraction of A
  int init_mode = 1;         // spatial eigenmode index

  int probe_count = 8;
  std::uint64_t seed = 42;
  double kappa = 0.1;                 // support-check offset a0 = a2 - kappa
  std::vector<double> eta_grid;       // blow-up scan; empty = auto 5-point grid
  double final_ratio_threshold = 1e-2;
};

inline Variant parse_variant(const std::string& s) {
  if (s == "both-sexes") return Variant::both_sexes;
  if (s == "male-only") return Variant::male_only;
  if (s == "female-only") return Variant::female_only;
  throw ConfigError("unknown variant '" + s + "'");
}

namespace cfgdetail {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for key '") + key + "': " + e.what());
  }
}

}  // namespace cfgdetail

inline ScenarioConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  static const std::vector<std::string> known = {
      "name", "pipeline", "variant", "nx", "na", "A", "T", "gamma", "K_m", "K_f",
      "mu0_m", "c_m", "mu0_f", "c_f", "beta_b", "beta_amp", "beta_sat", "lambda_amp",
      "omega_lo", "omega_hi", "omega_prime_lo", "omega_prime_hi", "a1", "a2", "b1", "b2",
      "target_floor", "epsilon", "theta", "cg_tol", "cg_max_iters", "damping", "fp_tol",
      "max_outer_iters", "start_from_free_run", "init_family", "init_amp_m", "init_amp_f",
      "init_center", "init_width", "init_mode", "probe_count", "seed", "kappa", "eta_grid",
      "final_ratio_threshold"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool found = false;
    for (const auto& k : known) found |= (k == it.key());
    if (!found) throw ConfigError("unknown config key '" + it.key() + "'");
  }

  ScenarioConfig c;
  using cfgdetail::take;
  take(j, "name", c.name);
  take(j, "pipeline", c.pipeline);
  take(j, "variant", c.variant);
  take(j, "nx", c.nx);
  take(j, "na", c.na);
  take(j, "A", c.A);
  take(j, "T", c.T);
  take(j, "gamma", c.gamma);
  take(j, "K_m", c.K_m);
  take(j, "K_f", c.K_f);
  take(j, "mu0_m", c.mu0_m);
  take(j, "c_m", c.c_m);
  take(j, "mu0_f", c.mu0_f);
  take(j, "c_f", c.c_f);
  take(j, "beta_b", c.beta_b);
  take(j, "beta_amp", c.beta_amp);
  take(j, "beta_sat", c.beta_sat);
  take(j, "lambda_amp", c.lambda_amp);
  take(j, "omega_lo", c.omega_lo);
  take(j, "omega_hi", c.omega_hi);
  take(j, "omega_prime_lo", c.omega_prime_lo);
  take(j, "omega_prime_hi", c.omega_prime_hi);
  take(j, "a1", c.a1);
  take(j, "a2", c.a2);
  take(j, "b1", c.b1);
  take(j, "b2", c.b2);
  take(j, "target_floor", c.target_floor);
  take(j, "epsilon", c.epsilon);
  take(j, "theta", c.theta);
  take(j, "cg_tol", c.cg_tol);
  take(j, "cg_max_iters", c.cg_max_iters);
  take(j, "damping", c.damping);
  take(j, "fp_tol", c.fp_tol);
  take(j, "max_outer_iters", c.max_outer_iters);
  take(j, "start_from_free_run", c.start_from_free_run);
  take(j, "init_family", c.init_family);
  take(j, "init_amp_m", c.init_amp_m);
  take(j, "init_amp_f", c.init_amp_f);
  take(j, "init_center", c.init_center);
  take(j, "init_width", c.init_width);
  take(j, "init_mode", c.init_mode);
  take(j, "probe_count", c.probe_count);
  take(j, "seed", c.seed);
  take(j, "kappa", c.kappa);
  take(j, "eta_grid", c.eta_grid);
  take(j, "final_ratio_threshold", c.final_ratio_threshold);

  parse_variant(c.variant);  // reject unknown variants early
  if (c.pipeline != "validate" && c.pipeline != "hum" && c.pipeline != "fixpoint" &&
      c.pipeline != "obslab")
    throw ConfigError("unknown pipeline '" + c.pipeline + "'");
  if (c.init_family != "bump" && c.init_family != "uniform" && c.init_family != "eigenmode" &&
      c.init_family != "zero")
    throw ConfigError("unknown init_family '" + c.init_family + "'");
  return c;
}

inline ScenarioConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j);
}

// Echo with stable key ordering; the serialized echo is what gets hashed.
inline nlohmann::ordered_json echo_config(const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["pipeline"] = c.pipeline;
  j["variant"] = c.variant;
  j["nx"] = c.nx;
  j["na"] = c.na;
  j["A"] = c.A;
  j["T"] = c.T;
  j["gamma"] = c.gamma;
  j["K_m"] = c.K_m;
  j["K_f"] = c.K_f;
  j["mu0_m"] = c.mu0_m;
  j["c_m"] = c.c_m;
  j["mu0_f"] = c.mu0_f;
  j["c_f"] = c.c_f;
  j["beta_b"] = c.beta_b;
  j["beta_amp"] = c.beta_amp;
  j["beta_sat"] = c.beta_sat;
  j["lambda_amp"] = c.lambda_amp;
  j["omega_lo"] = c.omega_lo;
  j["omega_hi"] = c.omega_hi;
  j["omega_prime_lo"] = c.omega_prime_lo;
  j["omega_prime_hi"] = c.omega_prime_hi;
  j["a1"] = c.a1;
  j["a2"] = c.a2;
  j["b1"] = c.b1;
  j["b2"] = c.b2;
  j["target_floor"] = c.target_floor;
  j["epsilon"] = c.epsilon;
  j["theta"] = c.theta;
  j["cg_tol"] = c.cg_tol;
  j["cg_max_iters"] = c.cg_max_iters;
  j["damping"] = c.damping;
  j["fp_tol"] = c.fp_tol;
  j["max_outer_iters"] = c.max_outer_iters;
  j["start_from_free_run"] = c.start_from_free_run;
  j["init_family"] = c.init_family;
  j["init_amp_m"] = c.init_amp_m;
  j["init_amp_f"] = c.init_amp_f;
  j["init_center"] = c.init_center;
  j["init_width"] = c.init_width;
  j["init_mode"] = c.init_mode;
  j["probe_count"] = c.probe_count;
  j["seed"] = c.seed;
  j["kappa"] = c.kappa;
  j["eta_grid"] = c.eta_grid;
  j["final_ratio_threshold"] = c.final_ratio_threshold;
  return j;
}

// FNV-1a over the serialized echo; stamped into every artifact.
inline std::uint64_t config_hash(const ScenarioConfig& c) {
  const std::string s = echo_config(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline Grid make_grid(const ScenarioConfig& c) { return {c.nx, c.na, c.A, c.T}; }

inline RateTable make_rates(const ScenarioConfig& c) {
  return RateTable::make(c.A, c.gamma, c.K_m, c.K_f,
                         SurvivalCurve{c.A, c.mu0_m, c.c_m}, SurvivalCurve{c.A, c.mu0_f, c.c_f},
                         c.beta_b, c.beta_amp, c.beta_sat, c.lambda_amp);
}

inline ControlWindows make_windows(const ScenarioConfig& c) {
  ControlWindows w;
  w.omega = {c.omega_lo, c.omega_hi};
  w.omega_prime = {c.omega_prime_lo, c.omega_prime_hi};
  w.age_m = {c.a1, c.a2};
  w.age_f = {c.b1, c.b2};
  w.variant = parse_variant(c.variant);
  w.rho = c.target_floor;
  return w;
}

inline HUMConfig make_hum_config(const ScenarioConfig& c) {
  HUMConfig h;
  h.epsilon = c.epsilon;
  h.theta = c.theta;
  h.cg_tol = c.cg_tol;
  h.cg_max_iters = c.cg_max_iters;
  h.variant = parse_variant(c.variant);
  h.rho = c.target_floor;
  return h;
}

inline FixedPointConfig make_fixpoint_config(const ScenarioConfig& c) {
  FixedPointConfig f;
  f.damping = c.damping;
  f.tol = c.fp_tol;
  f.max_outer_iters = c.max_outer_iters;
  f.start_from_free_run = c.start_from_free_run;
  return f;
}

// Named nonnegative initial-data families.
inline Field initial_data(const ScenarioConfig& c, const Grid& g, Sex sex) {
  const double amp = sex == Sex::male ? c.init_amp_m : c.init_amp_f;
  Field f(g);
  if (c.init_family == "zero" || amp == 0.0) return f;
  const double ac = c.init_center * g.A;
  const double aw = c.init_width * g.A;
  for (int i = 0; i <= g.na; ++i) {
    const double a = g.age(i);
    double age_part = 1.0;
    if (c.init_family == "bump") {
      const double u = (a - ac) / aw;
      age_part = std::exp(-u * u);
    } else if (c.init_family == "eigenmode") {
      age_part = std::sin(std::numbers::pi * a / g.A);
    }
    auto row = f.row(i);
    for (int j = 0; j < g.nx; ++j) {
      const int mode = c.init_family == "eigenmode" ? c.init_mode : 1;
      row[j] = amp * age_part * std::sin(mode * std::numbers::pi * g.x(j));
      if (c.init_family != "eigenmode" && row[j] < 0.0) row[j] = 0.0;
    }
  }
  return f;
}

// Bundled desk-scale scenarios.
inline ScenarioConfig bundled_scenario(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  if (name == "thm11-desk") {
    c.pipeline = "fixpoint";
    c.variant = "both-sexes";
    c.nx = 32;
    c.na = 40;
    c.T = 0.5;
    // wide windows and moderate diffusivity keep the penalty sweep in the
    // saturated regime, where the final norms scale with epsilon
    c.omega_lo = 0.1;
    c.omega_hi = 0.9;
    c.omega_prime_lo = 0.1;
    c.omega_prime_hi = 0.9;
    c.K_m = 0.025;
    c.K_f = 0.025;
    return c;
  }
  if (name == "thm12-male-desk") {
    c.pipeline = "fixpoint";
    c.variant = "male-only";
    c.nx = 32;
    c.na = 40;
    c.T = 0.3;
    c.target_floor = 0.1;
    c.omega_lo = 0.2;   // lone control channel: wider window than both-sexes
    c.omega_hi = 0.8;
    c.epsilon = 1e-7;
    c.theta = 1e-7;
    return c;
  }
  if (name == "thm12-female-desk") {
    c.pipeline = "fixpoint";
    c.variant = "female-only";
    c.nx = 32;
    c.na = 40;
    c.T = 0.5;
    return c;
  }
  if (name == "obs-desk") {
    c.pipeline = "obslab";
    c.variant = "both-sexes";
    c.nx = 24;
    c.na = 40;
    c.T = 0.5;
    return c;
  }
  throw ConfigError("unknown bundled scenario '" + name + "'");
}

}  // namespace poplab
