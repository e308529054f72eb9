#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "poplab/fixpoint.hpp"
#include "poplab/obslab.hpp"
#include "poplab/scenario.hpp"
#include "poplab/validate.hpp"

namespace poplab {

// Exit codes of the run pipelines (mirrored by the CLI).
inline constexpr int exit_pass = 0;
inline constexpr int exit_threshold = 1;
inline constexpr int exit_config = 2;
inline constexpr int exit_abort = 3;

struct RunArtifacts {
  int exit_code = exit_pass;
  nlohmann::ordered_json summary;
  std::vector<std::string> files;
};

namespace iodetail {

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string hash_line(std::uint64_t h) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "# config_hash %016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text,
                       std::vector<std::string>& files) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  files.push_back(path.string());
}

inline void write_field_csv(const std::filesystem::path& path, const Field& f, const Grid& g,
                            std::uint64_t h, std::vector<std::string>& files) {
  std::string s = hash_line(h) + "\nage,x,value\n";
  for (int i = 0; i <= g.na; ++i)
    for (int j = 0; j < g.nx; ++j)
      s += fmt(g.age(i)) + "," + fmt(g.x(j)) + "," + fmt(f.at(i, j)) + "\n";
  write_text(path, s, files);
}

inline void write_series_csv(const std::filesystem::path& path, const std::string& header,
                             const std::vector<double>& ys, std::uint64_t h,
                             std::vector<std::string>& files) {
  std::string s = hash_line(h) + "\n" + header + "\n";
  for (size_t i = 0; i < ys.size(); ++i) s += std::to_string(i) + "," + fmt(ys[i]) + "\n";
  write_text(path, s, files);
}

inline nlohmann::ordered_json validation_json(const ValidationReport& rep) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& it : rep.items)
    arr.push_back({{"id", it.id}, {"pass", it.pass}, {"detail", it.detail}});
  return arr;
}

inline double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace iodetail

// Executes the scenario pipeline and writes all artifacts into out_dir. The
// exit code encodes acceptance: 0 pass, 1 threshold failure, 2 invalid
// config/geometry, 3 solver abort.
inline RunArtifacts run_scenario(const ScenarioConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  using nlohmann::ordered_json;
  using namespace iodetail;

  RunArtifacts art;
  const std::uint64_t hash = config_hash(cfg);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  char hash_buf[24];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx", static_cast<unsigned long long>(hash));
  art.summary["scenario"] = cfg.name;
  art.summary["pipeline"] = cfg.pipeline;
  art.summary["config_hash"] = std::string(hash_buf);
  art.summary["seed"] = cfg.seed;
  write_text(dir / "config_echo.json", echo_config(cfg).dump(2) + "\n", art.files);

  const RateTable rates = make_rates(cfg);
  const ControlWindows windows = make_windows(cfg);

  const ValidationReport rep = validate(rates, windows, cfg.T);
  art.summary["validation"] = validation_json(rep);
  art.summary["valid"] = rep.pass();

  Grid grid;
  try {
    grid = make_grid(cfg);
  } catch (const std::invalid_argument& e) {
    art.summary["error"] = e.what();
    art.exit_code = exit_config;
    write_text(dir / "summary.json", art.summary.dump(2) + "\n", art.files);
    return art;
  }
  if (!rep.pass()) {
    art.exit_code = exit_config;
    write_text(dir / "summary.json", art.summary.dump(2) + "\n", art.files);
    return art;
  }
  if (cfg.pipeline == "validate") {
    write_text(dir / "summary.json", art.summary.dump(2) + "\n", art.files);
    return art;
  }

  const Field m0 = initial_data(cfg, grid, Sex::male);
  const Field f0 = initial_data(cfg, grid, Sex::female);
  const double init_m = norm_qa(m0, grid);
  const double init_f = norm_qa(f0, grid);
  const Variant variant = parse_variant(cfg.variant);
  art.summary["initial_norm_m"] = init_m;
  art.summary["initial_norm_f"] = init_f;

  try {
    // Frozen profile for the linear pipelines: M of the free nonlinear run.
    auto free_profile = [&]() {
      ForwardProblem pb;
      pb.rates = &rates;
      pb.grid = grid;
      pb.windows = windows;
      pb.m0 = m0;
      pb.f0 = f0;
      return solve_forward(pb).M;
    };

    if (cfg.pipeline == "hum") {
      const SpaceTimeProfile p = free_profile();
      const HUMResult hum = synthesize(rates, grid, windows, p, m0, f0, make_hum_config(cfg));
      const double ref_m = variant == Variant::male_only
                               ? norm_qa_ages(m0, grid, cfg.target_floor, cfg.A + grid.da())
                               : init_m;
      art.summary["cg_converged"] = hum.converged;
      art.summary["cg_iterations"] = hum.cg_iterations;
      art.summary["final_norm_m"] = hum.final_norm_m;
      art.summary["final_norm_f"] = hum.final_norm_f;
      art.summary["ratio_m"] = safe_ratio(hum.final_norm_m, ref_m);
      art.summary["ratio_f"] = safe_ratio(hum.final_norm_f, init_f);
      art.summary["control_energy"] = hum.control_energy;
      art.summary["optimality_residual_m"] = hum.optimality_residual_m;
      art.summary["optimality_residual_f"] = hum.optimality_residual_f;
      write_series_csv(dir / "cg_residuals.csv", "iter,relative_residual", hum.cg_residuals,
                       hash, art.files);
      write_field_csv(dir / "final_m.csv", hum.controlled.m.final_slice(), grid, hash, art.files);
      write_field_csv(dir / "final_f.csv", hum.controlled.f.final_slice(), grid, hash, art.files);

      bool ok = hum.converged;
      if (variant != Variant::female_only)
        ok = ok && safe_ratio(hum.final_norm_m, ref_m) <= cfg.final_ratio_threshold;
      if (variant != Variant::male_only)
        ok = ok && safe_ratio(hum.final_norm_f, init_f) <= cfg.final_ratio_threshold;
      art.exit_code = ok ? exit_pass : exit_threshold;
    } else if (cfg.pipeline == "fixpoint") {
      const FixedPointResult fp = iterate(rates, grid, windows, m0, f0,
                                          make_fixpoint_config(cfg), make_hum_config(cfg));
      const double ref_m = variant == Variant::male_only
                               ? norm_qa_ages(m0, grid, cfg.target_floor, cfg.A + grid.da())
                               : init_m;
      const double ratio_m = safe_ratio(fp.nonlinear_final_m, ref_m);
      const double ratio_f = safe_ratio(fp.nonlinear_final_f, init_f);
      art.summary["outer_iterations"] = fp.iterations;
      art.summary["outer_converged"] = fp.converged;
      art.summary["consistency_residual"] = fp.consistency_residual;
      art.summary["cg_iterations"] = fp.hum.cg_iterations;
      art.summary["cg_converged"] = fp.hum.converged;
      art.summary["final_norm_m"] = fp.nonlinear_final_m;
      art.summary["final_norm_f"] = fp.nonlinear_final_f;
      art.summary["ratio_m"] = ratio_m;
      art.summary["ratio_f"] = ratio_f;
      art.summary["control_energy"] = fp.hum.control_energy;

      if (variant == Variant::male_only) {
        // dual final datum must vanish identically below the target floor
        double low = 0.0;
        for (int i = 0; i <= grid.na; ++i) {
          if (grid.age(i) > cfg.target_floor) break;
          for (int j = 0; j < grid.nx; ++j)
            low = std::max(low, std::abs(fp.hum.n_T.at(i, j)));
        }
        art.summary["dual_low_age_rows_max"] = low;
      }
      if (variant == Variant::female_only) {
        // uncontrolled nonlinear run of one full life span from the
        // controlled state; the renewal collapse empties the population
        Grid ext(grid.nx, grid.na, cfg.A, cfg.A);
        ForwardProblem pb;
        pb.rates = &rates;
        pb.grid = ext;
        pb.windows = windows;
        pb.m0 = fp.hum.controlled.m.final_slice();
        pb.f0 = fp.hum.controlled.f.final_slice();
        const ForwardResult tail = solve_forward(pb);
        const double total_end = std::sqrt(dot_qa(tail.m.final_slice(), tail.m.final_slice(), ext) +
                                           dot_qa(tail.f.final_slice(), tail.f.final_slice(), ext));
        const double total_init = std::sqrt(init_m * init_m + init_f * init_f);
        art.summary["extinction_norm"] = total_end;
        art.summary["extinction_ratio"] = safe_ratio(total_end, total_init);
      }

      write_series_csv(dir / "fixpoint_residuals.csv", "iter,residual", fp.residuals, hash,
                       art.files);
      write_series_csv(dir / "cg_residuals.csv", "iter,relative_residual", fp.hum.cg_residuals,
                       hash, art.files);
      write_field_csv(dir / "final_m.csv", fp.hum.controlled.m.final_slice(), grid, hash,
                      art.files);
      write_field_csv(dir / "final_f.csv", fp.hum.controlled.f.final_slice(), grid, hash,
                      art.files);

      bool ok = fp.converged || fp.residuals.empty();
      if (variant != Variant::female_only) ok = ok && ratio_m <= cfg.final_ratio_threshold;
      if (variant != Variant::male_only) ok = ok && ratio_f <= cfg.final_ratio_threshold;
      if (init_m == 0.0 && init_f == 0.0) ok = true;  // empty scenario
      art.exit_code = ok ? exit_pass : exit_threshold;
    } else {  // obslab
      const SpaceTimeProfile p = free_profile();
      const ProbeSet probes = make_probe_set(grid, windows, cfg.probe_count, cfg.seed);
      ordered_json parr = ordered_json::array();
      double max_ratio = 0.0;
      int infinite = 0, degenerate = 0;
      std::string pcsv = hash_line(hash) +
                         "\nindex,kind,ratio,infinite,degenerate,numerator,denominator\n";
      for (size_t i = 0; i < probes.probes.size(); ++i) {
        const RatioResult r = observability_ratio(rates, grid, windows, p, probes.probes[i]);
        if (r.infinite) ++infinite;
        if (r.degenerate) ++degenerate;
        if (!r.infinite && !r.degenerate) max_ratio = std::max(max_ratio, r.ratio);
        parr.push_back({{"index", i},
                        {"kind", probes.probes[i].kind},
                        {"ratio", r.ratio},
                        {"infinite", r.infinite},
                        {"degenerate", r.degenerate}});
        pcsv += std::to_string(i) + "," + probes.probes[i].kind + "," + fmt(r.ratio) + "," +
                std::to_string(r.infinite ? 1 : 0) + "," + std::to_string(r.degenerate ? 1 : 0) +
                "," + fmt(r.numerator) + "," + fmt(r.denominator) + "\n";
      }
      art.summary["probes"] = parr;
      art.summary["max_ratio"] = max_ratio;
      art.summary["infinite_markers"] = infinite;
      art.summary["degenerate_markers"] = degenerate;
      write_text(dir / "probes.csv", pcsv, art.files);

      std::vector<double> etas = cfg.eta_grid;
      if (etas.empty()) {
        const double span = std::min(windows.age_m.hi, cfg.T) - windows.age_m.lo;
        for (double fr : {0.9, 0.7, 0.5, 0.35, 0.2})
          etas.push_back(windows.age_m.lo + fr * span);
      }
      const BlowupScan scan = blowup_scan(rates, grid, windows, p, probes, etas);
      art.summary["blowup_slope"] = scan.slope;
      art.summary["blowup_monotone"] = scan.monotone;
      std::string bcsv = hash_line(hash) + "\neta,constant\n";
      for (size_t i = 0; i < scan.eta.size(); ++i)
        bcsv += fmt(scan.eta[i]) + "," + fmt(scan.constant[i]) + "\n";
      write_text(dir / "blowup.csv", bcsv, art.files);

      if (cfg.T > cfg.A - windows.age_m.hi && !probes.probes.empty()) {
        const SupportCheck sc =
            support_check(rates, grid, windows, p, probes.probes[0], cfg.kappa);
        art.summary["support_residual"] = sc.max_residual;
        art.summary["l_oracle_error"] = sc.l_oracle_error;
      }
      art.exit_code = exit_pass;
    }
  } catch (const SolverAbort& e) {
    art.summary["error"] = e.what();
    art.exit_code = exit_abort;
  }

  write_text(dir / "summary.json", art.summary.dump(2) + "\n", art.files);
  return art;
}

// --- manufactured-solution convergence study -------------------------------

// Transport-diffusion exact solution e^{-K pi^2 t} sin(pi x) g(a - t), with
// mortality and births switched off; g is an age bump whose tails at 0 and A
// are below roundoff over the studied horizon.
inline RateTable manufactured_rates(double A, double K) {
  RateTable r = RateTable::make(A, 0.5, K, K, SurvivalCurve{A, 0.0, 0.0},
                                SurvivalCurve{A, 0.0, 0.0}, 0.5 * A, 1.0, 1.0, 0.0);
  r.beta = [](double, double) { return 0.0; };
  return r;
}

inline double manufactured_bump(double s, double A) {
  const double u = (s - 0.55 * A) / (0.08 * A);
  return std::exp(-u * u);
}

inline Field manufactured_exact(const Grid& g, double K, double t) {
  Field f(g);
  const double decay = std::exp(-K * std::numbers::pi * std::numbers::pi * t);
  for (int i = 0; i <= g.na; ++i) {
    const double ga = manufactured_bump(g.age(i) - t, g.A);
    auto row = f.row(i);
    for (int j = 0; j < g.nx; ++j)
      row[j] = decay * ga * std::sin(std::numbers::pi * g.x(j));
  }
  return f;
}

// L2(Q_A) error of the computed male density at t = T against the closed form.
inline double manufactured_error(int nx, int na, double A, double T, double K) {
  const Grid g(nx, na, A, T);
  const RateTable rates = manufactured_rates(A, K);
  ControlWindows w;
  w.omega = {0.25, 0.75};
  w.omega_prime = {0.25, 0.75};
  w.age_m = {0.2, 0.8};
  w.age_f = {0.1, 0.9};
  ForwardProblem pb;
  pb.rates = &rates;
  pb.grid = g;
  pb.windows = w;
  pb.m0 = manufactured_exact(g, K, 0.0);
  pb.f0 = Field(g);
  const ForwardResult run = solve_forward(pb);
  Field diff = run.m.final_slice();
  diff -= manufactured_exact(g, K, T);
  return norm_qa(diff, g);
}

struct StudyRow {
  int level = 0;
  int nx = 0;
  int na = 0;
  double error = 0.0;
  double order = 0.0;  // against the previous level; 0 on the first row
};

// Joint refinement (dt = da and dx halved together): splitting error O(dt)
// dominates, observed order >= 1.
inline std::vector<StudyRow> temporal_study(int levels, double K = 0.02) {
  std::vector<StudyRow> rows;
  int nx = 15, na = 20;
  for (int lv = 0; lv < levels; ++lv) {
    StudyRow r;
    r.level = lv;
    r.nx = nx;
    r.na = na;
    r.error = manufactured_error(nx, na, 1.0, 0.25, K);
    if (lv > 0 && r.error > 0.0)
      r.order = std::log2(rows.back().error / r.error);
    rows.push_back(r);
    nx = 2 * nx + 1;  // halves dx = 1/(nx+1)
    na *= 2;
  }
  return rows;
}

// Spatial refinement with dt fixed tiny: second-difference error O(dx^2).
inline std::vector<StudyRow> spatial_study(int levels, double K = 0.02, int na = 1600) {
  std::vector<StudyRow> rows;
  int nx = 7;
  for (int lv = 0; lv < levels; ++lv) {
    StudyRow r;
    r.level = lv;
    r.nx = nx;
    r.na = na;
    r.error = manufactured_error(nx, na, 1.0, 0.25, K);
    if (lv > 0 && r.error > 0.0)
      r.order = std::log2(rows.back().error / r.error);
    rows.push_back(r);
    nx = 2 * nx + 1;
  }
  return rows;
}

inline std::string study_csv(const std::vector<StudyRow>& rows, std::uint64_t hash) {
  std::string s = iodetail::hash_line(hash) + "\nlevel,nx,na,error,order\n";
  for (const auto& r : rows)
    s += std::to_string(r.level) + "," + std::to_string(r.nx) + "," + std::to_string(r.na) +
         "," + iodetail::fmt(r.error) + "," + iodetail::fmt(r.order) + "\n";
  return s;
}

}  // namespace poplab
