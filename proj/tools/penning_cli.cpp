// Command-line front end: solve, simulate, hop, sweep-gamma, resonance, profile.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "penning/diagnostics.hpp"
#include "penning/grid_io.hpp"
#include "penning/spec_file.hpp"

namespace {

using namespace penning;
using constants::mm;
using constants::us;

enum ExitCode { kOk = 0, kConfig = 2, kNumerical = 3, kPhysics = 4 };

std::vector<double> split_numbers(const std::string& text, std::size_t count, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string(flag) + " expects numbers separated by ',', got '" + text + "'");
    }
  }
  if (out.size() != count)
    throw ConfigError(std::string(flag) + " expects " + std::to_string(count) + " comma-separated values");
  return out;
}

Site parse_site(const std::string& text, const char* flag) {
  const auto v = split_numbers(text, 2, flag);
  if (v[0] != std::floor(v[0]) || v[1] != std::floor(v[1])) throw ConfigError(std::string(flag) + " expects integers");
  return {static_cast<int>(v[0]), static_cast<int>(v[1])};
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path + "'");
  return os;
}

int cmd_solve(const std::string& spec_path, const std::string& out, double h_mm, double tol) {
  TrapConfig cfg = load_trap_spec(spec_path);
  if (!cfg.grid_based()) throw ConfigError(std::string("solve needs a grid-based trap kind, got '") + to_string(cfg.kind) + "'");
  if (h_mm > 0.0) cfg.grid.h = h_mm * mm;
  if (tol > 0.0) cfg.grid.solve.tol = tol;
  const auto res = solve_laplace(rasterize(apply_assignment(electrodes_of(cfg), cfg.voltages), domain_of(cfg), cfg.grid.h),
                                 cfg.grid.solve);
  save_grid(out, res.grid);
  const auto& d = res.grid.dims();
  std::printf("sweeps=%ld, last_update_V=%.3e, dims=%dx%dx%d\n", res.sweeps, res.last_update, d[0], d[1], d[2]);
  return kOk;
}

int cmd_simulate(const std::string& spec_path, double ke_mev, const std::string& dir, double t_us, const std::string& out) {
  const TrapConfig cfg = load_trap_spec(spec_path);
  const auto ang = split_numbers(dir, 2, "--dir");
  FieldStack stack({0, 0, cfg.b_field});
  AnyField base = static_field(cfg);
  if (cfg.grid_based() && !cfg.schedule.segments.empty()) {
    GridCache cache(electrodes_of(cfg), domain_of(cfg), cfg.grid.h, cfg.grid.solve);
    stack = schedule_fields(cfg.schedule, cache, {0, 0, cfg.b_field});
  } else {
    stack.add(base);
  }
  const Vec3 r0 = default_start(cfg, base);
  const Vec3 v0 = speed_from_energy(cfg.species, ke_mev * constants::mev) * direction_from_angles(ang[0], ang[1]);
  IntegratorConfig ic;
  ic.dt = cfg.b_field > 0.0 ? default_time_step(cfg.species, cfg.b_field) : 1e-9;
  ic.t_end = t_us * us;
  const auto res = integrate({0.0, r0, v0}, stack, ic, cfg.species);
  auto os = open_out(out);
  write_trajectory_csv(os, res.samples, stack, cfg.species);
  std::printf("termination=%s, t_end_us=%.6f, samples=%zu\n", to_string(res.termination), res.final_state.t / us,
              res.samples.size());
  return res.escaped() ? kPhysics : kOk;
}

int cmd_hop(const std::string& spec_path, const std::string& from_s, const std::string& to_s, double ke_mev,
            const std::string& out) {
  const TrapConfig cfg = load_trap_spec(spec_path);
  if (cfg.kind != TrapKind::pad_array) throw ConfigError("hop needs trap.kind = pad_array");
  const Site from = parse_site(from_s, "--from"), to = parse_site(to_s, "--to");
  const PadArrayModel model(cfg.pad, cfg.grid);
  const HopPlan plan = plan_hop(model, from, to, cfg.species, cfg.b_field);
  const Vec3 v0 = speed_from_energy(cfg.species, ke_mev * constants::mev) * direction_from_angles(0.0, 0.0);
  const HopReport rep = execute_hop(model, plan, {0.0, plan.start, v0}, cfg.species);
  FieldStack pe(plan.b_field);
  pe.add(GridField(model.grid(plan.hop_assignment)));
  auto os = open_out(out);
  write_trajectory_csv(os, rep.result.samples, pe, cfg.species);
  std::printf("dxy_mm=%.6f, zfinal_mm=%.6f, duration_us=%.6f\n", rep.dxy / mm, rep.z_final / mm, plan.duration / us);
  if (rep.failed) {
    std::fprintf(stderr, "%s\n", rep.message.c_str());
    return kPhysics;
  }
  return kOk;
}

int cmd_sweep_gamma(const std::string& spec_path, const std::string& range, int steps, const std::string& out) {
  const TrapConfig cfg = load_trap_spec(spec_path);
  if (cfg.kind != TrapKind::pad_array) throw ConfigError("sweep-gamma needs trap.kind = pad_array");
  const auto r = split_numbers(range, 2, "--range");
  const GammaScan scan = optimize_gamma(cfg.pad, r[0], r[1], steps, cfg.grid);
  auto os = open_out(out);
  write_gamma_csv(os, scan);
  std::printf("gamma_star=%.6f%s\n", scan.gamma_star, scan.single_trough ? "" : ", warning=multiple minima");
  return kOk;
}

int cmd_resonance(const std::string& spec_path, double f_khz) {
  const TrapConfig cfg = load_trap_spec(spec_path);
  if (cfg.kind != TrapKind::six_wire) throw ConfigError("resonance needs trap.kind = six_wire");
  try {
    std::printf("bias_V=%.6f\n", resonance_bias(cfg.six_wire, cfg.species, f_khz * 1e3));
  } catch (const NotFound& e) {
    std::fprintf(stderr, "%s\ndelta_V,f_z_Hz\n", e.what());
    for (const auto& [dv, f] : e.table()) std::fprintf(stderr, "%.6f,%.6e\n", dv, f);
    return kPhysics;
  }
  return kOk;
}

int cmd_profile(const std::string& spec_path, const std::string& line, const std::string& out) {
  const TrapConfig cfg = load_trap_spec(spec_path);
  const auto v = split_numbers(line, 8, "--line");
  if (v[7] != std::floor(v[7])) throw ConfigError("--line sample count must be an integer");
  const AnyField field = static_field(cfg);
  const auto rows = axial_profile(field, {v[0] * mm, v[1] * mm, v[2] * mm}, {v[3], v[4], v[5]}, v[6] * mm,
                                  static_cast<int>(v[7]));
  auto os = open_out(out);
  write_profile_csv(os, rows);
  std::printf("samples=%zu\n", rows.size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penning trap field solver, trajectory simulator and transport planner"};
  app.require_subcommand(1);
  std::string spec, out, dir = "0,0", from, to, range, line;
  double h_mm = 0.0, tol = 0.0, ke_mev = 10.0, t_us = 20.0, hop_ke = 0.0, f_khz = 0.0;
  int steps = 11;

  auto* solve = app.add_subcommand("solve", "solve the Laplace problem of a grid-based trap");
  solve->add_option("--spec", spec, "trap specification file")->required();
  solve->add_option("--out", out, "grid file to write")->required();
  solve->add_option("--h-mm", h_mm, "grid spacing in mm");
  solve->add_option("--tol", tol, "convergence threshold in V");

  auto* sim = app.add_subcommand("simulate", "integrate one trajectory");
  sim->add_option("--spec", spec, "trap specification file")->required();
  sim->add_option("--ke-mev", ke_mev, "initial kinetic energy in meV");
  sim->add_option("--dir", dir, "launch azimuth,declination in degrees");
  sim->add_option("--t-us", t_us, "simulated time in microseconds");
  sim->add_option("--out", out, "trajectory CSV")->required();

  auto* hop = app.add_subcommand("hop", "plan and run a one-period hop between pad sites");
  hop->add_option("--spec", spec, "trap specification file")->required();
  hop->add_option("--from", from, "start site i,j")->required();
  hop->add_option("--to", to, "target site i,j")->required();
  hop->add_option("--ke-mev", hop_ke, "initial kinetic energy in meV along +x");
  hop->add_option("--out", out, "trajectory CSV")->required();

  auto* sweep = app.add_subcommand("sweep-gamma", "scan the quadrupole deviation over the layer aspect ratio");
  sweep->add_option("--spec", spec, "trap specification file")->required();
  sweep->add_option("--range", range, "gamma_lo,gamma_hi")->required();
  sweep->add_option("--steps", steps, "number of scan points")->required();
  sweep->add_option("--out", out, "curve CSV")->required();

  auto* res = app.add_subcommand("resonance", "bias at which the axial frequency matches a circuit");
  res->add_option("--spec", spec, "trap specification file")->required();
  res->add_option("--f-khz", f_khz, "circuit frequency in kHz")->required();

  auto* prof = app.add_subcommand("profile", "potential along a line");
  prof->add_option("--spec", spec, "trap specification file")->required();
  prof->add_option("--line", line, "x0,y0,z0 (mm), dx,dy,dz, half-length (mm), samples")->required();
  prof->add_option("--out", out, "profile CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (solve->parsed()) return cmd_solve(spec, out, h_mm, tol);
    if (sim->parsed()) return cmd_simulate(spec, ke_mev, dir, t_us, out);
    if (hop->parsed()) return cmd_hop(spec, from, to, hop_ke, out);
    if (sweep->parsed()) return cmd_sweep_gamma(spec, range, steps, out);
    if (res->parsed()) return cmd_resonance(spec, f_khz);
    if (prof->parsed()) return cmd_profile(spec, line, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const GeometryConflict& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const MarginError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NonConvergence& e) {
    std::cerr << "non-convergence: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "physics failure: " << e.what() << "\n";
    return kPhysics;
  }
  return kConfig;
}
