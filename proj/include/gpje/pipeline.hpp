#pragma once

// Command implementations behind the gpje executable: check, init, solve,
// verify and export. Each command reads the configuration, writes its
// artifacts under the output directory and returns an exit code
// (0 success, 1 validation failure, 2 runtime failure).

#include "gpje/config.hpp"
#include "gpje/convexity.hpp"
#include "gpje/gconvex.hpp"
#include "gpje/io.hpp"
#include "gpje/manufactured.hpp"
#include "gpje/solver.hpp"
#include "gpje/verify.hpp"

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>

namespace gpje {

namespace fs = std::filesystem;

enum ExitCode { exit_ok = 0, exit_validation = 1, exit_runtime = 2 };

struct CommandOptions {
  bool force = false;
  bool skip_envelope = false;
  std::optional<std::uint64_t> seed;
};

/// Everything derived from a configuration: model, domains, densities, grid.
struct Setup {
  RunConfig cfg;
  fs::path config_path, out_dir;
  GeneratingFunction gf;
  DomainSpec omega, omega_star;
  Density f, fstar;
  std::optional<RadialManufactured> manufactured;
  double source_mass = 0.0, target_mass = 0.0;
  std::unique_ptr<Grid> grid;
  std::unique_ptr<GridOperators> ops;
  A5Constants a5;

  fs::path artifact(const std::string& name) const { return out_dir / name; }

  Vec2 map_reference(const Vec2& x) const { return manufactured->map(gf, x); }
};

namespace detail {

inline TargetProfile make_profile(const ProfileBlock& p) {
  if (p.kind == "constant") return TargetProfile::constant(p.c);
  if (p.kind == "quadratic") return TargetProfile::quadratic(p.c, p.b, p.Q);
  if (p.kind == "bump") return TargetProfile::bump(p.c, p.height, p.mean, p.width);
  throw ConfigError("[model.phi] unknown kind '" + p.kind + "'");
}

inline DomainSpec make_domain(const DomainBlock& d, const std::string& where) {
  try {
    if (d.shape == "disc") return DomainSpec::disc(d.center, d.radii.x());
    if (d.shape == "ellipse") return DomainSpec::ellipse(d.center, d.radii);
    if (d.shape == "superellipse") return DomainSpec::superellipse(d.center, d.radii, d.exponent);
    if (d.shape == "lobed") return DomainSpec::lobed(d.center, d.radii.x(), d.lobe_amplitude, d.lobe_count);
  } catch (const DomainError& e) {
    throw ConfigError("[" + where + "] " + e.what());
  }
  throw ConfigError("[" + where + "] unknown shape '" + d.shape + "'");
}

inline Density make_density(const DensityBlock& d, const std::string& where) {
  if (d.kind == "constant") return Density::constant(d.a);
  if (d.kind == "polynomial") return Density::polynomial(d.a, d.b, d.C);
  if (d.kind == "radial") return Density::radial(d.a, d.h, d.m, d.s);
  throw ConfigError("[" + where + "] unknown kind '" + d.kind + "'");
}

}  // namespace detail

inline std::unique_ptr<Setup> make_setup(const RunConfig& cfg, const fs::path& config_path) {
  auto s = std::make_unique<Setup>();
  s->cfg = cfg;
  s->config_path = config_path;
  const fs::path out = cfg.output_dir;
  s->out_dir = out.is_absolute() ? out : config_path.parent_path() / out;

  const auto& m = cfg.model;
  if (m.variant == "quadratic_ot") {
    s->gf = GeneratingFunction::quadratic_ot();
  } else if (m.variant == "reflection") {
    s->gf = GeneratingFunction::reflection(detail::make_profile(cfg.phi));
  } else if (m.variant == "refraction") {
    if (!(m.kappa > 0.0) || m.kappa == 1.0) throw ConfigError("[model] refraction needs kappa > 0, kappa != 1");
    s->gf = GeneratingFunction::refraction(m.kappa, detail::make_profile(cfg.phi));
  } else {
    throw ConfigError("[model] unknown variant '" + m.variant + "'");
  }
  if (!(m.z_lo < m.z_hi)) throw ConfigError("[model] z-window is empty");
  s->gf.z_window = {m.z_lo, m.z_hi};
  if (cfg.grid.n_r < 8 || cfg.grid.n_theta < 8 || cfg.grid.n_theta % 2 != 0)
    throw ConfigError("[grid] needs n_r >= 8 and an even n_theta >= 8");

  s->omega = detail::make_domain(cfg.omega, "omega");
  const bool mf = cfg.manufactured.enabled;
  if (mf) {
    if (s->omega.shape != Shape::disc || (s->omega.center - cfg.manufactured.center).norm() > 1e-12)
      throw ConfigError("[manufactured] needs a disc source centered at the manufactured center");
    s->manufactured = RadialManufactured{cfg.manufactured.center, cfg.manufactured.a0, cfg.manufactured.a2,
                                         cfg.manufactured.a4};
  }
  if (cfg.omega_star.shape == "manufactured") {
    if (!mf) throw ConfigError("[omega_star] shape 'manufactured' needs [manufactured] enabled = true");
    s->omega_star = s->manufactured->target(s->gf, s->omega.radii.x());
  } else {
    s->omega_star = detail::make_domain(cfg.omega_star, "omega_star");
  }
  if (cfg.fstar.kind == "manufactured") throw ConfigError("[density.fstar] kind 'manufactured' applies to f only");
  s->fstar = detail::make_density(cfg.fstar, "density.fstar");
  if (cfg.f.kind == "manufactured") {
    if (!mf) throw ConfigError("[density.f] kind 'manufactured' needs [manufactured] enabled = true");
    const RadialManufactured u = *s->manufactured;
    const GeneratingFunction gf = s->gf;
    const Density fs = s->fstar;
    s->f = Density::custom([u, gf, fs](const Vec2& x) { return fs(u.map(gf, x)) * u.jacobian(gf, x); });
  } else {
    s->f = detail::make_density(cfg.f, "density.f");
  }

  s->source_mass = integrate(s->omega, s->f);
  s->target_mass = integrate(s->omega_star, s->fstar);
  if (!(s->source_mass > 0.0) || !(s->target_mass > 0.0)) throw ConfigError("densities must carry positive mass");
  s->fstar.scale = s->source_mass / s->target_mass;

  s->grid = std::make_unique<Grid>(build_grid(s->omega, cfg.grid.n_r, cfg.grid.n_theta));
  s->ops = std::make_unique<GridOperators>(*s->grid);
  s->a5 = constants_A5(s->gf, s->omega, s->omega_star, cfg.model.delta);
  return s;
}

inline std::unique_ptr<Setup> load_setup(const fs::path& config_path, const CommandOptions& opt = {}) {
  RunConfig cfg = load_config(config_path.string());
  if (opt.seed) cfg.seed = *opt.seed;
  return make_setup(cfg, config_path);
}

inline Json entry_json(const ConditionEntry& e) {
  Json j;
  j["name"] = e.name;
  j["status"] = to_string(e.status);
  j["margin"] = json_number(e.margin);
  j["samples"] = e.samples;
  j["excluded"] = e.excluded;
  if (!e.worst.empty()) j["worst"] = e.worst;
  return j;
}

inline Json a5_json(const A5Constants& c) {
  Json j;
  j["J0"] = Json::array({json_number(c.J0.lo), json_number(c.J0.hi)});
  j["K0"] = json_number(c.K0);
  if (!std::isnan(c.m0)) j["m0"] = json_number(c.m0);
  if (!std::isnan(c.M0)) j["M0"] = json_number(c.M0);
  if (!std::isnan(c.kappa_prime)) j["kappa_prime"] = json_number(c.kappa_prime);
  j["delta"] = c.delta;
  return j;
}

struct CheckOutcome {
  Json report;
  bool ok = false;
  std::vector<std::string> failures;
};

/// Structural conditions, gradient-bound constants and domain convexity.
inline CheckOutcome run_check(const Setup& s) {
  CheckOutcome out;
  CheckOptions opt;
  opt.n_samples = s.cfg.check.n_samples;
  opt.n_directions = s.cfg.check.n_directions;
  opt.tol = s.cfg.check.tol;
  opt.seed = s.cfg.seed;
  // Heights are sampled on the range the start construction guarantees.
  Interval J = s.a5.J0;
  std::string start_error;
  try {
    const Vec2 y0 = std::isnan(s.cfg.gconvex.y0.x()) ? s.omega_star.center : s.cfg.gconvex.y0;
    J = choose_start(s.gf, s.omega, s.omega_star, y0, s.a5, s.cfg.gconvex.z0, s.cfg.gconvex.rho).range;
  } catch (const ConstructionError& e) {
    start_error = e.what();
  }

  std::vector<ConditionEntry> entries = check_A1_A2_A1star(s.gf, s.omega, s.omega_star, J, opt);
  const ConditionEntry a3 = check_A3w(s.gf, s.omega, s.omega_star, J, opt);
  const auto [a4, a4s] = check_A4(s.gf, s.omega, s.omega_star, J, opt);
  entries.push_back(a3);
  entries.push_back(a4);
  entries.push_back(a4s);

  const YConvexityReport yc = check_Y_convexity(s.omega, s.omega_star, J, s.gf, 256, 4, s.cfg.seed + 3);
  const YStarConvexityReport ys =
      check_Ystar_convexity(s.omega_star, s.omega, J, s.gf, 24, s.cfg.check.tol, s.cfg.seed + 4);

  auto need = [&](bool ok, const std::string& what) {
    if (!ok) out.failures.push_back(what);
  };
  for (const auto& e : entries)
    if (e.name.rfind("A1", 0) == 0 || e.name.rfind("A2", 0) == 0) need(e.ok(), e.name);
  need(a3.ok(), "A3w");
  need(a4.ok() || a4s.ok() || a3.status == Status::holds_strictly, "one of A4w, A4*w or A3");
  need(std::isfinite(s.a5.K0) && !s.a5.J0.empty(), "A5");
  need(start_error.empty(), "range condition: " + start_error);
  need(yc.margin >= -s.cfg.check.tol, "Y-convexity of the source");
  need(ys.convex, "Y*-convexity of the target");

  Json& r = out.report;
  r["model"] = to_string(s.gf.model);
  r["conditions"] = Json::array();
  for (const auto& e : entries) r["conditions"].push_back(entry_json(e));
  r["A3w_strict"] = a3.status == Status::holds_strictly;
  if (s.gf.model == Model::quadratic_ot) r["A3w_zero_form"] = std::abs(a3.margin) <= s.cfg.check.tol;
  r["A5"] = a5_json(s.a5);
  r["height_range"] = Json::array({json_number(J.lo), json_number(J.hi)});
  r["Y_convexity"] = {{"margin", json_number(yc.margin)},
                      {"samples", yc.samples},
                      {"uniformly_convex", yc.uniformly_convex(s.cfg.check.tol)},
                      {"worst", yc.worst}};
  r["Ystar_convexity"] = {
      {"convex", ys.convex}, {"margin", json_number(ys.margin)}, {"samples", ys.samples}, {"worst", ys.worst}};
  r["failures"] = out.failures;
  out.ok = out.failures.empty();
  r["ok"] = out.ok;
  return out;
}

inline void ensure_out_dir(const Setup& s) { fs::create_directories(s.out_dir); }

inline int cmd_check(const Setup& s, std::ostream& log = std::cout) {
  ensure_out_dir(s);
  const CheckOutcome c = run_check(s);
  write_json(s.artifact("check.json"), c.report);
  for (const auto& e : c.report["conditions"])
    log << "  " << e["name"].get<std::string>() << ": " << e["status"].get<std::string>() << '\n';
  if (!c.ok) {
    for (const auto& f : c.failures) log << "check failed: " << f << '\n';
    return exit_validation;
  }
  log << "check passed\n";
  return exit_ok;
}

struct InitChoice {
  Vec2 y0;
  double z0, rho;
};

inline InitChoice resolve_start(const Setup& s) {
  const auto& g = s.cfg.gconvex;
  const Vec2 y0 = std::isnan(g.y0.x()) ? s.omega_star.center : g.y0;
  const StartPoint p = choose_start(s.gf, s.omega, s.omega_star, y0, s.a5, g.z0, g.rho);
  return {y0, p.z0, p.rho};
}

inline EnvelopeOptions envelope_options(const Setup& s, const CommandOptions& opt) {
  EnvelopeOptions env;
  env.enabled = s.cfg.gconvex.envelope && !opt.skip_envelope;
  env.delta_cells = s.cfg.gconvex.delta_cells;
  env.eps_fraction = s.cfg.gconvex.eps_fraction;
  env.t_adj = s.cfg.gconvex.t_adj;
  env.n_boundary = s.cfg.gconvex.n_boundary;
  return env;
}

inline int cmd_init(const Setup& s, const CommandOptions& opt, std::ostream& log = std::cout) {
  ensure_out_dir(s);
  if (!opt.force) {
    const CheckOutcome c = run_check(s);
    write_json(s.artifact("check.json"), c.report);
    if (!c.ok) {
      log << "init: condition check failed (" << c.failures.front() << "); rerun with --force to override\n";
      return exit_validation;
    }
  }
  const InitChoice st = resolve_start(s);
  const EnvelopeOptions env = envelope_options(s, opt);
  const InitialField init = initial_field(s.gf, s.omega, s.omega_star, st.y0, st.z0, st.rho, *s.ops, s.a5, env);

  FieldColumns cols;
  cols.add("u", init.field.u);
  cols.add("Du", init.field.Du);
  cols.add("Tu", init.field.image);
  cols.add("lambda", init.field.lambda);
  write_field_csv(s.artifact("init_field.csv"), *s.grid, cols);

  Json j;
  j["path"] = init.path;
  j["skip_envelope"] = opt.skip_envelope;
  j["y0"] = json_vec(st.y0);
  j["z0"] = st.z0;
  j["rho"] = st.rho;
  if (env.enabled) {
    j["delta"] = init.delta;
    j["eps_moll"] = init.eps;
    j["t_adj"] = env.t_adj;
    j["n_boundary"] = env.n_boundary;
    j["envelope_max_excess"] = json_number(init.max_excess);
    j["max_target_excursion"] = init.max_target_excursion;
  }
  j["min_lambda"] = init.report.min_lambda;
  j["max_image_offset"] = init.report.max_image_offset;
  j["range"] = Json::array({json_number(init.report.range.lo), json_number(init.report.range.hi)});
  j["range_ok"] = init.report.range_ok;
  j["image_hull"] = Json::array();
  for (const auto& y : init.report.image_boundary) j["image_hull"].push_back(json_vec(y));
  j["config_hash"] = content_hash(s.cfg);
  write_json(s.artifact("init.json"), j);
  log << "init: " << init.path << " field written, min lambda = " << init.report.min_lambda << '\n';
  return exit_ok;
}

inline HomotopyParams homotopy_params(const RunConfig& c) {
  HomotopyParams p;
  p.tau = std::isnan(c.homotopy.tau) ? -1.0 : c.homotopy.tau;
  p.eps0 = c.homotopy.eps0;
  p.eps_factor = c.homotopy.eps_factor;
  p.eps_min = c.homotopy.eps_min;
  p.limit_solve = c.homotopy.limit_solve;
  p.dt0 = c.homotopy.dt0;
  p.dt_min = c.homotopy.dt_min;
  p.dt_max = c.homotopy.dt_max;
  p.newton_tol = c.homotopy.newton_tol;
  p.step_tol = c.homotopy.step_tol;
  p.max_newton = c.homotopy.max_newton;
  return p;
}

inline void write_trace_csv(const fs::path& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "step,stage,t,eps,dt,newton_iters,res_interior,res_boundary,min_lambda,min_obliqueness,clamped,penalty,"
         "accepted,monotone,note\n"
      << std::setprecision(12);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const TraceRow& r = rows[k];
    out << k << ',' << r.stage << ',' << r.t << ',' << r.eps << ',' << r.dt << ',' << r.newton_iters << ','
        << r.res_interior << ',' << r.res_boundary << ',' << r.min_lambda << ',' << r.min_obliqueness << ','
        << r.clamped << ',' << r.penalty << ',' << (r.accepted ? 1 : 0) << ',' << (r.monotone ? 1 : 0) << ",\""
        << r.note << "\"\n";
  }
}

/// Largest |Tu - T_ref| over the nodes, when a reference map is configured.
inline std::optional<double> map_error(const Setup& s, const std::vector<Vec2>& Tu) {
  if (!s.manufactured) return std::nullopt;
  double e = 0.0;
  for (int k = 0; k < s.grid->size(); ++k) e = std::max(e, (Tu[k] - s.map_reference(s.grid->nodes[k])).norm());
  return e;
}

inline int cmd_solve(const Setup& s, std::ostream& log = std::cout) {
  ensure_out_dir(s);
  const FieldColumns init = read_field_csv(s.artifact("init_field.csv"), *s.grid);
  const Json init_meta = read_json(s.artifact("init.json"));
  Problem pb{s.gf, s.omega, s.omega_star, s.f, s.fstar};
  HomotopySolver solver(pb, *s.ops, init.column("u"), homotopy_params(s.cfg));

  Json j;
  j["config_hash"] = content_hash(s.cfg);
  j["grid"] = {{"n_r", s.grid->n_r}, {"n_theta", s.grid->n_theta}, {"nodes", s.grid->size()}};
  j["init_path"] = init_meta.value("path", "unknown");
  j["tau"] = solver.tau();
  j["tau_auto"] = std::isnan(s.cfg.homotopy.tau);
  j["fstar_scale"] = s.fstar.scale;
  if (s.cfg.homotopy.probes > 0) {
    const ProbeReport pr = solver.uniqueness_probe(s.cfg.homotopy.probes, 1e-3, s.cfg.seed);
    j["probe"] = {{"probes", pr.probes},
                  {"converged", pr.converged},
                  {"max_distance", pr.max_distance},
                  {"failures", pr.failures}};
    log << "solve: t = 0 probe " << pr.converged << "/" << pr.probes << " converged\n";
  }
  try {
    const SolveResult res = solver.solve();
    write_trace_csv(s.artifact("trace.csv"), solver.trace());
    FieldColumns cols;
    cols.add("u", res.state.u);
    cols.add("Tu", res.state.Tu);
    cols.add("lambda", res.state.lambda);
    cols.add("residual", res.state.residual);
    write_field_csv(s.artifact("solution.csv"), *s.grid, cols);
    j["status"] = "converged";
    j["eps_schedule"] = res.eps_schedule;
    j["residual_interior"] = res.state.res_interior;
    j["residual_boundary"] = res.state.res_boundary;
    j["min_lambda"] = res.state.min_lambda;
    j["min_obliqueness"] = res.state.min_obliqueness;
    j["flipped_cells"] = res.flipped_cells;
    j["boundary_image_error"] = res.boundary_image_error;
    j["steps"] = solver.trace().size();
    int nonmonotone = 0;
    for (const auto& r : solver.trace())
      if (r.accepted && !r.monotone) ++nonmonotone;
    j["nonmonotone_steps"] = nonmonotone;
    if (const auto e = map_error(s, res.state.Tu)) j["map_error"] = *e;
    j["wall_seconds"] = res.wall_seconds;
    write_json(s.artifact("solve.json"), j);
    log << "solve: converged, interior residual " << res.state.res_interior << ", wall " << res.wall_seconds
        << " s\n";
    if (const auto e = map_error(s, res.state.Tu)) log << "solve: max |Tu - Tu_ref| = " << *e << '\n';
    return exit_ok;
  } catch (const Error& e) {
    write_trace_csv(s.artifact("trace.csv"), solver.trace());
    j["status"] = "failed";
    j["error"] = e.what();
    j["steps"] = solver.trace().size();
    write_json(s.artifact("solve.json"), j);
    log << "solve failed: " << e.what() << " (trace of " << solver.trace().size() << " steps written)\n";
    return exit_runtime;
  }
}

inline Json ray_json(const RayReport& r) {
  Json j;
  j["samples"] = r.requested;
  j["misses"] = r.misses;
  j["max_deviation"] = r.max_deviation;
  j["mean_deviation"] = r.mean_deviation;
  if (!r.miss_reasons.empty()) j["miss_reasons"] = r.miss_reasons;
  return j;
}

inline Json mass_json(const MassReport& m) {
  Json j;
  j["samples"] = m.samples;
  j["bins"] = m.pushforward.size();
  j["pushforward"] = m.pushforward;
  j["expected"] = m.expected;
  j["mismatch"] = m.mismatch;
  j["max_mismatch"] = m.max_mismatch;
  j["source_mass"] = m.source_mass;
  j["target_mass"] = m.target_mass;
  j["outside_mass"] = m.outside_mass;
  j["mass_identity_error"] = m.mass_identity_error;
  j["containment_tolerance"] = m.tolerance;
  j["containment_failures"] = m.containment_failures;
  j["clamped"] = m.clamped;
  j["boundary_gap"] = m.boundary_gap;
  return j;
}

inline void write_worst_rays(const fs::path& path, const RayReport& r, std::size_t n = 20) {
  std::vector<RaySample> s = r.samples;
  std::sort(s.begin(), s.end(), [](const RaySample& a, const RaySample& b) { return a.deviation > b.deviation; });
  std::ofstream out(path);
  out << "x,y,u,p_x,p_y,hit_x,hit_y,map_x,map_y,deviation\n" << std::setprecision(17);
  for (std::size_t k = 0; k < std::min(n, s.size()); ++k) {
    const RaySample& q = s[k];
    out << q.jet.x.x() << ',' << q.jet.x.y() << ',' << q.jet.u << ',' << q.jet.p.x() << ',' << q.jet.p.y() << ','
        << q.y_hit.x() << ',' << q.y_hit.y() << ',' << q.y_map.x() << ',' << q.y_map.y() << ',' << q.deviation
        << '\n';
  }
}

inline int cmd_verify(const Setup& s, std::ostream& log = std::cout) {
  ensure_out_dir(s);
  const std::string which = s.cfg.verify.field;
  fs::path file;
  if (which == "solution") file = s.artifact("solution.csv");
  else if (which == "initial") file = s.artifact("init_field.csv");
  else throw ConfigError("[verify] field must be 'solution' or 'initial'");
  const FieldColumns cols = read_field_csv(file, *s.grid);
  const FieldInterpolant u(*s.grid, cols.column("u"));

  Json j;
  j["field"] = which;
  std::vector<std::string> failures;
  if (s.gf.model != Model::quadratic_ot) {
    const RayReport r = s.gf.model == Model::reflection
                            ? trace_reflection(s.gf, u, s.cfg.verify.ray_samples, s.cfg.seed)
                            : trace_refraction(s.gf, u, s.cfg.verify.ray_samples, s.cfg.seed);
    j["rays"] = ray_json(r);
    write_worst_rays(s.artifact("rays_worst.csv"), r);
    if (!r.ok(s.cfg.verify.ray_tol)) failures.push_back("ray deviation or misses");
  }
  const BinLayout bins{s.omega_star, s.cfg.verify.bin_rings, s.cfg.verify.bin_sectors};
  const MassReport m = pushforward_histogram(s.gf, u, s.f, s.fstar, bins, s.cfg.verify.mass_samples);
  j["mass"] = mass_json(m);
  if (m.containment_failures > 0) failures.push_back("target containment: image leaves the target");
  if (m.boundary_gap > m.tolerance) failures.push_back("target containment: boundary image does not reach the target boundary");
  if (!(m.max_mismatch < s.cfg.verify.mismatch_tol)) failures.push_back("per-bin mass mismatch");
  if (!(m.mass_identity_error < 1e-10)) failures.push_back("total mass identity");
  std::vector<Vec2> Tu(s.grid->size());
  for (int k = 0; k < s.grid->size(); ++k) Tu[k] = Vec2(cols.column("Tu_x")[k], cols.column("Tu_y")[k]);
  if (const auto e = map_error(s, Tu)) {
    j["map_error"] = *e;
    if (!(*e < s.cfg.verify.map_tol)) failures.push_back("map error against the reference");
  }
  j["failures"] = failures;
  j["ok"] = failures.empty();
  write_json(s.artifact("verify.json"), j);
  log << "verify: max bin mismatch " << m.max_mismatch << ", boundary gap " << m.boundary_gap << '\n';
  for (const auto& f : failures) log << "verify failed: " << f << '\n';
  return failures.empty() ? exit_ok : exit_validation;
}

/// Plot-friendly CSV: every available nodal field side by side, plus the
/// target boundary polyline.
inline int cmd_export(const Setup& s, std::ostream& log = std::cout) {
  ensure_out_dir(s);
  FieldColumns all;
  int found = 0;
  for (const auto& [file, prefix] : {std::pair<std::string, std::string>{"init_field.csv", "init_"},
                                     std::pair<std::string, std::string>{"solution.csv", "sol_"}}) {
    if (!fs::exists(s.artifact(file))) continue;
    const FieldColumns c = read_field_csv(s.artifact(file), *s.grid);
    for (std::size_t k = 0; k < c.names.size(); ++k) all.add(prefix + c.names[k], c.values[k]);
    ++found;
  }
  if (found == 0) {
    log << "export: no field artifacts in " << s.out_dir << '\n';
    return exit_runtime;
  }
  if (s.manufactured) {
    std::vector<Vec2> ref(s.grid->size());
    for (int k = 0; k < s.grid->size(); ++k) ref[k] = s.map_reference(s.grid->nodes[k]);
    all.add("ref_Tu", ref);
  }
  write_field_csv(s.artifact("export_fields.csv"), *s.grid, all);
  std::ofstream b(s.artifact("export_target_boundary.csv"));
  b << "theta,x,y\n" << std::setprecision(17);
  for (int k = 0; k <= 360; ++k) {
    const double t = 2 * pi * k / 360;
    const Vec2 p = boundary_point(s.omega_star, t).position;
    b << t << ',' << p.x() << ',' << p.y() << '\n';
  }
  write_grid_csv(*s.grid, s.artifact("export_grid.csv").string());
  log << "export: wrote export_fields.csv, export_target_boundary.csv, export_grid.csv\n";
  return exit_ok;
}

/// Dispatches a command; maps exceptions to exit codes.
namespace detail {

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_validation;
  } catch (const ConstructionError& e) {
    err << "construction error: " << e.what() << '\n';
    return exit_validation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}

inline int dispatch(const std::string& command, const Setup& s, const CommandOptions& opt, std::ostream& log,
                    std::ostream& err) {
  if (command == "check") return cmd_check(s, log);
  if (command == "init") return cmd_init(s, opt, log);
  if (command == "solve") return cmd_solve(s, log);
  if (command == "verify") return cmd_verify(s, log);
  if (command == "export") return cmd_export(s, log);
  err << "unknown command '" << command << "'\n";
  return exit_validation;
}

}  // namespace detail

inline int run_command(const std::string& command, const Setup& s, const CommandOptions& opt,
                       std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] { return detail::dispatch(command, s, opt, log, err); });
}

inline int run_command(const std::string& command, const fs::path& config, const CommandOptions& opt,
                       std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const auto s = load_setup(config, opt);
    return detail::dispatch(command, *s, opt, log, err);
  });
}

}  // namespace gpje
