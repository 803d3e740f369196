// Acceptance run: one PASS/FAIL line per criterion.

#include "support.hpp"

#include "gpje/manufactured.hpp"
#include "gpje/verify.hpp"

#include <chrono>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>

using namespace gpje;
using gpje::testing::Run;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const DomainSpec unit = DomainSpec::disc({0, 0}, 1.0);

std::vector<std::pair<std::string, GeneratingFunction>> models() {
  return {{"quadratic_ot", GeneratingFunction::quadratic_ot()},
          {"reflection", GeneratingFunction::reflection()},
          {"refraction k=1/2", GeneratingFunction::refraction(0.5)},
          {"refraction k=2", GeneratingFunction::refraction(2.0)}};
}

Outcome round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (const auto& [name, gf] : models()) {
    for (int s = 0; s < 10000; ++s) {
      const auto [x, y, z] = sample_triple(gf, rng);
      const GValue v = gf.eval(x, y, z);
      const DualEval d = solve_duals(gf, {x, v.g, v.gx});
      worst = std::max({worst, (d.Y - y).norm(), std::abs(d.Z - z)});
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 10.0, "sup error " + num(worst) + ", " + num(t) + " s"};
}

Outcome closed_form_duals() {
  std::mt19937_64 rng(102);
  double worst = 0.0;
  for (const auto& [name, gf] : models()) {
    if (gf.model == Model::quadratic_ot) continue;
    for (int s = 0; s < 1000; ++s) {
      const auto [x, y, z] = sample_triple(gf, rng);
      const GValue v = gf.eval(x, y, z);
      const Jet j{x, v.g, v.gx};
      Vec2 Y;
      double Z;
      if (!gpje::detail::flat_duals(gf, j, gf.phi.c, Y, Z)) return {false, name + ": closed form rejected an admissible jet"};
      const DualEval n = solve_duals(gf, j, DualMethod::newton);
      worst = std::max({worst, (Y - n.Y).norm(), std::abs(Z - n.Z) / (1.0 + std::abs(Z))});
    }
  }
  return {worst <= 1e-10, "max deviation " + num(worst)};
}

Outcome a_matrix() {
  std::mt19937_64 rng(103);
  double worst = 0.0;
  for (const auto& [name, gf] : models()) {
    for (int s = 0; s < 1000; ++s) {
      const auto [x, y, z] = sample_triple(gf, rng, 0.8);
      const GValue v = gf.eval(x, y, z);
      const DualEval d = solve_duals(gf, {x, v.g, v.gx});
      const double h = 1e-5;
      Mat2 gxx;
      for (int k = 0; k < 2; ++k) {
        Vec2 e = Vec2::Zero();
        e(k) = h;
        gxx.col(k) = (gf.eval(x + e, d.Y, d.Z).gx - gf.eval(x - e, d.Y, d.Z).gx) / (2 * h);
      }
      worst = std::max(worst, (gxx - d.A).cwiseAbs().maxCoeff() / (1.0 + d.A.cwiseAbs().maxCoeff()));
    }
  }
  return {worst <= 1e-6, "max deviation " + num(worst)};
}

/// det DTu det E against det(D2u - A) on the grid; DTu_ex by differencing the exact map.
double jacobian_error(const GeneratingFunction& gf, const RadialManufactured& m, int n, double* interior_fd) {
  const Grid g = build_grid(unit, n, n);
  const GridOperators ops(g);
  std::vector<double> u(g.size());
  for (int k = 0; k < g.size(); ++k) u[k] = m.value(g.nodes[k]);
  const TMapField t = map_T(gf, ops, u);
  double e = 0.0, fd = 0.0;
  const double h = 1e-5;
  for (int k = 0; k < g.size(); ++k) {
    const Vec2 x = g.nodes[k];
    const DualEval d = solve_duals(gf, m.jet(x));
    Mat2 D;
    for (int c = 0; c < 2; ++c) {
      Vec2 s = Vec2::Zero();
      s(c) = h;
      D.col(c) = (m.map(gf, x + s) - m.map(gf, x - s)) / (2 * h);
    }
    e = std::max(e, std::abs(D.determinant() * d.detE - (ops.hessian(u, k) - d.A).determinant()));
    if (g.ring(k) < g.n_r - 4)
      fd = std::max(fd, std::abs(t.detDTu_fd[k] * d.detE - (m.hess(x) - d.A).determinant()));
  }
  if (interior_fd) *interior_fd = fd;
  return e;
}

Outcome jacobian_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ot = GeneratingFunction::quadratic_ot();
  const Grid g = build_grid(unit, 32, 32);
  const GridOperators ops(g);
  std::vector<double> u(g.size());
  for (int k = 0; k < g.size(); ++k) u[k] = 0.5 * g.nodes[k].squaredNorm();
  const TMapField t = map_T(ot, ops, u);
  double exact = 0.0;
  for (int k = 0; k < g.size(); ++k) exact = std::max(exact, std::abs(t.detDTu[k] - 1.0));
  double sampled = 0.0;
  const double h = 1e-4;
  for (const auto& x : sample_points(unit, 2000, 104)) {
    const auto jet = [](const Vec2& y) { return Jet{y, 0.5 * y.squaredNorm(), y}; };
    const DualEval d = solve_duals(ot, jet(x));
    Mat2 D;
    for (int c = 0; c < 2; ++c) {
      Vec2 s = Vec2::Zero();
      s(c) = h;
      D.col(c) = (solve_duals(ot, jet(x + s)).Y - solve_duals(ot, jet(x - s)).Y) / (2 * h);
    }
    sampled = std::max(sampled, std::abs(D.determinant() * d.detE - (Mat2::Identity() - d.A).determinant()));
  }
  const auto refl = GeneratingFunction::reflection();
  const RadialManufactured m;
  double fd32 = 0, fd64 = 0;
  const double e32 = jacobian_error(refl, m, 32, &fd32), e64 = jacobian_error(refl, m, 64, &fd64);
  const double ratio = e32 / e64, ratio_fd = fd32 / fd64;
  const double secs = seconds_since(t0);
  return {exact <= 1e-10 && sampled <= 1e-10 && ratio >= 3.0 && ratio_fd >= 3.0 && secs < 30.0,
          "OT error " + num(exact) + " on the grid, " + num(sampled) + " at sampled points; reflection ratio " + num(ratio) + " (" + num(e32) + " -> " + num(e64) +
              "), differenced-map ratio " + num(ratio_fd) + ", " + num(secs) + " s"};
}

Outcome condition_suite() {
  CheckOptions o;
  const Interval refl_J{1.0, 2.0}, refr_J{-3.0, -2.0};
  std::vector<std::string> bad;
  const auto a3r = check_A3w(GeneratingFunction::reflection(), unit, unit, refl_J, o);
  if (a3r.status != Status::holds_strictly) bad.push_back("reflection A3 " + to_string(a3r.status));
  const auto [ri, rd] = check_A4(GeneratingFunction::reflection(), unit, unit, refl_J, o);
  if (!ri.ok()) bad.push_back("reflection A4w");
  const auto [hi, hd] = check_A4(GeneratingFunction::refraction(0.5), unit, unit, refr_J, o);
  if (!hi.ok() || hd.ok()) bad.push_back("refraction k=1/2 A4w only");
  const auto [ti, td] = check_A4(GeneratingFunction::refraction(2.0), unit, unit, refr_J, o);
  if (ti.ok() || !td.ok()) bad.push_back("refraction k=2 A4*w only");
  const auto a3q = check_A3w(GeneratingFunction::quadratic_ot(), unit, unit, {-1, 1}, o);
  if (a3q.status != Status::holds || a3q.margin != 0.0) bad.push_back("quadratic A3w zero form");
  std::string d = "reflection A3 margin " + num(a3r.margin) + ", OT A3w margin " + num(a3q.margin);
  for (const auto& b : bad) d += "; mismatch: " + b;
  return {bad.empty(), d};
}

Outcome a5_constants() {
  const auto r = constants_A5(GeneratingFunction::reflection(), unit, unit);
  const bool refl = r.m0 == 0.0 && r.K0 == 1.0;
  double worst = 0.0;
  for (double k : {0.5, 0.8, 1.5, 2.0, 3.0}) {
    const double delta = 0.5;
    const auto c = constants_A5(GeneratingFunction::refraction(k), unit, unit, delta);
    const double kp = std::sqrt(std::abs(1.0 - k * k));
    const double expect = k < 1.0 ? 2.0 / (k * kp * delta) : 1.0 / kp;
    worst = std::max(worst, std::abs(c.K0 - expect) / expect);
  }
  return {refl && worst <= 1e-12,
          "reflection m0 = " + num(r.m0) + ", K0 = " + num(r.K0) + "; refraction K0 relative error " + num(worst)};
}

Outcome initial_construction() {
  const auto ot = GeneratingFunction::quadratic_ot();
  const Vec2 y0(0.1, -0.05);
  const double z0 = 0.3, rho = 0.4;
  double worst = 0.0;
  for (const auto& x : sample_points(unit, 20000, 107)) {
    const double expect = x.dot(y0) - z0 + rho * std::sqrt(1.0 + x.squaredNorm());
    worst = std::max(worst, std::abs(g_rho(ot, y0, z0, rho, x).value - expect));
  }
  const Grid g = build_grid(unit, 32, 32);
  const GridOperators ops(g);
  const A5Constants a5 = constants_A5(ot, unit, unit);
  int violations = -1;
  double offset = NAN;
  try {
    const auto [field, rep] = build_initial(ot, unit, unit, y0, z0, rho, ops, a5);
    violations = rep.image_violations;
    offset = rep.max_image_offset;
  } catch (const Error& e) {
    return {false, e.what()};
  }
  return {worst <= 1e-8 && violations == 0,
          "max |g_rho - closed form| " + num(worst) + "; image offset " + num(offset) + " < rho, " +
              std::to_string(violations) + " violations"};
}

Outcome boundary_positivity() {
  int cases = 0, failures = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& [name, gf] : models()) {
    const auto r = boundary_positivity_test(gf, unit, unit, 50, 108);
    cases += r.cases;
    failures += r.failures;
    worst = std::min(worst, r.worst_min_h);
  }
  return {failures == 0 && cases == 200,
          std::to_string(cases) + " cases, " + std::to_string(failures) + " failures, min h " + num(worst)};
}

Outcome homotopy_t0() {
  double worst = 0.0;
  for (const char* cfg : {"identity_ot.toml", "manufactured_reflection.toml", "refraction_two.toml"}) {
    const auto s = gpje::testing::shipped(cfg, 32);
    const InitChoice st = resolve_start(*s);
    const InitialField init = initial_field(s->gf, s->omega, s->omega_star, st.y0, st.z0, st.rho, *s->ops, s->a5,
                                            envelope_options(*s, {}));
    const HomotopySolver solver({s->gf, s->omega, s->omega_star, s->f, s->fstar}, *s->ops, init.field.u,
                                homotopy_params(s->cfg));
    worst = std::max(worst, solver.initial_state().res_interior);
  }
  return {worst <= 1e-10, "max interior residual at u0 " + num(worst)};
}

Outcome probe() {
  const auto s = gpje::testing::shipped("manufactured_reflection.toml", 32);
  const InitChoice st = resolve_start(*s);
  const InitialField init = initial_field(s->gf, s->omega, s->omega_star, st.y0, st.z0, st.rho, *s->ops, s->a5,
                                          envelope_options(*s, {}));
  HomotopySolver solver({s->gf, s->omega, s->omega_star, s->f, s->fstar}, *s->ops, init.field.u,
                        homotopy_params(s->cfg));
  const ProbeReport r = solver.uniqueness_probe(10, 1e-3, 110);
  return {r.ok() && r.probes == 10 && r.max_distance <= 1e-8,
          std::to_string(r.converged) + "/" + std::to_string(r.probes) + " converged, max distance " +
              num(r.max_distance) + ", auto tau " + num(r.tau)};
}

Outcome identity_transport() {
  const auto s = gpje::testing::shipped("identity_ot.toml", 64);
  const auto t0 = std::chrono::steady_clock::now();
  const Run run = gpje::testing::run_pipeline(*s);
  const double secs = seconds_since(t0);
  double e = 0.0;
  for (int k = 0; k < s->grid->size(); ++k)
    e = std::max(e, (s->ops->gradient(run.result.state.u, k) - s->grid->nodes[k]).norm());
  return {e < 1e-3 && secs < 120.0, "max |Du - x| " + num(e) + ", wall " + num(secs) + " s"};
}

struct ManufacturedRuns {
  std::unique_ptr<Setup> coarse, fine;
  Run run_coarse, run_fine;
  std::string error;
};

ManufacturedRuns& manufactured() {
  static ManufacturedRuns m = [] {
    ManufacturedRuns r;
    try {
      r.coarse = gpje::testing::shipped("manufactured_reflection.toml", 32);
      r.fine = gpje::testing::shipped("manufactured_reflection.toml", 64);
      r.run_coarse = gpje::testing::run_pipeline(*r.coarse);
      r.run_fine = gpje::testing::run_pipeline(*r.fine);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    return r;
  }();
  return m;
}

Outcome manufactured_reflection() {
  const auto& m = manufactured();
  if (!m.error.empty()) return {false, m.error};
  const double ratio = m.run_coarse.map_error / m.run_fine.map_error;
  return {m.run_fine.map_error < 1e-2 && ratio >= 2.0,
          "map error " + num(m.run_coarse.map_error) + " (h = 1/32) -> " + num(m.run_fine.map_error) +
              " (h = 1/64), ratio " + num(ratio)};
}

Outcome ray_trace() {
  std::mt19937_64 rng(113);
  double worst = 0.0;
  int traced = 0, misses = 0;
  const std::pair<GeneratingFunction, Interval> cases[] = {
      {GeneratingFunction::reflection(), {2.0, 6.0}},
      {GeneratingFunction::refraction(0.5), {-6.0, -2.0}},
      {GeneratingFunction::refraction(2.0), {-6.0, -2.0}}};
  for (const auto& [gf, J] : cases) {
    std::vector<Jet> jets;
    for (const auto& s : sample_jets(gf, unit, unit, J, 10000, rng)) jets.push_back(s.jet);
    const RayReport r = trace_jets(gf, jets, 2.0);
    worst = std::max(worst, r.max_deviation);
    traced += static_cast<int>(r.samples.size());
    misses += r.misses;
  }
  return {worst < 1e-8 && misses == 0 && traced == 30000,
          std::to_string(traced) + " rays, " + std::to_string(misses) + " misses, max deviation " + num(worst)};
}

Outcome energy() {
  const auto& m = manufactured();
  if (!m.error.empty()) return {false, m.error};
  const Setup& s = *m.fine;
  const FieldInterpolant u(*s.grid, m.run_fine.result.state.u);
  const MassReport r = pushforward_histogram(s.gf, u, s.f, s.fstar, BinLayout{s.omega_star, 2, 8}, 1000000);
  return {r.max_mismatch < 0.02 && r.mass_identity_error <= 1e-10 && r.samples >= 1000000,
          "max bin mismatch " + num(r.max_mismatch) + ", mass identity " + num(r.mass_identity_error) + ", " +
              std::to_string(r.samples) + " samples"};
}

Outcome negative_controls() {
  const auto dir = gpje::testing::scratch_dir("acceptance");
  std::ostringstream log, err;
  auto at = [&](const std::string& name) {
    RunConfig cfg = load_config((gpje::testing::config_dir() / name).string());
    cfg.output_dir = (dir / name).string();
    return make_setup(cfg, gpje::testing::config_dir() / name);
  };
  const auto nonconvex = at("nonconvex_target.toml");
  const int check = run_command("check", *nonconvex, {}, log, err);
  const Json report = read_json(nonconvex->artifact("check.json"));
  bool ystar_failed = false;
  for (const auto& f : report.value("failures", Json::array()))
    if (f.get<std::string>().find("Y*") != std::string::npos) ystar_failed = true;
  const auto t0 = at("initial_field_control.toml");
  const int init = run_command("init", *t0, {}, log, err);
  const int verify = run_command("verify", *t0, {}, log, err);
  bool containment = false;
  if (fs::exists(t0->artifact("verify.json"))) {
    const Json v = read_json(t0->artifact("verify.json"));
    for (const auto& f : v["failures"])
      if (f.get<std::string>().find("containment") != std::string::npos) containment = true;
  }
  std::filesystem::remove_all(dir);
  return {check != 0 && ystar_failed && init == 0 && verify != 0 && containment,
          "nonconvex target check exit " + std::to_string(check) + (ystar_failed ? " (Y*-convexity)" : "") +
              "; t = 0 field verify exit " + std::to_string(verify) + (containment ? " (target containment)" : "")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"generating-equation round trip", round_trip},
      {"closed-form flat-target duals", closed_form_duals},
      {"A-matrix oracle", a_matrix},
      {"Jacobian identity", jacobian_identity},
      {"condition suite", condition_suite},
      {"A5 constants", a5_constants},
      {"initial construction", initial_construction},
      {"boundary positivity of g_rho minus a tilted g-affine support", boundary_positivity},
      {"homotopy consistency at t = 0", homotopy_t0},
      {"uniqueness probe at t = 0", probe},
      {"identity transport", identity_transport},
      {"manufactured reflection", manufactured_reflection},
      {"ray-trace ground truth", ray_trace},
      {"energy conservation", energy},
      {"negative controls", negative_controls},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " " << criteria[i].first << ": " << o.detail
              << " [" << num(seconds_since(t0)) << " s]" << std::endl;
  }
  std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
