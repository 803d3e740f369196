#pragma once

#include "gpje/pipeline.hpp"

#include <filesystem>
#include <string>

#include <unistd.h>

namespace gpje::testing {

inline std::filesystem::path config_dir() { return GPJE_CONFIG_DIR; }

inline std::unique_ptr<Setup> shipped(const std::string& name, int n = 0) {
  RunConfig cfg = load_config((config_dir() / name).string());
  if (n > 0) {
    cfg.grid.n_r = n;
    cfg.grid.n_theta = n;
  }
  return make_setup(cfg, config_dir() / name);
}

struct Run {
  InitialField init;
  std::unique_ptr<HomotopySolver> solver;
  SolveResult result;
  double map_error = NAN;
};

/// init + solve in memory, without artifacts.
inline Run run_pipeline(const Setup& s, bool skip_envelope = false) {
  Run r;
  const InitChoice st = resolve_start(s);
  CommandOptions opt;
  opt.skip_envelope = skip_envelope;
  r.init = initial_field(s.gf, s.omega, s.omega_star, st.y0, st.z0, st.rho, *s.ops, s.a5, envelope_options(s, opt));
  Problem pb{s.gf, s.omega, s.omega_star, s.f, s.fstar};
  r.solver = std::make_unique<HomotopySolver>(pb, *s.ops, r.init.field.u, homotopy_params(s.cfg));
  r.result = r.solver->solve();
  if (const auto e = map_error(s, r.result.state.Tu)) r.map_error = *e;
  return r;
}

/// A fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  const auto p = std::filesystem::temp_directory_path() / ("gpje_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace gpje::testing
