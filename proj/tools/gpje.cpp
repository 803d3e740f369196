#include "gpje/pipeline.hpp"

#include "CLI11.hpp"

int main(int argc, char** argv) {
  CLI::App app{"gpje: generated Jacobian equation solver"};
  app.require_subcommand(1, 1);
  std::string config;
  gpje::CommandOptions opt;
  std::uint64_t seed = 0;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"check", "verify structural conditions and domain convexity"},
      {"init", "build the initial g-convex field"},
      {"solve", "run the homotopy continuation"},
      {"verify", "ray-trace and mass-conservation checks"},
      {"export", "write plot-friendly CSV files"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "run configuration")->required()->check(CLI::ExistingFile);
    sub->add_flag("--force", opt.force, "skip the condition gate in init");
    sub->add_flag("--skip-envelope", opt.skip_envelope, "use the bare g_rho initial field");
    sub->add_option("--seed", seed, "override the configured seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : gpje::exit_validation;
  }
  const CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed") > 0) opt.seed = seed;
  return gpje::run_command(sub->get_name(), config, opt);
}
