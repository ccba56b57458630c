#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "scaffold/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Scaffold density optimizer for bone regeneration"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  const struct {
    const char* name;
    const char* help;
  } commands[] = {
      {"simulate", "Run the forward model and write VTK states and energy.csv"},
      {"optimize", "Run the gradient flow and write history.csv and rho.vtk"},
      {"grad-check", "Compare adjoint and finite-difference gradients"},
      {"stress-shielding", "Optimize with and without the fixture and compare near-fixture fields"},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config, "JSON run configuration")->required();
    sub->add_option("--out", out, "Output directory (overrides output.dir)");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  std::optional<std::filesystem::path> out_dir;
  if (!out.empty()) out_dir = out;
  return scaffold::run_command(command, config, out_dir, std::cout, std::cerr);
}
