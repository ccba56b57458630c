#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scaffold/config.hpp"
#include "scaffold/gradient.hpp"
#include "scaffold/optimizer.hpp"

namespace scaffold {

// Exit codes of the command drivers.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;   // solver, invariant or check failure
inline constexpr int kExitBadInput = 2;  // missing file or invalid configuration

ForwardModel build_model(const RunConfig& config, const TetMesh& mesh,
                         std::optional<bool> fixture_active = std::nullopt);

/// Writes per-step VTK files (every `output.every` steps and always the last)
/// and energy.csv for one forward run; returns the trajectory.
StateTrajectory write_simulation(const ForwardModel& model, const DensityField& rho,
                                 const std::filesystem::path& dir, int every);

/// Nodal field used by grad-check: the initial density plus a smooth
/// deterministic perturbation, kept inside the box.
DensityField perturbed_density(const TetMesh& mesh, double base, double amplitude, double lo,
                               double hi);

enum class ShellClass { Fixture, Near, Far };

/// Design elements sharing a node with a fixture element are Near.
std::vector<ShellClass> classify_shell(const TetMesh& mesh);

struct RegionMeans {
  double rho = 0.0;
  double stimulus = 0.0;
};

/// Volume-weighted means of rho_e and S(eps(u)) over one shell class.
RegionMeans region_means(const ForwardModel& model, const std::vector<ShellClass>& shell,
                         ShellClass which, const DensityField& rho, const Vector& u);

struct ShieldingStudy {
  OptimizerState arch_a;  // optimized with the fixture excluded
  OptimizerState arch_b;  // optimized with the fixture present
  RegionMeans a_near, a_far, b_near, b_far;  // under the fixture-present model, t = 0
};

ShieldingStudy run_shielding_study(const RunConfig& config, const TetMesh& mesh);
void write_shielding_report(const std::filesystem::path& path, const ShieldingStudy& study);
void write_history(const std::filesystem::path& path, const std::vector<HistoryRow>& history);
void write_gradient_comparison(const std::filesystem::path& dir, const GradientComparison& cmp);

int cmd_simulate(const RunConfig& config, std::ostream& log);
int cmd_optimize(const RunConfig& config, std::ostream& log);
int cmd_grad_check(const RunConfig& config, std::ostream& log);
int cmd_stress_shielding(const RunConfig& config, std::ostream& log);

/// Loads the config, applies `out_dir` if given, dispatches and maps
/// exceptions onto exit codes with a diagnostic on `err`.
int run_command(const std::string& command, const std::filesystem::path& config_path,
                const std::optional<std::filesystem::path>& out_dir, std::ostream& log,
                std::ostream& err);

}  // namespace scaffold
