#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "scaffold/forward.hpp"
#include "scaffold/objective.hpp"
#include "scaffold/optimizer.hpp"

namespace scaffold {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file named by the configuration does not exist.
class MissingInputError : public ConfigError {
 public:
  explicit MissingInputError(const std::filesystem::path& path)
      : ConfigError("input file not found: " + path.string()), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct MeshSource {
  std::optional<BoxSpec> box;
  std::filesystem::path path;  // used when `box` is empty
  TagMap tags;
};

struct LoadSpec {
  std::optional<double> compressive_force;  // N, box meshes only
  LoadCase explicit_load;
};

struct GradientCheckOptions {
  double fd_step = 1e-5;
  double tolerance = 1e-4;
  int directions = 10;
  double cg_tol = 1e-11;  // forward tolerance used for the finite differences
};

struct OutputOptions {
  std::filesystem::path dir = "out";
  int every = 1;           // VTK cadence over time steps
  int snapshot_every = 0;  // VTK cadence over optimizer iterates, 0 = final only
};

struct RunConfig {
  MeshSource mesh;
  MaterialParams materials;
  LoadSpec load;
  Schedule schedule;
  ForwardOptions forward;
  ObjectiveSpec objective;
  OptimizerOptions optimizer;
  double rho0 = -1.0;  // < 0 means (c_P + C_P) / 2
  GradientCheckOptions gradient;
  OutputOptions output;
  std::uint64_t seed = 0;  // reserved; all algorithms are deterministic
  std::filesystem::path source;

  double initial_density() const;
};

/// Parses a JSON configuration. Relative mesh paths resolve against the
/// config file's directory. Throws ConfigError on schema or value errors.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

/// Builds the mesh; throws MissingInputError if a mesh file is absent.
TetMesh build_mesh(const RunConfig& config);
LoadCase build_load(const RunConfig& config, const TetMesh& mesh);

}  // namespace scaffold
