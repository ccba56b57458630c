#include "scaffold/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "scaffold/output.hpp"

namespace scaffold {

namespace {

std::string step_file(const char* stem, int index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d.vtk", stem, index);
  return buf;
}

VtkFields state_fields(const ForwardModel& model, const StepState& state, const DensityField& rho) {
  const Vector rho_e = element_average(model.mesh(), rho.values);
  VtkFields f;
  f.point_vectors.emplace_back("u", state.u);
  f.point_scalars.emplace_back("a1", state.a1);
  f.point_scalars.emplace_back("a2", state.a2);
  f.point_scalars.emplace_back("rho", rho.values);
  f.cell_scalars.emplace_back("c", state.c);
  f.cell_scalars.emplace_back("b", state.b);
  f.cell_scalars.emplace_back("rho_e", rho_e);
  f.cell_scalars.emplace_back("stimulus", model.element_stimulus(state.u));
  f.cell_scalars.emplace_back("energy_density", element_energy_density(model, state, rho_e));
  return f;
}

Vector region_field(const TetMesh& mesh) {
  Vector r(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) r[e] = mesh.regions[e] == Region::Fixture ? 1 : 0;
  return r;
}

void write_density(const std::filesystem::path& path, const TetMesh& mesh,
                   const DensityField& rho) {
  VtkFields f;
  f.point_scalars.emplace_back("rho", rho.values);
  f.cell_scalars.emplace_back("rho_e", element_average(mesh, rho.values));
  f.cell_scalars.emplace_back("fixture", region_field(mesh));
  write_vtk(path, mesh, f, "scaffold density");
}

}  // namespace

ForwardModel build_model(const RunConfig& config, const TetMesh& mesh,
                         std::optional<bool> fixture_active) {
  ForwardOptions options = config.forward;
  if (fixture_active) options.fixture_active = *fixture_active;
  return ForwardModel(mesh, config.materials, build_load(config, mesh), config.schedule, options);
}

StateTrajectory write_simulation(const ForwardModel& model, const DensityField& rho,
                                 const std::filesystem::path& dir, int every) {
  StateTrajectory traj = model.solve(rho);
  const auto energy = elastic_energy_trajectory(model, traj, rho);
  CsvWriter csv(dir / "energy.csv", {"t_weeks", "elastic_energy_Nmm", "bone_volume_mm3"});
  for (int n = 0; n < traj.size(); ++n) {
    double bone = 0.0;
    for (int e = 0; e < model.mesh().num_elements(); ++e) {
      bone += model.element_volume(e) * traj[n].b[e];
    }
    csv.row({traj[n].t, energy[n], bone});
    if (n % every == 0 || n + 1 == traj.size()) {
      char title[64];
      std::snprintf(title, sizeof title, "state t=%g weeks", traj[n].t);
      write_vtk(dir / step_file("state", n), model.mesh(), state_fields(model, traj[n], rho), title);
    }
  }
  return traj;
}

DensityField perturbed_density(const TetMesh& mesh, double base, double amplitude, double lo,
                               double hi) {
  Eigen::Vector3d min = mesh.nodes.front(), max = mesh.nodes.front();
  for (const auto& x : mesh.nodes) {
    min = min.cwiseMin(x);
    max = max.cwiseMax(x);
  }
  const Eigen::Vector3d extent = (max - min).cwiseMax(1e-12);
  DensityField rho = DensityField::uniform(mesh.num_nodes(), base);
  constexpr double kTwoPi = 6.283185307179586;
  for (int j = 0; j < mesh.num_nodes(); ++j) {
    const Eigen::Vector3d s = (mesh.nodes[j] - min).cwiseQuotient(extent);
    const double wave = std::sin(kTwoPi * (s.x() + 0.5 * s.y() + 0.25 * s.z()));
    rho.values[j] = std::clamp(base + amplitude * wave, lo, hi);
  }
  return rho;
}

std::vector<ShellClass> classify_shell(const TetMesh& mesh) {
  std::vector<char> fixture_node(mesh.num_nodes(), 0);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (mesh.regions[e] != Region::Fixture) continue;
    for (int j : mesh.tets[e]) fixture_node[j] = 1;
  }
  std::vector<ShellClass> shell(mesh.num_elements(), ShellClass::Far);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (mesh.regions[e] == Region::Fixture) {
      shell[e] = ShellClass::Fixture;
      continue;
    }
    for (int j : mesh.tets[e]) {
      if (fixture_node[j]) shell[e] = ShellClass::Near;
    }
  }
  return shell;
}

RegionMeans region_means(const ForwardModel& model, const std::vector<ShellClass>& shell,
                         ShellClass which, const DensityField& rho, const Vector& u) {
  const Vector rho_e = element_average(model.mesh(), rho.values);
  const Vector stim = model.element_stimulus(u);
  double volume = 0.0;
  RegionMeans m;
  for (int e = 0; e < model.mesh().num_elements(); ++e) {
    if (shell[e] != which) continue;
    const double v = model.element_volume(e);
    volume += v;
    m.rho += v * rho_e[e];
    m.stimulus += v * stim[e];
  }
  if (volume > 0) {
    m.rho /= volume;
    m.stimulus /= volume;
  }
  return m;
}

ShieldingStudy run_shielding_study(const RunConfig& config, const TetMesh& mesh) {
  if (!mesh.has_fixture()) throw ConfigError("stress-shielding needs a mesh with a fixture region");
  const ForwardModel model_a = build_model(config, mesh, false);
  const ForwardModel model_b = build_model(config, mesh, true);
  const ReducedObjective objective_a(model_a, config.objective);
  const ReducedObjective objective_b(model_b, config.objective);
  const DensityField rho0 = DensityField::uniform(mesh.num_nodes(), config.initial_density());

  ShieldingStudy study;
  study.arch_a = gradient_flow(objective_a, rho0, config.optimizer);
  study.arch_b = gradient_flow(objective_b, rho0, config.optimizer);

  const auto shell = classify_shell(mesh);
  const Vector u_a = model_b.solve_elasticity_at(element_average(mesh, study.arch_a.rho.values),
                                                 Vector::Zero(mesh.num_elements()), 1.0);
  const Vector u_b = model_b.solve_elasticity_at(element_average(mesh, study.arch_b.rho.values),
                                                 Vector::Zero(mesh.num_elements()), 1.0);
  study.a_near = region_means(model_b, shell, ShellClass::Near, study.arch_a.rho, u_a);
  study.a_far = region_means(model_b, shell, ShellClass::Far, study.arch_a.rho, u_a);
  study.b_near = region_means(model_b, shell, ShellClass::Near, study.arch_b.rho, u_b);
  study.b_far = region_means(model_b, shell, ShellClass::Far, study.arch_b.rho, u_b);
  return study;
}

void write_shielding_report(const std::filesystem::path& path, const ShieldingStudy& study) {
  CsvWriter csv(path, {"arch", "region", "mean_rho", "mean_stimulus"});
  auto row = [&](const char* arch, const char* region, const RegionMeans& m) {
    csv.row({arch, region, format_number(m.rho), format_number(m.stimulus)});
  };
  row("A", "near", study.a_near);
  row("A", "far", study.a_far);
  row("B", "near", study.b_near);
  row("B", "far", study.b_far);
}

void write_history(const std::filesystem::path& path, const std::vector<HistoryRow>& history) {
  CsvWriter csv(path, {"iter", "objective", "grad_l2", "step", "rho_min", "rho_max"});
  for (const auto& h : history) {
    csv.row({std::to_string(h.iter), format_number(h.objective), format_number(h.grad_l2),
             format_number(h.step), format_number(h.rho_min), format_number(h.rho_max)});
  }
}

void write_gradient_comparison(const std::filesystem::path& dir, const GradientComparison& cmp) {
  const double scale = std::max(cmp.fd.lpNorm<Eigen::Infinity>(), 1e-300);
  {
    CsvWriter csv(dir / "gradient_check.csv",
                  {"node", "design", "adjoint", "fd", "abs_error", "rel_error"});
    for (int j = 0; j < cmp.adjoint.size(); ++j) {
      const double err = std::abs(cmp.adjoint[j] - cmp.fd[j]);
      csv.row({std::to_string(j), cmp.mask[j] != 0.0 ? "1" : "0", format_number(cmp.adjoint[j]),
               format_number(cmp.fd[j]), format_number(err), format_number(err / scale)});
    }
  }
  {
    CsvWriter csv(dir / "directional_check.csv", {"direction", "fd", "adjoint", "rel_error"});
    for (std::size_t k = 0; k < cmp.directions.size(); ++k) {
      const auto& d = cmp.directions[k];
      csv.row({std::to_string(k), format_number(d.fd), format_number(d.adjoint),
               format_number(d.relative_error)});
    }
  }
  CsvWriter csv(dir / "gradient_summary.csv", {"metric", "value"});
  csv.row({"max_relative", format_number(cmp.max_relative)});
  csv.row({"mean_relative", format_number(cmp.mean_relative)});
  csv.row({"relative_l2", format_number(cmp.relative_l2)});
  csv.row({"max_directional", format_number(cmp.max_directional)});
}

// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& config, std::ostream& log) {
  const TetMesh mesh = build_mesh(config);
  const ForwardModel model = build_model(config, mesh);
  const DensityField rho = DensityField::uniform(mesh.num_nodes(), config.initial_density());
  const auto traj = write_simulation(model, rho, config.output.dir, config.output.every);
  log << "simulate: " << mesh.num_elements() << " tets, " << traj.size() - 1 << " steps -> "
      << config.output.dir.string() << '\n';
  return kExitOk;
}

int cmd_optimize(const RunConfig& config, std::ostream& log) {
  const TetMesh mesh = build_mesh(config);
  const ForwardModel model = build_model(config, mesh);
  const ReducedObjective objective(model, config.objective);
  const DensityField rho0 = DensityField::uniform(mesh.num_nodes(), config.initial_density());
  const auto& dir = config.output.dir;
  const int every = config.output.snapshot_every;

  const auto state = gradient_flow(objective, rho0, config.optimizer,
                                   [&](const HistoryRow& row, const DensityField& rho) {
                                     log << "iter " << row.iter << "  objective "
                                         << format_number(row.objective) << "  |g| "
                                         << format_number(row.grad_l2) << '\n';
                                     if (every > 0 && row.iter % every == 0) {
                                       write_density(dir / step_file("rho_iter", row.iter), mesh, rho);
                                     }
                                   });
  write_history(dir / "history.csv", state.history);
  write_density(dir / "rho.vtk", mesh, state.rho);
  if (objective.spec().kind != ObjectiveKind::None) {
    write_simulation(model, state.rho, dir / "final", config.output.every);
  }
  log << "optimize: " << to_string(state.status) << " after " << state.history.size() - 1
      << " iterations, objective " << format_number(state.history.front().objective) << " -> "
      << format_number(state.objective) << '\n';
  return kExitOk;
}

int cmd_grad_check(const RunConfig& config, std::ostream& log) {
  RunConfig tight = config;
  tight.forward.cg.tol = std::min(config.forward.cg.tol, config.gradient.cg_tol);
  const TetMesh mesh = build_mesh(tight);
  const ForwardModel model = build_model(tight, mesh);
  const ReducedObjective objective(model, tight.objective);
  const auto& m = tight.materials;
  const DensityField rho =
      perturbed_density(mesh, tight.initial_density(), 0.25 * (m.C_P - m.c_P), m.c_P, m.C_P);
  const auto cmp = compare_gradients(objective, rho, tight.gradient.fd_step,
                                     tight.gradient.directions);
  write_gradient_comparison(tight.output.dir, cmp);
  const double worst = std::max({cmp.max_relative, cmp.relative_l2, cmp.max_directional});
  log << "grad-check: max relative " << format_number(cmp.max_relative) << ", mean relative "
      << format_number(cmp.mean_relative) << ", relative L2 " << format_number(cmp.relative_l2)
      << ", directional " << format_number(cmp.max_directional) << '\n';
  if (worst > tight.gradient.tolerance) {
    log << "grad-check: discrepancy exceeds tolerance " << format_number(tight.gradient.tolerance)
        << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_stress_shielding(const RunConfig& config, std::ostream& log) {
  const TetMesh mesh = build_mesh(config);
  const auto& dir = config.output.dir;
  const ShieldingStudy study = run_shielding_study(config, mesh);
  write_history(dir / "history_A.csv", study.arch_a.history);
  write_history(dir / "history_B.csv", study.arch_b.history);
  write_density(dir / "rho_A.vtk", mesh, study.arch_a.rho);
  write_density(dir / "rho_B.vtk", mesh, study.arch_b.rho);
  write_shielding_report(dir / "shielding_report.csv", study);

  // Strain fields of both architectures under the fixture-present model,
  // before healing and after eight weeks.
  RunConfig eval = config;
  const double dt = config.schedule.dt;
  eval.schedule.horizon = std::max(config.schedule.horizon, std::ceil(8.0 / dt - 1e-9) * dt);
  const ForwardModel model = build_model(eval, mesh, true);
  const int n8 = static_cast<int>(std::lround(8.0 / dt));
  for (const auto& [name, state] : {std::pair{"A", &study.arch_a}, std::pair{"B", &study.arch_b}}) {
    const StateTrajectory traj = model.solve(state->rho);
    for (const int n : {0, n8}) {
      VtkFields f;
      f.point_vectors.emplace_back("u", traj[n].u);
      f.cell_scalars.emplace_back("stimulus", model.element_stimulus(traj[n].u));
      f.cell_scalars.emplace_back("rho_e", element_average(mesh, state->rho.values));
      f.cell_scalars.emplace_back("fixture", region_field(mesh));
      char file[64];
      std::snprintf(file, sizeof file, "strain_%s_t%02d.vtk", name, static_cast<int>(traj[n].t));
      write_vtk(dir / file, mesh, f, std::string("strain magnitude, architecture ") + name);
    }
  }

  log << "stress-shielding: B near/far mean rho " << format_number(study.b_near.rho) << " / "
      << format_number(study.b_far.rho) << "; near-fixture stimulus at t=0 A "
      << format_number(study.a_near.stimulus) << ", B " << format_number(study.b_near.stimulus)
      << '\n';
  return kExitOk;
}

int run_command(const std::string& command, const std::filesystem::path& config_path,
                const std::optional<std::filesystem::path>& out_dir, std::ostream& log,
                std::ostream& err) {
  try {
    RunConfig config = load_config(config_path);
    if (out_dir) config.output.dir = *out_dir;
    if (command == "simulate") return cmd_simulate(config, log);
    if (command == "optimize") return cmd_optimize(config, log);
    if (command == "grad-check") return cmd_grad_check(config, log);
    if (command == "stress-shielding") return cmd_stress_shielding(config, log);
    err << "error: unknown command '" << command << "'\n";
    return kExitBadInput;
  } catch (const MissingInputError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitBadInput;
  } catch (const ConfigError& ex) {
    err << "error: invalid configuration: " << ex.what() << '\n';
    return kExitBadInput;
  } catch (const MeshError& ex) {
    err << "error: mesh: " << ex.what() << '\n';
    return kExitBadInput;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace scaffold
