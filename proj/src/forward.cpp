#include "scaffold/forward.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace scaffold {

Vector element_average(const TetMesh& mesh, const Vector& nodal) {
  Vector out(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& t = mesh.tets[e];
    out[e] = 0.25 * (nodal[t[0]] + nodal[t[1]] + nodal[t[2]] + nodal[t[3]]);
  }
  return out;
}

int Schedule::steps() const {
  if (!(dt > 0) || !(horizon >= 0)) throw std::invalid_argument("schedule: need dt > 0, T >= 0");
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument("schedule: T must be a multiple of dt");
  }
  return static_cast<int>(rounded);
}

TractionMap compressive_box_load(const TetMesh& mesh, double force) {
  double top = 0.0, bottom = 0.0;
  for (const auto& f : mesh.facets) {
    if (f.physical == kBoxTop) top += facet_area(mesh, f);
    if (f.physical == kBoxBottom) bottom += facet_area(mesh, f);
  }
  if (top <= 0 || bottom <= 0) throw std::invalid_argument("mesh has no top/bottom box faces");
  return {{kBoxTop, Eigen::Vector3d(0, 0, -force / top)},
          {kBoxBottom, Eigen::Vector3d(0, 0, force / bottom)}};
}

double step_cells(double c, double a1, double a2, double rho, double dt,
                  const MaterialParams& params) {
  const double drive = params.k6 * std::max(a1, 0.0) * std::max(a2, 0.0) * (1.0 + params.k7 * c);
  return capacity_update(c, drive, 1.0 - rho, dt);
}

double step_bone(double b, double a1, double c_next, double rho, double dt,
                 const MaterialParams& params) {
  const double drive = params.k4 * std::max(a1, 0.0) * c_next;
  return capacity_update(b, drive, 1.0 - rho, dt);
}

// ---------------------------------------------------------------------------

ForwardModel::ForwardModel(TetMesh mesh, MaterialParams params, LoadCase load, Schedule schedule,
                           ForwardOptions options)
    : mesh_(std::move(mesh)),
      params_(params),
      load_case_(std::move(load)),
      schedule_(schedule),
      options_(options),
      elasticity_(mesh_),
      diffusion_(mesh_),
      elastic_dofs_(DofMap::vector(mesh_.num_nodes())),
      diffusion_dofs_(DofMap::scalar(mesh_.num_nodes())) {
  params_.validate();
  schedule_.steps();
  validate_boundary_partition(mesh_, options_.elastic_mode);

  const int ne = mesh_.num_elements();
  const int nn = mesh_.num_nodes();
  design_element_.assign(ne, 1);
  design_node_.assign(nn, 0);
  std::vector<double> weight(ne, 1.0);
  for (int e = 0; e < ne; ++e) {
    if (options_.fixture_active && mesh_.regions[e] == Region::Fixture) {
      design_element_[e] = 0;
      weight[e] = 0.0;
    } else {
      for (int j : mesh_.tets[e]) design_node_[j] = 1;
    }
  }
  if (std::none_of(design_element_.begin(), design_element_.end(), [](char c) { return c; })) {
    throw std::invalid_argument("mesh has no design elements");
  }
  nodal_volume_ = diffusion_.lumped_mass();
  diffusion_mass_ = diffusion_.lumped_mass(weight);

  load_ = assemble_neumann_load(mesh_, load_case_.tractions);
  if (options_.elastic_mode == ElasticMode::PureNeumann) {
    rigid_modes_.emplace(mesh_);
  } else {
    for (const auto& f : mesh_.facets) {
      if (f.tags.elastic != ElasticTag::Dirichlet) continue;
      const auto it = load_case_.displacements.find(f.physical);
      const Eigen::Vector3d value = it == load_case_.displacements.end()
                                        ? Eigen::Vector3d::Zero()
                                        : it->second;
      for (int node : f.nodes) {
        for (int c = 0; c < 3; ++c) elastic_dofs_.constrain(3 * node + c, value[c]);
      }
    }
  }

  // Saturation a = 1 next to healthy bone; nodes outside the diffusion domain are pinned to 0.
  for (const auto& f : mesh_.facets) {
    if (f.tags.diffusion != DiffusionTag::Dirichlet) continue;
    for (int node : f.nodes) {
      if (design_node_[node]) diffusion_dofs_.constrain(node, 1.0);
    }
  }
  for (int j = 0; j < nn; ++j) {
    if (!design_node_[j]) diffusion_dofs_.constrain(j, 0.0);
  }
}

Vector ForwardModel::design_mask() const {
  Vector mask(mesh_.num_nodes());
  for (int j = 0; j < mesh_.num_nodes(); ++j) mask[j] = design_node_[j] ? 1.0 : 0.0;
  return mask;
}

void ForwardModel::check_density(const DensityField& rho) const {
  if (rho.size() != mesh_.num_nodes()) throw DomainError("density field has wrong size");
  const double lo = params_.c_P - options_.density_slack;
  const double hi = params_.C_P + options_.density_slack;
  for (int j = 0; j < rho.size(); ++j) {
    const double v = rho.values[j];
    if (!(v >= lo && v <= hi)) {
      std::ostringstream msg;
      msg << "density " << v << " at node " << j << " outside [" << params_.c_P << ", "
          << params_.C_P << "]";
      throw DomainError(msg.str());
    }
  }
}

std::vector<double> ForwardModel::young_moduli(const Vector& rho_e, double sig,
                                               const Vector& b) const {
  std::vector<double> young(mesh_.num_elements());
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    young[e] = design_element_[e] ? effective_modulus(rho_e[e], sig, b[e], params_)
                                  : params_.E_fixture;
  }
  return young;
}

SparseMatrix ForwardModel::stiffness_at(const Vector& rho_e, double sig, const Vector& b) const {
  return elasticity_.assemble(young_moduli(rho_e, sig, b), params_.nu);
}

Vector ForwardModel::solve_elasticity(const SparseMatrix& stiffness, const Vector& rhs) const {
  if (rigid_modes_) {
    const double scale = rhs.norm();
    if (rigid_modes_->coefficients(rhs).norm() > 1e-8 * scale) {
      throw ForwardError("pure-Neumann load is not in equilibrium (net force or moment)");
    }
    return solve_cg(stiffness, rhs, options_.cg, &*rigid_modes_).x;
  }
  auto system = apply_dirichlet({stiffness, rhs}, elastic_dofs_);
  return solve_cg(system.matrix, system.rhs, options_.cg).x;
}

Vector ForwardModel::solve_elasticity_homogeneous(const SparseMatrix& stiffness,
                                                  const Vector& rhs) const {
  if (rigid_modes_) return solve_cg(stiffness, rhs, options_.cg, &*rigid_modes_).x;
  DofMap zero = DofMap::vector(mesh_.num_nodes());
  for (int d : elastic_dofs_.constrained_dofs()) zero.constrain(d, 0.0);
  auto system = apply_dirichlet({stiffness, rhs}, zero);
  return solve_cg(system.matrix, system.rhs, options_.cg).x;
}

Vector ForwardModel::solve_elasticity_at(const Vector& rho_e, const Vector& b, double sig) const {
  return solve_elasticity(stiffness_at(rho_e, sig, b), load_);
}

std::vector<double> ForwardModel::diffusivities(const Vector& rho_e) const {
  std::vector<double> d(mesh_.num_elements(), 0.0);
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    if (design_element_[e]) d[e] = diffusivity(rho_e[e], params_);
  }
  return d;
}

DiffusionSystem ForwardModel::diffusion_system(const Vector& rho_e, int species) const {
  const double dt = schedule_.dt;
  SparseMatrix a = dt * diffusion_.stiffness(diffusivities(rho_e));
  for (int j = 0; j < a.rows(); ++j) {
    a.coeffRef(j, j) += (1.0 + dt * params_.k3[species]) * diffusion_mass_[j];
  }
  Vector prescribed = Vector::Zero(mesh_.num_nodes());
  for (int j : diffusion_dofs_.constrained_dofs()) prescribed[j] = diffusion_dofs_.value(j);
  DiffusionSystem out;
  out.species = species;
  out.lift = a * prescribed;
  for (int j : diffusion_dofs_.constrained_dofs()) out.lift[j] = 0.0;
  DofMap homogeneous = DofMap::scalar(mesh_.num_nodes());
  for (int j : diffusion_dofs_.constrained_dofs()) homogeneous.constrain(j, 0.0);
  out.matrix = apply_dirichlet({std::move(a), Vector::Zero(mesh_.num_nodes())}, homogeneous).matrix;
  return out;
}

Vector ForwardModel::step_diffusion(const DiffusionSystem& system, const Vector& a_prev,
                                    const Vector& source) const {
  Vector rhs = diffusion_mass_.cwiseProduct(a_prev) + schedule_.dt * source - system.lift;
  for (int j : diffusion_dofs_.constrained_dofs()) rhs[j] = diffusion_dofs_.value(j);
  return solve_cg(system.matrix, rhs, options_.cg).x;
}

Vector ForwardModel::solve_diffusion_homogeneous(const DiffusionSystem& system,
                                                 const Vector& rhs) const {
  Vector r = rhs;
  for (int j : diffusion_dofs_.constrained_dofs()) r[j] = 0.0;
  Vector x = solve_cg(system.matrix, r, options_.cg).x;
  for (int j : diffusion_dofs_.constrained_dofs()) x[j] = 0.0;
  return x;
}

Eigen::Matrix3d ForwardModel::element_strain_of(int e, const Vector& u) const {
  return element_strain(elasticity_.geometry(e), elasticity_.gather(e, u));
}

Vector ForwardModel::element_stimulus(const Vector& u) const {
  Vector s = Vector::Zero(mesh_.num_elements());
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    s[e] = stimulus(element_strain_of(e, u), params_.stimulus);
  }
  return s;
}

Vector ForwardModel::source_vector(const Vector& u, const Vector& c, int species) const {
  Vector f = Vector::Zero(mesh_.num_nodes());
  const double gain = params_.k2[species];
  if (gain == 0.0) return f;
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    if (!design_element_[e] || c[e] == 0.0) continue;
    const double s = gain * stimulus(element_strain_of(e, u), params_.stimulus) * c[e];
    const double share = s * element_volume(e) / 4.0;
    for (int j : mesh_.tets[e]) f[j] += share;
  }
  return f;
}

StepState ForwardModel::initial_state() const {
  StepState s;
  s.t = 0.0;
  s.sigma = 1.0;
  s.a1 = Vector::Zero(mesh_.num_nodes());
  for (int j : diffusion_dofs_.constrained_dofs()) s.a1[j] = diffusion_dofs_.value(j);
  s.a2 = s.a1;
  s.c = Vector::Zero(mesh_.num_elements());
  s.b = Vector::Zero(mesh_.num_elements());
  return s;
}

void ForwardModel::check_step(const StepState& s, const Vector& rho_e, int n) const {
  auto fail = [&](const std::string& what, int index) {
    std::ostringstream msg;
    msg << "invariant breach at step " << n << ": " << what << " (index " << index << ")";
    throw ForwardError(msg.str());
  };
  constexpr double kRoundoff = 1e-14;
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    const double cap = 1.0 - rho_e[e];
    if (!(s.c[e] >= 0.0 && s.c[e] <= cap + kRoundoff)) fail("osteoblast density outside [0,1-rho]", e);
    if (!(s.b[e] >= 0.0 && s.b[e] <= cap + kRoundoff)) fail("bone fraction outside [0,1-rho]", e);
  }
  for (int j = 0; j < mesh_.num_nodes(); ++j) {
    if (!(s.a1[j] >= -1e-10) || !(s.a2[j] >= -1e-10)) fail("negative molecule concentration", j);
  }
  if (!s.u.allFinite()) fail("non-finite displacement", 0);
}

StateTrajectory ForwardModel::solve(const DensityField& rho) const {
  check_density(rho);
  const Vector rho_e = element_average(mesh_, rho.values);
  const int steps = schedule_.steps();
  const double dt = schedule_.dt;

  StateTrajectory traj;
  traj.dt = dt;
  traj.steps.reserve(steps + 1);
  StepState state = initial_state();
  state.u = solve_elasticity_at(rho_e, state.b, state.sigma);
  traj.steps.push_back(state);
  if (steps == 0) return traj;

  const DiffusionSystem sys1 = diffusion_system(rho_e, 0);
  const DiffusionSystem sys2 = diffusion_system(rho_e, 1);
  for (int n = 0; n < steps; ++n) {
    const StepState& cur = traj.steps.back();
    StepState next;
    next.t = (n + 1) * dt;
    next.sigma = sigma(next.t, params_.k1);
    next.a1 = step_diffusion(sys1, cur.a1, source_vector(cur.u, cur.c, 0));
    next.a2 = step_diffusion(sys2, cur.a2, source_vector(cur.u, cur.c, 1));
    next.c = Vector::Zero(mesh_.num_elements());
    next.b = Vector::Zero(mesh_.num_elements());
    for (int e = 0; e < mesh_.num_elements(); ++e) {
      if (!design_element_[e]) continue;
      const double a1 = diffusion_.gather(e, next.a1).mean();
      const double a2 = diffusion_.gather(e, next.a2).mean();
      next.c[e] = step_cells(cur.c[e], a1, a2, rho_e[e], dt, params_);
      next.b[e] = step_bone(cur.b[e], a1, next.c[e], rho_e[e], dt, params_);
    }
    next.u = solve_elasticity_at(rho_e, next.b, next.sigma);
    if (options_.check_invariants) check_step(next, rho_e, n + 1);
    traj.steps.push_back(std::move(next));
  }
  return traj;
}

}  // namespace scaffold
