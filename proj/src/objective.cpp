#include "scaffold/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scaffold {

void ObjectiveSpec::validate() const {
  if (kind == ObjectiveKind::MaxEnergyLp || kind == ObjectiveKind::MinEnergyLp) {
    if (p == 0.0) throw std::invalid_argument("objective: p must be non-zero");
    if (kind == ObjectiveKind::MaxEnergyLp && p < 0) {
      throw std::invalid_argument("objective: max-energy surrogate needs p > 0");
    }
    if (kind == ObjectiveKind::MinEnergyLp && p > 0) {
      throw std::invalid_argument("objective: min-energy surrogate needs p < 0");
    }
  }
  if (eta < 0 || beta < 0) throw std::invalid_argument("objective: eta and beta must be >= 0");
}

Vector element_energy_density(const ForwardModel& model, const StepState& state,
                              const Vector& rho_e) {
  const auto young = model.young_moduli(rho_e, state.sigma, state.b);
  Vector density(model.mesh().num_elements());
  for (int e = 0; e < model.mesh().num_elements(); ++e) {
    const auto tensor = lame_from_young(young[e], model.params().nu);
    density[e] = 0.5 * tensor.contract(model.element_strain_of(e, state.u));
  }
  return density;
}

std::vector<double> elastic_energy_trajectory(const ForwardModel& model,
                                              const StateTrajectory& traj,
                                              const DensityField& rho) {
  const Vector rho_e = element_average(model.mesh(), rho.values);
  std::vector<double> energy;
  energy.reserve(traj.size());
  for (const auto& state : traj.steps) {
    const Vector density = element_energy_density(model, state, rho_e);
    double total = 0.0;
    for (int e = 0; e < density.size(); ++e) total += model.element_volume(e) * density[e];
    energy.push_back(total);
  }
  return energy;
}

namespace {

double trapezoid_weight(std::size_t n, std::size_t count) {
  return (n == 0 || n + 1 == count) ? 0.5 : 1.0;
}

void check_samples(std::span<const double> values, double p) {
  if (values.empty()) throw std::invalid_argument("lp_time_norm: no samples");
  if (p == 0.0) throw std::invalid_argument("lp_time_norm: p must be non-zero");
  for (double v : values) {
    if (p < 0 && !(v > 0)) throw DomainError("lp_time_norm: non-positive sample with p < 0");
    if (!(v >= 0)) throw DomainError("lp_time_norm: negative sample");
  }
}

}  // namespace

double lp_time_norm(std::span<const double> values, double p, double dt, bool normalized) {
  check_samples(values, p);
  if (values.size() == 1) {
    if (normalized) return values[0];
    throw std::invalid_argument("lp_time_norm: zero-length interval");
  }
  const double scale = *std::max_element(values.begin(), values.end());
  if (scale == 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t n = 0; n < values.size(); ++n) {
    sum += trapezoid_weight(n, values.size()) * dt * std::pow(values[n] / scale, p);
  }
  if (normalized) sum /= dt * static_cast<double>(values.size() - 1);
  return scale * std::pow(sum, 1.0 / p);
}

std::vector<double> lp_time_norm_gradient(std::span<const double> values, double p, double dt) {
  check_samples(values, p);
  std::vector<double> grad(values.size(), 0.0);
  if (values.size() == 1) {
    grad[0] = 1.0;
    return grad;
  }
  const double scale = *std::max_element(values.begin(), values.end());
  if (scale == 0.0) return grad;
  const double norm = lp_time_norm(values, p, dt, true);
  const double horizon = dt * static_cast<double>(values.size() - 1);
  const double lead = std::pow(norm / scale, 1.0 - p);
  for (std::size_t n = 0; n < values.size(); ++n) {
    grad[n] = lead * trapezoid_weight(n, values.size()) * dt *
              std::pow(values[n] / scale, p - 1.0) / horizon;
  }
  return grad;
}

double bone_volume(const ForwardModel& model, const StateTrajectory& traj) {
  const Vector& b = traj.back().b;
  double total = 0.0;
  for (int e = 0; e < b.size(); ++e) total += model.element_volume(e) * b[e];
  return total;
}

double box_penalty(const Vector& rho, const Vector& nodal_volume, double lo, double hi) {
  double total = 0.0;
  for (int j = 0; j < rho.size(); ++j) {
    const double below = std::max(0.0, lo - rho[j]);
    const double above = std::max(0.0, rho[j] - hi);
    total += nodal_volume[j] * (below * below + above * above);
  }
  return total;
}

Vector box_penalty_gradient(const Vector& rho, const Vector& nodal_volume, double lo, double hi) {
  Vector grad(rho.size());
  for (int j = 0; j < rho.size(); ++j) {
    grad[j] = 2.0 * nodal_volume[j] * (std::max(0.0, rho[j] - hi) - std::max(0.0, lo - rho[j]));
  }
  return grad;
}

SmoothnessRegularizer::SmoothnessRegularizer(const TetMesh& mesh) {
  const DiffusionOperator op(mesh);
  mass_ = op.lumped_mass();
  const std::vector<double> ones(mesh.num_elements(), 1.0);
  stiffness_ = op.stiffness(ones);
}

double SmoothnessRegularizer::value(const Vector& rho) const {
  return rho.dot(mass_.cwiseProduct(rho)) + rho.dot(stiffness_ * rho);
}

Vector SmoothnessRegularizer::gradient(const Vector& rho) const {
  return 2.0 * (mass_.cwiseProduct(rho) + stiffness_ * rho);
}

// ---------------------------------------------------------------------------

ReducedObjective::ReducedObjective(const ForwardModel& model, ObjectiveSpec spec)
    : model_(model), spec_(spec), regularizer_(model.mesh()) {
  spec_.validate();
}

ObjectiveEvaluation ReducedObjective::evaluate(const DensityField& rho) const {
  ObjectiveEvaluation out;
  const double s = spec_.sign();
  switch (spec_.kind) {
    case ObjectiveKind::MaxEnergyLp:
    case ObjectiveKind::MinEnergyLp:
      out.trajectory = model_.solve(rho);
      out.energies = elastic_energy_trajectory(model_, out.trajectory, rho);
      out.state_term = s * lp_time_norm(out.energies, spec_.p, model_.schedule().dt);
      break;
    case ObjectiveKind::BoneVolume:
      out.trajectory = model_.solve(rho);
      out.energies = elastic_energy_trajectory(model_, out.trajectory, rho);
      out.state_term = s * bone_volume(model_, out.trajectory);
      break;
    case ObjectiveKind::None:
      break;
  }
  const auto& params = model_.params();
  out.regularizer = spec_.eta == 0.0 ? 0.0 : spec_.eta * regularizer_.value(rho.values);
  out.penalty = spec_.beta == 0.0
                    ? 0.0
                    : spec_.beta * box_penalty(rho.values, model_.nodal_volume(), params.c_P,
                                               params.C_P);
  out.value = out.state_term + out.regularizer + out.penalty;
  return out;
}

Vector ReducedObjective::direct_gradient(const DensityField& rho) const {
  Vector grad = Vector::Zero(rho.size());
  if (spec_.eta != 0.0) grad += spec_.eta * regularizer_.gradient(rho.values);
  if (spec_.beta != 0.0) {
    grad += spec_.beta * box_penalty_gradient(rho.values, model_.nodal_volume(),
                                              model_.params().c_P, model_.params().C_P);
  }
  return grad;
}

std::vector<double> ReducedObjective::energy_sensitivity(
    const std::vector<double>& energies) const {
  if (spec_.kind != ObjectiveKind::MaxEnergyLp && spec_.kind != ObjectiveKind::MinEnergyLp) {
    return std::vector<double>(energies.size(), 0.0);
  }
  auto grad = lp_time_norm_gradient(energies, spec_.p, model_.schedule().dt);
  for (double& g : grad) g *= spec_.sign();
  return grad;
}

}  // namespace scaffold
