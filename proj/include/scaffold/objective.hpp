#pragma once

#include <span>
#include <vector>

#include "scaffold/forward.hpp"

namespace scaffold {

enum class ObjectiveKind {
  MaxEnergyLp,  // L^p(I) surrogate of max_t E, p > 0
  MinEnergyLp,  // L^p(I) surrogate of min_t E, p < 0
  BoneVolume,   // integral of b(T)
  None,         // no state term: regularizer and penalty only, no forward solve
};

enum class Sense { Min, Max };

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::MaxEnergyLp;
  double p = 5.0;
  double eta = 0.0;   // smoothness regularizer weight
  double beta = 0.0;  // box penalty weight
  Sense sense = Sense::Min;

  void validate() const;
  double sign() const { return sense == Sense::Min ? 1.0 : -1.0; }
};

/// Elastic energy 1/2 u^T K(rho, sigma_n, b_n) u at every step.
std::vector<double> elastic_energy_trajectory(const ForwardModel& model,
                                              const StateTrajectory& traj,
                                              const DensityField& rho);

/// Per-element energy density 1/2 C eps:eps (N mm / mm^3) at one step.
Vector element_energy_density(const ForwardModel& model, const StepState& state,
                              const Vector& rho_e);

/// Trapezoidal L^p(I) norm of uniformly sampled values. With `normalized`
/// the quadrature is divided by |I|, so constants map to themselves.
double lp_time_norm(std::span<const double> values, double p, double dt, bool normalized = true);
/// d(lp_time_norm)/d(values_n), normalized variant.
std::vector<double> lp_time_norm_gradient(std::span<const double> values, double p, double dt);

double bone_volume(const ForwardModel& model, const StateTrajectory& traj);

/// Squared-hinge penalty of nodal values outside [c_P, C_P], weighted by nodal volume.
double box_penalty(const Vector& rho, const Vector& nodal_volume, double lo, double hi);
Vector box_penalty_gradient(const Vector& rho, const Vector& nodal_volume, double lo, double hi);

/// Discrete H^1-type form rho^T M rho + rho^T K rho with unit-coefficient
/// lumped mass M and stiffness K.
class SmoothnessRegularizer {
 public:
  explicit SmoothnessRegularizer(const TetMesh& mesh);
  double value(const Vector& rho) const;
  Vector gradient(const Vector& rho) const;
  const Vector& mass() const { return mass_; }
  const SparseMatrix& stiffness() const { return stiffness_; }

 private:
  Vector mass_;
  SparseMatrix stiffness_;
};

struct ObjectiveEvaluation {
  double value = 0.0;
  double state_term = 0.0;  // sign * F(E) or sign * G(b)
  double regularizer = 0.0; // eta * R
  double penalty = 0.0;     // beta * K
  std::vector<double> energies;
  StateTrajectory trajectory;
};

/// Phi(rho) = s F(E) + s G(b) + eta R(rho) + beta K(rho) with s = -1 for
/// maximization; every problem is minimized internally.
class ReducedObjective {
 public:
  ReducedObjective(const ForwardModel& model, ObjectiveSpec spec);

  const ForwardModel& model() const { return model_; }
  const ObjectiveSpec& spec() const { return spec_; }
  const SmoothnessRegularizer& regularizer() const { return regularizer_; }

  ObjectiveEvaluation evaluate(const DensityField& rho) const;
  double value(const DensityField& rho) const { return evaluate(rho).value; }

  /// Derivative of the state-free terms eta R + beta K.
  Vector direct_gradient(const DensityField& rho) const;
  /// dPhi/dE_n for the energy objectives; empty otherwise.
  std::vector<double> energy_sensitivity(const std::vector<double>& energies) const;

 private:
  const ForwardModel& model_;
  ObjectiveSpec spec_;
  SmoothnessRegularizer regularizer_;
};

}  // namespace scaffold
