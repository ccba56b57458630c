#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "scaffold/fem.hpp"
#include "scaffold/materials.hpp"
#include "scaffold/mesh.hpp"

namespace scaffold {

/// Nodal P1 scaffold volume fraction; the control variable.
struct DensityField {
  Vector values;

  static DensityField uniform(int num_nodes, double value) {
    return {Vector::Constant(num_nodes, value)};
  }
  int size() const { return static_cast<int>(values.size()); }
};

/// Mean of the four nodal values of every element.
Vector element_average(const TetMesh& mesh, const Vector& nodal);

struct Schedule {
  double horizon = 52.0;  // weeks
  double dt = 1.0;        // weeks

  /// Throws std::invalid_argument unless horizon is a non-negative multiple of dt.
  int steps() const;
};

struct LoadCase {
  TractionMap tractions;                            // N/mm^2 per loaded physical tag
  std::map<int, Eigen::Vector3d> displacements;     // mm per Dirichlet physical tag
};

/// Tractions of a compressive force applied to the top and bottom box faces.
TractionMap compressive_box_load(const TetMesh& mesh, double force);

struct ForwardOptions {
  ElasticMode elastic_mode = ElasticMode::PureNeumann;
  bool fixture_active = true;
  CgOptions cg;
  /// Nodal densities are accepted in [c_P - slack, C_P + slack].
  double density_slack = 1e-4;
  bool check_invariants = true;
};

struct StepState {
  double t = 0.0;
  double sigma = 1.0;
  Vector u;       // nodal displacement, 3 per node
  Vector a1, a2;  // nodal
  Vector c, b;    // per element
};

struct StateTrajectory {
  double dt = 1.0;
  std::vector<StepState> steps;

  int size() const { return static_cast<int>(steps.size()); }
  const StepState& operator[](int n) const { return steps[n]; }
  const StepState& back() const { return steps.back(); }
};

class ForwardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Capacity-implicit logistic update (x + dt G) / (1 + dt G / capacity),
/// written as an increment so that the result never drops below x.
inline double capacity_update(double x, double drive, double capacity, double dt) {
  const double q = dt * drive;
  return x + q * (1.0 - x / capacity) / (1.0 + q / capacity);
}

double step_cells(double c, double a1, double a2, double rho, double dt,
                  const MaterialParams& params);
double step_bone(double b, double a1, double c_next, double rho, double dt,
                 const MaterialParams& params);

/// Eliminated diffusion system for one species at fixed density.
struct DiffusionSystem {
  SparseMatrix matrix;  // constrained rows/cols replaced by identity
  Vector lift;          // A * g with g the prescribed values, zero on constrained rows
  int species = 0;
};

/// The coupled elasticity / diffusion / ODE model with everything fixed except
/// the density. Immutable after construction.
class ForwardModel {
 public:
  ForwardModel(TetMesh mesh, MaterialParams params, LoadCase load, Schedule schedule,
               ForwardOptions options = {});

  const TetMesh& mesh() const { return mesh_; }
  const MaterialParams& params() const { return params_; }
  const Schedule& schedule() const { return schedule_; }
  const ForwardOptions& options() const { return options_; }
  const ElasticityOperator& elasticity() const { return elasticity_; }
  const DiffusionOperator& diffusion() const { return diffusion_; }
  const Vector& load() const { return load_; }

  /// Element carries scaffold/bone (false only for fixture elements when the
  /// fixture is active).
  bool design_element(int e) const { return design_element_[e] != 0; }
  /// Node touches at least one design element.
  bool design_node(int j) const { return design_node_[j] != 0; }
  Vector design_mask() const;
  /// Lumped nodal volumes over the whole mesh.
  const Vector& nodal_volume() const { return nodal_volume_; }
  /// Lumped mass restricted to design elements (diffusion domain).
  const Vector& diffusion_mass() const { return diffusion_mass_; }
  const DofMap& diffusion_constraints() const { return diffusion_dofs_; }
  double element_volume(int e) const { return elasticity_.geometry(e).volume; }

  /// Throws DomainError if a nodal value leaves the (slackened) control box.
  void check_density(const DensityField& rho) const;

  std::vector<double> young_moduli(const Vector& rho_e, double sig, const Vector& b) const;
  SparseMatrix stiffness_at(const Vector& rho_e, double sig, const Vector& b) const;
  /// Solves K u = load under the configured elastic boundary mode.
  Vector solve_elasticity_at(const Vector& rho_e, const Vector& b, double sig) const;
  Vector solve_elasticity(const SparseMatrix& stiffness, const Vector& rhs) const;
  /// Same operator with homogeneous constraints; used by the adjoint.
  Vector solve_elasticity_homogeneous(const SparseMatrix& stiffness, const Vector& rhs) const;

  std::vector<double> diffusivities(const Vector& rho_e) const;
  DiffusionSystem diffusion_system(const Vector& rho_e, int species) const;
  Vector step_diffusion(const DiffusionSystem& system, const Vector& a_prev,
                        const Vector& source) const;
  /// Solve with the eliminated matrix and zero prescribed values.
  Vector solve_diffusion_homogeneous(const DiffusionSystem& system, const Vector& rhs) const;

  Eigen::Matrix3d element_strain_of(int e, const Vector& u) const;
  Vector element_stimulus(const Vector& u) const;
  /// Nodal load of the element-constant source k2_i S(eps(u)) c.
  Vector source_vector(const Vector& u, const Vector& c, int species) const;

  StepState initial_state() const;
  StateTrajectory solve(const DensityField& rho) const;

 private:
  void check_step(const StepState& s, const Vector& rho_e, int n) const;

  TetMesh mesh_;
  MaterialParams params_;
  LoadCase load_case_;
  Schedule schedule_;
  ForwardOptions options_;
  ElasticityOperator elasticity_;
  DiffusionOperator diffusion_;
  Vector load_;
  std::optional<RigidBodyModes> rigid_modes_;
  DofMap elastic_dofs_;
  DofMap diffusion_dofs_;
  std::vector<char> design_element_;
  std::vector<char> design_node_;
  Vector nodal_volume_;
  Vector diffusion_mass_;
};

}  // namespace scaffold
