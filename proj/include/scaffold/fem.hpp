#pragma once

#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "scaffold/materials.hpp"
#include "scaffold/mesh.hpp"

namespace scaffold {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix12d = Eigen::Matrix<double, 12, 12>;

/// Node-major numbering: dof(node, c) = components * node + c.
class DofMap {
 public:
  DofMap(int num_nodes, int components);

  static DofMap scalar(int num_nodes) { return {num_nodes, 1}; }
  static DofMap vector(int num_nodes) { return {num_nodes, 3}; }

  int size() const { return static_cast<int>(constrained_.size()); }
  int components() const { return components_; }
  int dof(int node, int component = 0) const { return components_ * node + component; }

  void constrain(int dof, double value);
  bool is_constrained(int dof) const { return constrained_[dof] != 0; }
  double value(int dof) const { return values_[dof]; }
  std::vector<int> constrained_dofs() const;
  std::vector<int> free_dofs() const;

 private:
  int components_;
  std::vector<char> constrained_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Element kernels

/// Split of the P1 elasticity block: K_e = lambda * lambda_part + mu * mu_part.
template <typename Scalar>
struct ElasticityBlocks {
  Eigen::Matrix<Scalar, 12, 12> lambda_part;
  Eigen::Matrix<Scalar, 12, 12> mu_part;
};

template <typename Scalar>
ElasticityBlocks<Scalar> element_elasticity_blocks(const ElementGeometry<Scalar>& geom) {
  ElasticityBlocks<Scalar> blocks;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      const auto& ga = geom.grads[a];
      const auto& gb = geom.grads[b];
      const Scalar dot = ga.dot(gb);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          blocks.lambda_part(3 * a + i, 3 * b + j) = geom.volume * ga[i] * gb[j];
          blocks.mu_part(3 * a + i, 3 * b + j) =
              geom.volume * ((i == j ? dot : Scalar(0)) + ga[j] * gb[i]);
        }
      }
    }
  }
  return blocks;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 4, 4> element_laplacian(const ElementGeometry<Scalar>& geom) {
  Eigen::Matrix<Scalar, 4, 4> lap;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) lap(a, b) = geom.volume * geom.grads[a].dot(geom.grads[b]);
  }
  return lap;
}

/// Constant strain of a P1 displacement given the 12 element dofs (node-major).
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> element_strain(const ElementGeometry<Scalar>& geom,
                                           const Eigen::Matrix<Scalar, 12, 1>& ue) {
  Eigen::Matrix<Scalar, 3, 3> grad = Eigen::Matrix<Scalar, 3, 3>::Zero();
  for (int a = 0; a < 4; ++a) grad += ue.template segment<3>(3 * a) * geom.grads[a].transpose();
  return Scalar(0.5) * (grad + grad.transpose());
}

/// Transpose of element_strain: maps dS/d(eps) to the 12 element dofs.
template <typename Scalar>
Eigen::Matrix<Scalar, 12, 1> element_strain_transpose(const ElementGeometry<Scalar>& geom,
                                                      const Eigen::Matrix<Scalar, 3, 3>& dual) {
  const Eigen::Matrix<Scalar, 3, 3> sym = Scalar(0.5) * (dual + dual.transpose());
  Eigen::Matrix<Scalar, 12, 1> out;
  for (int a = 0; a < 4; ++a) out.template segment<3>(3 * a) = sym * geom.grads[a];
  return out;
}

// ---------------------------------------------------------------------------
// Assembly

/// Scatter of dense element blocks into a fixed CSR pattern, in element order.
template <int Components>
class ElementAssembler {
 public:
  static constexpr int kBlock = 4 * Components;
  using Block = Eigen::Matrix<double, kBlock, kBlock>;

  explicit ElementAssembler(const TetMesh& mesh);

  int size() const { return static_cast<int>(pattern_.rows()); }

  template <typename BlockFn>
  SparseMatrix assemble(BlockFn&& block_of) const {
    SparseMatrix out = pattern_;
    double* values = out.valuePtr();
    std::fill(values, values + out.nonZeros(), 0.0);
    for (int e = 0; e < num_elements_; ++e) {
      const Block block = block_of(e);
      const int* slot = &slots_[static_cast<std::size_t>(e) * kBlock * kBlock];
      for (int r = 0; r < kBlock; ++r) {
        for (int c = 0; c < kBlock; ++c) values[slot[r * kBlock + c]] += block(r, c);
      }
    }
    return out;
  }

 private:
  int num_elements_;
  SparseMatrix pattern_;
  std::vector<int> slots_;
};

extern template class ElementAssembler<1>;
extern template class ElementAssembler<3>;

/// Element geometry and stiffness blocks cached for repeated elasticity assembly.
class ElasticityOperator {
 public:
  explicit ElasticityOperator(const TetMesh& mesh);

  SparseMatrix assemble(std::span<const IsotropicTensor<double>> tensors) const;
  /// Assembly for Lame pairs linear in a per-element Young modulus.
  SparseMatrix assemble(std::span<const double> young, double nu) const;

  /// Block of the element stiffness for unit Young modulus and Poisson ratio nu.
  Matrix12d unit_block(int e, double nu) const;
  const ElasticityBlocks<double>& blocks(int e) const { return blocks_[e]; }
  const ElementGeometry<double>& geometry(int e) const { return geometry_[e]; }
  int num_dofs() const { return assembler_.size(); }

  Eigen::Matrix<double, 12, 1> gather(int e, const Vector& u) const;
  /// Adds the 12 element entries into the global vector.
  void scatter_add(int e, const Eigen::Matrix<double, 12, 1>& ve, Vector& v) const;

 private:
  std::vector<std::array<int, 4>> tets_;
  std::vector<ElementGeometry<double>> geometry_;
  std::vector<ElasticityBlocks<double>> blocks_;
  ElementAssembler<3> assembler_;
};

class DiffusionOperator {
 public:
  explicit DiffusionOperator(const TetMesh& mesh);

  /// Sum of D_e * (unit Laplacian of e).
  SparseMatrix stiffness(std::span<const double> coefficient) const;
  /// Row-sum lumped mass; element e contributes weight_e * vol_e / 4 per node.
  Vector lumped_mass(std::span<const double> weight) const;
  Vector lumped_mass() const;

  const Eigen::Matrix4d& laplacian(int e) const { return laplacians_[e]; }
  const ElementGeometry<double>& geometry(int e) const { return geometry_[e]; }
  Eigen::Vector4d gather(int e, const Vector& a) const;

 private:
  int num_nodes_;
  std::vector<std::array<int, 4>> tets_;
  std::vector<ElementGeometry<double>> geometry_;
  std::vector<Eigen::Matrix4d> laplacians_;
  ElementAssembler<1> assembler_;
};

SparseMatrix assemble_elasticity(const TetMesh& mesh,
                                 std::span<const IsotropicTensor<double>> tensors);

struct DiffusionMatrices {
  SparseMatrix stiffness;
  SparseMatrix mass;  // lumped, diagonal
};

/// Throws DomainError for a non-positive diffusivity. The reaction term is
/// composed by the caller as k3 * mass.
DiffusionMatrices assemble_diffusion(const TetMesh& mesh, std::span<const double> diffusivity);

using TractionMap = std::map<int, Eigen::Vector3d>;

/// Load vector of the constant tractions on ELASTIC_NEUMANN_LOADED facets,
/// keyed by the facet's physical tag.
Vector assemble_neumann_load(const TetMesh& mesh, const TractionMap& traction);

/// Consistent load of a body force, integrated with a tet quadrature rule.
Vector assemble_body_force(const TetMesh& mesh,
                           const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& force,
                           int order = 4);
Vector assemble_scalar_source(const TetMesh& mesh,
                              const std::function<double(const Eigen::Vector3d&)>& source,
                              int order = 4);

struct LinearSystem {
  SparseMatrix matrix;
  Vector rhs;
};

/// Symmetric elimination: constrained rows and columns are zeroed with unit
/// diagonal, the rhs is lifted so the prescribed values are attained exactly.
LinearSystem apply_dirichlet(LinearSystem system, const DofMap& map);

// ---------------------------------------------------------------------------
// Solvers

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CgOptions {
  double tol = 1e-10;
  int max_iter = 20000;
};

struct CgResult {
  Vector x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Orthonormal basis of the 6 infinitesimal rigid motions of the mesh nodes.
class RigidBodyModes {
 public:
  explicit RigidBodyModes(const TetMesh& mesh);

  const Eigen::MatrixXd& basis() const { return basis_; }
  Vector project(const Vector& v) const;
  Eigen::Matrix<double, 6, 1> coefficients(const Vector& v) const;

 private:
  Eigen::MatrixXd basis_;
};

RigidBodyModes rigid_body_deflation(const TetMesh& mesh);

/// Jacobi-preconditioned CG from x0 = 0. With `deflation`, the rhs, residuals
/// and iterates are kept orthogonal to the rigid-body modes, which yields the
/// solution with zero rigid-body component.
CgResult solve_cg(const SparseMatrix& a, const Vector& b, const CgOptions& options = {},
                  const RigidBodyModes* deflation = nullptr);

}  // namespace scaffold
