#include "scaffold/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include <Eigen/QR>

#include "scaffold/quadrature.hpp"

namespace scaffold {

DofMap::DofMap(int num_nodes, int components)
    : components_(components),
      constrained_(static_cast<std::size_t>(num_nodes) * components, 0),
      values_(static_cast<std::size_t>(num_nodes) * components, 0.0) {}

void DofMap::constrain(int dof, double value) {
  constrained_.at(dof) = 1;
  values_[dof] = value;
}

std::vector<int> DofMap::constrained_dofs() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (constrained_[i]) out.push_back(i);
  }
  return out;
}

std::vector<int> DofMap::free_dofs() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (!constrained_[i]) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------

template <int Components>
ElementAssembler<Components>::ElementAssembler(const TetMesh& mesh)
    : num_elements_(mesh.num_elements()) {
  const int n = Components * mesh.num_nodes();
  auto dof = [](const std::array<int, 4>& tet, int local) {
    return Components * tet[local / Components] + local % Components;
  };
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(num_elements_) * kBlock * kBlock);
  for (const auto& tet : mesh.tets) {
    for (int r = 0; r < kBlock; ++r) {
      for (int c = 0; c < kBlock; ++c) triplets.emplace_back(dof(tet, r), dof(tet, c), 1.0);
    }
  }
  pattern_.resize(n, n);
  pattern_.setFromTriplets(triplets.begin(), triplets.end());
  pattern_.makeCompressed();

  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  slots_.resize(static_cast<std::size_t>(num_elements_) * kBlock * kBlock);
  for (int e = 0; e < num_elements_; ++e) {
    const auto& tet = mesh.tets[e];
    for (int r = 0; r < kBlock; ++r) {
      const int row = dof(tet, r);
      for (int c = 0; c < kBlock; ++c) {
        const int col = dof(tet, c);
        const int* pos = std::lower_bound(inner + outer[row], inner + outer[row + 1], col);
        slots_[(static_cast<std::size_t>(e) * kBlock + r) * kBlock + c] =
            static_cast<int>(pos - inner);
      }
    }
  }
}

template class ElementAssembler<1>;
template class ElementAssembler<3>;

ElasticityOperator::ElasticityOperator(const TetMesh& mesh) : tets_(mesh.tets), assembler_(mesh) {
  geometry_.reserve(mesh.tets.size());
  blocks_.reserve(mesh.tets.size());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    geometry_.push_back(element_geometry(mesh, e));
    blocks_.push_back(element_elasticity_blocks(geometry_.back()));
  }
}

SparseMatrix ElasticityOperator::assemble(std::span<const IsotropicTensor<double>> tensors) const {
  if (tensors.size() != blocks_.size()) {
    throw std::invalid_argument("assemble_elasticity: need one tensor per element");
  }
  return assembler_.assemble([&](int e) -> Matrix12d {
    return tensors[e].lambda * blocks_[e].lambda_part + tensors[e].mu * blocks_[e].mu_part;
  });
}

SparseMatrix ElasticityOperator::assemble(std::span<const double> young, double nu) const {
  if (young.size() != blocks_.size()) {
    throw std::invalid_argument("assemble_elasticity: need one modulus per element");
  }
  const auto unit = lame_from_young(1.0, nu);
  return assembler_.assemble([&](int e) -> Matrix12d {
    return young[e] * (unit.lambda * blocks_[e].lambda_part + unit.mu * blocks_[e].mu_part);
  });
}

Matrix12d ElasticityOperator::unit_block(int e, double nu) const {
  const auto unit = lame_from_young(1.0, nu);
  return unit.lambda * blocks_[e].lambda_part + unit.mu * blocks_[e].mu_part;
}

Eigen::Matrix<double, 12, 1> ElasticityOperator::gather(int e, const Vector& u) const {
  Eigen::Matrix<double, 12, 1> ue;
  for (int a = 0; a < 4; ++a) ue.segment<3>(3 * a) = u.segment<3>(3 * tets_[e][a]);
  return ue;
}

void ElasticityOperator::scatter_add(int e, const Eigen::Matrix<double, 12, 1>& ve,
                                     Vector& v) const {
  for (int a = 0; a < 4; ++a) v.segment<3>(3 * tets_[e][a]) += ve.segment<3>(3 * a);
}

DiffusionOperator::DiffusionOperator(const TetMesh& mesh)
    : num_nodes_(mesh.num_nodes()), tets_(mesh.tets), assembler_(mesh) {
  geometry_.reserve(mesh.tets.size());
  laplacians_.reserve(mesh.tets.size());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    geometry_.push_back(element_geometry(mesh, e));
    laplacians_.push_back(element_laplacian(geometry_.back()));
  }
}

SparseMatrix DiffusionOperator::stiffness(std::span<const double> coefficient) const {
  if (coefficient.size() != laplacians_.size()) {
    throw std::invalid_argument("assemble_diffusion: need one coefficient per element");
  }
  return assembler_.assemble(
      [&](int e) -> Eigen::Matrix4d { return coefficient[e] * laplacians_[e]; });
}

Vector DiffusionOperator::lumped_mass(std::span<const double> weight) const {
  if (weight.size() != tets_.size()) {
    throw std::invalid_argument("lumped_mass: need one weight per element");
  }
  Vector mass = Vector::Zero(num_nodes_);
  for (std::size_t e = 0; e < tets_.size(); ++e) {
    const double share = weight[e] * geometry_[e].volume / 4.0;
    for (int node : tets_[e]) mass[node] += share;
  }
  return mass;
}

Vector DiffusionOperator::lumped_mass() const {
  const std::vector<double> ones(geometry_.size(), 1.0);
  return lumped_mass(ones);
}

Eigen::Vector4d DiffusionOperator::gather(int e, const Vector& a) const {
  const auto& t = tets_[e];
  return {a[t[0]], a[t[1]], a[t[2]], a[t[3]]};
}

// ---------------------------------------------------------------------------

SparseMatrix assemble_elasticity(const TetMesh& mesh,
                                 std::span<const IsotropicTensor<double>> tensors) {
  return ElasticityOperator(mesh).assemble(tensors);
}

DiffusionMatrices assemble_diffusion(const TetMesh& mesh, std::span<const double> diffusivity) {
  for (std::size_t e = 0; e < diffusivity.size(); ++e) {
    if (!(diffusivity[e] > 0)) {
      throw DomainError("assemble_diffusion: non-positive diffusivity on element " +
                        std::to_string(e));
    }
  }
  const DiffusionOperator op(mesh);
  DiffusionMatrices out;
  out.stiffness = op.stiffness(diffusivity);
  const Vector mass = op.lumped_mass();
  out.mass.resize(mass.size(), mass.size());
  std::vector<Eigen::Triplet<double>> diag;
  for (int i = 0; i < mass.size(); ++i) diag.emplace_back(i, i, mass[i]);
  out.mass.setFromTriplets(diag.begin(), diag.end());
  return out;
}

Vector assemble_neumann_load(const TetMesh& mesh, const TractionMap& traction) {
  Vector load = Vector::Zero(3 * mesh.num_nodes());
  for (const auto& facet : mesh.facets) {
    if (facet.tags.elastic != ElasticTag::NeumannLoaded) continue;
    const auto it = traction.find(facet.physical);
    if (it == traction.end()) {
      throw std::invalid_argument("no traction given for loaded boundary tag " +
                                  std::to_string(facet.physical));
    }
    const Eigen::Vector3d share = facet_area(mesh, facet) / 3.0 * it->second;
    for (int node : facet.nodes) load.segment<3>(3 * node) += share;
  }
  return load;
}

Vector assemble_body_force(const TetMesh& mesh,
                           const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& force,
                           int order) {
  const auto rule = tet_quadrature(order);
  Vector load = Vector::Zero(3 * mesh.num_nodes());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& t = mesh.tets[e];
    const double vol = element_geometry(mesh, e).volume;
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const auto& l = rule.points[q];
      const Eigen::Vector3d x = l[0] * mesh.nodes[t[0]] + l[1] * mesh.nodes[t[1]] +
                                l[2] * mesh.nodes[t[2]] + l[3] * mesh.nodes[t[3]];
      const Eigen::Vector3d f = force(x);
      for (int a = 0; a < 4; ++a) load.segment<3>(3 * t[a]) += vol * rule.weights[q] * l[a] * f;
    }
  }
  return load;
}

Vector assemble_scalar_source(const TetMesh& mesh,
                              const std::function<double(const Eigen::Vector3d&)>& source,
                              int order) {
  const auto rule = tet_quadrature(order);
  Vector load = Vector::Zero(mesh.num_nodes());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& t = mesh.tets[e];
    const double vol = element_geometry(mesh, e).volume;
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const auto& l = rule.points[q];
      const Eigen::Vector3d x = l[0] * mesh.nodes[t[0]] + l[1] * mesh.nodes[t[1]] +
                                l[2] * mesh.nodes[t[2]] + l[3] * mesh.nodes[t[3]];
      const double f = source(x);
      for (int a = 0; a < 4; ++a) load[t[a]] += vol * rule.weights[q] * l[a] * f;
    }
  }
  return load;
}

LinearSystem apply_dirichlet(LinearSystem system, const DofMap& map) {
  auto& a = system.matrix;
  auto& rhs = system.rhs;
  if (a.rows() != map.size() || rhs.size() != map.size()) {
    throw std::invalid_argument("apply_dirichlet: dimension mismatch");
  }
  for (int row = 0; row < a.outerSize(); ++row) {
    const bool row_fixed = map.is_constrained(row);
    for (SparseMatrix::InnerIterator it(a, row); it; ++it) {
      const int col = static_cast<int>(it.col());
      if (row_fixed) {
        it.valueRef() = (col == row) ? 1.0 : 0.0;
      } else if (map.is_constrained(col)) {
        rhs[row] -= it.value() * map.value(col);
        it.valueRef() = 0.0;
      }
    }
    if (row_fixed) rhs[row] = map.value(row);
  }
  return system;
}

// ---------------------------------------------------------------------------

RigidBodyModes::RigidBodyModes(const TetMesh& mesh) {
  const int n = mesh.num_nodes();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  for (const auto& x : mesh.nodes) center += x;
  center /= std::max(n, 1);

  Eigen::MatrixXd modes = Eigen::MatrixXd::Zero(3 * n, 6);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d r = mesh.nodes[i] - center;
    for (int c = 0; c < 3; ++c) modes(3 * i + c, c) = 1.0;
    // Linearized rotations about the x, y, z axes: omega x r.
    modes.block<3, 1>(3 * i, 3) = Eigen::Vector3d(0.0, -r.z(), r.y());
    modes.block<3, 1>(3 * i, 4) = Eigen::Vector3d(r.z(), 0.0, -r.x());
    modes.block<3, 1>(3 * i, 5) = Eigen::Vector3d(-r.y(), r.x(), 0.0);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(modes);
  const Eigen::VectorXd diag = qr.matrixQR().diagonal().cwiseAbs().head(6);
  if (diag.minCoeff() <= 1e-10 * std::max(diag.maxCoeff(), 1.0)) {
    throw MeshError("rigid-body modes are degenerate (nodes are collinear)");
  }
  basis_ = qr.householderQ() * Eigen::MatrixXd::Identity(3 * n, 6);
}

Vector RigidBodyModes::project(const Vector& v) const {
  return v - basis_ * (basis_.transpose() * v);
}

Eigen::Matrix<double, 6, 1> RigidBodyModes::coefficients(const Vector& v) const {
  return basis_.transpose() * v;
}

RigidBodyModes rigid_body_deflation(const TetMesh& mesh) { return RigidBodyModes(mesh); }

namespace {

// Rows holding only their diagonal (eliminated Dirichlet dofs) decouple from
// the rest; their zero columns let them be set exactly after the iteration.
void snap_decoupled_rows(const SparseMatrix& a, const Vector& b, const Vector& inv_diag, Vector& x) {
  for (int i = 0; i < a.rows(); ++i) {
    bool decoupled = true;
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      if (it.col() != i && it.value() != 0.0) decoupled = false;
    }
    if (decoupled) x[i] = b[i] * inv_diag[i];
  }
}

}  // namespace

CgResult solve_cg(const SparseMatrix& a, const Vector& b, const CgOptions& options,
                  const RigidBodyModes* deflation) {
  const int n = static_cast<int>(b.size());
  if (a.rows() != n || a.cols() != n) throw std::invalid_argument("solve_cg: dimension mismatch");
  if (!b.allFinite()) throw SolverError("solve_cg: non-finite right-hand side");

  auto project = [&](Vector v) { return deflation ? deflation->project(v) : v; };
  const Vector rhs = project(b);
  const double norm_b = rhs.norm();
  CgResult result;
  result.x = Vector::Zero(n);
  if (norm_b == 0.0) return result;

  Vector inv_diag = a.diagonal();
  for (int i = 0; i < n; ++i) {
    if (!(inv_diag[i] > 0)) throw SolverError("solve_cg: non-positive diagonal entry");
    inv_diag[i] = 1.0 / inv_diag[i];
  }

  Vector r = rhs;
  Vector z = project(inv_diag.cwiseProduct(r));
  Vector p = z;
  double rz = r.dot(z);
  const double target = options.tol * norm_b;
  int it = 0;
  while (true) {
    double res = r.norm();
    if (res <= target) {
      // Guard against drift of the recursive residual.
      const Vector true_r = project(rhs - a * result.x);
      res = true_r.norm();
      if (res <= target || it >= options.max_iter) {
        result.relative_residual = res / norm_b;
        if (res > target) break;
        result.iterations = it;
        if (!deflation) snap_decoupled_rows(a, rhs, inv_diag, result.x);
        return result;
      }
      r = true_r;
      z = project(inv_diag.cwiseProduct(r));
      p = z;
      rz = r.dot(z);
    }
    if (it >= options.max_iter) break;
    const Vector ap = a * p;
    const double pap = p.dot(ap);
    if (!std::isfinite(pap) || !std::isfinite(rz)) {
      throw SolverError("solve_cg: non-finite value encountered");
    }
    if (pap <= 0.0) throw SolverError("solve_cg: matrix is not positive definite on the iterate");
    const double alpha = rz / pap;
    result.x += alpha * p;
    r -= alpha * ap;
    z = project(inv_diag.cwiseProduct(r));
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
    ++it;
  }
  result.relative_residual = project(rhs - a * result.x).norm() / norm_b;
  char msg[128];
  std::snprintf(msg, sizeof msg, "solve_cg: no convergence after %d iterations (relative residual %.3e)",
                options.max_iter, result.relative_residual);
  throw SolverError(msg);
}

}  // namespace scaffold
