#pragma once

// Manufactured-solution problems on the unit cube, shared by the unit tests
// and the acceptance suite. Errors are integrated with a high-order rule.

#include <cmath>
#include <numbers>

#include "scaffold/fem.hpp"
#include "scaffold/quadrature.hpp"

namespace scaffold::testing {

struct DiscreteErrors {
  double l2 = 0.0;
  double h1 = 0.0;  // seminorm
};

inline TetMesh unit_cube(int n) {
  BoxSpec spec;
  spec.cells = {n, n, n};
  return generate_box_mesh(spec);
}

inline DiscreteErrors elasticity_manufactured(int n, double lambda = 1.0, double mu = 1.0) {
  const TetMesh mesh = unit_cube(n);
  auto exact = [](const Eigen::Vector3d& x) {
    return Eigen::Vector3d(x.x() * x.x(), x.x() * x.y(), x.z() * x.z());
  };
  auto exact_grad = [](const Eigen::Vector3d& x) {
    Eigen::Matrix3d g;
    g << 2 * x.x(), 0, 0, x.y(), x.x(), 0, 0, 0, 2 * x.z();
    return g;
  };
  const Eigen::Vector3d body(-(3 * lambda + 5 * mu), 0.0, -(2 * lambda + 4 * mu));

  const std::vector<IsotropicTensor<double>> tensors(mesh.num_elements(), {lambda, mu});
  const SparseMatrix k = assemble_elasticity(mesh, tensors);
  const Vector f = assemble_body_force(mesh, [&](const Eigen::Vector3d&) { return body; });
  DofMap map = DofMap::vector(mesh.num_nodes());
  for (const auto& facet : mesh.facets) {
    for (int j : facet.nodes) {
      const Eigen::Vector3d g = exact(mesh.nodes[j]);
      for (int c = 0; c < 3; ++c) map.constrain(3 * j + c, g[c]);
    }
  }
  const auto sys = apply_dirichlet({k, f}, map);
  const Vector u = solve_cg(sys.matrix, sys.rhs, {1e-13, 50000}).x;

  const auto rule = tet_quadrature(5);
  DiscreteErrors err;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& t = mesh.tets[e];
    const auto geom = element_geometry(mesh, e);
    Eigen::Matrix3d grad_h = Eigen::Matrix3d::Zero();
    for (int a = 0; a < 4; ++a) grad_h += u.segment<3>(3 * t[a]) * geom.grads[a].transpose();
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const auto& l = rule.points[q];
      Eigen::Vector3d x = Eigen::Vector3d::Zero(), uh = Eigen::Vector3d::Zero();
      for (int a = 0; a < 4; ++a) {
        x += l[a] * mesh.nodes[t[a]];
        uh += l[a] * u.segment<3>(3 * t[a]);
      }
      const double w = geom.volume * rule.weights[q];
      err.l2 += w * (exact(x) - uh).squaredNorm();
      err.h1 += w * (exact_grad(x) - grad_h).squaredNorm();
    }
  }
  err.l2 = std::sqrt(err.l2);
  err.h1 = std::sqrt(err.h1);
  return err;
}

inline DiscreteErrors diffusion_manufactured(int n) {
  using std::numbers::pi;
  const TetMesh mesh = unit_cube(n);
  auto exact = [](const Eigen::Vector3d& x) {
    return std::sin(pi * x.x()) * std::sin(pi * x.y()) * std::sin(pi * x.z());
  };
  auto exact_grad = [](const Eigen::Vector3d& x) {
    const double sx = std::sin(pi * x.x()), sy = std::sin(pi * x.y()), sz = std::sin(pi * x.z());
    const double cx = std::cos(pi * x.x()), cy = std::cos(pi * x.y()), cz = std::cos(pi * x.z());
    return Eigen::Vector3d(pi * cx * sy * sz, pi * sx * cy * sz, pi * sx * sy * cz);
  };
  const auto mats = assemble_diffusion(mesh, std::vector<double>(mesh.num_elements(), 1.0));
  const Vector f =
      assemble_scalar_source(mesh, [&](const Eigen::Vector3d& x) { return 3 * pi * pi * exact(x); });
  DofMap map = DofMap::scalar(mesh.num_nodes());
  for (const auto& facet : mesh.facets) {
    for (int j : facet.nodes) map.constrain(j, 0.0);
  }
  const auto sys = apply_dirichlet({mats.stiffness, f}, map);
  const Vector a = solve_cg(sys.matrix, sys.rhs, {1e-13, 50000}).x;

  const auto rule = tet_quadrature(5);
  DiscreteErrors err;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& t = mesh.tets[e];
    const auto geom = element_geometry(mesh, e);
    Eigen::Vector3d grad_h = Eigen::Vector3d::Zero();
    for (int k = 0; k < 4; ++k) grad_h += a[t[k]] * geom.grads[k];
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const auto& l = rule.points[q];
      Eigen::Vector3d x = Eigen::Vector3d::Zero();
      double ah = 0.0;
      for (int k = 0; k < 4; ++k) {
        x += l[k] * mesh.nodes[t[k]];
        ah += l[k] * a[t[k]];
      }
      const double w = geom.volume * rule.weights[q];
      err.l2 += w * std::pow(exact(x) - ah, 2);
      err.h1 += w * (exact_grad(x) - grad_h).squaredNorm();
    }
  }
  err.l2 = std::sqrt(err.l2);
  err.h1 = std::sqrt(err.h1);
  return err;
}

}  // namespace scaffold::testing
