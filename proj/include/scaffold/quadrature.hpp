#pragma once

#include <vector>

#include <Eigen/Dense>

namespace scaffold {

/// Quadrature on the reference tetrahedron. Points are barycentric
/// coordinates (l0..l3), weights sum to one; scale by the element volume.
struct TetQuadrature {
  std::vector<Eigen::Vector4d> points;
  std::vector<double> weights;
};

/// Collapsed (Duffy) Gauss-Legendre product rule with `n` points per
/// direction; exact for polynomials of degree 2n - 3 or better.
TetQuadrature tet_quadrature(int n);

}  // namespace scaffold
