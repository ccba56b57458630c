#include "scaffold/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace scaffold {

namespace {

// Golub-Welsch on [0, 1].
void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double beta = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = beta;
    jacobi(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  nodes = 0.5 * (solver.eigenvalues().array() + 1.0);
  weights = solver.eigenvectors().row(0).transpose().array().square();
}

}  // namespace

TetQuadrature tet_quadrature(int n) {
  if (n < 1) throw std::invalid_argument("tet_quadrature: need at least one point per direction");
  Eigen::VectorXd x, w;
  gauss_legendre(n, x, w);
  TetQuadrature rule;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const double s = x[i], t = x[j], r = x[k];
        const double px = s;
        const double py = t * (1.0 - s);
        const double pz = r * (1.0 - s) * (1.0 - t);
        rule.points.emplace_back(1.0 - px - py - pz, px, py, pz);
        rule.weights.push_back(6.0 * w[i] * w[j] * w[k] * (1.0 - s) * (1.0 - s) * (1.0 - t));
      }
    }
  }
  return rule;
}

}  // namespace scaffold
