#pragma once

#include <cstdint>
#include <vector>

#include "scaffold/objective.hpp"

namespace scaffold {

/// Discrete adjoint of the time-stepping scheme: reverse sweep over the stored
/// trajectory transposing the bone, cell, diffusion and elasticity updates of
/// every step. Entries of non-design nodes are exactly zero.
Vector gradient_adjoint(const ReducedObjective& objective, const DensityField& rho);
/// Variant reusing a trajectory already computed for `rho`.
Vector gradient_adjoint(const ReducedObjective& objective, const DensityField& rho,
                        const ObjectiveEvaluation& evaluation);

/// Central differences (Phi(rho + h e_j) - Phi(rho - h e_j)) / 2h for every
/// design node, evaluated without clamping; parallel over nodes.
Vector gradient_fd(const ReducedObjective& objective, const DensityField& rho, double h,
                   int threads = 0);

double directional_fd(const ReducedObjective& objective, const DensityField& rho,
                      const Vector& direction, double h);

struct DirectionalCheck {
  double fd = 0.0;
  double adjoint = 0.0;
  double relative_error = 0.0;
};

struct GradientComparison {
  Vector adjoint;
  Vector fd;
  Vector mask;
  double max_relative = 0.0;   // max_j |adj_j - fd_j| / max_k |fd_k|
  double mean_relative = 0.0;
  double relative_l2 = 0.0;    // ||adj - fd|| / ||fd||
  std::vector<DirectionalCheck> directions;
  double max_directional = 0.0;

  bool within(double tol) const {
    return max_relative <= tol && relative_l2 <= tol && max_directional <= tol;
  }
};

GradientComparison compare_gradients(const ReducedObjective& objective, const DensityField& rho,
                                     double h, int num_directions, std::uint32_t seed = 20240101u,
                                     int threads = 0);

}  // namespace scaffold
