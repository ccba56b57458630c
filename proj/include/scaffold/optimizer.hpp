#pragma once

#include <functional>
#include <string>
#include <vector>

#include "scaffold/objective.hpp"

namespace scaffold {

/// L2 Riesz representative of a nodal gradient under the lumped mass:
/// d_j = mask_j g_j / m_j.
Vector l2_riesz(const Vector& gradient, const Vector& lumped_mass, const Vector& mask);

/// sqrt(g^T M^{-1} g) over unmasked nodes.
double l2_gradient_norm(const Vector& gradient, const Vector& lumped_mass, const Vector& mask);

struct OptimizerOptions {
  /// Initial step; <= 0 picks auto_step_fraction * (C_P - c_P) / max|d_0|.
  double tau0 = 0.0;
  double auto_step_fraction = 0.1;
  int max_iter = 30;
  double shrink = 0.5;
  double grow = 1.2;
  double max_growth = 10.0;  // tau never exceeds max_growth * tau0
  int max_halvings = 20;
  double tol_g = 1e-9;
};

enum class OptimizerStatus { Converged, MaxIterations, NoDescent, Stalled };

std::string to_string(OptimizerStatus status);

struct HistoryRow {
  int iter = 0;
  double objective = 0.0;
  double grad_l2 = 0.0;
  double step = 0.0;  // step accepted to reach this iterate, 0 for the start
  double rho_min = 0.0;
  double rho_max = 0.0;
};

struct OptimizerState {
  DensityField rho;
  double objective = 0.0;
  double grad_l2 = 0.0;
  double tau = 0.0;
  OptimizerStatus status = OptimizerStatus::MaxIterations;
  std::vector<HistoryRow> history;
};

class OptimizerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Called after every accepted iterate (including the start) with its history row.
using IterateCallback = std::function<void(const HistoryRow&, const DensityField&)>;

/// Projected L2 gradient flow with backtracking; the accepted objective
/// sequence is non-increasing by construction.
OptimizerState gradient_flow(const ReducedObjective& objective, const DensityField& rho0,
                             const OptimizerOptions& options = {},
                             const IterateCallback& on_iterate = {});

}  // namespace scaffold
