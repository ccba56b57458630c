#include "scaffold/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scaffold/gradient.hpp"

namespace scaffold {

Vector l2_riesz(const Vector& gradient, const Vector& lumped_mass, const Vector& mask) {
  Vector d = Vector::Zero(gradient.size());
  for (int j = 0; j < gradient.size(); ++j) {
    if (mask[j] != 0.0) d[j] = gradient[j] / lumped_mass[j];
  }
  return d;
}

double l2_gradient_norm(const Vector& gradient, const Vector& lumped_mass, const Vector& mask) {
  return std::sqrt(gradient.dot(l2_riesz(gradient, lumped_mass, mask)));
}

std::string to_string(OptimizerStatus status) {
  switch (status) {
    case OptimizerStatus::Converged: return "converged";
    case OptimizerStatus::MaxIterations: return "max_iterations";
    case OptimizerStatus::NoDescent: return "no_descent";
    case OptimizerStatus::Stalled: return "stalled";
  }
  return "unknown";
}

namespace {

struct Iterate {
  DensityField rho;
  double value = 0.0;
  Vector gradient;
};

template <typename Fn>
auto with_context(int iter, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception& ex) {
    throw OptimizerError("optimizer iteration " + std::to_string(iter) + ": " + ex.what());
  }
}

}  // namespace

OptimizerState gradient_flow(const ReducedObjective& objective, const DensityField& rho0,
                             const OptimizerOptions& options, const IterateCallback& on_iterate) {
  const ForwardModel& model = objective.model();
  const double lo = model.params().c_P;
  const double hi = model.params().C_P;
  for (int j = 0; j < rho0.size(); ++j) {
    if (!(rho0.values[j] >= lo && rho0.values[j] <= hi)) {
      throw DomainError("gradient_flow: initial density outside the box at node " +
                        std::to_string(j));
    }
  }
  const Vector mask = model.design_mask();
  const Vector& mass = model.nodal_volume();

  auto evaluate = [&](const DensityField& rho, int iter) {
    return with_context(iter, [&] {
      Iterate it{rho, 0.0, {}};
      const auto eval = objective.evaluate(rho);
      it.value = eval.value;
      it.gradient = gradient_adjoint(objective, rho, eval);
      return it;
    });
  };
  auto row_of = [&](int iter, const Iterate& it, double step) {
    HistoryRow row;
    row.iter = iter;
    row.objective = it.value;
    row.grad_l2 = l2_gradient_norm(it.gradient, mass, mask);
    row.step = step;
    row.rho_min = std::numeric_limits<double>::infinity();
    row.rho_max = -row.rho_min;
    for (int j = 0; j < it.rho.size(); ++j) {
      if (mask[j] == 0.0) continue;
      row.rho_min = std::min(row.rho_min, it.rho.values[j]);
      row.rho_max = std::max(row.rho_max, it.rho.values[j]);
    }
    return row;
  };

  OptimizerState state;
  Iterate cur = evaluate(rho0, 0);
  state.history.push_back(row_of(0, cur, 0.0));
  if (on_iterate) on_iterate(state.history.back(), cur.rho);

  Vector d = l2_riesz(cur.gradient, mass, mask);
  const double d_max = d.lpNorm<Eigen::Infinity>();
  const double tau0 = options.tau0 > 0
                          ? options.tau0
                          : (d_max > 0 ? options.auto_step_fraction * (hi - lo) / d_max : 0.0);
  double tau = tau0;
  state.status = OptimizerStatus::MaxIterations;

  for (int k = 0; k < options.max_iter; ++k) {
    if (state.history.back().grad_l2 <= options.tol_g) {
      state.status = OptimizerStatus::Converged;
      break;
    }
    bool accepted = false;
    bool stalled = false;
    Iterate trial;
    for (int h = 0; h <= options.max_halvings; ++h) {
      DensityField next = cur.rho;
      next.values = (cur.rho.values - tau * d).cwiseMax(lo).cwiseMin(hi);
      if (next.values == cur.rho.values) {
        stalled = true;
        break;
      }
      auto eval = with_context(k + 1, [&] { return objective.evaluate(next); });
      if (eval.value <= cur.value) {
        trial.value = eval.value;
        trial.gradient =
            with_context(k + 1, [&] { return gradient_adjoint(objective, next, eval); });
        trial.rho = std::move(next);
        accepted = true;
        break;
      }
      tau *= options.shrink;
    }
    if (stalled) {
      state.status = OptimizerStatus::Stalled;
      break;
    }
    if (!accepted) {
      state.status = OptimizerStatus::NoDescent;
      break;
    }
    cur = std::move(trial);
    state.history.push_back(row_of(k + 1, cur, tau));
    if (on_iterate) on_iterate(state.history.back(), cur.rho);
    d = l2_riesz(cur.gradient, mass, mask);
    tau = std::min(tau * options.grow, options.max_growth * tau0);
  }
  if (options.max_iter > 0 && state.status == OptimizerStatus::MaxIterations &&
      state.history.back().grad_l2 <= options.tol_g) {
    state.status = OptimizerStatus::Converged;
  }

  state.rho = cur.rho;
  state.objective = cur.value;
  state.grad_l2 = state.history.back().grad_l2;
  state.tau = tau;
  return state;
}

}  // namespace scaffold
