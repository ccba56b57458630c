#include "scaffold/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "scaffold/parallel.hpp"

namespace scaffold {

namespace {

// Partial derivatives of x' = (x + q) / (1 + q / cap).
struct CapacityPartials {
  double dx, dq, dcap;
};

CapacityPartials capacity_partials(double x, double q, double cap) {
  const double d = 1.0 + q / cap;
  return {1.0 / d, (cap - x) / (d * d * cap), (x + q) * q / (cap * cap * d * d)};
}

class AdjointSweep {
 public:
  AdjointSweep(const ReducedObjective& objective, const Vector& rho_e,
               const ObjectiveEvaluation& eval)
      : obj_(objective),
        model_(objective.model()),
        mesh_(model_.mesh()),
        params_(model_.params()),
        traj_(eval.trajectory),
        rho_e_(rho_e),
        energy_bar_(objective.energy_sensitivity(eval.energies)),
        rho_bar_(Vector::Zero(mesh_.num_elements())) {}

  Vector run() {
    const int ne = mesh_.num_elements();
    const int nn = mesh_.num_nodes();
    const int last = traj_.size() - 1;
    const double s = obj_.spec().sign();

    Vector b_bar = Vector::Zero(ne);
    Vector c_bar = Vector::Zero(ne);
    Vector a_bar[2] = {Vector::Zero(nn), Vector::Zero(nn)};
    if (obj_.spec().kind == ObjectiveKind::BoneVolume) {
      for (int e = 0; e < ne; ++e) {
        if (model_.design_element(e)) b_bar[e] = s * model_.element_volume(e);
      }
    }
    elasticity_reverse(last, Vector::Zero(3 * nn), b_bar);

    if (last > 0) {
      systems_[0] = model_.diffusion_system(rho_e_, 0);
      systems_[1] = model_.diffusion_system(rho_e_, 1);
    }
    for (int n = last - 1; n >= 0; --n) {
      Vector b_prev = Vector::Zero(ne);
      Vector c_prev = Vector::Zero(ne);
      Vector a_prev[2] = {Vector::Zero(nn), Vector::Zero(nn)};
      Vector u_bar = Vector::Zero(3 * nn);
      ode_reverse(n, b_bar, c_bar, a_bar, b_prev, c_prev);
      for (int i = 0; i < 2; ++i) diffusion_reverse(n, i, a_bar[i], a_prev[i], c_prev, u_bar);
      elasticity_reverse(n, u_bar, b_prev);
      b_bar = std::move(b_prev);
      c_bar = std::move(c_prev);
      a_bar[0] = std::move(a_prev[0]);
      a_bar[1] = std::move(a_prev[1]);
    }
    return rho_bar_;
  }

 private:
  // Reverse of the bone and cell updates of step n -> n+1. Element bars of the
  // averaged concentrations are spread back to the four nodes of level n+1.
  void ode_reverse(int n, const Vector& b_bar, Vector& c_bar, Vector* a_bar, Vector& b_prev,
                   Vector& c_prev) {
    const auto& cur = traj_[n];
    const auto& next = traj_[n + 1];
    const double dt = traj_.dt;
    const auto& diff = model_.diffusion();
    for (int e = 0; e < mesh_.num_elements(); ++e) {
      if (!model_.design_element(e)) continue;
      const double cap = 1.0 - rho_e_[e];
      const double a1 = diff.gather(e, next.a1).mean();
      const double a2 = diff.gather(e, next.a2).mean();
      const double a1p = std::max(a1, 0.0), a2p = std::max(a2, 0.0);
      const double on1 = a1 > 0 ? 1.0 : 0.0, on2 = a2 > 0 ? 1.0 : 0.0;
      double a1_bar = 0.0, a2_bar = 0.0;

      // bone: drive k4 a1+ c_{n+1}
      {
        const double q = dt * params_.k4 * a1p * next.c[e];
        const auto d = capacity_partials(cur.b[e], q, cap);
        const double g = b_bar[e];
        b_prev[e] += g * d.dx;
        const double q_bar = g * d.dq;
        c_bar[e] += q_bar * dt * params_.k4 * a1p;
        a1_bar += q_bar * dt * params_.k4 * next.c[e] * on1;
        rho_bar_[e] -= g * d.dcap;
      }
      // cells: drive k6 a1+ a2+ (1 + k7 c_n)
      {
        const double x = cur.c[e];
        const double growth = 1.0 + params_.k7 * x;
        const double q = dt * params_.k6 * a1p * a2p * growth;
        const auto d = capacity_partials(x, q, cap);
        const double g = c_bar[e];
        const double q_bar = g * d.dq;
        c_prev[e] += g * d.dx + q_bar * dt * params_.k6 * a1p * a2p * params_.k7;
        a1_bar += q_bar * dt * params_.k6 * a2p * growth * on1;
        a2_bar += q_bar * dt * params_.k6 * a1p * growth * on2;
        rho_bar_[e] -= g * d.dcap;
      }
      for (int j : mesh_.tets[e]) {
        a_bar[0][j] += 0.25 * a1_bar;
        a_bar[1][j] += 0.25 * a2_bar;
      }
    }
  }

  // Reverse of A(rho) a_{n+1} = M a_n + dt F(u_n, c_n) on the free rows.
  void diffusion_reverse(int n, int species, const Vector& a_bar, Vector& a_prev, Vector& c_prev,
                         Vector& u_bar) {
    const DiffusionSystem& sys = systems_[species];
    const Vector mu = model_.solve_diffusion_homogeneous(sys, a_bar);
    if (mu.lpNorm<Eigen::Infinity>() == 0.0) return;
    const auto& cur = traj_[n];
    const Vector& a_next = species == 0 ? traj_[n + 1].a1 : traj_[n + 1].a2;
    const double dt = traj_.dt;
    const double gain = params_.k2[species];
    const auto& diff = model_.diffusion();

    a_prev += model_.diffusion_mass().cwiseProduct(mu);
    for (int e = 0; e < mesh_.num_elements(); ++e) {
      if (!model_.design_element(e)) continue;
      const Eigen::Vector4d mu_e = diff.gather(e, mu);
      // D_e = D0 (1 - rho_e)
      const double d_bar = -dt * mu_e.dot(diff.laplacian(e) * diff.gather(e, a_next));
      rho_bar_[e] -= params_.D0 * d_bar;
      if (gain == 0.0) continue;
      const double src_bar = dt * model_.element_volume(e) / 4.0 * mu_e.sum();
      const Eigen::Matrix3d eps = model_.element_strain_of(e, cur.u);
      c_prev[e] += src_bar * gain * stimulus(eps, params_.stimulus);
      const double stim_bar = src_bar * gain * cur.c[e];
      if (stim_bar == 0.0) continue;
      const Eigen::Matrix3d eps_bar = stim_bar * stimulus_gradient(eps, params_.stimulus);
      model_.elasticity().scatter_add(
          e, element_strain_transpose(model_.elasticity().geometry(e), eps_bar), u_bar);
    }
  }

  // Reverse of K(theta_n) u_n = f, theta_e = E_e(rho_e, sigma_n, b_n), and of
  // the energy E_n = 1/2 u^T K u.
  void elasticity_reverse(int n, const Vector& u_bar_src, Vector& b_bar) {
    const auto& st = traj_[n];
    const double e_bar = energy_bar_.empty() ? 0.0 : energy_bar_[n];
    if (e_bar == 0.0 && u_bar_src.lpNorm<Eigen::Infinity>() == 0.0) return;
    const SparseMatrix k = model_.stiffness_at(rho_e_, st.sigma, st.b);
    const Vector total = e_bar * (k * st.u) + u_bar_src;
    const Vector lambda = model_.solve_elasticity_homogeneous(k, total);
    const auto& el = model_.elasticity();
    for (int e = 0; e < mesh_.num_elements(); ++e) {
      if (!model_.design_element(e)) continue;
      const Matrix12d unit = el.unit_block(e, params_.nu);
      const auto ue = el.gather(e, st.u);
      const Eigen::Matrix<double, 12, 1> ku = unit * ue;
      const double theta_bar = 0.5 * e_bar * ue.dot(ku) - el.gather(e, lambda).dot(ku);
      rho_bar_[e] += theta_bar * params_.E_scaffold * st.sigma;
      b_bar[e] += theta_bar * params_.E_bone;
    }
  }

  const ReducedObjective& obj_;
  const ForwardModel& model_;
  const TetMesh& mesh_;
  const MaterialParams& params_;
  const StateTrajectory& traj_;
  const Vector& rho_e_;
  std::vector<double> energy_bar_;
  Vector rho_bar_;
  DiffusionSystem systems_[2];
};

}  // namespace

Vector gradient_adjoint(const ReducedObjective& objective, const DensityField& rho,
                        const ObjectiveEvaluation& evaluation) {
  const ForwardModel& model = objective.model();
  const TetMesh& mesh = model.mesh();
  Vector grad = objective.direct_gradient(rho);
  if (objective.spec().kind != ObjectiveKind::None) {
    const Vector rho_e = element_average(mesh, rho.values);
    const Vector rho_bar = AdjointSweep(objective, rho_e, evaluation).run();
    for (int e = 0; e < mesh.num_elements(); ++e) {
      if (!model.design_element(e)) continue;
      for (int j : mesh.tets[e]) grad[j] += 0.25 * rho_bar[e];
    }
  }
  return grad.cwiseProduct(model.design_mask());
}

Vector gradient_adjoint(const ReducedObjective& objective, const DensityField& rho) {
  return gradient_adjoint(objective, rho, objective.evaluate(rho));
}

Vector gradient_fd(const ReducedObjective& objective, const DensityField& rho, double h,
                   int threads) {
  const ForwardModel& model = objective.model();
  const int nn = rho.size();
  Vector grad = Vector::Zero(nn);
  std::vector<int> nodes;
  for (int j = 0; j < nn; ++j) {
    if (model.design_node(j)) nodes.push_back(j);
  }
  parallel_for(
      static_cast<int>(nodes.size()),
      [&](int k) {
        const int j = nodes[k];
        DensityField plus = rho, minus = rho;
        plus.values[j] += h;
        minus.values[j] -= h;
        grad[j] = (objective.value(plus) - objective.value(minus)) / (2.0 * h);
      },
      threads);
  return grad;
}

double directional_fd(const ReducedObjective& objective, const DensityField& rho,
                      const Vector& direction, double h) {
  DensityField plus = rho, minus = rho;
  plus.values += h * direction;
  minus.values -= h * direction;
  return (objective.value(plus) - objective.value(minus)) / (2.0 * h);
}

GradientComparison compare_gradients(const ReducedObjective& objective, const DensityField& rho,
                                     double h, int num_directions, std::uint32_t seed,
                                     int threads) {
  GradientComparison out;
  out.mask = objective.model().design_mask();
  out.adjoint = gradient_adjoint(objective, rho);
  out.fd = gradient_fd(objective, rho, h, threads);

  const Vector diff = out.adjoint - out.fd;
  const double fd_max = out.fd.lpNorm<Eigen::Infinity>();
  const double scale = fd_max > 0 ? fd_max : 1.0;
  int count = 0;
  for (int j = 0; j < diff.size(); ++j) {
    if (out.mask[j] == 0.0) continue;
    const double rel = std::abs(diff[j]) / scale;
    out.max_relative = std::max(out.max_relative, rel);
    out.mean_relative += rel;
    ++count;
  }
  if (count > 0) out.mean_relative /= count;
  const double fd_norm = out.fd.norm();
  out.relative_l2 = diff.norm() / (fd_norm > 0 ? fd_norm : 1.0);

  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Vector> directions(num_directions);
  for (auto& d : directions) {
    d = Vector::NullaryExpr(rho.size(), [&](Eigen::Index) { return unit(rng); });
    d = d.cwiseProduct(out.mask);
  }
  out.directions.resize(num_directions);
  parallel_for(
      num_directions,
      [&](int k) {
        DirectionalCheck& check = out.directions[k];
        check.fd = directional_fd(objective, rho, directions[k], h);
        check.adjoint = out.adjoint.dot(directions[k]);
        const double denom = std::max(std::abs(check.fd), std::abs(check.adjoint));
        check.relative_error = denom > 0 ? std::abs(check.fd - check.adjoint) / denom : 0.0;
      },
      threads);
  for (const auto& check : out.directions) {
    out.max_directional = std::max(out.max_directional, check.relative_error);
  }
  return out;
}

}  // namespace scaffold
