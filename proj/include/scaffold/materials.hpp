#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace scaffold {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class StimulusLaw { Frobenius, Bandpass };

/// Band-pass parameters are strain magnitudes; `width` is the ramp length on
/// either side of the plateau [lo, hi].
struct StimulusSpec {
  StimulusLaw law = StimulusLaw::Frobenius;
  double lo = 0.0;
  double hi = 0.0;
  double width = 0.0;
};

struct MaterialParams {
  double k1 = 0.05;                     // 1/week, scaffold molecular decay
  std::array<double, 2> k2{1.0, 1.0};   // source gains for a1, a2
  std::array<double, 2> k3{1.0, 1.0};   // 1/week, molecule decay
  double k4 = 0.1;                      // 1/week, bone growth
  double k6 = 0.5;                      // 1/week, osteoblast generation
  double k7 = 1.0;                      // proliferation gain
  double E_scaffold = 100.0;            // MPa
  double E_bone = 1000.0;               // MPa
  double E_fixture = 100000.0;          // MPa
  double nu = 0.3;
  double D0 = 1.0;                      // mm^2/week
  StimulusSpec stimulus;
  double c_P = 0.05;
  double C_P = 0.7;

  double E_min() const { return 1e-3 * E_scaffold; }

  /// Throws DomainError if any invariant on the constants is violated.
  void validate() const;
};

template <typename Scalar>
struct IsotropicTensor {
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  Scalar lambda{};
  Scalar mu{};

  Mat3 apply(const Mat3& eps) const {
    return lambda * eps.trace() * Mat3::Identity() + Scalar(2) * mu * eps;
  }
  Scalar contract(const Mat3& eps) const {
    const Scalar tr = eps.trace();
    return lambda * tr * tr + Scalar(2) * mu * eps.cwiseAbs2().sum();
  }
};

template <typename Scalar>
IsotropicTensor<Scalar> lame_from_young(Scalar young, Scalar nu) {
  return {young * nu / ((Scalar(1) + nu) * (Scalar(1) - Scalar(2) * nu)),
          young / (Scalar(2) * (Scalar(1) + nu))};
}

inline double sigma(double t, double k1) {
  if (t < 0) throw DomainError("sigma: negative time");
  return std::exp(-k1 * t);
}

/// Mixture-rule Young modulus E_min + E_s rho sigma + E_b b.
double effective_modulus(double rho, double sig, double b, const MaterialParams& params);

IsotropicTensor<double> elastic_tensor(double rho, double sig, double b,
                                       const MaterialParams& params);

/// D0 (1 - rho). Accepts any rho in [0, 1); box membership is checked on the
/// density field itself.
double diffusivity(double rho, const MaterialParams& params);

double stimulus(const Eigen::Matrix3d& eps, const StimulusSpec& spec);

/// dS/d(eps_ij), treating the nine entries as independent; zero where S is flat
/// and at eps = 0.
Eigen::Matrix3d stimulus_gradient(const Eigen::Matrix3d& eps, const StimulusSpec& spec);

}  // namespace scaffold
