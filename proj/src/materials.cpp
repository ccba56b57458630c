#include "scaffold/materials.hpp"

#include <string>

namespace scaffold {

void MaterialParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw DomainError(std::string("material parameters: ") + what);
  };
  require(k1 >= 0 && k2[0] >= 0 && k2[1] >= 0 && k3[0] >= 0 && k3[1] >= 0 && k4 >= 0 &&
              k6 >= 0 && k7 >= 0,
          "rate constants must be non-negative");
  require(c_P > 0 && c_P <= C_P && C_P < 1, "density bounds must satisfy 0 < c_P <= C_P < 1");
  require(E_scaffold > 0 && E_bone > 0 && E_fixture > 0, "moduli must be positive");
  require(nu >= 0 && nu < 0.5, "Poisson ratio must lie in [0, 0.5)");
  require(D0 > 0, "D0 must be positive");
  if (stimulus.law == StimulusLaw::Bandpass) {
    require(stimulus.width > 0 && stimulus.lo >= 0 && stimulus.lo <= stimulus.hi,
            "band-pass stimulus needs 0 <= lo <= hi and width > 0");
  }
}

double effective_modulus(double rho, double sig, double b, const MaterialParams& params) {
  if (!(rho >= 0 && rho <= 1)) throw DomainError("elastic_tensor: rho outside [0,1]");
  if (!(sig > 0 && sig <= 1)) throw DomainError("elastic_tensor: sigma outside (0,1]");
  if (!(b >= 0 && b <= 1 - rho + 1e-12)) throw DomainError("elastic_tensor: b outside [0,1-rho]");
  return params.E_min() + params.E_scaffold * rho * sig + params.E_bone * b;
}

IsotropicTensor<double> elastic_tensor(double rho, double sig, double b,
                                       const MaterialParams& params) {
  return lame_from_young(effective_modulus(rho, sig, b, params), params.nu);
}

double diffusivity(double rho, const MaterialParams& params) {
  if (!(rho >= 0 && rho < 1)) throw DomainError("diffusivity: rho outside [0,1)");
  return params.D0 * (1.0 - rho);
}

namespace {

void check_symmetric(const Eigen::Matrix3d& eps) {
  const double scale = eps.cwiseAbs().maxCoeff();
  if ((eps - eps.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300)) {
    throw DomainError("stimulus: strain tensor is not symmetric");
  }
}

// Trapezoid window of the magnitude and its slope.
std::pair<double, double> bandpass(double m, const StimulusSpec& s) {
  if (m <= s.lo - s.width || m >= s.hi + s.width) return {0.0, 0.0};
  if (m < s.lo) return {(m - (s.lo - s.width)) / s.width, 1.0 / s.width};
  if (m <= s.hi) return {1.0, 0.0};
  return {((s.hi + s.width) - m) / s.width, -1.0 / s.width};
}

}  // namespace

double stimulus(const Eigen::Matrix3d& eps, const StimulusSpec& spec) {
  check_symmetric(eps);
  const double m = eps.norm();
  if (spec.law == StimulusLaw::Frobenius) return m;
  return bandpass(m, spec).first;
}

Eigen::Matrix3d stimulus_gradient(const Eigen::Matrix3d& eps, const StimulusSpec& spec) {
  const double m = eps.norm();
  if (m == 0.0) return Eigen::Matrix3d::Zero();
  const double slope = spec.law == StimulusLaw::Frobenius ? 1.0 : bandpass(m, spec).second;
  return (slope / m) * eps;
}

}  // namespace scaffold
