#include <doctest.h>

#include <cmath>
#include <random>

#include "scaffold/materials.hpp"

using namespace scaffold;

namespace {

Eigen::Matrix3d random_symmetric(std::mt19937& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) m(i, j) = m(j, i) = u(rng);
  }
  return m;
}

}  // namespace

TEST_SUITE("materials") {
  TEST_CASE("sigma decay") {
    CHECK(sigma(0.0, 0.05) == 1.0);
    CHECK(sigma(13.0, 0.0) == 1.0);
    CHECK(sigma(1.0, std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(sigma(-1.0, 0.05), DomainError);
  }

  TEST_CASE("mixture rule") {
    MaterialParams p;
    CHECK(effective_modulus(0.0, 1.0, 0.0, p) == doctest::Approx(p.E_min()));
    CHECK(effective_modulus(1.0, 1.0, 0.0, p) == doctest::Approx(p.E_min() + 100.0));
    CHECK(effective_modulus(0.5, 0.5, 0.25, p) == doctest::Approx(275.1).epsilon(1e-14));
    CHECK_THROWS_AS(effective_modulus(0.5, 1.0, 0.6, p), DomainError);
    CHECK_THROWS_AS(effective_modulus(1.2, 1.0, 0.0, p), DomainError);
    CHECK_THROWS_AS(effective_modulus(0.5, 0.0, 0.0, p), DomainError);
  }

  TEST_CASE("modulus is monotone and bounded") {
    MaterialParams p;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double bound = p.E_min() + p.E_scaffold + p.E_bone;
    for (int k = 0; k < 200; ++k) {
      const double rho = u(rng), sig = 0.01 + 0.99 * u(rng), b = (1 - rho) * u(rng);
      const double e = effective_modulus(rho, sig, b, p);
      CHECK(e <= bound);
      CHECK(effective_modulus(rho, sig, 0.5 * b, p) <= e);
      CHECK(effective_modulus(0.5 * rho, sig, b, p) <= e);
      CHECK(effective_modulus(rho, 0.5 * sig, b, p) <= e);
    }
  }

  TEST_CASE("tensor ellipticity on random symmetric strains") {
    MaterialParams p;
    std::mt19937 rng(11);
    const auto floor = lame_from_young(p.E_min(), p.nu);
    const double c_c = 2.0 * floor.mu;  // lambda >= 0, so C M:M >= 2 mu |M|^2
    for (int k = 0; k < 100; ++k) {
      const auto c = elastic_tensor(0.05 + 0.6 * (k % 7) / 7.0, 1.0, 0.0, p);
      CHECK(c.mu > 0);
      CHECK(c.lambda >= 0);
      const Eigen::Matrix3d m = random_symmetric(rng);
      CHECK(c.contract(m) >= c_c * m.squaredNorm() * (1 - 1e-12));
      CHECK(c.contract(m) == doctest::Approx((c.apply(m).cwiseProduct(m)).sum()));
    }
  }

  TEST_CASE("tensor is Lipschitz in b") {
    MaterialParams p;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    // Operator norm of the isotropic tensor on symmetric matrices is 3 lambda + 2 mu.
    const auto unit = lame_from_young(1.0, p.nu);
    const double factor = 3 * unit.lambda + 2 * unit.mu;
    for (int k = 0; k < 100; ++k) {
      const double rho = 0.3, b1 = u(rng), b2 = u(rng);
      const auto c1 = elastic_tensor(rho, 0.7, b1, p);
      const auto c2 = elastic_tensor(rho, 0.7, b2, p);
      const double diff = 3 * std::abs(c1.lambda - c2.lambda) + 2 * std::abs(c1.mu - c2.mu);
      CHECK(diff <= p.E_bone * std::abs(b1 - b2) * factor * (1 + 1e-12));
    }
  }

  TEST_CASE("diffusivity") {
    MaterialParams p;
    CHECK(diffusivity(p.C_P, p) == doctest::Approx(0.3));
    CHECK(diffusivity(p.C_P, p) > 0);
    p.D0 = 2.0;
    CHECK(diffusivity(0.5, p) == doctest::Approx(1.0));
    CHECK(diffusivity(0.2, p) > diffusivity(0.4, p));
    CHECK_THROWS_AS(diffusivity(1.0, p), DomainError);
  }

  TEST_CASE("stimulus laws") {
    StimulusSpec frob;
    StimulusSpec band{StimulusLaw::Bandpass, 0.01, 0.03, 0.005};
    CHECK(stimulus(Eigen::Matrix3d::Zero(), frob) == 0.0);
    CHECK(stimulus(Eigen::Matrix3d::Zero(), band) == 0.0);
    Eigen::Matrix3d e = Eigen::Matrix3d::Zero();
    e(0, 0) = 0.01;
    CHECK(stimulus(e, frob) == doctest::Approx(0.01));
    e(0, 0) = 0.02;
    CHECK(stimulus(e, band) == doctest::Approx(1.0));
    e(0, 0) = 0.0075;
    CHECK(stimulus(e, band) == doctest::Approx(0.5));
    e(0, 0) = 0.04;
    CHECK(stimulus(e, band) == 0.0);
    Eigen::Matrix3d skew = Eigen::Matrix3d::Zero();
    skew(0, 1) = 1.0;
    CHECK_THROWS_AS(stimulus(skew, frob), DomainError);
  }

  TEST_CASE("stimulus is Lipschitz and bounded by linear growth") {
    std::mt19937 rng(5);
    StimulusSpec frob;
    StimulusSpec band{StimulusLaw::Bandpass, 0.01, 0.03, 0.005};
    for (int k = 0; k < 300; ++k) {
      const Eigen::Matrix3d a = random_symmetric(rng, 0.03), b = random_symmetric(rng, 0.03);
      const double d = (a - b).norm();
      CHECK(std::abs(stimulus(a, frob) - stimulus(b, frob)) <= d * (1 + 1e-12));
      CHECK(std::abs(stimulus(a, band) - stimulus(b, band)) <= d / band.width * (1 + 1e-12));
      CHECK(stimulus(a, frob) <= a.norm() + 1e-15);
    }
  }

  TEST_CASE("stimulus gradient matches central differences") {
    std::mt19937 rng(9);
    StimulusSpec frob;
    StimulusSpec band{StimulusLaw::Bandpass, 0.01, 0.03, 0.005};
    for (const auto& spec : {frob, band}) {
      for (int k = 0; k < 20; ++k) {
        const Eigen::Matrix3d eps = random_symmetric(rng, 0.02);
        const Eigen::Matrix3d dir = random_symmetric(rng, 1.0);
        const double h = 1e-7;
        const double fd = (stimulus(eps + h * dir, spec) - stimulus(eps - h * dir, spec)) / (2 * h);
        const double an = stimulus_gradient(eps, spec).cwiseProduct(dir).sum();
        CHECK(an == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
      }
    }
  }

  TEST_CASE("parameter validation") {
    MaterialParams p;
    CHECK_NOTHROW(p.validate());
    p.k4 = -1;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = {};
    p.C_P = 1.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = {};
    p.nu = 0.5;
    CHECK_THROWS_AS(p.validate(), DomainError);
  }
}
