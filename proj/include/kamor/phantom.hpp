#pragma once

// Synthetic molecules built from isotropic Gaussian blobs. With the transform
// convention phi_hat(k) = \int phi(r) exp(-i k.r) dr each blob
//   a * exp(-|r - c|^2 / (2 s^2))
// has the closed form a (2pi)^{3/2} s^3 exp(-s^2 |k|^2 / 2) exp(-i k.c).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "kamor/errors.hpp"
#include "kamor/harmonics.hpp"
#include "kamor/kam.hpp"

namespace kamor {

struct Blob {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double sigma = 1.0;
  double amplitude = 1.0;
};

struct Phantom {
  std::vector<Blob> blobs;

  void validate() const {
    if (blobs.empty()) throw InputError("Phantom: needs at least one blob");
    for (std::size_t i = 0; i < blobs.size(); ++i)
      if (!(blobs[i].sigma > 0.0))
        throw InputError("Phantom: blob " + std::to_string(i) +
                         " has non-positive sigma");
  }

  /// Largest |center| + 3 sigma over all blobs.
  double extent() const {
    double r = 0.0;
    for (const Blob& b : blobs) r = std::max(r, b.center.norm() + 3.0 * b.sigma);
    return r;
  }
};

inline complex phantom_fourier_eval(const Phantom& p, const Eigen::Vector3d& k) {
  constexpr double kGaussNorm = 15.749609945722419;  // (2pi)^{3/2}
  const double k2 = k.squaredNorm();
  complex acc{};
  for (const Blob& b : p.blobs) {
    const double s = b.sigma;
    const double mag = b.amplitude * kGaussNorm * s * s * s * std::exp(-0.5 * s * s * k2);
    const double phase = -k.dot(b.center);
    acc += mag * complex(std::cos(phase), std::sin(phase));
  }
  return acc;
}

/// Real-space density at r.
inline double phantom_real_eval(const Phantom& p, const Eigen::Vector3d& r) {
  double acc = 0.0;
  for (const Blob& b : p.blobs)
    acc += b.amplitude * std::exp(-(r - b.center).squaredNorm() / (2.0 * b.sigma * b.sigma));
  return acc;
}

/// Default band limit: ceil(k_max * extent) + 4.
inline int default_band_limit(const Phantom& p, const RadialGrid& grid) {
  return static_cast<int>(std::ceil(grid.ks.back() * p.extent())) + 4;
}

/// Quadrature degree used to expand a phantom to band limit L. Oversampled
/// so that content above L does not alias into the retained coefficients.
inline int phantom_quadrature_degree(int L) { return 2 * L + 8; }

inline constexpr double kParityWarnTolerance = 1e-10;

struct PhantomExpansion {
  CoefficientSet coeffs;
  ParityReport parity;
  std::vector<std::string> warnings;
};

inline PhantomExpansion expand_phantom(const Phantom& p, const RadialGrid& grid,
                                       int L) {
  p.validate();
  grid.validate();
  if (L < 0) throw InputError("expand_phantom: band limit must be >= 0");
  const SphereQuadrature quad = quadrature_nodes(phantom_quadrature_degree(L));
  const auto dirs = quad.directions();
  std::vector<Eigen::Vector3d> unit;
  unit.reserve(dirs.size());
  for (const Direction& d : dirs)
    unit.emplace_back(std::sin(d.theta) * std::cos(d.phi),
                      std::sin(d.theta) * std::sin(d.phi), std::cos(d.theta));

  const int K = grid.K();
  std::vector<ComplexMatrix> raw;
  for (int l = 0; l <= L; ++l) raw.push_back(ComplexMatrix::Zero(K, block_width(l)));

  std::vector<complex> samples(quad.size());
  for (int j = 0; j < K; ++j) {
    const double k = grid.ks[j];
    for (std::size_t n = 0; n < quad.size(); ++n)
      samples[n] = phantom_fourier_eval(p, k * unit[n]);
    const ShellCoefficients sc = expand_on_sphere(samples, quad, L);
    for (int l = 0; l <= L; ++l)
      for (int m = -l; m <= l; ++m) raw[l](j, m + l) = sc(l, m);
  }

  PhantomExpansion out;
  out.parity = parity_check(raw);
  for (int l = 0; l <= L; ++l)
    if (out.parity.residuals[l] > kParityWarnTolerance)
      out.warnings.push_back("parity residual " +
                             std::to_string(out.parity.residuals[l]) +
                             " at l=" + std::to_string(l));
  out.coeffs = from_raw_blocks(grid, raw);
  return out;
}

inline CoefficientSet phantom_to_coefficients(const Phantom& p,
                                              const RadialGrid& grid, int L) {
  return expand_phantom(p, grid, L).coeffs;
}

/// Random phantom: `n_blobs` blobs with centers uniform in a ball of
/// `radius`, sigma uniform in [sigma_min, sigma_max], amplitude in [0.5, 1.5].
inline Phantom random_phantom(int n_blobs, double radius, double sigma_min,
                              double sigma_max, std::uint64_t seed) {
  if (n_blobs < 1) throw InputError("random_phantom: need at least one blob");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> sig(sigma_min, sigma_max);
  std::uniform_real_distribution<double> amp(0.5, 1.5);
  Phantom p;
  for (int i = 0; i < n_blobs; ++i) {
    Eigen::Vector3d c;
    do {
      c = {unif(rng), unif(rng), unif(rng)};
    } while (c.squaredNorm() > 1.0);
    p.blobs.push_back({radius * c, sig(rng), amp(rng)});
  }
  p.validate();
  return p;
}

}  // namespace kamor
