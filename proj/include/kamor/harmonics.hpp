#pragma once

// Real spherical harmonics, tensor-product sphere quadrature, and
// forward/inverse expansion of sampled functions on a spherical shell.
//
// Convention: orthonormal real harmonics without the Condon-Shortley phase,
//   Y_l^0      = N_l^0 P_l^0(cos t)
//   Y_l^m      = sqrt(2) N_l^m P_l^m(cos t) cos(m p)     m > 0
//   Y_l^{-m}   = sqrt(2) N_l^m P_l^m(cos t) sin(m p)     m > 0
// with N_l^m chosen so that the integral of (Y_l^m)^2 over the sphere is 1.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "kamor/errors.hpp"

namespace kamor {

using complex = std::complex<double>;

struct Direction {
  double theta = 0.0;  // polar angle, [0, pi]
  double phi = 0.0;    // azimuth
};

/// Flat index of (l, m) in a coefficient vector of length (L+1)^2.
constexpr int sh_index(int l, int m) { return l * l + l + m; }
constexpr int sh_count(int L) { return (L + 1) * (L + 1); }

/// Fully normalized associated Legendre values Pbar_l^m(x), 0 <= m <= l <= L,
/// stored at l(l+1)/2 + m. Pbar_l^m includes sqrt((2l+1)/(4pi) (l-m)!/(l+m)!)
/// and carries no Condon-Shortley sign. `sin_theta` must equal sqrt(1-x^2).
inline void normalized_legendre(int L, double x, double sin_theta,
                                std::vector<double>& out) {
  const auto tri = [](int l, int m) { return l * (l + 1) / 2 + m; };
  out.assign(static_cast<std::size_t>((L + 1) * (L + 2) / 2), 0.0);
  double pmm = 0.5 / std::sqrt(std::numbers::pi);
  for (int m = 0; m <= L; ++m) {
    if (m > 0) pmm *= std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * sin_theta;
    out[tri(m, m)] = pmm;
    if (m + 1 > L) break;
    out[tri(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * pmm;
    for (int l = m + 2; l <= L; ++l) {
      const double l2 = static_cast<double>(l) * l;
      const double m2 = static_cast<double>(m) * m;
      const double a = std::sqrt((4.0 * l2 - 1.0) / (l2 - m2));
      const double lm1 = l - 1.0;
      const double b = std::sqrt((lm1 * lm1 - m2) / (4.0 * lm1 * lm1 - 1.0));
      out[tri(l, m)] = a * (x * out[tri(l - 1, m)] - b * out[tri(l - 2, m)]);
    }
  }
}

/// All real harmonics up to degree L at one direction, indexed by sh_index.
inline std::vector<double> eval_real_sh_all(int L, double theta, double phi) {
  std::vector<double> plm;
  normalized_legendre(L, std::cos(theta), std::sin(theta), plm);
  std::vector<double> out(static_cast<std::size_t>(sh_count(L)));
  for (int l = 0; l <= L; ++l) {
    const int base = l * (l + 1) / 2;
    out[sh_index(l, 0)] = plm[base];
    for (int m = 1; m <= l; ++m) {
      const double p = std::numbers::sqrt2 * plm[base + m];
      out[sh_index(l, m)] = p * std::cos(m * phi);
      out[sh_index(l, -m)] = p * std::sin(m * phi);
    }
  }
  return out;
}

/// Orthonormal real spherical harmonic Y_l^m(theta, phi).
inline double eval_real_sh(int l, int m, double theta, double phi) {
  if (l < 0 || m > l || m < -l) {
    throw std::domain_error("eval_real_sh: need 0 <= |m| <= l, got l=" +
                            std::to_string(l) + " m=" + std::to_string(m));
  }
  std::vector<double> plm;
  normalized_legendre(l, std::cos(theta), std::sin(theta), plm);
  const int am = m < 0 ? -m : m;
  const double p = plm[l * (l + 1) / 2 + am];
  if (m == 0) return p;
  return std::numbers::sqrt2 * p *
         (m > 0 ? std::cos(m * phi) : std::sin(am * phi));
}

/// Gauss-Legendre nodes and weights on [-1, 1], nodes in descending order.
inline void gauss_legendre(int n, std::vector<double>& nodes,
                           std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  // P_n(x) and P_n'(x) by the three-term recurrence
  const auto legendre = [n](double x, double& dp) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    return p1;
  };
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      const double dx = legendre(x, dp) / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    if (n % 2 == 1 && i == n / 2) x = 0.0;
    legendre(x, dp);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[static_cast<std::size_t>(i)] = x;
    nodes[static_cast<std::size_t>(n - 1 - i)] = -x;
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
}

/// Tensor-product rule: (L+1) Gauss-Legendre nodes in cos(theta) times
/// (2L+2) uniform azimuths. Samples are laid out theta-major.
struct SphereQuadrature {
  int L_design = 0;
  std::vector<double> thetas;         // n_theta, polar angles
  std::vector<double> theta_weights;  // Gauss-Legendre weights in cos(theta)
  std::vector<double> phis;           // n_phi, uniform azimuths
  double phi_weight = 0.0;            // 2pi / n_phi
  std::vector<double> weights;        // per node, sums to 4pi

  std::size_t n_theta() const { return thetas.size(); }
  std::size_t n_phi() const { return phis.size(); }
  std::size_t size() const { return weights.size(); }
  Direction node(std::size_t idx) const {
    return {thetas[idx / n_phi()], phis[idx % n_phi()]};
  }
  std::vector<Direction> directions() const {
    std::vector<Direction> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(node(i));
    return out;
  }
};

inline SphereQuadrature quadrature_nodes(int L_design) {
  if (L_design < 0) throw InputError("quadrature_nodes: L_design must be >= 0");
  SphereQuadrature q;
  q.L_design = L_design;
  std::vector<double> x;
  gauss_legendre(L_design + 1, x, q.theta_weights);
  q.thetas.reserve(x.size());
  for (double xi : x) q.thetas.push_back(std::acos(xi));
  const int n_phi = 2 * L_design + 2;
  q.phi_weight = 2.0 * std::numbers::pi / n_phi;
  for (int j = 0; j < n_phi; ++j) q.phis.push_back(j * q.phi_weight);
  q.weights.reserve(q.thetas.size() * q.phis.size());
  for (double wt : q.theta_weights)
    for (int j = 0; j < n_phi; ++j) q.weights.push_back(wt * q.phi_weight);
  return q;
}

/// Complex expansion coefficients of one shell, indexed by sh_index.
struct ShellCoefficients {
  int L = 0;
  std::vector<complex> values;

  ShellCoefficients() = default;
  explicit ShellCoefficients(int band_limit)
      : L(band_limit), values(static_cast<std::size_t>(sh_count(band_limit))) {}

  complex& operator()(int l, int m) { return values[sh_index(l, m)]; }
  const complex& operator()(int l, int m) const { return values[sh_index(l, m)]; }
};

/// Projects sampled values onto the real harmonics up to degree L.
/// Exact for functions band-limited to L when L <= quad.L_design.
inline ShellCoefficients expand_on_sphere(std::span<const complex> samples,
                                          const SphereQuadrature& quad, int L) {
  if (samples.size() != quad.size()) {
    throw DimensionError("expand_on_sphere: " + std::to_string(samples.size()) +
                         " samples for a rule with " +
                         std::to_string(quad.size()) + " nodes");
  }
  if (L < 0 || L > quad.L_design) {
    throw InputError("expand_on_sphere: band limit " + std::to_string(L) +
                     " outside [0, " + std::to_string(quad.L_design) + "]");
  }
  ShellCoefficients out(L);
  const std::size_t n_phi = quad.n_phi();
  std::vector<double> cosm(n_phi * static_cast<std::size_t>(L + 1));
  std::vector<double> sinm(cosm.size());
  for (int m = 0; m <= L; ++m)
    for (std::size_t j = 0; j < n_phi; ++j) {
      cosm[m * n_phi + j] = std::cos(m * quad.phis[j]);
      sinm[m * n_phi + j] = std::sin(m * quad.phis[j]);
    }

  std::vector<double> plm;
  std::vector<complex> cm(static_cast<std::size_t>(L + 1));
  std::vector<complex> sm(static_cast<std::size_t>(L + 1));
  for (std::size_t i = 0; i < quad.n_theta(); ++i) {
    const double th = quad.thetas[i];
    normalized_legendre(L, std::cos(th), std::sin(th), plm);
    const complex* ring = samples.data() + i * n_phi;
    for (int m = 0; m <= L; ++m) {
      complex c{}, s{};
      for (std::size_t j = 0; j < n_phi; ++j) {
        c += ring[j] * cosm[m * n_phi + j];
        s += ring[j] * sinm[m * n_phi + j];
      }
      const double w = quad.theta_weights[i] * quad.phi_weight;
      cm[m] = c * w;
      sm[m] = s * w;
    }
    for (int l = 0; l <= L; ++l) {
      const int base = l * (l + 1) / 2;
      out(l, 0) += plm[base] * cm[0];
      for (int m = 1; m <= l; ++m) {
        const double p = std::numbers::sqrt2 * plm[base + m];
        out(l, m) += p * cm[m];
        out(l, -m) += p * sm[m];
      }
    }
  }
  return out;
}

/// Evaluates sum_{l,m} coeff(l,m) Y_l^m at each direction.
inline std::vector<complex> synthesize_on_sphere(
    const ShellCoefficients& coeffs, std::span<const Direction> directions) {
  std::vector<complex> out;
  out.reserve(directions.size());
  for (const Direction& d : directions) {
    const auto y = eval_real_sh_all(coeffs.L, d.theta, d.phi);
    complex acc{};
    for (std::size_t i = 0; i < y.size(); ++i) acc += coeffs.values[i] * y[i];
    out.push_back(acc);
  }
  return out;
}

/// Polar and azimuthal angles of a nonzero 3-vector; the origin maps to (0, 0).
inline Direction direction_of(double x, double y, double z) {
  const double r = std::sqrt(x * x + y * y + z * z);
  if (r == 0.0) return {};
  return {std::acos(std::clamp(z / r, -1.0, 1.0)), std::atan2(y, x)};
}

}  // namespace kamor
