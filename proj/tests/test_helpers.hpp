#pragma once

#include <memory>
#include <random>

#include "cws/fields.hpp"
#include "cws/layer_potentials.hpp"

namespace cws::test {

inline FourierTorus circular_torus(double r0 = 2.0, double a = 1.0) {
  return build_torus(1, {{0, 0, r0}, {1, 0, a}}, {{1, 0, a}});
}

// Non-axisymmetric two-period surface for refinement studies.
inline FourierTorus shaped_torus() {
  return build_torus(2,
                     {{0, 0, 3.0}, {1, 0, 1.0}, {1, 1, 0.22}, {2, 1, 0.08}},
                     {{1, 0, 1.25}, {1, 1, -0.18}, {2, 1, 0.06}});
}

inline std::shared_ptr<const SurfaceGrid> circular_grid(int n) {
  return make_surface_grid(std::make_shared<FourierTorus>(circular_torus()), n, n);
}

// Shared fixtures so each test binary assembles the dense operators once.
inline const LayerOperatorSet& circular_ops(int n) {
  static std::map<int, std::unique_ptr<LayerOperatorSet>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    auto ops = std::make_unique<LayerOperatorSet>(
        assemble_layer_operators(circular_grid(n)));
    it = cache.emplace(n, std::move(ops)).first;
  }
  return *it->second;
}

inline const HarmonicSurfaceBasis& circular_basis(int n) {
  static std::map<int, std::unique_ptr<HarmonicSurfaceBasis>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    auto b = std::make_unique<HarmonicSurfaceBasis>(harmonic_basis(circular_grid(n)));
    it = cache.emplace(n, std::move(b)).first;
  }
  return *it->second;
}

inline const HarmonicNeumannField& circular_gamma(int n) {
  static std::map<int, std::unique_ptr<HarmonicNeumannField>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    auto g = std::make_unique<HarmonicNeumannField>(
        build_harmonic_neumann_field(circular_ops(n)));
    it = cache.emplace(n, std::move(g)).first;
  }
  return *it->second;
}

// Interior probe cloud for the circular torus (radial fraction < 1).
inline MatrixX3d interior_probes(const FourierTorus& torus, double s_frac,
                                 int n_theta, int n_phi) {
  MatrixX3d pts(n_theta * n_phi, 3);
  int p = 0;
  for (int j = 0; j < n_phi; ++j) {
    const double phi = 2.0 * std::numbers::pi * (j + 0.37) / n_phi;
    const Vector3d axis = torus.axis_point(phi);
    for (int i = 0; i < n_theta; ++i) {
      const double theta = 2.0 * std::numbers::pi * (i + 0.21) / n_theta;
      pts.row(p++) = axis + s_frac * (torus.point(theta, phi) - axis);
    }
  }
  return pts;
}

inline MatrixX3d exterior_probes(const FourierTorus& torus, double s_frac,
                                 int n_theta, int n_phi) {
  return interior_probes(torus, s_frac, n_theta, n_phi);  // s_frac > 1
}

inline VectorXd random_band_limited(const SurfaceGrid& grid, int max_degree,
                                    std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  VectorXd f = VectorXd::Zero(grid.size());
  const auto modes = enumerate_modes(2 * max_degree * (max_degree + 1));
  for (const FourierMode& m : modes) {
    if (std::abs(m.m) + std::abs(m.n) > max_degree) continue;
    f += dist(rng) * eval_mode(grid, m);
  }
  return f;
}

// Analytic harmonic basis of the torus of revolution.
inline Vector3d analytic_gamma_t(const Vector3d& x) {
  const double rho2 = x[0] * x[0] + x[1] * x[1];
  return Vector3d(-x[1], x[0], 0.0) / (2.0 * std::numbers::pi * rho2);
}

}  // namespace cws::test
