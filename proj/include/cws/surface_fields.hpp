#pragma once

#include <memory>
#include <utility>

#include "cws/geometry.hpp"

namespace cws {

// Scalar samples on the surface quadrature grid.
struct ScalarDensity {
  std::shared_ptr<const SurfaceGrid> grid;
  VectorXd values;

  // Area-weighted mean; densities with mean zero form the subspace the
  // second-kind solvers operate on.
  double mean() const { return grid->weights.dot(values) / grid->area; }
  double l2_norm() const {
    return std::sqrt(grid->weights.dot(values.cwiseAbs2()));
  }
};

// Nodal tangent vectors on the surface grid.
struct TangentField {
  std::shared_ptr<const SurfaceGrid> grid;
  MatrixX3d values;

  double l2_norm() const {
    return std::sqrt(grid->weights.dot(values.rowwise().squaredNorm()));
  }
  double max_norm() const { return values.rowwise().norm().maxCoeff(); }
};

// grad_S f = g^{ab} (d_b f) e_a with spectral partial derivatives.
TangentField surface_gradient(const ScalarDensity& f);

// Variational surface divergence: the negative quadrature-weighted adjoint
// of surface_gradient, which on this grid reduces to the spectral form
// (1/sqrtg) [d_theta(sqrtg v^theta) + d_phi(sqrtg v^phi)].
ScalarDensity surface_divergence(const TangentField& v);

// Rotate a tangent field by the outward normal, nodewise v x N.
TangentField cross_with_normal(const TangentField& v);

// Solves div grad u = rhs (rhs must have mean zero) by preconditioned CG
// with a flat-metric spectral preconditioner; relative residual <= tol.
ScalarDensity solve_surface_poisson(const ScalarDensity& rhs,
                                    double tol = 1e-10, int max_iter = 800);

// Harmonic tangent basis with unit periods:
//   loop_p gamma_p = 1, loop_t gamma_p = 0,
//   loop_t gamma_t = 1, loop_p gamma_t = 0.
struct HarmonicSurfaceBasis {
  TangentField gamma_p;
  TangentField gamma_t;
  Eigen::Matrix2d period_matrix;  // raw periods of the pre-normalized fields
};

HarmonicSurfaceBasis harmonic_basis(std::shared_ptr<const SurfaceGrid> grid);

// Real Fourier mode on the parameter torus: cos(m theta + n phi) or
// sin(m theta + n phi).
struct FourierMode {
  int m = 0;
  int n = 0;
  bool is_sin = false;
};

// Non-constant modes ordered by |m|+|n|, cos before sin within a pair.
std::vector<FourierMode> enumerate_modes(int count);

VectorXd eval_mode(const SurfaceGrid& grid, const FourierMode& mode);

// Divergence-free surface current: a band-limited single-valued stream
// function plus the two harmonic coefficients,
//   j = grad_S f x N + alpha gamma_t x N + beta gamma_p x N.
// Stream coefficients are keyed (m, n, value): keys with m > 0 or
// (m == 0, n > 0) multiply cos(m theta + n phi); the negated key carries the
// matching sine.
struct SurfaceCurrent {
  CoeffTable stream_coeffs;
  double alpha = 0.0;
  double beta = 0.0;
};

VectorXd eval_stream(const SurfaceGrid& grid, const CoeffTable& coeffs);

TangentField realize_current(const SurfaceCurrent& current,
                             std::shared_ptr<const SurfaceGrid> grid,
                             const HarmonicSurfaceBasis& basis);

// Line integrals of a nodal tangent field along the grid-aligned reference
// curves (phi = 0 poloidal circle, theta = 0 toroidal circle).
double line_integral_sigma_p(const TangentField& v);
double line_integral_sigma_t(const TangentField& v);

struct Windings {
  double qbar = 0.0;  // average toroidal windings
  double pbar = 0.0;  // average poloidal windings
};

// Qbar = (1/|S|) int j . gamma_t, Pbar = (1/|S|) int j . gamma_p.
Windings avg_windings(const TangentField& j, const HarmonicSurfaceBasis& basis);

}  // namespace cws
