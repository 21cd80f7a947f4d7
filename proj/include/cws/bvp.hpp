#pragma once

#include "cws/layer_potentials.hpp"

namespace cws {

// Harmonic function represented by a single-layer density, f = v[psi] (+ a
// constant for the interior Neumann normalization). Normal derivatives are
// always second-kind expressions in psi; nothing hypersingular is evaluated.
struct HarmonicSolution {
  enum class Side { interior, exterior };

  std::shared_ptr<const SurfaceGrid> grid;
  Side side = Side::interior;
  ScalarDensity density;            // psi
  ScalarDensity trace;              // f on the surface
  ScalarDensity normal_derivative;  // N . grad f, one-sided
  TangentField trace_gradient;      // spectral tangential gradient of trace
  double potential_offset = 0.0;
  double condition_estimate = 0.0;
  int truncated_rank = -1;
  double boundary_residual = 0.0;  // relative residual of the boundary solve

  VectorXd potential(const MatrixX3d& points) const;
  MatrixX3d gradient(const MatrixX3d& points) const;
};

// First-kind solve V psi = kappa; interior normal derivative available as
// (Id/2 - w_tr) psi. Ill-conditioning is reported, never silent.
HarmonicSolution solve_dirichlet_interior(const LayerOperatorSet& ops,
                                          const ScalarDensity& kappa);

// Second-kind solve (Id/2 - w_tr) psi = b with rank-one deflation of the
// equilibrium density; b must be mean-zero. The trace is normalized to mean
// zero (the solution is fixed up to a constant; downstream quantities use
// the gradient only).
HarmonicSolution solve_neumann_interior(const LayerOperatorSet& ops,
                                        const ScalarDensity& b);

// Exterior Neumann with decay at infinity, (Id/2 + w_tr) psi = -b where b
// is the prescribed N . grad g with N the outward normal of the interior
// domain. No mean-zero constraint: the exterior problem is well-posed for
// general data (a point source inside the domain has net flux).
HarmonicSolution solve_neumann_exterior(const LayerOperatorSet& ops,
                                        const ScalarDensity& b);

}  // namespace cws
