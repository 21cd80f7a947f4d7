#pragma once

#include <Eigen/Dense>
#include <memory>
#include <map>
#include <mutex>

#include "cws/surface_fields.hpp"

namespace cws {

// Dense Nystrom discretization of the boundary operators on a surface grid:
//   w_dl  : double layer, kernel N(y).(x-y)/(4pi|x-y|^3), diagonal by
//           singularity subtraction so that w_dl * 1 = -1/2 exactly;
//   w_tr  : its negated weighted transpose, kernel N(x).(x-y)/(4pi|x-y|^3);
//   v_sl  : single layer trace, kernel 1/(4pi|x-y|), diagonal corrected by
//           an adaptive polar-patch integral in the parametric chart.
class LayerOperatorSet {
 public:
  std::shared_ptr<const SurfaceGrid> grid;
  MatrixXd w_dl;
  MatrixXd w_tr;
  // Single layer with the near-diagonal patch rows replaced by polar-patch
  // integrals against tensor Lagrange cardinals of the patch stencil; plain
  // trapezoid outside the patch.
  MatrixXd v_sl;
  int patch_halfwidth = 3;
  // Sparse band turning v_sl back into the plain-kernel matrix with the
  // subtraction-corrected diagonal; realizes the duality form literally.
  MatrixXd dual_band;           // M x (2m+1)^2
  Eigen::MatrixXi dual_band_cols;

  VectorXd apply_w(const VectorXd& f) const { return w_dl * f; }
  VectorXd apply_wt(const VectorXd& f) const { return w_tr * f; }
  VectorXd apply_v(const VectorXd& f) const { return v_sl * f; }

  // (Id/2 - w_tr) f, the Neumann-series building block.
  VectorXd apply_series_op(const VectorXd& f) const {
    return 0.5 * f - w_tr * f;
  }

  // Duality pairing <psi, phi> = sum_ij psi_i phi_j w_i w_j / (4pi|x_i-x_j|)
  // with the corrected diagonal; an equivalent W^{-1/2} inner product.
  double dual_ip(const VectorXd& psi, const VectorXd& phi) const {
    VectorXd v = v_sl * phi;
    for (int i = 0; i < v.size(); ++i) {
      double acc = 0.0;
      for (int c = 0; c < dual_band.cols(); ++c)
        acc += dual_band(i, c) * phi[dual_band_cols(i, c)];
      v[i] += acc;
    }
    return psi.dot((grid->weights.array() * v.array()).matrix());
  }
  double dual_norm(const VectorXd& psi) const {
    return std::sqrt(std::max(0.0, dual_ip(psi, psi)));
  }
  // Componentwise surrogate for nodal vector fields.
  double dual_norm_componentwise(const MatrixX3d& v) const;

  // Symmetric solve of v_sl * psi = kappa. LDLT of the weighted symmetric
  // form by default; falls back to eigenvalue truncation (relative cutoff
  // 1e-12) when the factorization is singular or the condition estimate
  // exceeds 1e12. Never silent: condition estimate is always reported.
  struct DirichletSolve {
    VectorXd density;
    double condition_estimate = 0.0;
    int truncated_rank = -1;  // -1 when no truncation was needed
  };
  DirichletSolve solve_first_kind(const VectorXd& kappa) const;

  // Backsolves with the deflated interior operator (Id/2 - w_tr + mean
  // deflation) and the exterior operator (Id/2 + w_tr).
  VectorXd solve_interior_neumann_density(const VectorXd& b) const;
  VectorXd solve_exterior_operator(const VectorXd& rhs) const;

  double mean_spacing() const { return std::sqrt(grid->area / grid->size()); }

 private:
  struct Cache;
  std::shared_ptr<Cache> cache_;
  friend LayerOperatorSet assemble_layer_operators(
      std::shared_ptr<const SurfaceGrid>, bool);
};

// Throws AssemblyFailure on non-finite kernel values. bug_flip_wdiag flips
// the sign of the -1/2 jump constant on the double-layer diagonal; it exists
// so the validation harness can prove the solid-angle check bites.
LayerOperatorSet assemble_layer_operators(
    std::shared_ptr<const SurfaceGrid> grid, bool bug_flip_wdiag = false);

// Raw Gauss-identity defect max_i |sum_{j != i} K(x_i,y_j) w_j + 1/2| of the
// punctured trapezoid rule, measured without any diagonal correction.
// Streams the double loop, so it is usable at grid sizes where the dense
// matrices would not fit.
double solid_angle_defect(const SurfaceGrid& grid);

// Interior potential W(f)(x) by plain quadrature, smooth off the surface.
// points closer than half a grid spacing increment *near_warnings.
VectorXd interior_double_layer(const ScalarDensity& f, const MatrixX3d& points,
                               int* near_warnings = nullptr);

// Off-surface single layer potential and gradient of a nodal density.
VectorXd single_layer_potential(const SurfaceGrid& grid, const VectorXd& psi,
                                const MatrixX3d& points);
MatrixX3d single_layer_gradient(const SurfaceGrid& grid, const VectorXd& psi,
                                const MatrixX3d& points);

double duality_inner_product(const LayerOperatorSet& ops,
                             const ScalarDensity& psi,
                             const ScalarDensity& phi);

// sum_{k=k_start}^{n} (Id/2 - w_tr)^k b0; empty when n < k_start.
// Requires |mean(b0)| <= 1e-8 * rms(b0); the mean is then projected out
// exactly before the series is applied.
ScalarDensity neumann_series(const LayerOperatorSet& ops,
                             const ScalarDensity& b0, int n, int k_start);

// Power iteration of (Id/2 - w_tr) on mean-zero densities in the duality
// norm; returns the converged ratio. Throws NoConvergence if successive
// ratios still differ by more than 1e-4 after iters steps.
double contraction_estimate(const LayerOperatorSet& ops, int iters,
                            unsigned long seed = 12345u);

}  // namespace cws
