#include "cws/bvp.hpp"

#include <cmath>

namespace cws {

VectorXd HarmonicSolution::potential(const MatrixX3d& points) const {
  VectorXd f = single_layer_potential(*grid, density.values, points);
  f.array() += potential_offset;
  return f;
}

MatrixX3d HarmonicSolution::gradient(const MatrixX3d& points) const {
  return single_layer_gradient(*grid, density.values, points);
}

HarmonicSolution solve_dirichlet_interior(const LayerOperatorSet& ops,
                                          const ScalarDensity& kappa) {
  auto solve = ops.solve_first_kind(kappa.values);
  HarmonicSolution s;
  s.grid = ops.grid;
  s.side = HarmonicSolution::Side::interior;
  s.density = {ops.grid, solve.density};
  s.trace = {ops.grid, ops.apply_v(solve.density)};
  s.normal_derivative = {ops.grid, ops.apply_series_op(solve.density)};
  s.trace_gradient = surface_gradient(s.trace);
  s.condition_estimate = solve.condition_estimate;
  s.truncated_rank = solve.truncated_rank;
  const double kn = kappa.l2_norm();
  s.boundary_residual =
      kn > 0 ? ScalarDensity{ops.grid, s.trace.values - kappa.values}.l2_norm() / kn
             : 0.0;
  return s;
}

HarmonicSolution solve_neumann_interior(const LayerOperatorSet& ops,
                                        const ScalarDensity& b) {
  const SurfaceGrid& g = *ops.grid;
  const double rms = b.l2_norm() / std::sqrt(g.area);
  const double m = b.mean();
  if (std::abs(m) > 1e-8 * std::max(rms, 1e-300))
    throw NotMeanZero("solve_neumann_interior: data is not mean-zero");
  VectorXd data = b.values.array() - m;

  HarmonicSolution s;
  s.grid = ops.grid;
  s.side = HarmonicSolution::Side::interior;
  s.density = {ops.grid, ops.solve_interior_neumann_density(data)};
  VectorXd tr = ops.apply_v(s.density.values);
  const double tr_mean = g.weights.dot(tr) / g.area;
  tr.array() -= tr_mean;
  s.potential_offset = -tr_mean;
  s.trace = {ops.grid, tr};
  s.normal_derivative = {ops.grid, ops.apply_series_op(s.density.values)};
  s.trace_gradient = surface_gradient(s.trace);
  const double bn = ScalarDensity{ops.grid, data}.l2_norm();
  s.boundary_residual =
      bn > 0
          ? ScalarDensity{ops.grid, s.normal_derivative.values - data}.l2_norm() / bn
          : 0.0;
  return s;
}

HarmonicSolution solve_neumann_exterior(const LayerOperatorSet& ops,
                                        const ScalarDensity& b) {
  HarmonicSolution s;
  s.grid = ops.grid;
  s.side = HarmonicSolution::Side::exterior;
  s.density = {ops.grid, ops.solve_exterior_operator(-b.values)};
  s.trace = {ops.grid, ops.apply_v(s.density.values)};
  // exterior one-sided normal derivative, N still outward of the interior
  VectorXd nd = -(0.5 * s.density.values + ops.apply_wt(s.density.values));
  s.normal_derivative = {ops.grid, nd};
  s.trace_gradient = surface_gradient(s.trace);
  const double bn = b.l2_norm();
  s.boundary_residual =
      bn > 0 ? ScalarDensity{ops.grid, nd - b.values}.l2_norm() / bn : 0.0;
  return s;
}

}  // namespace cws
