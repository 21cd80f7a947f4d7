#pragma once

#include <functional>

#include "cws/bvp.hpp"

namespace cws {

using FieldSampler = std::function<Vector3d(const Vector3d&)>;

// Closed unit-current polyline.
struct FilamentLoop {
  MatrixX3d points;  // (n+1) x 3 with last row == first row
  int segments() const { return static_cast<int>(points.rows()) - 1; }
};

FilamentLoop make_circle_loop(const Vector3d& center, double radius,
                              const Vector3d& normal, int n_segments = 256);

// Unit-current loop threading the torus hole: a long z-axis segment closed
// far away (radius and half-length 100 x the surface diameter), so the
// field near the torus is e_phi/(2 pi rho) up to the far-closure
// perturbation.
FilamentLoop make_axis_threading_loop(const FourierTorus& torus,
                                      double extent_factor = 100.0);

// Exact straight-segment Biot-Savart sum, B = (1/4pi) sum dl x r / r^3.
// Throws OnFilament when a point sits on a segment.
MatrixX3d bs_filament(const FilamentLoop& loop, const MatrixX3d& points);
FieldSampler filament_sampler(FilamentLoop loop);

// Field of a nodal surface current by plain quadrature; counts points
// closer to the surface than half a grid spacing into *near_warnings.
MatrixX3d bs_surface_current(const TangentField& j, const MatrixX3d& points,
                             int* near_warnings = nullptr);

// Vector field values at a point cloud with optional quadrature weights.
struct FieldSamples {
  MatrixX3d points;
  VectorXd weights;  // empty => unweighted
  MatrixX3d values;

  double norm() const {
    const VectorXd sq = values.rowwise().squaredNorm();
    return std::sqrt(weights.size() ? weights.dot(sq) : sq.sum());
  }
};

FieldSamples sample_field(const FieldSampler& f, const MatrixX3d& points,
                          VectorXd weights = {});

// Trace on the surface of the volume potential of a harmonic Neumann field:
// the componentwise corrected single layer applied to Gamma x N. The
// potential is continuous across the surface, so the on-surface value is
// the trace.
MatrixX3d harmonic_volume_field_trace(const LayerOperatorSet& ops,
                                      const MatrixX3d& gamma_cross_n);
MatrixX3d harmonic_volume_field_offsurface(const SurfaceGrid& grid,
                                           const MatrixX3d& gamma_cross_n,
                                           const MatrixX3d& points);

// The harmonic Neumann field of the solid torus: a threading filament field
// plus an interior Neumann gradient correction cancelling its normal trace.
// Unit toroidal circulation by Ampere's law; curl-free inside the domain.
class HarmonicNeumannField {
 public:
  FilamentLoop loop;
  HarmonicSolution correction;  // u with N . grad u = -N . B_filament

  // Field anywhere inside the domain (and off the filament outside).
  MatrixX3d eval(const MatrixX3d& points) const;
  FieldSampler sampler() const;

  // Nodal values on the surface: filament field + tangential gradient of
  // the correction trace + the second-kind normal remainder.
  const MatrixX3d& surface_values() const { return surface_values_; }
  const MatrixX3d& surface_cross_normal() const { return surface_cross_n_; }

  double tangency_defect = 0.0;      // max |N.Gamma| / max |Gamma| on surface
  double toroidal_circulation = 0.0; // loop integral along the theta=0 circle
  double poloidal_circulation = 0.0; // along the phi=0 circle

 private:
  friend HarmonicNeumannField build_harmonic_neumann_field(
      const LayerOperatorSet&, const FilamentLoop*);
  MatrixX3d surface_values_;
  MatrixX3d surface_cross_n_;
};

// Throws FilamentIntersectsDomain if the loop comes closer to the surface
// than 0.1 x the minor radius.
HarmonicNeumannField build_harmonic_neumann_field(
    const LayerOperatorSet& ops, const FilamentLoop* loop = nullptr);

// Line integral of a field sampler along the axis circle (a toroidal loop
// inside any nested plasma region); pins the Gamma coefficient in fits.
double toroidal_circulation(const FieldSampler& field,
                            const FourierTorus& torus, int n_samples = 512);

// L2 norm of a sampler over the volume grid.
double volume_l2_norm(const FieldSampler& field, const VolumeGrid& vg);

}  // namespace cws
