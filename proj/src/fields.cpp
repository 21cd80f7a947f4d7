#include "cws/fields.hpp"

#include <cmath>
#include <numbers>

namespace cws {

namespace {
constexpr double kFourPiInv = 1.0 / (4.0 * std::numbers::pi);

Vector3d segment_field(const Vector3d& p1, const Vector3d& p2,
                       const Vector3d& x) {
  // Hanson-Hirshman form, regular everywhere off the segment.
  const Vector3d r1 = x - p1;
  const Vector3d r2 = x - p2;
  const double n1 = r1.norm(), n2 = r2.norm();
  const double len2 = (p2 - p1).squaredNorm();
  const double denom = n1 * n2 * ((n1 + n2) * (n1 + n2) - len2);
  if (!(denom > 1e-18) || n1 < 1e-9 || n2 < 1e-9)
    throw OnFilament("bs_filament: evaluation point on a segment");
  return (2.0 * (n1 + n2) / denom) * r1.cross(r2) * kFourPiInv;
}

}  // namespace

FilamentLoop make_circle_loop(const Vector3d& center, double radius,
                              const Vector3d& normal, int n_segments) {
  const Vector3d n = normal.normalized();
  Vector3d a = n.cross(Vector3d::UnitX());
  if (a.norm() < 1e-6) a = n.cross(Vector3d::UnitY());
  a.normalize();
  const Vector3d b = n.cross(a);
  FilamentLoop loop;
  loop.points.resize(n_segments + 1, 3);
  for (int k = 0; k <= n_segments; ++k) {
    const double t = 2.0 * std::numbers::pi * (k % n_segments) / n_segments;
    loop.points.row(k) = center + radius * (std::cos(t) * a + std::sin(t) * b);
  }
  return loop;
}

FilamentLoop make_axis_threading_loop(const FourierTorus& torus,
                                      double extent_factor) {
  const double ext = extent_factor * torus.diameter_estimate();
  FilamentLoop loop;
  loop.points.resize(5, 3);
  loop.points.row(0) = Vector3d(0, 0, -ext);
  loop.points.row(1) = Vector3d(0, 0, ext);
  loop.points.row(2) = Vector3d(ext, 0, ext);
  loop.points.row(3) = Vector3d(ext, 0, -ext);
  loop.points.row(4) = loop.points.row(0);
  return loop;
}

MatrixX3d bs_filament(const FilamentLoop& loop, const MatrixX3d& points) {
  const int P = static_cast<int>(points.rows());
  MatrixX3d out(P, 3);
  bool on_filament = false;  // exceptions cannot cross the parallel region
#pragma omp parallel for schedule(static) reduction(|| : on_filament)
  for (int p = 0; p < P; ++p) {
    const Vector3d x = points.row(p);
    Vector3d acc = Vector3d::Zero();
    for (int s = 0; s < loop.segments(); ++s) {
      const Vector3d p1 = loop.points.row(s);
      const Vector3d p2 = loop.points.row(s + 1);
      if ((p2 - p1).squaredNorm() < 1e-24) continue;
      try {
        acc += segment_field(p1, p2, x);
      } catch (const OnFilament&) {
        on_filament = true;
      }
    }
    out.row(p) = acc;
  }
  if (on_filament)
    throw OnFilament("bs_filament: evaluation point on a segment");
  return out;
}

FieldSampler filament_sampler(FilamentLoop loop) {
  return [loop = std::move(loop)](const Vector3d& x) -> Vector3d {
    MatrixX3d pts(1, 3);
    pts.row(0) = x;
    return bs_filament(loop, pts).row(0);
  };
}

MatrixX3d bs_surface_current(const TangentField& j, const MatrixX3d& points,
                             int* near_warnings) {
  const SurfaceGrid& g = *j.grid;
  const double spacing = std::sqrt(g.area / g.size());
  const int P = static_cast<int>(points.rows());
  MatrixX3d out(P, 3);
  int warn = 0;
#pragma omp parallel for schedule(static) reduction(+ : warn)
  for (int p = 0; p < P; ++p) {
    const Vector3d x = points.row(p);
    Vector3d acc = Vector3d::Zero();
    double min_r = 1e300;
    for (int k = 0; k < g.size(); ++k) {
      const Vector3d d = x - Vector3d(g.nodes.row(k));
      const double r = d.norm();
      min_r = std::min(min_r, r);
      const Vector3d jk = j.values.row(k);
      acc += (g.weights[k] / (r * r * r)) * jk.cross(d);
    }
    out.row(p) = kFourPiInv * acc;
    if (min_r < 0.5 * spacing) ++warn;
  }
  if (near_warnings) *near_warnings += warn;
  return out;
}

FieldSamples sample_field(const FieldSampler& f, const MatrixX3d& points,
                          VectorXd weights) {
  FieldSamples s;
  s.points = points;
  s.weights = std::move(weights);
  s.values.resize(points.rows(), 3);
  for (int p = 0; p < points.rows(); ++p) s.values.row(p) = f(points.row(p));
  return s;
}

MatrixX3d harmonic_volume_field_trace(const LayerOperatorSet& ops,
                                      const MatrixX3d& gamma_cross_n) {
  MatrixX3d out(gamma_cross_n.rows(), 3);
  for (int c = 0; c < 3; ++c) out.col(c) = ops.apply_v(gamma_cross_n.col(c));
  return out;
}

MatrixX3d harmonic_volume_field_offsurface(const SurfaceGrid& grid,
                                           const MatrixX3d& gamma_cross_n,
                                           const MatrixX3d& points) {
  MatrixX3d out(points.rows(), 3);
  for (int c = 0; c < 3; ++c)
    out.col(c) = single_layer_potential(grid, gamma_cross_n.col(c), points);
  return out;
}

MatrixX3d HarmonicNeumannField::eval(const MatrixX3d& points) const {
  return bs_filament(loop, points) + correction.gradient(points);
}

FieldSampler HarmonicNeumannField::sampler() const {
  return [this](const Vector3d& x) -> Vector3d {
    MatrixX3d pts(1, 3);
    pts.row(0) = x;
    return eval(pts).row(0);
  };
}

HarmonicNeumannField build_harmonic_neumann_field(const LayerOperatorSet& ops,
                                                  const FilamentLoop* loop) {
  const SurfaceGrid& g = *ops.grid;
  HarmonicNeumannField gamma;
  gamma.loop = loop ? *loop : make_axis_threading_loop(*g.torus);

  // clearance check against the surface
  double min_dist = 1e300;
  for (int s = 0; s < gamma.loop.segments(); ++s) {
    const Vector3d p1 = gamma.loop.points.row(s);
    const Vector3d p2 = gamma.loop.points.row(s + 1);
    const int nsub = 32;
    for (int t = 0; t <= nsub; ++t) {
      const Vector3d q = p1 + (p2 - p1) * (static_cast<double>(t) / nsub);
      min_dist = std::min(
          min_dist, (g.nodes.rowwise() - q.transpose()).rowwise().norm().minCoeff());
    }
  }
  if (min_dist < 0.1 * g.torus->minor_radius_estimate())
    throw FilamentIntersectsDomain(
        "build_harmonic_neumann_field: filament too close to the surface");

  const MatrixX3d b_fil = bs_filament(gamma.loop, g.nodes);
  VectorXd bn(g.size());
  for (int k = 0; k < g.size(); ++k)
    bn[k] = -g.normals.row(k).dot(b_fil.row(k));
  ScalarDensity data{ops.grid, bn};
  // flux of the filament field through the closed surface vanishes; drop
  // the tiny quadrature remainder so the solver precondition holds
  data.values.array() -= data.mean();
  gamma.correction = solve_neumann_interior(ops, data);

  // nodal surface values: tangential part from the trace, normal part from
  // the one-sided normal derivative
  gamma.surface_values_.resize(g.size(), 3);
  for (int k = 0; k < g.size(); ++k) {
    const Vector3d grad_t = gamma.correction.trace_gradient.values.row(k);
    const Vector3d n = g.normals.row(k);
    const Vector3d val = Vector3d(b_fil.row(k)) + grad_t +
                         gamma.correction.normal_derivative.values[k] * n;
    gamma.surface_values_.row(k) = val;
  }
  gamma.surface_cross_n_.resize(g.size(), 3);
  double max_norm = 0.0, max_nd = 0.0;
  for (int k = 0; k < g.size(); ++k) {
    const Vector3d v = gamma.surface_values_.row(k);
    const Vector3d n = g.normals.row(k);
    gamma.surface_cross_n_.row(k) = v.cross(n);
    max_norm = std::max(max_norm, v.norm());
    max_nd = std::max(max_nd, std::abs(v.dot(n)));
  }
  gamma.tangency_defect = max_nd / max_norm;

  // circulations along the grid-aligned reference circles
  const double two_pi = 2.0 * std::numbers::pi;
  double circ_t = 0.0;
  for (int j = 0; j < g.n_phi; ++j) {
    const int k = g.index(0, j);
    circ_t += Vector3d(gamma.surface_values_.row(k)).dot(g.e_phi.row(k));
  }
  gamma.toroidal_circulation = circ_t * two_pi / g.n_phi;
  double circ_p = 0.0;
  for (int i = 0; i < g.n_theta; ++i) {
    const int k = g.index(i, 0);
    circ_p += Vector3d(gamma.surface_values_.row(k)).dot(g.e_theta.row(k));
  }
  gamma.poloidal_circulation = circ_p * two_pi / g.n_theta;
  return gamma;
}

double toroidal_circulation(const FieldSampler& field,
                            const FourierTorus& torus, int n_samples) {
  return line_integral(field, axis_circle(torus, n_samples));
}

double volume_l2_norm(const FieldSampler& field, const VolumeGrid& vg) {
  double acc = 0.0;
  for (int p = 0; p < vg.nodes.rows(); ++p)
    acc += vg.weights[p] * field(vg.nodes.row(p)).squaredNorm();
  return std::sqrt(acc);
}

}  // namespace cws
