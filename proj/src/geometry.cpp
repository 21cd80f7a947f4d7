#include "cws/geometry.hpp"

#include <cmath>
#include <functional>
#include <numbers>

namespace cws {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

FourierTorus::FourierTorus(int nfp, CoeffTable r_coeffs, CoeffTable z_coeffs)
    : nfp_(nfp), r_(std::move(r_coeffs)), z_(std::move(z_coeffs)) {
  for (const auto& [m, n, v] : r_) {
    if (m == 0 && n == 0) r00_ = v;
  }
}

void FourierTorus::eval_rz(double theta, double phi, double& r, double& z,
                           double& r_t, double& r_p, double& z_t,
                           double& z_p) const {
  r = z = r_t = r_p = z_t = z_p = 0.0;
  for (const auto& [m, n, v] : r_) {
    const double arg = m * theta - n * nfp_ * phi;
    const double c = std::cos(arg), s = std::sin(arg);
    r += v * c;
    r_t -= v * m * s;
    r_p += v * n * nfp_ * s;
  }
  for (const auto& [m, n, v] : z_) {
    const double arg = m * theta - n * nfp_ * phi;
    const double c = std::cos(arg), s = std::sin(arg);
    z += v * s;
    z_t += v * m * c;
    z_p -= v * n * nfp_ * c;
  }
}

Vector3d FourierTorus::point(double theta, double phi) const {
  double r, z, r_t, r_p, z_t, z_p;
  eval_rz(theta, phi, r, z, r_t, r_p, z_t, z_p);
  return {r * std::cos(phi), r * std::sin(phi), z};
}

SurfaceFrame FourierTorus::frame(double theta, double phi) const {
  double r, z, r_t, r_p, z_t, z_p;
  eval_rz(theta, phi, r, z, r_t, r_p, z_t, z_p);
  const double cp = std::cos(phi), sp = std::sin(phi);
  SurfaceFrame f;
  f.x = {r * cp, r * sp, z};
  f.e_theta = {r_t * cp, r_t * sp, z_t};
  f.e_phi = {r_p * cp - r * sp, r_p * sp + r * cp, z_p};
  Vector3d cr = f.e_phi.cross(f.e_theta);
  f.sqrtg = cr.norm();
  f.normal = (outward_flipped_ ? -1.0 : 1.0) * cr / f.sqrtg;
  return f;
}

Vector3d FourierTorus::axis_point(double phi) const {
  return {r00_ * std::cos(phi), r00_ * std::sin(phi), 0.0};
}

Vector3d FourierTorus::axis_tangent(double phi) const {
  return {-r00_ * std::sin(phi), r00_ * std::cos(phi), 0.0};
}

FourierTorus build_torus(int nfp, const CoeffTable& r_coeffs,
                         const CoeffTable& z_coeffs) {
  if (r_coeffs.empty()) throw Error("build_torus: empty radius table");
  if (nfp < 1) throw Error("build_torus: nfp must be positive");
  FourierTorus torus(nfp, r_coeffs, z_coeffs);
  if (torus.major_radius() <= 0.0)
    throw AxisIntersection("build_torus: (0,0) radius coefficient must be positive");

  const int np = 64;
  double min_r = 1e300, min_sqrtg = 1e300;
  double minor_sum = 0.0;
  Vector3d lo = Vector3d::Constant(1e300), hi = Vector3d::Constant(-1e300);
  double orient = 0.0;
  for (int j = 0; j < np; ++j) {
    const double phi = kTwoPi * j / np;
    const Vector3d axis = torus.axis_point(phi);
    for (int i = 0; i < np; ++i) {
      const double theta = kTwoPi * i / np;
      SurfaceFrame f = torus.frame(theta, phi);
      // signed cylindrical radius; |x| alone would hide R < 0
      const double r = f.x[0] * std::cos(phi) + f.x[1] * std::sin(phi);
      min_r = std::min(min_r, r);
      min_sqrtg = std::min(min_sqrtg, f.sqrtg);
      minor_sum += (f.x - axis).norm();
      lo = lo.cwiseMin(f.x);
      hi = hi.cwiseMax(f.x);
      // divergence-theorem sign: sum N.x sqrtg ~ 3 V > 0 for outward N
      orient += f.normal.dot(f.x) * f.sqrtg;
    }
  }
  if (min_r <= 0.0)
    throw AxisIntersection("build_torus: surface touches the z-axis, min R <= 0");
  if (min_sqrtg <= 1e-14 * torus.major_radius() * torus.major_radius())
    throw NonEmbedded("build_torus: metric determinant vanishes on probe grid");
  if (orient < 0.0) {
    torus.outward_flipped_ = true;
  }
  torus.minor_estimate_ = minor_sum / (np * np);
  torus.diameter_estimate_ = (hi - lo).norm();
  return torus;
}

VectorXd SurfaceGrid::dtheta(const VectorXd& u) const {
  Eigen::Map<const MatrixXd> um(u.data(), n_theta, n_phi);
  MatrixXd r = d_theta * um;
  return Eigen::Map<VectorXd>(r.data(), r.size());
}

VectorXd SurfaceGrid::dphi(const VectorXd& u) const {
  Eigen::Map<const MatrixXd> um(u.data(), n_theta, n_phi);
  MatrixXd r = um * d_phi.transpose();
  return Eigen::Map<VectorXd>(r.data(), r.size());
}

std::shared_ptr<const SurfaceGrid> make_surface_grid(
    std::shared_ptr<const FourierTorus> torus, int n_theta, int n_phi) {
  if (n_theta < 8 || n_phi < 8 || n_theta % 2 || n_phi % 2)
    throw Error("make_surface_grid: grid sizes must be even and >= 8");

  auto grid = std::make_shared<SurfaceGrid>();
  grid->torus = torus;
  grid->n_theta = n_theta;
  grid->n_phi = n_phi;
  grid->theta = VectorXd::LinSpaced(n_theta, 0.0, kTwoPi * (n_theta - 1) / n_theta);
  grid->phi = VectorXd::LinSpaced(n_phi, 0.0, kTwoPi * (n_phi - 1) / n_phi);

  const int M = n_theta * n_phi;
  grid->nodes.resize(M, 3);
  grid->normals.resize(M, 3);
  grid->e_theta.resize(M, 3);
  grid->e_phi.resize(M, 3);
  grid->g_tt.resize(M);
  grid->g_tp.resize(M);
  grid->g_pp.resize(M);
  grid->gi_tt.resize(M);
  grid->gi_tp.resize(M);
  grid->gi_pp.resize(M);
  grid->sqrtg.resize(M);
  grid->weights.resize(M);

  const double cell = (kTwoPi / n_theta) * (kTwoPi / n_phi);
  for (int j = 0; j < n_phi; ++j) {
    for (int i = 0; i < n_theta; ++i) {
      const int k = grid->index(i, j);
      SurfaceFrame f = torus->frame(grid->theta[i], grid->phi[j]);
      if (f.sqrtg <= 0.0)
        throw NonEmbedded("make_surface_grid: degenerate frame at node");
      grid->nodes.row(k) = f.x;
      grid->normals.row(k) = f.normal;
      grid->e_theta.row(k) = f.e_theta;
      grid->e_phi.row(k) = f.e_phi;
      const double gtt = f.e_theta.squaredNorm();
      const double gtp = f.e_theta.dot(f.e_phi);
      const double gpp = f.e_phi.squaredNorm();
      const double det = gtt * gpp - gtp * gtp;
      grid->g_tt[k] = gtt;
      grid->g_tp[k] = gtp;
      grid->g_pp[k] = gpp;
      grid->gi_tt[k] = gpp / det;
      grid->gi_tp[k] = -gtp / det;
      grid->gi_pp[k] = gtt / det;
      grid->sqrtg[k] = f.sqrtg;
      grid->weights[k] = f.sqrtg * cell;
    }
  }
  grid->area = grid->weights.sum();
  grid->d_theta = spectral_diff_matrix(n_theta);
  grid->d_phi = spectral_diff_matrix(n_phi);
  return grid;
}

VolumeGrid make_volume_grid(std::shared_ptr<const FourierTorus> torus, int n_s,
                            int n_theta, int n_phi, double minor_scale) {
  if (minor_scale <= 0.0 || minor_scale > 1.0)
    throw Error("make_volume_grid: minor_scale must lie in (0, 1]");
  if (n_s < 1 || n_theta < 4 || n_phi < 4)
    throw Error("make_volume_grid: grid too small");

  VolumeGrid vg;
  vg.torus = torus;
  vg.n_s = n_s;
  vg.n_theta = n_theta;
  vg.n_phi = n_phi;
  vg.minor_scale = minor_scale;

  VectorXd s_nodes, s_w;
  gauss_legendre(n_s, 0.0, 1.0, s_nodes, s_w);

  const int P = n_s * n_theta * n_phi;
  vg.nodes.resize(P, 3);
  vg.weights.resize(P);
  const double cell = (kTwoPi / n_theta) * (kTwoPi / n_phi);
  const double m = minor_scale;

  int p = 0;
  double det_sign = 0.0;
  for (int j = 0; j < n_phi; ++j) {
    const double phi = kTwoPi * j / n_phi;
    const Vector3d axis = torus->axis_point(phi);
    const Vector3d axis_t = torus->axis_tangent(phi);
    for (int i = 0; i < n_theta; ++i) {
      const double theta = kTwoPi * i / n_theta;
      SurfaceFrame f = torus->frame(theta, phi);
      const Vector3d d = f.x - axis;
      for (int l = 0; l < n_s; ++l, ++p) {
        const double s = s_nodes[l];
        vg.nodes.row(p) = axis + (s * m) * d;
        const Vector3d xs = m * d;
        const Vector3d xt = (s * m) * f.e_theta;
        const Vector3d xp = axis_t + (s * m) * (f.e_phi - axis_t);
        const double det = xs.dot(xt.cross(xp));
        if (det_sign == 0.0) det_sign = det > 0 ? 1.0 : -1.0;
        if (det * det_sign <= 0.0)
          throw DegenerateCell("make_volume_grid: non-positive Jacobian");
        vg.weights[p] = std::abs(det) * s_w[l] * cell;
      }
    }
  }
  vg.volume = vg.weights.sum();
  return vg;
}

namespace {

Curve sample_circle(const FourierTorus& torus,
                    const std::function<Vector3d(double)>& gamma,
                    const std::function<Vector3d(double)>& dgamma,
                    int n_samples) {
  Curve c;
  c.points.resize(n_samples + 1, 3);
  c.tangents.resize(n_samples + 1, 3);
  c.dt = kTwoPi / n_samples;
  for (int k = 0; k <= n_samples; ++k) {
    const double t = kTwoPi * (k % n_samples) / n_samples;
    c.points.row(k) = gamma(t);
    c.tangents.row(k) = dgamma(t);
  }
  (void)torus;
  return c;
}

}  // namespace

Curve theta_circle(const FourierTorus& torus, double phi0, int n_samples) {
  return sample_circle(
      torus, [&](double t) { return torus.point(t, phi0); },
      [&](double t) { return torus.frame(t, phi0).e_theta; }, n_samples);
}

Curve phi_circle(const FourierTorus& torus, double theta0, int n_samples) {
  return sample_circle(
      torus, [&](double t) { return torus.point(theta0, t); },
      [&](double t) { return torus.frame(theta0, t).e_phi; }, n_samples);
}

Curve axis_circle(const FourierTorus& torus, int n_samples) {
  return sample_circle(
      torus, [&](double t) { return torus.axis_point(t); },
      [&](double t) { return torus.axis_tangent(t); }, n_samples);
}

ReferenceCurves make_reference_curves(const FourierTorus& torus, int n_samples) {
  ReferenceCurves rc;
  rc.sigma_p = theta_circle(torus, 0.0, n_samples);
  rc.sigma_t = phi_circle(torus, 0.0, n_samples);
  return rc;
}

double line_integral(const std::function<Vector3d(const Vector3d&)>& field,
                     const Curve& curve) {
  const int n = curve.segments();
  if (n < 256) throw Error("line_integral: curve must carry >= 256 samples");
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    acc += field(curve.points.row(k)).dot(curve.tangents.row(k));
  }
  return acc * curve.dt;
}

MatrixXd spectral_diff_matrix(int n) {
  // Trefethen's periodic spectral differentiation matrix (even n).
  MatrixXd d = MatrixXd::Zero(n, n);
  const double h = kTwoPi / n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const int k = i - j;
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      d(i, j) = 0.5 * sign / std::tan(0.5 * k * h);
    }
  }
  return d;
}

void gauss_legendre(int n, double a, double b, VectorXd& nodes, VectorXd& w) {
  // Golub-Welsch on the Jacobi matrix.
  MatrixXd jac = MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double beta = i / std::sqrt(4.0 * i * i - 1.0);
    jac(i, i - 1) = beta;
    jac(i - 1, i) = beta;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(jac);
  nodes.resize(n);
  w.resize(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    nodes[i] = mid + half * es.eigenvalues()[i];
    const double v0 = es.eigenvectors()(0, i);
    w[i] = 2.0 * v0 * v0 * half;
  }
}

}  // namespace cws
