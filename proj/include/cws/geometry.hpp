#pragma once

#include <Eigen/Dense>
#include <memory>
#include <tuple>
#include <vector>

#include "cws/errors.hpp"

namespace cws {

using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;
using MatrixX3d = Eigen::Matrix<double, Eigen::Dynamic, 3>;

// One Fourier coefficient of the embedding: (m, n, value).
using CoeffTable = std::vector<std::tuple<int, int, double>>;

// Local frame of the embedding at a parameter point.
struct SurfaceFrame {
  Vector3d x;
  Vector3d e_theta;  // d x / d theta
  Vector3d e_phi;    // d x / d phi
  Vector3d normal;   // outward unit normal
  double sqrtg;      // |e_theta x e_phi|
};

// Toroidal surface from Fourier coefficients:
//   R(theta,phi) = sum R_mn cos(m theta - n nfp phi)
//   Z(theta,phi) = sum Z_mn sin(m theta - n nfp phi)
//   x = (R cos phi, R sin phi, Z)
// With this convention and positive Z_{10} the outward normal is
// (e_phi x e_theta)/|.|; the stored frames carry the outward choice.
class FourierTorus {
 public:
  FourierTorus(int nfp, CoeffTable r_coeffs, CoeffTable z_coeffs);

  Vector3d point(double theta, double phi) const;
  SurfaceFrame frame(double theta, double phi) const;

  // Circle traced by the (0,0) radius coefficient; the scaling center for
  // nested plasma surfaces and volume grids.
  Vector3d axis_point(double phi) const;
  Vector3d axis_tangent(double phi) const;

  int nfp() const { return nfp_; }
  const CoeffTable& r_coeffs() const { return r_; }
  const CoeffTable& z_coeffs() const { return z_; }
  double major_radius() const { return r00_; }
  double minor_radius_estimate() const { return minor_estimate_; }
  double diameter_estimate() const { return diameter_estimate_; }
  bool outward_flipped() const { return outward_flipped_; }

 private:
  friend FourierTorus build_torus(int, const CoeffTable&, const CoeffTable&);

  void eval_rz(double theta, double phi, double& r, double& z, double& r_t,
               double& r_p, double& z_t, double& z_p) const;

  int nfp_ = 1;
  CoeffTable r_, z_;
  double r00_ = 0.0;
  double minor_estimate_ = 0.0;
  double diameter_estimate_ = 0.0;
  // true when e_phi x e_theta points inward and normals are negated.
  bool outward_flipped_ = false;
};

// Validates the embedding on a 64x64 probe grid.
// Throws NonEmbedded if sqrtg <= 0 anywhere, AxisIntersection if R <= 0.
FourierTorus build_torus(int nfp, const CoeffTable& r_coeffs,
                         const CoeffTable& z_coeffs);

// Uniform periodic quadrature grid on the surface. Node (i,j) sits at
// theta_i = 2 pi i / n_theta, phi_j = 2 pi j / n_phi; the flat index is
// k = i + n_theta * j (column-major over the n_theta x n_phi array).
struct SurfaceGrid {
  std::shared_ptr<const FourierTorus> torus;
  int n_theta = 0;
  int n_phi = 0;
  VectorXd theta;  // n_theta
  VectorXd phi;    // n_phi

  MatrixX3d nodes;    // M x 3
  MatrixX3d normals;  // outward unit normals
  MatrixX3d e_theta;
  MatrixX3d e_phi;
  VectorXd g_tt, g_tp, g_pp;     // metric
  VectorXd gi_tt, gi_tp, gi_pp;  // inverse metric
  VectorXd sqrtg;
  VectorXd weights;  // sqrtg * (2pi/n_theta) * (2pi/n_phi)
  double area = 0.0;

  // Periodic spectral differentiation matrices.
  MatrixXd d_theta;  // n_theta x n_theta
  MatrixXd d_phi;    // n_phi x n_phi

  int size() const { return n_theta * n_phi; }
  int index(int i, int j) const { return i + n_theta * j; }

  // Views a flat nodal vector as the n_theta x n_phi array.
  Eigen::Map<const MatrixXd> as_array(const VectorXd& u) const {
    return {u.data(), n_theta, n_phi};
  }

  // Spectral partial derivatives of a nodal scalar.
  VectorXd dtheta(const VectorXd& u) const;
  VectorXd dphi(const VectorXd& u) const;
};

// n_theta, n_phi must be even and >= 8.
std::shared_ptr<const SurfaceGrid> make_surface_grid(
    std::shared_ptr<const FourierTorus> torus, int n_theta, int n_phi);

// Quadrature for the solid region bounded by the torus, radially scaled by
// minor_scale about the axis circle. Gauss-Legendre in s, trapezoid in the
// angles. Throws DegenerateCell on a non-positive Jacobian.
struct VolumeGrid {
  std::shared_ptr<const FourierTorus> torus;
  int n_s = 0, n_theta = 0, n_phi = 0;
  double minor_scale = 1.0;
  MatrixX3d nodes;   // P x 3
  VectorXd weights;  // positive, sums to the enclosed volume
  double volume = 0.0;
};

VolumeGrid make_volume_grid(std::shared_ptr<const FourierTorus> torus, int n_s,
                            int n_theta, int n_phi, double minor_scale);

// Sampled closed curve; points.row(n) == points.row(0) and tangents carry
// dx/dt for the uniform parameter t in [0, 2pi].
struct Curve {
  MatrixX3d points;    // (n+1) x 3, closed
  MatrixX3d tangents;  // (n+1) x 3
  double dt = 0.0;
  int segments() const { return static_cast<int>(points.rows()) - 1; }
};

struct ReferenceCurves {
  Curve sigma_p;  // theta circle at phi = 0, traversed in +theta
  Curve sigma_t;  // phi circle at theta = 0, traversed in +phi
};

ReferenceCurves make_reference_curves(const FourierTorus& torus,
                                      int n_samples = 512);

// Coordinate circles at arbitrary offsets (used for probe loops).
Curve theta_circle(const FourierTorus& torus, double phi0, int n_samples);
Curve phi_circle(const FourierTorus& torus, double theta0, int n_samples);
Curve axis_circle(const FourierTorus& torus, int n_samples);

// Trapezoid line integral of a 3d field sampler along a curve.
double line_integral(const std::function<Vector3d(const Vector3d&)>& field,
                     const Curve& curve);

// Periodic spectral differentiation matrix (even n).
MatrixXd spectral_diff_matrix(int n);

// Gauss-Legendre rule on [a, b].
void gauss_legendre(int n, double a, double b, VectorXd& nodes, VectorXd& w);

}  // namespace cws
