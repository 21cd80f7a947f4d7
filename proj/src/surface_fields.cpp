#include "cws/surface_fields.hpp"

#include <algorithm>
#include <cmath>

namespace cws {

TangentField surface_gradient(const ScalarDensity& f) {
  const SurfaceGrid& g = *f.grid;
  const VectorXd ft = g.dtheta(f.values);
  const VectorXd fp = g.dphi(f.values);
  TangentField out{f.grid, MatrixX3d(g.size(), 3)};
  for (int k = 0; k < g.size(); ++k) {
    const double a = g.gi_tt[k] * ft[k] + g.gi_tp[k] * fp[k];
    const double b = g.gi_tp[k] * ft[k] + g.gi_pp[k] * fp[k];
    out.values.row(k) = a * g.e_theta.row(k) + b * g.e_phi.row(k);
  }
  return out;
}

namespace {

// Contravariant components of a tangent field.
void contravariant(const TangentField& v, VectorXd& vt, VectorXd& vp) {
  const SurfaceGrid& g = *v.grid;
  vt.resize(g.size());
  vp.resize(g.size());
  for (int k = 0; k < g.size(); ++k) {
    const double ct = v.values.row(k).dot(g.e_theta.row(k));
    const double cp = v.values.row(k).dot(g.e_phi.row(k));
    vt[k] = g.gi_tt[k] * ct + g.gi_tp[k] * cp;
    vp[k] = g.gi_tp[k] * ct + g.gi_pp[k] * cp;
  }
}

}  // namespace

ScalarDensity surface_divergence(const TangentField& v) {
  const SurfaceGrid& g = *v.grid;
  VectorXd vt, vp;
  contravariant(v, vt, vp);
  const VectorXd a = g.dtheta((g.sqrtg.array() * vt.array()).matrix());
  const VectorXd b = g.dphi((g.sqrtg.array() * vp.array()).matrix());
  ScalarDensity out{v.grid, ((a + b).array() / g.sqrtg.array()).matrix()};
  return out;
}

TangentField cross_with_normal(const TangentField& v) {
  TangentField out{v.grid, MatrixX3d(v.grid->size(), 3)};
  for (int k = 0; k < v.grid->size(); ++k) {
    const Vector3d a = v.values.row(k);
    const Vector3d n = v.grid->normals.row(k);
    out.values.row(k) = a.cross(n);
  }
  return out;
}

namespace {

// Tensor solve of the flat periodic Laplacian, used as CG preconditioner.
struct FlatPoissonInverse {
  MatrixXd q_theta, q_phi;
  VectorXd lam_theta, lam_phi;
  double scale_theta = 1.0, scale_phi = 1.0, weight = 1.0;

  explicit FlatPoissonInverse(const SurfaceGrid& g) {
    const MatrixXd d2t = -(g.d_theta * g.d_theta);
    const MatrixXd d2p = -(g.d_phi * g.d_phi);
    Eigen::SelfAdjointEigenSolver<MatrixXd> et(0.5 * (d2t + d2t.transpose()));
    Eigen::SelfAdjointEigenSolver<MatrixXd> ep(0.5 * (d2p + d2p.transpose()));
    q_theta = et.eigenvectors();
    lam_theta = et.eigenvalues();
    q_phi = ep.eigenvectors();
    lam_phi = ep.eigenvalues();
    scale_theta = g.gi_tt.mean();
    scale_phi = g.gi_pp.mean();
    weight = g.weights.mean();
  }

  VectorXd apply(const SurfaceGrid& g, const VectorXd& r) const {
    Eigen::Map<const MatrixXd> rm(r.data(), g.n_theta, g.n_phi);
    MatrixXd s = q_theta.transpose() * rm * q_phi;
    const double floor = 1e-12 * (scale_theta + scale_phi);
    for (int j = 0; j < g.n_phi; ++j) {
      for (int i = 0; i < g.n_theta; ++i) {
        const double denom =
            weight * (scale_theta * lam_theta[i] + scale_phi * lam_phi[j]);
        s(i, j) = denom > floor * weight ? s(i, j) / denom : 0.0;
      }
    }
    MatrixXd z = q_theta * s * q_phi.transpose();
    return Eigen::Map<VectorXd>(z.data(), z.size());
  }
};

}  // namespace

ScalarDensity solve_surface_poisson(const ScalarDensity& rhs, double tol,
                                    int max_iter) {
  const SurfaceGrid& g = *rhs.grid;
  auto grid = rhs.grid;

  // Symmetric form: K u = -w .* div(grad u) is SPD on mean-zero vectors.
  auto apply_k = [&](const VectorXd& u) -> VectorXd {
    ScalarDensity ud{grid, u};
    ScalarDensity lap = surface_divergence(surface_gradient(ud));
    return (-(lap.values.array()) * g.weights.array()).matrix();
  };

  VectorXd b = (-(rhs.values.array()) * g.weights.array()).matrix();
  b.array() -= b.mean();  // kernel of K is the constants

  FlatPoissonInverse precond(g);
  VectorXd x = VectorXd::Zero(g.size());
  VectorXd r = b;
  VectorXd z = precond.apply(g, r);
  VectorXd p = z;
  double rz = r.dot(z);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return {grid, x};

  for (int it = 0; it < max_iter; ++it) {
    const VectorXd kp = apply_k(p);
    const double alpha = rz / p.dot(kp);
    x += alpha * p;
    r -= alpha * kp;
    if (r.norm() <= tol * bnorm) {
      const double xm = g.weights.dot(x) / g.area;
      x.array() -= xm;
      return {grid, x};
    }
    z = precond.apply(g, r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  throw SolveFailure("solve_surface_poisson: CG did not reach tolerance");
}

HarmonicSurfaceBasis harmonic_basis(std::shared_ptr<const SurfaceGrid> grid) {
  const SurfaceGrid& g = *grid;

  // Closed starting fields: the sharps of d(theta) and d(phi).
  auto coordinate_field = [&](bool theta_form) {
    TangentField v{grid, MatrixX3d(g.size(), 3)};
    for (int k = 0; k < g.size(); ++k) {
      const double a = theta_form ? g.gi_tt[k] : g.gi_tp[k];
      const double b = theta_form ? g.gi_tp[k] : g.gi_pp[k];
      v.values.row(k) = a * g.e_theta.row(k) + b * g.e_phi.row(k);
    }
    return v;
  };

  auto harmonic_part = [&](const TangentField& v) {
    ScalarDensity rhs = surface_divergence(v);
    // an already-divergence-free start field (axisymmetric surfaces) leaves
    // only roundoff in the rhs; solving for it would make CG chase noise
    const double floor = 1e-12 * (g.n_theta + g.n_phi) * v.l2_norm();
    if (rhs.l2_norm() <= floor) return v;
    ScalarDensity u = solve_surface_poisson(rhs);
    TangentField grad_u = surface_gradient(u);
    TangentField h{grid, v.values - grad_u.values};
    return h;
  };

  const TangentField h_theta = harmonic_part(coordinate_field(true));
  const TangentField h_phi = harmonic_part(coordinate_field(false));

  Eigen::Matrix2d periods;
  periods(0, 0) = line_integral_sigma_p(h_theta);
  periods(0, 1) = line_integral_sigma_p(h_phi);
  periods(1, 0) = line_integral_sigma_t(h_theta);
  periods(1, 1) = line_integral_sigma_t(h_phi);
  if (std::abs(periods.determinant()) < 1e-10)
    throw SingularPeriodMatrix("harmonic_basis: period matrix is singular");

  const Eigen::Vector2d cp = periods.inverse() * Eigen::Vector2d(1.0, 0.0);
  const Eigen::Vector2d ct = periods.inverse() * Eigen::Vector2d(0.0, 1.0);

  HarmonicSurfaceBasis basis{
      {grid, cp[0] * h_theta.values + cp[1] * h_phi.values},
      {grid, ct[0] * h_theta.values + ct[1] * h_phi.values},
      periods};
  return basis;
}

std::vector<FourierMode> enumerate_modes(int count) {
  std::vector<FourierMode> modes;
  for (int degree = 1; static_cast<int>(modes.size()) < count; ++degree) {
    // canonical (m, n) pairs with |m|+|n| == degree, m >= 0
    std::vector<std::pair<int, int>> pairs;
    pairs.emplace_back(degree, 0);
    pairs.emplace_back(0, degree);
    for (int m = degree - 1; m >= 1; --m) {
      pairs.emplace_back(m, degree - m);
      pairs.emplace_back(m, -(degree - m));
    }
    for (const auto& [m, n] : pairs) {
      modes.push_back({m, n, false});
      if (static_cast<int>(modes.size()) == count) break;
      modes.push_back({m, n, true});
      if (static_cast<int>(modes.size()) == count) break;
    }
  }
  return modes;
}

VectorXd eval_mode(const SurfaceGrid& grid, const FourierMode& mode) {
  VectorXd out(grid.size());
  for (int j = 0; j < grid.n_phi; ++j) {
    for (int i = 0; i < grid.n_theta; ++i) {
      const double arg = mode.m * grid.theta[i] + mode.n * grid.phi[j];
      out[grid.index(i, j)] = mode.is_sin ? std::sin(arg) : std::cos(arg);
    }
  }
  return out;
}

VectorXd eval_stream(const SurfaceGrid& grid, const CoeffTable& coeffs) {
  VectorXd f = VectorXd::Zero(grid.size());
  for (const auto& [m, n, v] : coeffs) {
    if (m == 0 && n == 0) {
      f.array() += v;
      continue;
    }
    FourierMode mode;
    const bool positive = m > 0 || (m == 0 && n > 0);
    mode.m = positive ? m : -m;
    mode.n = positive ? n : -n;
    mode.is_sin = !positive;
    f += v * eval_mode(grid, mode);
  }
  return f;
}

TangentField realize_current(const SurfaceCurrent& current,
                             std::shared_ptr<const SurfaceGrid> grid,
                             const HarmonicSurfaceBasis& basis) {
  ScalarDensity stream{grid, eval_stream(*grid, current.stream_coeffs)};
  TangentField j = cross_with_normal(surface_gradient(stream));
  if (current.alpha != 0.0)
    j.values += current.alpha * cross_with_normal(basis.gamma_t).values;
  if (current.beta != 0.0)
    j.values += current.beta * cross_with_normal(basis.gamma_p).values;
  return j;
}

double line_integral_sigma_p(const TangentField& v) {
  const SurfaceGrid& g = *v.grid;
  double acc = 0.0;
  for (int i = 0; i < g.n_theta; ++i) {
    const int k = g.index(i, 0);
    acc += v.values.row(k).dot(g.e_theta.row(k));
  }
  return acc * 2.0 * std::numbers::pi / g.n_theta;
}

double line_integral_sigma_t(const TangentField& v) {
  const SurfaceGrid& g = *v.grid;
  double acc = 0.0;
  for (int j = 0; j < g.n_phi; ++j) {
    const int k = g.index(0, j);
    acc += v.values.row(k).dot(g.e_phi.row(k));
  }
  return acc * 2.0 * std::numbers::pi / g.n_phi;
}

Windings avg_windings(const TangentField& j,
                      const HarmonicSurfaceBasis& basis) {
  const SurfaceGrid& g = *j.grid;
  Windings w;
  for (int k = 0; k < g.size(); ++k) {
    const double wk = g.weights[k];
    w.qbar += wk * j.values.row(k).dot(basis.gamma_t.values.row(k));
    w.pbar += wk * j.values.row(k).dot(basis.gamma_p.values.row(k));
  }
  w.qbar /= g.area;
  w.pbar /= g.area;
  return w;
}

}  // namespace cws
