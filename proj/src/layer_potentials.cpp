#include "cws/layer_potentials.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace cws {

namespace {

constexpr double kFourPiInv = 1.0 / (4.0 * std::numbers::pi);

struct PolarRule {
  VectorXd alpha_nodes, alpha_weights;  // on [0, 1], scaled per segment
  VectorXd rho_nodes, rho_weights;
};

// Values of the (2m+1)-point Lagrange cardinals at stencil offset u (in
// units of the grid spacing, stencil nodes at -m..m).
void lagrange_cardinals(int m, double u, double* out) {
  const int n = 2 * m + 1;
  for (int t = 0; t < n; ++t) {
    double prod = 1.0;
    const int node = t - m;
    for (int s = -m; s <= m; ++s) {
      if (s == node) continue;
      prod *= (u - s) / double(node - s);
    }
    out[t] = prod;
  }
}

// Integrals of kernel * sqrtg * cardinal_j over the patch rectangle
// [theta_c +- half_t] x [phi_c +- half_p] in polar coordinates about the
// center. The integrand times the polar Jacobian is bounded and smooth in
// rho, so nested Gauss rules converge fast; the ladder stops once the total
// (the cardinals sum to one) settles to 1e-8 relative.
void patch_row_integrals(const FourierTorus& torus, const Vector3d& x_center,
                         double theta_c, double phi_c, int m, double h_theta,
                         double h_phi, const std::vector<PolarRule>& ladder,
                         double abs_floor, VectorXd& out) {
  const double half_t = (m + 0.5) * h_theta;
  const double half_p = (m + 0.5) * h_phi;
  const double a1 = std::atan2(half_p, half_t);
  struct Segment {
    double lo, hi;
    bool theta_edge;
  };
  const double pi = std::numbers::pi;
  const Segment segs[4] = {{-a1, a1, true},
                           {a1, pi - a1, false},
                           {pi - a1, pi + a1, true},
                           {pi + a1, 2 * pi - a1, false}};
  const int n1 = 2 * m + 1;
  VectorXd acc(n1 * n1), prev(n1 * n1);
  double prev_total = 0.0;
  std::vector<double> lt(n1), lp(n1);

  for (std::size_t level = 0; level < ladder.size(); ++level) {
    const PolarRule& rule = ladder[level];
    acc.setZero();
    for (const Segment& seg : segs) {
      const double span = seg.hi - seg.lo;
      for (int ia = 0; ia < rule.alpha_nodes.size(); ++ia) {
        const double alpha = seg.lo + span * rule.alpha_nodes[ia];
        const double wa = span * rule.alpha_weights[ia];
        const double ca = std::cos(alpha), sa = std::sin(alpha);
        const double rho_max =
            seg.theta_edge ? half_t / std::abs(ca) : half_p / std::abs(sa);
        for (int ir = 0; ir < rule.rho_nodes.size(); ++ir) {
          const double rho = rho_max * rule.rho_nodes[ir];
          const double dt = rho * ca, dp = rho * sa;
          SurfaceFrame f = torus.frame(theta_c + dt, phi_c + dp);
          const double r = (x_center - f.x).norm();
          const double kern = wa * rule.rho_weights[ir] * rho_max * rho *
                              f.sqrtg * kFourPiInv / r;
          lagrange_cardinals(m, dt / h_theta, lt.data());
          lagrange_cardinals(m, dp / h_phi, lp.data());
          for (int p = 0; p < n1; ++p)
            for (int t = 0; t < n1; ++t) acc[t + n1 * p] += kern * lt[t] * lp[p];
        }
      }
    }
    const double total = acc.sum();
    if (level > 0 && std::abs(total - prev_total) <=
                         1e-8 * std::max(std::abs(total), abs_floor)) {
      out = acc;
      return;
    }
    prev = acc;
    prev_total = total;
  }
  out = acc;
}

std::vector<PolarRule> make_polar_ladder() {
  std::vector<PolarRule> ladder;
  for (int n : {8, 12, 18, 27, 40}) {
    PolarRule r;
    gauss_legendre(n, 0.0, 1.0, r.alpha_nodes, r.alpha_weights);
    gauss_legendre(n + 4, 0.0, 1.0, r.rho_nodes, r.rho_weights);
    ladder.push_back(std::move(r));
  }
  return ladder;
}

// Euler-Maclaurin defect of the punctured trapezoid rule for the frozen
// quadratic-form kernel 1/l(a,b), l = sqrt(E a^2 + 2F ab + G b^2), summed
// over the unit lattice outside the (2m+1)^2 patch:
//   c_m = int_{R^2 \ rect_m} da db / l  -  sum_{j outside rect_m} 1/l(j).
// This is the O(h) term the plain punctured sum misses; it only depends on
// the local metric, so it folds into the diagonal.
double lattice_defect(double E, double F, double G, int m) {
  static const auto gauss = [] {
    std::pair<VectorXd, VectorXd> g;
    gauss_legendre(48, 0.0, 1.0, g.first, g.second);
    return g;
  }();

  // integral over the square of half-width s + 1/2 (exact radial part)
  auto rect_integral = [&](double s) {
    const double half = s + 0.5;
    const double pi = std::numbers::pi;
    const double lo[4] = {-pi / 4, pi / 4, 3 * pi / 4, 5 * pi / 4};
    double total = 0.0;
    for (int seg = 0; seg < 4; ++seg) {
      const double span = pi / 2;
      const bool cos_edge = (seg % 2 == 0);
      for (int q = 0; q < gauss.first.size(); ++q) {
        const double al = lo[seg] + span * gauss.first[q];
        const double c = std::cos(al), sn = std::sin(al);
        const double r = half / (cos_edge ? std::abs(c) : std::abs(sn));
        const double ell = std::sqrt(E * c * c + 2 * F * c * sn + G * sn * sn);
        total += span * gauss.second[q] * r / ell;
      }
    }
    return total;
  };

  auto defect_at = [&](int n) {
    double s = 0.0;
    for (int a = -n; a <= n; ++a)
      for (int b = -n; b <= n; ++b) {
        if (std::abs(a) <= m && std::abs(b) <= m) continue;
        s += 1.0 / std::sqrt(E * double(a) * a + 2.0 * F * a * b +
                             G * double(b) * b);
      }
    return (rect_integral(n) - rect_integral(m)) - s;
  };

  // missing far cells decay like 1/N
  const double c1 = defect_at(64), c2 = defect_at(128);
  return 2.0 * c2 - c1;
}

}  // namespace

struct LayerOperatorSet::Cache {
  std::once_flag dirichlet_flag, interior_flag, exterior_flag;
  Eigen::LDLT<MatrixXd> v_ldlt;
  bool v_ldlt_ok = false;
  double v_cond = 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> v_eig;
  bool v_eig_built = false;
  int v_rank = -1;
  Eigen::PartialPivLU<MatrixXd> interior_lu;
  Eigen::PartialPivLU<MatrixXd> exterior_lu;
};

LayerOperatorSet assemble_layer_operators(
    std::shared_ptr<const SurfaceGrid> grid, bool bug_flip_wdiag) {
  LayerOperatorSet ops;
  ops.grid = grid;
  const SurfaceGrid& g = *grid;
  const int M = g.size();
  const int nmin = std::min(g.n_theta, g.n_phi);
  ops.patch_halfwidth = std::max(1, std::min(3, (nmin - 4) / 4));

  ops.w_dl.resize(M, M);
  ops.v_sl.resize(M, M);
  const int m = ops.patch_halfwidth;
  const int n1 = 2 * m + 1;
  ops.dual_band.resize(M, n1 * n1);
  ops.dual_band_cols.resize(M, n1 * n1);

  const auto ladder = make_polar_ladder();
  const double h_theta = 2.0 * std::numbers::pi / g.n_theta;
  const double h_phi = 2.0 * std::numbers::pi / g.n_phi;
  const double jump = bug_flip_wdiag ? 0.5 : -0.5;

  // lattice defects depend on the local metric only through the shape of
  // the frozen form, so dedupe before the expensive lattice sums
  VectorXd node_defect(M);
  {
    std::vector<std::pair<long long, long long>> keys(M);
    std::map<std::pair<long long, long long>, double> unique;
    for (int i = 0; i < M; ++i) {
      const double e = g.g_tt[i] * h_theta * h_theta;
      const double f = g.g_tp[i] * h_theta * h_phi;
      const double gg = g.g_pp[i] * h_phi * h_phi;
      keys[i] = {llround(1e10 * f / e), llround(1e10 * gg / e)};
      unique.emplace(keys[i], 0.0);
    }
    std::vector<std::pair<long long, long long>> uk;
    for (auto& [k, v] : unique) uk.push_back(k);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t u = 0; u < uk.size(); ++u) {
      const double f = uk[u].first * 1e-10, gg = uk[u].second * 1e-10;
      const double c = lattice_defect(1.0, f, gg, m);
#pragma omp critical
      unique[uk[u]] = c;
    }
    for (int i = 0; i < M; ++i) {
      const double e = g.g_tt[i] * h_theta * h_theta;
      node_defect[i] =
          g.weights[i] * kFourPiInv * unique[keys[i]] / std::sqrt(e);
    }
  }

  bool bad = false;
#pragma omp parallel for schedule(dynamic, 8)
  for (int i = 0; i < M; ++i) {
    const Vector3d xi = g.nodes.row(i);
    const int it = i % g.n_theta;
    const int jp = i / g.n_theta;
    double w_offsum = 0.0;
    double v_patchsum = 0.0;
    for (int j = 0; j < M; ++j) {
      if (j == i) continue;
      const Vector3d d = xi - Vector3d(g.nodes.row(j));
      const double r2 = d.squaredNorm();
      const double r = std::sqrt(r2);
      if (!(r > 0.0) || !std::isfinite(r)) {
        bad = true;
        continue;
      }
      const double inv_r3 = 1.0 / (r2 * r);
      const double kw = kFourPiInv * g.normals.row(j).dot(d) * inv_r3;
      const double kv = kFourPiInv / r;
      ops.w_dl(i, j) = kw * g.weights[j];
      ops.v_sl(i, j) = kv * g.weights[j];
      w_offsum += kw * g.weights[j];
    }
    ops.w_dl(i, i) = jump - w_offsum;
    ops.v_sl(i, i) = 0.0;

    // replace the patch rows of the single layer by polar integrals of the
    // kernel against the stencil cardinals; keep the plain values plus the
    // subtraction diagonal in the duality band
    VectorXd patch_vals;
    patch_row_integrals(*g.torus, xi, g.theta[it], g.phi[jp], m, h_theta,
                        h_phi, ladder, kFourPiInv * g.weights[i], patch_vals);
    int idx = 0;
    for (int dp = -m; dp <= m; ++dp) {
      const int jj = ((jp + dp) % g.n_phi + g.n_phi) % g.n_phi;
      for (int dt = -m; dt <= m; ++dt, ++idx) {
        const int ii = ((it + dt) % g.n_theta + g.n_theta) % g.n_theta;
        const int col = g.index(ii, jj);
        const double plain = (col == i) ? 0.0 : ops.v_sl(i, col);
        if (col != i) v_patchsum += plain;
        ops.dual_band(i, idx) = plain - patch_vals[idx];
        ops.dual_band_cols(i, idx) = col;
        ops.v_sl(i, col) = patch_vals[idx];
      }
    }
    // duality band diagonal slot: subtraction-corrected diagonal; the
    // lattice defect of the off-patch punctured sum also lands on the
    // diagonal (it multiplies phi_i at leading order)
    ops.v_sl(i, i) += node_defect[i];
    const int center = (m + n1 * m);
    ops.dual_band(i, center) =
        (patch_vals.sum() - v_patchsum) - patch_vals[center];
  }
  if (bad)
    throw AssemblyFailure(
        "assemble_layer_operators: coincident nodes or non-finite kernel");

  // Transpose duality holds exactly: w_tr = -diag(w)^-1 w_dl^T diag(w).
  ops.w_tr.resize(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j)
      ops.w_tr(i, j) = -ops.w_dl(j, i) * g.weights[j] / g.weights[i];

  ops.cache_ = std::make_shared<LayerOperatorSet::Cache>();
  return ops;
}

double LayerOperatorSet::dual_norm_componentwise(const MatrixX3d& v) const {
  double acc = 0.0;
  for (int c = 0; c < 3; ++c) {
    acc += dual_ip(v.col(c), v.col(c));
  }
  return std::sqrt(std::max(0.0, acc));
}

LayerOperatorSet::DirichletSolve LayerOperatorSet::solve_first_kind(
    const VectorXd& kappa) const {
  const SurfaceGrid& g = *grid;
  std::call_once(cache_->dirichlet_flag, [&] {
    const MatrixXd sym = g.weights.asDiagonal() * v_sl;
    cache_->v_ldlt.compute(0.5 * (sym + sym.transpose()));
    cache_->v_ldlt_ok = cache_->v_ldlt.info() == Eigen::Success &&
                        (cache_->v_ldlt.vectorD().array() > 0.0).all();
    if (cache_->v_ldlt_ok) {
      // power / inverse-power condition estimate
      std::mt19937_64 rng(7u);
      std::normal_distribution<double> dist;
      VectorXd x(g.size());
      for (int k = 0; k < g.size(); ++k) x[k] = dist(rng);
      double lam_max = 0.0, lam_min = 0.0;
      VectorXd y = x;
      for (int it = 0; it < 25; ++it) {
        y = 0.5 * (sym * y + sym.transpose() * y);
        lam_max = y.norm();
        y /= lam_max;
      }
      y = x;
      y /= y.norm();
      for (int it = 0; it < 25; ++it) {
        y = cache_->v_ldlt.solve(y);
        lam_min = 1.0 / y.norm();
        y *= lam_min;
      }
      cache_->v_cond = lam_max / lam_min;
    }
    if (!cache_->v_ldlt_ok || cache_->v_cond > 1e12) {
      const MatrixXd sym2 = g.weights.asDiagonal() * v_sl;
      cache_->v_eig.compute(0.5 * (sym2 + sym2.transpose()));
      cache_->v_eig_built = true;
      const VectorXd& ev = cache_->v_eig.eigenvalues();
      const double cut = 1e-12 * ev.cwiseAbs().maxCoeff();
      cache_->v_rank = static_cast<int>((ev.array().abs() > cut).count());
      cache_->v_cond = ev.cwiseAbs().maxCoeff() /
                       std::max(ev.cwiseAbs().minCoeff(), cut);
    }
  });

  DirichletSolve out;
  const VectorXd rhs = (g.weights.array() * kappa.array()).matrix();
  out.condition_estimate = cache_->v_cond;
  if (cache_->v_eig_built) {
    const VectorXd& ev = cache_->v_eig.eigenvalues();
    const MatrixXd& q = cache_->v_eig.eigenvectors();
    const double cut = 1e-12 * ev.cwiseAbs().maxCoeff();
    VectorXd coeff = q.transpose() * rhs;
    for (int k = 0; k < ev.size(); ++k)
      coeff[k] = std::abs(ev[k]) > cut ? coeff[k] / ev[k] : 0.0;
    out.density = q * coeff;
    out.truncated_rank = cache_->v_rank;
  } else {
    out.density = cache_->v_ldlt.solve(rhs);
    // refinement against the full (mildly nonsymmetric) operator
    for (int it = 0; it < 3; ++it) {
      const VectorXd r =
          rhs - (g.weights.array() * (v_sl * out.density).array()).matrix();
      out.density += cache_->v_ldlt.solve(r);
    }
  }
  return out;
}

VectorXd LayerOperatorSet::solve_interior_neumann_density(
    const VectorXd& b) const {
  const SurfaceGrid& g = *grid;
  std::call_once(cache_->interior_flag, [&] {
    MatrixXd a = -w_tr;
    a.diagonal().array() += 0.5;
    // rank-one deflation against the equilibrium null density
    const VectorXd wrow = g.weights / g.area;
    a += VectorXd::Ones(g.size()) * wrow.transpose();
    cache_->interior_lu.compute(a);
  });
  VectorXd x = cache_->interior_lu.solve(b);
  if (!x.allFinite())
    throw SolveFailure("interior Neumann solve produced non-finite density");
  return x;
}

VectorXd LayerOperatorSet::solve_exterior_operator(const VectorXd& rhs) const {
  std::call_once(cache_->exterior_flag, [&] {
    MatrixXd a = w_tr;
    a.diagonal().array() += 0.5;
    cache_->exterior_lu.compute(a);
  });
  VectorXd x = cache_->exterior_lu.solve(rhs);
  if (!x.allFinite())
    throw SolveFailure("exterior operator solve produced non-finite density");
  return x;
}

double solid_angle_defect(const SurfaceGrid& g) {
  const int M = g.size();
  double worst = 0.0;
#pragma omp parallel for schedule(static) reduction(max : worst)
  for (int i = 0; i < M; ++i) {
    const Vector3d xi = g.nodes.row(i);
    double acc = 0.0;
    for (int j = 0; j < M; ++j) {
      if (j == i) continue;
      const Vector3d d = xi - Vector3d(g.nodes.row(j));
      const double r = d.norm();
      acc += kFourPiInv * g.normals.row(j).dot(d) / (r * r * r) * g.weights[j];
    }
    worst = std::max(worst, std::abs(acc + 0.5));
  }
  return worst;
}

VectorXd interior_double_layer(const ScalarDensity& f, const MatrixX3d& points,
                               int* near_warnings) {
  const SurfaceGrid& g = *f.grid;
  const double spacing = std::sqrt(g.area / g.size());
  const int P = static_cast<int>(points.rows());
  VectorXd out(P);
  int warn = 0;
#pragma omp parallel for schedule(static) reduction(+ : warn)
  for (int p = 0; p < P; ++p) {
    const Vector3d x = points.row(p);
    double acc = 0.0;
    double min_r = 1e300;
    for (int j = 0; j < g.size(); ++j) {
      const Vector3d d = x - Vector3d(g.nodes.row(j));
      const double r = d.norm();
      min_r = std::min(min_r, r);
      acc += f.values[j] * g.normals.row(j).dot(d) / (r * r * r) *
             g.weights[j];
    }
    out[p] = kFourPiInv * acc;
    if (min_r < 0.5 * spacing) ++warn;
  }
  if (near_warnings) *near_warnings += warn;
  return out;
}

VectorXd single_layer_potential(const SurfaceGrid& g, const VectorXd& psi,
                                const MatrixX3d& points) {
  const int P = static_cast<int>(points.rows());
  VectorXd out(P);
#pragma omp parallel for schedule(static)
  for (int p = 0; p < P; ++p) {
    const Vector3d x = points.row(p);
    double acc = 0.0;
    for (int j = 0; j < g.size(); ++j) {
      const double r = (x - Vector3d(g.nodes.row(j))).norm();
      acc += psi[j] * g.weights[j] / r;
    }
    out[p] = kFourPiInv * acc;
  }
  return out;
}

MatrixX3d single_layer_gradient(const SurfaceGrid& g, const VectorXd& psi,
                                const MatrixX3d& points) {
  const int P = static_cast<int>(points.rows());
  MatrixX3d out(P, 3);
#pragma omp parallel for schedule(static)
  for (int p = 0; p < P; ++p) {
    const Vector3d x = points.row(p);
    Vector3d acc = Vector3d::Zero();
    for (int j = 0; j < g.size(); ++j) {
      const Vector3d d = Vector3d(g.nodes.row(j)) - x;
      const double r = d.norm();
      acc += (psi[j] * g.weights[j] / (r * r * r)) * d;
    }
    out.row(p) = kFourPiInv * acc;
  }
  return out;
}

double duality_inner_product(const LayerOperatorSet& ops,
                             const ScalarDensity& psi,
                             const ScalarDensity& phi) {
  return ops.dual_ip(psi.values, phi.values);
}

ScalarDensity neumann_series(const LayerOperatorSet& ops,
                             const ScalarDensity& b0, int n, int k_start) {
  const SurfaceGrid& g = *ops.grid;
  const double rms = b0.l2_norm() / std::sqrt(g.area);
  const double m = b0.mean();
  if (std::abs(m) > 1e-8 * std::max(rms, 1e-300))
    throw NotMeanZero("neumann_series: input density is not mean-zero");

  VectorXd term = b0.values.array() - m;
  for (int k = 0; k < k_start; ++k) term = ops.apply_series_op(term);
  VectorXd acc = VectorXd::Zero(g.size());
  for (int k = k_start; k <= n; ++k) {
    acc += term;
    if (k < n) term = ops.apply_series_op(term);
  }
  return {ops.grid, acc};
}

double contraction_estimate(const LayerOperatorSet& ops, int iters,
                            unsigned long seed) {
  const SurfaceGrid& g = *ops.grid;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  VectorXd psi(g.size());
  for (int k = 0; k < g.size(); ++k) psi[k] = dist(rng);
  auto project = [&](VectorXd& v) {
    v.array() -= g.weights.dot(v) / g.area;
  };
  project(psi);
  psi /= ops.dual_norm(psi);

  double ratio = 0.0, prev = -1.0;
  for (int it = 0; it < iters; ++it) {
    VectorXd next = ops.apply_series_op(psi);
    project(next);
    const double nn = ops.dual_norm(next);
    ratio = nn;  // psi has unit dual norm
    psi = next / nn;
    if (it > 2 && std::abs(ratio - prev) <= 1e-6 * std::max(ratio, 1e-30))
      return ratio;
    prev = ratio;
  }
  if (std::abs(ratio - prev) > 1e-4)
    throw NoConvergence("contraction_estimate: ratios still oscillating");
  return ratio;
}

}  // namespace cws
