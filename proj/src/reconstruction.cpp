#include "cws/reconstruction.hpp"

#include <cmath>

namespace cws {

namespace {

// Weighted least squares by normal equations with relative spectral cutoff
// 1e-12; returns coefficients for every nested prefix of the basis.
struct NestedLsq {
  MatrixXd gram;
  VectorXd proj;
  double rhs_norm2 = 0.0;
  int effective_rank = 0;

  VectorXd solve_prefix(int k, double* residual) const {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram.topLeftCorner(k, k));
    const double cut = 1e-12 * es.eigenvalues().cwiseAbs().maxCoeff();
    VectorXd c = es.eigenvectors().transpose() * proj.head(k);
    for (int i = 0; i < k; ++i)
      c[i] = es.eigenvalues()[i] > cut ? c[i] / es.eigenvalues()[i] : 0.0;
    VectorXd coeff = es.eigenvectors() * c;
    if (residual) {
      const double r2 = rhs_norm2 - 2.0 * coeff.dot(proj.head(k)) +
                        coeff.dot(gram.topLeftCorner(k, k) * coeff);
      *residual = std::sqrt(std::max(0.0, r2));
    }
    return coeff;
  }
};

VectorXd weighted_flatten(const MatrixX3d& values, const VectorXd& sqrt_w) {
  VectorXd out(3 * values.rows());
  for (int p = 0; p < values.rows(); ++p)
    out.segment<3>(3 * p) = sqrt_w[p] * values.row(p).transpose();
  return out;
}

}  // namespace

MatrixX3d Step1Result::eval(const MatrixX3d& points) const {
  MatrixX3d out = alpha0 * gamma->eval(points);
  for (int i = 0; i < alphas.size(); ++i) {
    if (alphas[i] == 0.0) continue;
    out += alphas[i] * dirichlet[i].gradient(points);
  }
  return out;
}

ScalarDensity Step1Result::surface_normal_trace() const {
  auto grid = gamma->correction.grid;
  VectorXd bn = VectorXd::Zero(grid->size());
  for (int i = 0; i < alphas.size(); ++i)
    bn += alphas[i] * dirichlet[i].normal_derivative.values;
  return {grid, bn};
}

Step1Result step1_fit(const LayerOperatorSet& ops,
                      std::shared_ptr<const HarmonicNeumannField> gamma,
                      const FieldSamples& target, int n_modes,
                      const FieldSampler* target_sampler) {
  if (n_modes < 1) throw Error("step1_fit: basis size must be >= 1");
  const SurfaceGrid& g = *ops.grid;
  const int P = static_cast<int>(target.points.rows());

  Step1Result res;
  res.gamma = gamma;
  res.basis_keys = enumerate_modes(n_modes);

  VectorXd sqrt_w = VectorXd::Ones(P);
  if (target.weights.size()) sqrt_w = target.weights.cwiseSqrt();
  const VectorXd rhs = weighted_flatten(target.values, sqrt_w);

  MatrixXd design(3 * P, n_modes + 1);
  design.col(0) = weighted_flatten(gamma->eval(target.points), sqrt_w);
  res.dirichlet.reserve(n_modes);
  for (int i = 0; i < n_modes; ++i) {
    ScalarDensity kappa{ops.grid, eval_mode(g, res.basis_keys[i])};
    res.dirichlet.push_back(solve_dirichlet_interior(ops, kappa));
    design.col(i + 1) =
        weighted_flatten(res.dirichlet.back().gradient(target.points), sqrt_w);
  }

  NestedLsq lsq;
  lsq.gram = design.transpose() * design;
  lsq.proj = design.transpose() * rhs;
  lsq.rhs_norm2 = rhs.squaredNorm();

  res.residual_history.resize(n_modes + 1);
  VectorXd coeff;
  for (int k = 1; k <= n_modes + 1; ++k) {
    double r = 0.0;
    coeff = lsq.solve_prefix(k, &r);
    res.residual_history[k - 1] = r;
  }
  {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(lsq.gram);
    const double cut = 1e-12 * es.eigenvalues().cwiseAbs().maxCoeff();
    res.effective_rank =
        static_cast<int>((es.eigenvalues().array() > cut).count());
  }
  res.alpha0 = coeff[0];
  res.alphas = coeff.tail(n_modes);
  res.target_norm = std::sqrt(lsq.rhs_norm2);
  if (target_sampler)
    res.ip_circulation = toroidal_circulation(*target_sampler, *g.torus);
  return res;
}

namespace {

PreimageResult assemble_preimage(const LayerOperatorSet& ops,
                                 const Step1Result& step1,
                                 const ScalarDensity& neumann_data,
                                 int iterations, VectorXd term_norms,
                                 const FieldSamples* plasma) {
  const SurfaceGrid& g = *ops.grid;
  HarmonicSolution f = solve_neumann_interior(ops, neumann_data);

  TangentField current{ops.grid, MatrixX3d(g.size(), 3)};
  const MatrixX3d& gxn = step1.gamma->surface_cross_normal();
  for (int k = 0; k < g.size(); ++k) {
    const Vector3d grad_t = f.trace_gradient.values.row(k);
    const Vector3d n = g.normals.row(k);
    current.values.row(k) =
        step1.alpha0 * Vector3d(gxn.row(k)) + grad_t.cross(n);
  }

  PreimageResult out{std::move(current), iterations, std::move(term_norms), 0.0};
  if (plasma) {
    const MatrixX3d bs = bs_surface_current(out.current, plasma->points);
    const MatrixX3d b = step1.eval(plasma->points);
    double num = 0.0, den = 0.0;
    for (int p = 0; p < plasma->points.rows(); ++p) {
      const double w = plasma->weights.size() ? plasma->weights[p] : 1.0;
      num += w * (bs.row(p) - b.row(p)).squaredNorm();
      den += w * b.row(p).squaredNorm();
    }
    out.achieved_residual = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
  }
  return out;
}

}  // namespace

PreimageResult step2_preimage(const LayerOperatorSet& ops,
                              const Step1Result& step1, int n,
                              const FieldSamples* plasma) {
  if (n < 0) throw Error("step2_preimage: iteration count must be >= 0");
  ScalarDensity bn_data = step1.surface_normal_trace();
  bn_data.values.array() -= bn_data.mean();

  VectorXd norms(n + 1);
  VectorXd term = bn_data.values;
  VectorXd acc = VectorXd::Zero(term.size());
  for (int k = 0; k <= n; ++k) {
    norms[k] = ops.dual_norm(term);
    acc += term;
    if (k < n) term = ops.apply_series_op(term);
  }
  return assemble_preimage(ops, step1, ScalarDensity{ops.grid, acc}, n,
                           std::move(norms), plasma);
}

PreimageResult exact_preimage(const LayerOperatorSet& ops,
                              const Step1Result& step1,
                              const FieldSamples* plasma) {
  ScalarDensity bn_data = step1.surface_normal_trace();
  bn_data.values.array() -= bn_data.mean();
  const VectorXd x = ops.solve_exterior_operator(bn_data.values);
  return assemble_preimage(ops, step1, ScalarDensity{ops.grid, x}, -1,
                           VectorXd(), plasma);
}

KernelRoute parse_kernel_route(const std::string& name) {
  if (name == "series") return KernelRoute::series;
  if (name == "exact") return KernelRoute::exact;
  if (name == "exterior") return KernelRoute::exterior;
  throw ConfigError("unknown kernel route: " + name, "kernel.route");
}

KernelElement kernel_element(const LayerOperatorSet& ops,
                             const HarmonicNeumannField& gamma,
                             KernelRoute route, int n,
                             double gamma_volume_norm,
                             const FieldSamples* plasma) {
  const SurfaceGrid& g = *ops.grid;
  const MatrixX3d trace = harmonic_volume_field_trace(ops, gamma.surface_cross_normal());

  VectorXd data(g.size());
  for (int k = 0; k < g.size(); ++k)
    data[k] = g.normals.row(k).dot(trace.row(k));
  ScalarDensity nd{ops.grid, data};
  nd.values.array() -= nd.mean();  // flux balance up to quadrature

  TangentField grad_part{ops.grid, MatrixX3d::Zero(g.size(), 3)};
  if (route == KernelRoute::series) {
    ScalarDensity b = neumann_series(ops, nd, n, 1);
    if (b.values.cwiseAbs().maxCoeff() > 0.0) {
      HarmonicSolution f = solve_neumann_interior(ops, b);
      grad_part = f.trace_gradient;
    }
  } else if (route == KernelRoute::exact) {
    const VectorXd rhs = ops.apply_series_op(nd.values);
    const VectorXd x = ops.solve_exterior_operator(rhs);
    HarmonicSolution f = solve_neumann_interior(ops, {ops.grid, x});
    grad_part = f.trace_gradient;
  } else {
    HarmonicSolution gext = solve_neumann_exterior(ops, {ops.grid, -nd.values});
    grad_part = gext.trace_gradient;
  }

  KernelElement out;
  out.route = route;
  out.iterations = n;
  out.current = TangentField{ops.grid, MatrixX3d(g.size(), 3)};
  for (int k = 0; k < g.size(); ++k) {
    const Vector3d n3 = g.normals.row(k);
    out.current.values.row(k) =
        Vector3d(trace.row(k)).cross(n3) +
        Vector3d(grad_part.values.row(k)).cross(n3);
  }
  if (plasma && gamma_volume_norm > 0) {
    const MatrixX3d bs = bs_surface_current(out.current, plasma->points);
    double num = 0.0;
    for (int p = 0; p < plasma->points.rows(); ++p) {
      const double w = plasma->weights.size() ? plasma->weights[p] : 1.0;
      num += w * bs.row(p).squaredNorm();
    }
    out.leakage = std::sqrt(num) / gamma_volume_norm;
  }
  return out;
}

TikhonovFitter::TikhonovFitter(const LayerOperatorSet& ops,
                               const HarmonicSurfaceBasis& basis,
                               const FieldSamples& target, int n_modes)
    : grid_(ops.grid), modes_(enumerate_modes(n_modes)) {
  const SurfaceGrid& g = *grid_;
  const int P = static_cast<int>(target.points.rows());
  const int cols = n_modes + 2;

  VectorXd sqrt_w = VectorXd::Ones(P);
  if (target.weights.size()) sqrt_w = target.weights.cwiseSqrt();
  rhs_ = weighted_flatten(target.values, sqrt_w);
  target_norm_ = rhs_.norm();

  std::vector<TangentField> currents;
  currents.reserve(cols);
  for (const FourierMode& mode : modes_) {
    ScalarDensity f{grid_, eval_mode(g, mode)};
    currents.push_back(cross_with_normal(surface_gradient(f)));
  }
  currents.push_back(cross_with_normal(basis.gamma_t));
  currents.push_back(cross_with_normal(basis.gamma_p));

  design_.resize(3 * P, cols);
  for (int c = 0; c < cols; ++c) {
    const MatrixX3d bs = bs_surface_current(currents[c], target.points);
    design_.col(c) = weighted_flatten(bs, sqrt_w);
  }
  gram_ = design_.transpose() * design_;

  regularizer_.resize(cols, cols);
  for (int a = 0; a < cols; ++a)
    for (int b = a; b < cols; ++b) {
      double acc = 0.0;
      for (int k = 0; k < g.size(); ++k)
        acc += g.weights[k] *
               currents[a].values.row(k).dot(currents[b].values.row(k));
      regularizer_(a, b) = acc;
      regularizer_(b, a) = acc;
    }
}

TikhonovFitter::Result TikhonovFitter::fit(double lambda_reg) const {
  if (!(lambda_reg > 0.0))
    throw Error("regularized_fit: lambda_reg must be positive");
  const MatrixXd lhs = gram_ + lambda_reg * regularizer_;
  Eigen::LDLT<MatrixXd> ldlt(lhs);
  if (ldlt.info() != Eigen::Success)
    throw SolveFailure("regularized_fit: normal equations not SPD");
  const VectorXd c = ldlt.solve(design_.transpose() * rhs_);

  Result res;
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    const FourierMode& m = modes_[i];
    const int km = m.is_sin ? -m.m : m.m;
    const int kn = m.is_sin ? -m.n : m.n;
    res.current.stream_coeffs.emplace_back(km, kn, c[i]);
  }
  res.current.alpha = c[modes_.size()];
  res.current.beta = c[modes_.size() + 1];
  res.residual = (design_ * c - rhs_).norm();
  res.current_norm = std::sqrt(std::max(0.0, c.dot(regularizer_ * c)));
  return res;
}

TikhonovFitter::Result regularized_fit(const LayerOperatorSet& ops,
                                       const HarmonicSurfaceBasis& basis,
                                       const FieldSamples& target,
                                       double lambda_reg, int n_modes) {
  return TikhonovFitter(ops, basis, target, n_modes).fit(lambda_reg);
}

double qbar_certificate(const TangentField& current,
                        const HarmonicSurfaceBasis& basis) {
  return avg_windings(current, basis).qbar;
}

}  // namespace cws
