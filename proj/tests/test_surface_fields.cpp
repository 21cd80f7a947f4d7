#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "test_helpers.hpp"

using namespace cws;
using namespace cws::test;

namespace {
constexpr double kPi = std::numbers::pi;

ScalarDensity theta_wave(std::shared_ptr<const SurfaceGrid> grid) {
  VectorXd v(grid->size());
  for (int j = 0; j < grid->n_phi; ++j)
    for (int i = 0; i < grid->n_theta; ++i)
      v[grid->index(i, j)] = std::sin(grid->theta[i]);
  return {grid, v};
}
}  // namespace

TEST_CASE("surface gradient of constants and of sin(theta)") {
  auto grid = circular_grid(32);
  ScalarDensity c{grid, VectorXd::Constant(grid->size(), 3.25)};
  CHECK(surface_gradient(c).max_norm() <= 1e-12);

  TangentField g = surface_gradient(theta_wave(grid));
  for (int i = 0; i < grid->n_theta; ++i) {
    const int k = grid->index(i, 5);
    const double expected = std::abs(std::cos(grid->theta[i]));  // a = 1
    CHECK(std::abs(g.values.row(k).norm() - expected) <= 1e-10);
  }
  // exact gradients have zero circulation
  CHECK(std::abs(line_integral_sigma_p(g)) <= 1e-8);
  CHECK(std::abs(line_integral_sigma_t(g)) <= 1e-8);
}

TEST_CASE("variational divergence is the exact adjoint of the gradient") {
  auto grid = circular_grid(24);
  std::mt19937_64 rng(3);
  ScalarDensity f{grid, random_band_limited(*grid, 4, rng)};
  ScalarDensity psi{grid, random_band_limited(*grid, 4, rng)};
  TangentField gf = surface_gradient(f);
  ScalarDensity lap = surface_divergence(gf);
  // <div grad f, psi>_w == -<grad f, grad psi>_w
  double lhs = 0.0, rhs = 0.0;
  TangentField gpsi = surface_gradient(psi);
  for (int k = 0; k < grid->size(); ++k) {
    lhs += grid->weights[k] * lap.values[k] * psi.values[k];
    rhs -= grid->weights[k] * gf.values.row(k).dot(gpsi.values.row(k));
  }
  CHECK(std::abs(lhs - rhs) <= 1e-10 * (std::abs(lhs) + std::abs(rhs) + 1.0));
}

TEST_CASE("surface poisson solver recovers a known potential") {
  auto grid = circular_grid(32);
  std::mt19937_64 rng(11);
  VectorXd f = random_band_limited(*grid, 3, rng);
  ScalarDensity fd{grid, f};
  ScalarDensity rhs = surface_divergence(surface_gradient(fd));
  ScalarDensity u = solve_surface_poisson(rhs);
  VectorXd diff = u.values - f;
  diff.array() -= grid->weights.dot(diff) / grid->area;
  CHECK(std::sqrt(grid->weights.dot(diff.cwiseAbs2())) <=
        1e-7 * std::sqrt(grid->weights.dot(f.cwiseAbs2())));
}

TEST_CASE("harmonic basis on the circular torus matches closed forms") {
  const auto& basis = circular_basis(32);
  auto grid = basis.gamma_t.grid;

  // node (0,0) sits at (3,0,0)
  const Vector3d gt = basis.gamma_t.values.row(0);
  const Vector3d gp = basis.gamma_p.values.row(0);
  const double c_t = 1.0 / (6.0 * kPi);             // |e_phi|/(2 pi R) at R=3
  const double c_p = std::sqrt(3.0) / (6.0 * kPi);  // sqrt(R0^2-a^2)/(2 pi a R)
  CHECK((gt - Vector3d(0, c_t, 0)).norm() <= 1e-8);
  CHECK((gp - Vector3d(0, 0, c_p)).norm() <= 1e-8);

  // period normalization
  CHECK(std::abs(line_integral_sigma_t(basis.gamma_t) - 1.0) <= 1e-10);
  CHECK(std::abs(line_integral_sigma_p(basis.gamma_t)) <= 1e-10);
  CHECK(std::abs(line_integral_sigma_p(basis.gamma_p) - 1.0) <= 1e-10);
  CHECK(std::abs(line_integral_sigma_t(basis.gamma_p)) <= 1e-10);

  // discrete divergence small
  CHECK(surface_divergence(basis.gamma_t).values.cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(surface_divergence(basis.gamma_p).values.cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("harmonic basis periods on a shaped torus") {
  auto grid = make_surface_grid(std::make_shared<FourierTorus>(shaped_torus()), 32, 32);
  HarmonicSurfaceBasis basis = harmonic_basis(grid);
  CHECK(std::abs(line_integral_sigma_t(basis.gamma_t) - 1.0) <= 1e-6);
  CHECK(std::abs(line_integral_sigma_p(basis.gamma_t)) <= 1e-6);
  CHECK(std::abs(line_integral_sigma_p(basis.gamma_p) - 1.0) <= 1e-6);
  CHECK(std::abs(line_integral_sigma_t(basis.gamma_p)) <= 1e-6);
  CHECK(surface_divergence(basis.gamma_t).values.cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("hodge orthogonality of co-exact and harmonic fields") {
  const auto& basis = circular_basis(32);
  auto grid = basis.gamma_t.grid;
  std::mt19937_64 rng(5);
  ScalarDensity f{grid, random_band_limited(*grid, 4, rng)};
  TangentField coexact = cross_with_normal(surface_gradient(f));
  double ip_t = 0.0, ip_p = 0.0;
  for (int k = 0; k < grid->size(); ++k) {
    ip_t += grid->weights[k] * coexact.values.row(k).dot(basis.gamma_t.values.row(k));
    ip_p += grid->weights[k] * coexact.values.row(k).dot(basis.gamma_p.values.row(k));
  }
  const double scale = coexact.l2_norm();
  CHECK(std::abs(ip_t) <= 1e-7 * scale * basis.gamma_t.l2_norm());
  CHECK(std::abs(ip_p) <= 1e-7 * scale * basis.gamma_p.l2_norm());
}

TEST_CASE("realize_current pieces and divergence") {
  const auto& basis = circular_basis(24);
  auto grid = basis.gamma_t.grid;

  SurfaceCurrent zero;
  CHECK(realize_current(zero, grid, basis).max_norm() == 0.0);

  SurfaceCurrent alpha_only;
  alpha_only.alpha = 1.0;
  TangentField ja = realize_current(alpha_only, grid, basis);
  TangentField gt_x_n = cross_with_normal(basis.gamma_t);
  CHECK((ja.values - gt_x_n.values).cwiseAbs().maxCoeff() <= 1e-14);

  SurfaceCurrent mixed;
  mixed.stream_coeffs = {{1, 0, 0.7}, {-1, 0, 0.3}, {2, -1, -0.4}, {0, 2, 0.2}};
  mixed.alpha = 0.5;
  mixed.beta = -1.2;
  TangentField j = realize_current(mixed, grid, basis);
  for (int k = 0; k < grid->size(); k += 7)
    CHECK(std::abs(j.values.row(k).dot(grid->normals.row(k))) <=
          1e-10 * j.values.row(k).norm());
  CHECK(surface_divergence(j).values.cwiseAbs().maxCoeff() <=
        1e-8 * j.max_norm());
}

TEST_CASE("stream coefficient key convention") {
  auto grid = circular_grid(24);
  VectorXd f = eval_stream(*grid, {{-1, 0, 1.0}});
  for (int i = 0; i < grid->n_theta; ++i)
    CHECK(std::abs(f[grid->index(i, 3)] - std::sin(grid->theta[i])) <= 1e-14);
  VectorXd g = eval_stream(*grid, {{0, -2, 2.0}});
  for (int j = 0; j < grid->n_phi; ++j)
    CHECK(std::abs(g[grid->index(4, j)] - 2.0 * std::sin(2.0 * grid->phi[j])) <= 1e-13);
}

TEST_CASE("average windings identities on the circular torus") {
  const auto& basis = circular_basis(32);
  auto grid = basis.gamma_t.grid;
  const double area = grid->area;

  std::mt19937_64 rng(9);
  ScalarDensity f{grid, random_band_limited(*grid, 4, rng)};
  TangentField coexact = cross_with_normal(surface_gradient(f));
  CHECK(std::abs(avg_windings(coexact, basis).qbar) <=
        1e-8 * coexact.l2_norm() / std::sqrt(area));

  TangentField gp_x_n = cross_with_normal(basis.gamma_p);
  TangentField gt_x_n = cross_with_normal(basis.gamma_t);
  const Windings wp = avg_windings(gp_x_n, basis);
  const Windings wt = avg_windings(gt_x_n, basis);
  CHECK(std::abs(std::abs(wp.qbar) - 1.0 / area) <= 1e-3 / area);
  CHECK(wp.qbar > 0.0);  // orientation fixed by the chart
  CHECK(std::abs(wt.qbar) <= 1e-10);
  CHECK(std::abs(wt.pbar * area + 1.0) <= 1e-3);

  // linearity to machine precision
  TangentField combo{grid, 2.0 * coexact.values + 0.5 * gp_x_n.values};
  const Windings wc = avg_windings(combo, basis);
  const Windings we = avg_windings(coexact, basis);
  CHECK(std::abs(wc.qbar - (2.0 * we.qbar + 0.5 * wp.qbar)) <= 1e-14);
  CHECK(std::abs(wc.pbar - (2.0 * we.pbar + 0.5 * wp.pbar)) <= 1e-14);
}

TEST_CASE("qbar is proportional to beta") {
  const auto& basis = circular_basis(24);
  auto grid = basis.gamma_t.grid;
  const double qp = avg_windings(cross_with_normal(basis.gamma_p), basis).qbar;

  SurfaceCurrent c;
  c.stream_coeffs = {{1, 1, 0.4}, {-2, 0, 0.8}};
  c.alpha = 0.9;
  for (double beta : {0.0, -0.6, 1.7}) {
    c.beta = beta;
    TangentField j = realize_current(c, grid, basis);
    const double q = avg_windings(j, basis).qbar;
    CHECK(std::abs(q - beta * qp) <= 1e-8 * (1.0 + std::abs(beta) * std::abs(qp)));
  }
}

TEST_CASE("mode enumeration is ordered by total degree") {
  const auto modes = enumerate_modes(49);
  CHECK(modes.size() == 49);
  int prev_degree = 1;
  for (const auto& m : modes) {
    const int d = std::abs(m.m) + std::abs(m.n);
    CHECK(d >= prev_degree);
    prev_degree = std::max(prev_degree, d);
    CHECK(!(m.m == 0 && m.n == 0));
    CHECK((m.m > 0 || (m.m == 0 && m.n > 0)));
  }
  CHECK(modes[0].m == 1);
  CHECK(modes[0].n == 0);
  CHECK_FALSE(modes[0].is_sin);
  CHECK(modes[1].is_sin);
}
