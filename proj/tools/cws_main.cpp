// Command-line front end: batch reconstruction runs, kernel studies, and
// the self-validation suite.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "cws/io.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace cws;

struct CommonFlags {
  std::string config_path;
  std::string output_dir;
  int threads = 0;
  std::string grid_override;
  std::optional<unsigned long> seed;
};

void apply_grid_override(RunConfig& cfg, const std::string& s) {
  if (s.empty()) return;
  const auto x = s.find('x');
  if (x == std::string::npos)
    throw ConfigError("--grid expects NTHETAxNPHI, e.g. 64x64", "grid");
  cfg.n_theta = std::stoi(s.substr(0, x));
  cfg.n_phi = std::stoi(s.substr(x + 1));
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Everything a run needs, assembled once.
struct Workspace {
  std::shared_ptr<const SurfaceGrid> grid;
  LayerOperatorSet ops;
  std::shared_ptr<HarmonicNeumannField> gamma;
  HarmonicSurfaceBasis basis;
  VolumeGrid plasma_grid;
  FieldSamples target;  // on the plasma quadrature
  std::optional<FieldSampler> target_sampler;
  double gamma_volume_norm = 0.0;
};

Workspace make_workspace(const RunConfig& cfg) {
  auto torus = std::make_shared<FourierTorus>(
      build_torus(cfg.nfp, cfg.r_coeffs, cfg.z_coeffs));
  Workspace ws;
  ws.grid = make_surface_grid(torus, cfg.n_theta, cfg.n_phi);
  ws.ops = assemble_layer_operators(ws.grid);
  ws.gamma = std::make_shared<HarmonicNeumannField>(
      build_harmonic_neumann_field(ws.ops));
  ws.basis = harmonic_basis(ws.grid);
  ws.plasma_grid = make_volume_grid(torus, cfg.plasma_n_s, cfg.plasma_n_theta,
                                    cfg.plasma_n_phi, cfg.minor_scale);

  switch (cfg.target_kind) {
    case RunConfig::TargetKind::uniform: {
      const Vector3d b = cfg.uniform_b;
      ws.target_sampler = [b](const Vector3d&) { return b; };
      break;
    }
    case RunConfig::TargetKind::loop: {
      FilamentLoop loop =
          make_circle_loop(cfg.loop_center, cfg.loop_radius, cfg.loop_normal);
      const double current = cfg.loop_current;
      auto base = filament_sampler(std::move(loop));
      ws.target_sampler = [base, current](const Vector3d& x) {
        return (current * base(x)).eval();
      };
      break;
    }
    case RunConfig::TargetKind::samples:
      ws.target = load_field_samples_csv(cfg.samples_path);
      break;
  }
  if (ws.target_sampler) {
    ws.target.points = ws.plasma_grid.nodes;
    ws.target.weights = ws.plasma_grid.weights;
    ws.target.values.resize(ws.target.points.rows(), 3);
    for (int p = 0; p < ws.target.points.rows(); ++p)
      ws.target.values.row(p) = (*ws.target_sampler)(ws.target.points.row(p));
  }

  VolumeGrid norm_grid = make_volume_grid(torus, 6, 12, 16, 0.9);
  ws.gamma_volume_norm = volume_l2_norm(ws.gamma->sampler(), norm_grid);
  return ws;
}

json vector_json(const VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

int cmd_reconstruct(const RunConfig& cfg) {
  Workspace ws = make_workspace(cfg);
  std::filesystem::create_directories(cfg.output_dir);

  const FieldSampler* sampler =
      ws.target_sampler ? &*ws.target_sampler : nullptr;
  Step1Result s1 = step1_fit(ws.ops, ws.gamma, ws.target, cfg.step1_n_modes,
                             sampler);
  PreimageResult s2 =
      step2_preimage(ws.ops, s1, cfg.step2_iterations, &ws.target);
  PreimageResult exact = exact_preimage(ws.ops, s1, &ws.target);
  const double lambda_hat = contraction_estimate(ws.ops, 300, cfg.seed);

  // residual of the reconstructed field against the prescribed target
  const MatrixX3d bs = bs_surface_current(s2.current, ws.target.points);
  double num = 0.0, den = 0.0;
  for (int p = 0; p < ws.target.points.rows(); ++p) {
    const double w = ws.target.weights.size() ? ws.target.weights[p] : 1.0;
    num += w * (bs.row(p) - ws.target.values.row(p)).squaredNorm();
    den += w * ws.target.values.row(p).squaredNorm();
  }
  const double end_to_end = den > 0 ? std::sqrt(num / den) : std::sqrt(num);

  json report;
  report["grid"] = {{"n_theta", cfg.n_theta}, {"n_phi", cfg.n_phi}};
  report["lambda_hat"] = lambda_hat;
  report["step1"] = {
      {"alpha0", s1.alpha0},
      {"alphas", vector_json(s1.alphas)},
      {"residual_history", vector_json(s1.residual_history)},
      {"target_norm", s1.target_norm},
      {"effective_rank", s1.effective_rank},
  };
  json keys = json::array();
  for (const auto& m : s1.basis_keys)
    keys.push_back({m.m, m.n, m.is_sin ? "sin" : "cos"});
  report["step1"]["basis_keys"] = keys;
  if (s1.ip_circulation) report["step1"]["ip_circulation"] = *s1.ip_circulation;
  report["step2"] = {
      {"iterations", s2.iterations},
      {"series_term_norms", vector_json(s2.series_term_norms)},
      {"achieved_residual_vs_fit", s2.achieved_residual},
      {"achieved_residual_vs_target", end_to_end},
      {"qbar", qbar_certificate(s2.current, ws.basis)},
      {"pbar", avg_windings(s2.current, ws.basis).pbar},
  };
  report["exact_preimage"] = {
      {"achieved_residual_vs_fit", exact.achieved_residual},
      {"qbar", qbar_certificate(exact.current, ws.basis)},
  };

  if (!cfg.tikhonov_lambda_sweep.empty()) {
    TikhonovFitter fitter(ws.ops, ws.basis, ws.target, cfg.tikhonov_n_modes);
    json sweep = json::array();
    for (double lam : cfg.tikhonov_lambda_sweep) {
      auto res = fitter.fit(lam);
      const double rel =
          s1.target_norm > 0 ? res.residual / s1.target_norm : res.residual;
      sweep.push_back({{"lambda", lam},
                       {"residual", res.residual},
                       {"relative_residual", rel},
                       {"current_norm", res.current_norm}});
    }
    report["tikhonov"] = sweep;
  }

  const auto out = std::filesystem::path(cfg.output_dir);
  write_json_file((out / "report.json").string(), report);
  write_residuals_csv((out / "residuals.csv").string(),
                      {{"step1_residual", s1.residual_history},
                       {"step2_term_norm", s2.series_term_norms}});
  write_current_csv((out / "current.csv").string(), s2.current);
  FieldSamples on_plasma = ws.target;
  on_plasma.values = bs;
  write_field_samples_csv((out / "field_on_plasma.csv").string(), on_plasma);

  // coarse lattice for external viewers
  const double d = ws.grid->torus->diameter_estimate();
  auto current_field = [&](const Vector3d& x) -> Vector3d {
    MatrixX3d p(1, 3);
    p.row(0) = x;
    return bs_surface_current(s2.current, p).row(0);
  };
  write_vtk_structured_points((out / "field_box.vtk").string(), current_field,
                              Vector3d(-0.6 * d, -0.6 * d, -0.25 * d),
                              Vector3d(0.6 * d, 0.6 * d, 0.25 * d), 24, 24,
                              12);
  std::printf(
      "reconstruct: end-to-end residual %.4f (fit floor %.4f), qbar %.2e\n",
      end_to_end,
      s1.residual_history[s1.residual_history.size() - 1] /
          std::max(s1.target_norm, 1e-300),
      qbar_certificate(s2.current, ws.basis));
  return 0;
}

int cmd_kernel(const RunConfig& cfg) {
  Workspace ws = make_workspace(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  FieldSamples plasma;
  plasma.points = ws.plasma_grid.nodes;
  plasma.weights = ws.plasma_grid.weights;
  plasma.values = MatrixX3d::Zero(plasma.points.rows(), 3);

  const double lambda_hat = contraction_estimate(ws.ops, 300, cfg.seed);
  const KernelRoute route = parse_kernel_route(cfg.kernel_route);

  json report;
  report["lambda_hat"] = lambda_hat;
  report["gamma_volume_norm"] = ws.gamma_volume_norm;

  KernelElement exact = kernel_element(ws.ops, *ws.gamma, KernelRoute::exact,
                                       0, ws.gamma_volume_norm, &plasma);
  KernelElement exterior = kernel_element(ws.ops, *ws.gamma,
                                          KernelRoute::exterior, 0,
                                          ws.gamma_volume_norm, &plasma);
  const double route_diff =
      TangentField{ws.ops.grid,
                   exact.current.values - exterior.current.values}
          .l2_norm() /
      exact.current.l2_norm();
  report["route_difference_exact_vs_exterior"] = route_diff;
  report["exact_leakage"] = exact.leakage;
  report["exterior_leakage"] = exterior.leakage;

  if (route == KernelRoute::series) {
    VectorXd leakage(cfg.kernel_iterations + 1);
    double fitted_ratio = 0.0;
    int fitted_n = 0;
    for (int n = 0; n <= cfg.kernel_iterations; ++n) {
      KernelElement je = kernel_element(ws.ops, *ws.gamma, route, n,
                                        ws.gamma_volume_norm, &plasma);
      leakage[n] = je.leakage;
      if (n > 0 && leakage[n - 1] > 2.0 * exact.leakage) {
        fitted_ratio += std::log(leakage[n] / leakage[n - 1]);
        ++fitted_n;
      }
    }
    report["leakage_vs_n"] = vector_json(leakage);
    report["leakage_floor"] = exact.leakage;
    if (fitted_n > 0)
      report["fitted_decay_ratio"] = std::exp(fitted_ratio / fitted_n);
    write_residuals_csv(
        (std::filesystem::path(cfg.output_dir) / "leakage.csv").string(),
        {{"leakage", leakage}});
  }

  KernelElement chosen = kernel_element(ws.ops, *ws.gamma, route,
                                        cfg.kernel_iterations,
                                        ws.gamma_volume_norm, &plasma);
  const Windings w = avg_windings(chosen.current, ws.basis);
  report["qbar"] = w.qbar;
  report["pbar"] = w.pbar;
  report["leakage"] = chosen.leakage;
  write_current_csv(
      (std::filesystem::path(cfg.output_dir) / "kernel_current.csv").string(),
      chosen.current);
  write_json_file(
      (std::filesystem::path(cfg.output_dir) / "report.json").string(),
      report);
  std::printf("kernel: route %s leakage %.3e, qbar %.3e, route diff %.3e\n",
              cfg.kernel_route.c_str(), chosen.leakage, w.qbar, route_diff);
  return 0;
}

struct CheckRow {
  std::string name;
  double measured;
  double expected;
  double tol;
  bool pass() const { return std::abs(measured - expected) <= tol; }
};

int cmd_validate(int n_grid, bool bug_flip_wdiag) {
  // tolerances: tight profile at >= 48, relaxed documented profile below
  const bool tight = n_grid >= 48;
  const double tol_solid = tight ? 2e-3 : 8e-3;
  const double tol_field = tight ? 1e-3 : 3e-2;
  const double tol_gamma = tight ? 1e-2 : 3e-2;

  auto torus = std::make_shared<FourierTorus>(
      build_torus(1, {{0, 0, 2.0}, {1, 0, 1.0}}, {{1, 0, 1.0}}));
  auto grid = make_surface_grid(torus, n_grid, n_grid);
  LayerOperatorSet ops = assemble_layer_operators(grid, bug_flip_wdiag);

  std::vector<CheckRow> rows;
  const double kPi = std::numbers::pi;

  rows.push_back({"area vs analytic", grid->area, 4 * kPi * kPi * 2.0,
                  1e-6 * 4 * kPi * kPi * 2.0});

  double vol3 = 0.0;
  for (int k = 0; k < grid->size(); ++k)
    vol3 += grid->normals.row(k).dot(grid->nodes.row(k)) * grid->weights[k];
  rows.push_back({"divergence-theorem volume", vol3 / 3.0, 2 * kPi * kPi * 2.0,
                  1e-3 * 2 * kPi * kPi * 2.0});

  const VectorXd w1 = ops.apply_w(VectorXd::Ones(grid->size()));
  rows.push_back({"solid angle: max|W.1 + 1/2|",
                  (w1.array() + 0.5).abs().maxCoeff(), 0.0, tol_solid});
  // first-order refinement metric of the uncorrected punctured rule
  rows.push_back({"raw gauss defect", solid_angle_defect(*grid), 0.0,
                  tight ? 8e-3 : 3e-2});

  {
    ScalarDensity x1{grid, grid->nodes.col(0)};
    HarmonicSolution sx = solve_dirichlet_interior(ops, x1);
    MatrixX3d probe(1, 3);
    probe.row(0) = Vector3d(2, 0, 0);
    rows.push_back({"dirichlet linear: |grad f - e1|",
                    (sx.gradient(probe).row(0) - Eigen::RowVector3d(1, 0, 0))
                        .norm(),
                    0.0, tol_field});

    VectorXd bn(grid->size());
    for (int k = 0; k < grid->size(); ++k) bn[k] = grid->normals(k, 2);
    HarmonicSolution sn = solve_neumann_interior(ops, {grid, bn});
    rows.push_back({"neumann linear: |grad_S f - e3| at (3,0,0)",
                    (Vector3d(sn.trace_gradient.values.row(0)) -
                     Vector3d(0, 0, 1))
                        .norm(),
                    0.0, 2 * tol_field});

    const Vector3d x0(6, 0, 0);
    VectorXd kv(grid->size());
    for (int k = 0; k < grid->size(); ++k)
      kv[k] = 1.0 / (Vector3d(grid->nodes.row(k)) - x0).norm();
    HarmonicSolution sp = solve_dirichlet_interior(ops, {grid, kv});
    MatrixX3d probes(2, 3);
    probes.row(0) = Vector3d(2.2, 0.3, 0.2);
    probes.row(1) = Vector3d(-1.9, -0.4, -0.3);
    const VectorXd got = sp.potential(probes);
    double err = 0.0;
    for (int p = 0; p < 2; ++p) {
      const double ex = 1.0 / (Vector3d(probes.row(p)) - x0).norm();
      err = std::max(err, std::abs(got[p] - ex) / ex);
    }
    rows.push_back({"dirichlet point-source rel err", err, 0.0, tol_field});
  }

  HarmonicNeumannField gamma = build_harmonic_neumann_field(ops);
  rows.push_back({"gamma toroidal circulation", gamma.toroidal_circulation,
                  1.0, 1e-3});
  rows.push_back({"gamma poloidal circulation", gamma.poloidal_circulation,
                  0.0, 1e-3});
  rows.push_back({"gamma tangency defect", gamma.tangency_defect, 0.0, 1e-3});
  {
    double num = 0.0, den = 0.0;
    for (int k = 0; k < grid->size(); ++k) {
      const Vector3d x = grid->nodes.row(k);
      const Vector3d exact =
          Vector3d(-x[1], x[0], 0) / (2 * kPi * (x[0] * x[0] + x[1] * x[1]));
      num += grid->weights[k] *
             (Vector3d(gamma.surface_values().row(k)) - exact).squaredNorm();
      den += grid->weights[k] * exact.squaredNorm();
    }
    rows.push_back({"gamma vs e_phi/(2 pi rho)", std::sqrt(num / den), 0.0,
                    tol_gamma});
  }

  {
    TangentField j{grid, gamma.surface_cross_normal()};
    VolumeGrid probes = make_volume_grid(torus, 3, 6, 8, 0.55);
    const MatrixX3d bs = bs_surface_current(j, probes.nodes);
    const MatrixX3d gv = gamma.eval(probes.nodes);
    double num = 0.0, den = 0.0;
    for (int p = 0; p < probes.nodes.rows(); ++p) {
      num += (bs.row(p) - gv.row(p)).squaredNorm();
      den += gv.row(p).squaredNorm();
    }
    rows.push_back({"BS(gamma x N) reproduces gamma", std::sqrt(num / den),
                    0.0, 2 * tol_gamma});
  }

  {
    HarmonicSurfaceBasis basis = harmonic_basis(grid);
    TangentField gpn = cross_with_normal(basis.gamma_p);
    const double q = avg_windings(gpn, basis).qbar;
    rows.push_back({"|Qbar(gamma_p x N)| * area", std::abs(q) * grid->area,
                    1.0, 1e-3});
  }

  int failures = 0;
  std::printf("%-42s %14s %14s %10s  %s\n", "check", "measured", "expected",
              "tol", "status");
  for (const auto& r : rows) {
    const bool ok = r.pass();
    failures += ok ? 0 : 1;
    std::printf("%-42s %14.6e %14.6e %10.1e  %s\n", r.name.c_str(), r.measured,
                r.expected, r.tol, ok ? "PASS" : "FAIL");
  }
  std::printf("validate: %d/%zu checks passed\n", int(rows.size()) - failures,
              rows.size());
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surface-current reconstruction on toroidal winding surfaces"};
  app.require_subcommand(1);

  CommonFlags flags;
  bool bug_flip_wdiag = false;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", flags.config_path,
                                "JSON run configuration");
    if (needs_config) opt->required();
    cmd->add_option("--output", flags.output_dir, "output directory override");
    cmd->add_option("--threads", flags.threads, "worker thread count");
    cmd->add_option("--grid", flags.grid_override,
                    "surface grid override, NTHETAxNPHI");
    cmd->add_option("--seed", flags.seed, "RNG seed override");
  };

  CLI::App* rec =
      app.add_subcommand("reconstruct", "two-step current reconstruction");
  add_common(rec, true);
  CLI::App* ker = app.add_subcommand("kernel", "kernel element study");
  add_common(ker, true);
  CLI::App* val = app.add_subcommand("validate", "self-validation suite");
  add_common(val, false);
  val->add_flag("--bug-flip-wdiag", bug_flip_wdiag,
                "testing hook: flip the double-layer jump sign");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) {
      std::cout << error_json("config", "bad command line").dump() << "\n";
      return 2;
    }
    return 0;
  }

  try {
    set_threads(flags.threads);
    if (val->parsed()) {
      int n = 48;
      if (!flags.grid_override.empty()) {
        RunConfig tmp;
        apply_grid_override(tmp, flags.grid_override);
        n = tmp.n_theta;
      }
      return cmd_validate(n, bug_flip_wdiag);
    }
    RunConfig cfg = load_config(flags.config_path);
    apply_grid_override(cfg, flags.grid_override);
    if (!flags.output_dir.empty()) cfg.output_dir = flags.output_dir;
    if (flags.seed) cfg.seed = *flags.seed;
    if (rec->parsed()) return cmd_reconstruct(cfg);
    return cmd_kernel(cfg);
  } catch (const ConfigError& e) {
    std::cout << error_json("config", e.what(), e.key).dump() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cout << error_json("numerical", e.what()).dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cout << error_json("internal", e.what()).dump() << "\n";
    return 1;
  }
}
