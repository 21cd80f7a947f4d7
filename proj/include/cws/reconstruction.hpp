#pragma once

#include <optional>
#include <string>

#include "cws/fields.hpp"

namespace cws {

// Basis fit of a target field by the harmonic Neumann field plus gradients
// of interior Dirichlet harmonics with Fourier-mode boundary traces.
struct Step1Result {
  double alpha0 = 0.0;
  VectorXd alphas;
  std::vector<FourierMode> basis_keys;
  VectorXd residual_history;  // weighted L2(P) residual after 0..N modes
  double target_norm = 0.0;
  int effective_rank = 0;
  std::optional<double> ip_circulation;  // measured when a sampler is given

  std::shared_ptr<const HarmonicNeumannField> gamma;
  std::vector<HarmonicSolution> dirichlet;  // one solution per basis mode

  // alpha0 Gamma + sum alpha_i grad f_i at off-surface points.
  MatrixX3d eval(const MatrixX3d& points) const;
  // Normal trace of the fitted field assembled from the second-kind normal
  // derivatives of the Dirichlet solutions (Gamma contributes nothing).
  ScalarDensity surface_normal_trace() const;
};

Step1Result step1_fit(const LayerOperatorSet& ops,
                      std::shared_ptr<const HarmonicNeumannField> gamma,
                      const FieldSamples& target, int n_modes,
                      const FieldSampler* target_sampler = nullptr);

// Truncated-Neumann-series preimage of the fitted field.
struct PreimageResult {
  TangentField current;      // alpha0 Gamma x N + grad_S f x N
  int iterations = 0;        // -1 marks the dense (exact) solve
  VectorXd series_term_norms;  // duality norms of the series terms
  double achieved_residual = 0.0;  // |BS(j) - B|_{L2(P)} / |B|_{L2(P)}
};

PreimageResult step2_preimage(const LayerOperatorSet& ops,
                              const Step1Result& step1, int n,
                              const FieldSamples* plasma = nullptr);

// Dense solve of (Id/2 + w_tr) x = B.N; the n -> infinity reference.
PreimageResult exact_preimage(const LayerOperatorSet& ops,
                              const Step1Result& step1,
                              const FieldSamples* plasma = nullptr);

enum class KernelRoute { series, exact, exterior };
KernelRoute parse_kernel_route(const std::string& name);

// A surface current radiating (numerically) no field inside the domain.
struct KernelElement {
  TangentField current;
  KernelRoute route = KernelRoute::series;
  int iterations = 0;
  double leakage = 0.0;  // |BS(j)|_{L2(P)} / |Gamma|_{L2(Omega)}
};

// gamma_volume_norm is |Gamma|_{L2(Omega)} from a volume quadrature; plasma
// supplies the leakage quadrature (optional).
KernelElement kernel_element(const LayerOperatorSet& ops,
                             const HarmonicNeumannField& gamma,
                             KernelRoute route, int n,
                             double gamma_volume_norm,
                             const FieldSamples* plasma = nullptr);

// Tikhonov-regularized least squares over stream-function modes plus the
// two harmonic coefficients; the comparison baseline. The design matrix is
// assembled once, fits for many lambdas are cheap.
class TikhonovFitter {
 public:
  TikhonovFitter(const LayerOperatorSet& ops, const HarmonicSurfaceBasis& basis,
                 const FieldSamples& target, int n_modes);

  struct Result {
    SurfaceCurrent current;
    double residual = 0.0;       // weighted L2(P), absolute
    double current_norm = 0.0;   // L2(Sigma) norm of the realized current
  };
  Result fit(double lambda_reg) const;

  int n_columns() const { return static_cast<int>(modes_.size()) + 2; }

 private:
  std::shared_ptr<const SurfaceGrid> grid_;
  std::vector<FourierMode> modes_;
  MatrixXd design_;      // weighted design matrix, 3P x (n_modes + 2)
  VectorXd rhs_;         // weighted target
  MatrixXd gram_;        // design^T design
  MatrixXd regularizer_; // L2(Sigma) Gram matrix of the basis currents
  double target_norm_ = 0.0;
};

TikhonovFitter::Result regularized_fit(const LayerOperatorSet& ops,
                                       const HarmonicSurfaceBasis& basis,
                                       const FieldSamples& target,
                                       double lambda_reg, int n_modes);

// Average toroidal winding of a current; vanishing Qbar certifies the
// maximally poloidal property of the reconstructed currents.
double qbar_certificate(const TangentField& current,
                        const HarmonicSurfaceBasis& basis);

}  // namespace cws
