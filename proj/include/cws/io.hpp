#pragma once

#include <json.hpp>
#include <string>

#include "cws/reconstruction.hpp"

namespace cws {

using json = nlohmann::json;

struct RunConfig {
  // surface
  int nfp = 1;
  CoeffTable r_coeffs, z_coeffs;
  int n_theta = 64, n_phi = 64;

  // plasma region
  double minor_scale = 0.5;
  int plasma_n_s = 4, plasma_n_theta = 8, plasma_n_phi = 16;

  enum class TargetKind { uniform, loop, samples };
  TargetKind target_kind = TargetKind::uniform;
  Vector3d uniform_b{0.0, 0.0, 1.0};
  Vector3d loop_center{0.0, 0.0, 0.0};
  double loop_radius = 1.0;
  Vector3d loop_normal{0.0, 0.0, 1.0};
  double loop_current = 1.0;
  std::string samples_path;

  int step1_n_modes = 49;
  int step2_iterations = 20;
  std::string kernel_route = "series";
  int kernel_iterations = 10;
  std::vector<double> tikhonov_lambda_sweep;
  int tikhonov_n_modes = 24;

  std::string output_dir = "out";
  unsigned long seed = 12345;
};

// Schema-validating parse; unknown keys are rejected with the offending key
// recorded on the exception.
RunConfig parse_config(const json& j);
RunConfig load_config(const std::string& path);

// CSV target samples: x,y,z,Bx,By,Bz[,w] per line, '#' comments allowed.
FieldSamples load_field_samples_csv(const std::string& path);

void write_field_samples_csv(const std::string& path, const FieldSamples& s);
void write_current_csv(const std::string& path, const TangentField& j);
void write_residuals_csv(const std::string& path,
                         const std::vector<std::pair<std::string, VectorXd>>& columns);

// Legacy-VTK structured-points export: the sampler is evaluated on a
// uniform lattice spanning [lo, hi].
void write_vtk_structured_points(const std::string& path,
                                 const FieldSampler& field, const Vector3d& lo,
                                 const Vector3d& hi, int nx, int ny, int nz);

void write_json_file(const std::string& path, const json& j);

json error_json(const std::string& type, const std::string& message,
                const std::string& key = "");

}  // namespace cws
