#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cws/io.hpp"
#include "test_helpers.hpp"

using namespace cws;
using namespace cws::test;

namespace {

json minimal_config() {
  return json::parse(R"({
    "surface": {"nfp": 2, "r_coeffs": [[0,0,3.0],[1,0,1.0]],
                "z_coeffs": [[1,0,1.0]], "n_theta": 16, "n_phi": 16},
    "plasma": {"minor_scale": 0.4, "n_s": 3, "n_theta": 6, "n_phi": 8},
    "target": {"uniform": [0, 0, 1]},
    "step1": {"n_modes": 5},
    "step2": {"iterations": 3},
    "kernel": {"route": "exact", "iterations": 2},
    "tikhonov": {"lambda_sweep": [0.1, 0.01], "n_modes": 4},
    "output": "somewhere",
    "seed": 99
  })");
}

}  // namespace

TEST_CASE("config parses every section") {
  RunConfig cfg = parse_config(minimal_config());
  CHECK(cfg.nfp == 2);
  CHECK(cfg.r_coeffs.size() == 2);
  CHECK(cfg.n_theta == 16);
  CHECK(cfg.minor_scale == 0.4);
  CHECK(cfg.target_kind == RunConfig::TargetKind::uniform);
  CHECK(cfg.step1_n_modes == 5);
  CHECK(cfg.step2_iterations == 3);
  CHECK(cfg.kernel_route == "exact");
  CHECK(cfg.tikhonov_lambda_sweep.size() == 2);
  CHECK(cfg.output_dir == "somewhere");
  CHECK(cfg.seed == 99);
}

TEST_CASE("config rejects unknown keys with the offending key named") {
  json j = minimal_config();
  j["surprise"] = 1;
  try {
    parse_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key == "config.surprise");
  }

  json j2 = minimal_config();
  j2["step2"]["iters"] = 3;
  try {
    parse_config(j2);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key == "step2.iters");
  }
}

TEST_CASE("config demands exactly one target") {
  json j = minimal_config();
  j["target"]["loop"] = {{"center", {3, 0, 0}}, {"radius", 1.0}};
  CHECK_THROWS_AS(parse_config(j), ConfigError);

  json j2 = minimal_config();
  j2["target"] = {{"loop",
                   {{"center", {3, 0, 0}}, {"radius", 0.8}, {"current", 2.0}}}};
  RunConfig cfg = parse_config(j2);
  CHECK(cfg.target_kind == RunConfig::TargetKind::loop);
  CHECK(cfg.loop_radius == 0.8);
  CHECK(cfg.loop_current == 2.0);

  json j3 = minimal_config();
  j3["kernel"]["route"] = "sideways";
  CHECK_THROWS_AS(parse_config(j3), ConfigError);
}

TEST_CASE("field sample csv round trip") {
  FieldSamples s;
  s.points.resize(3, 3);
  s.points << 1, 2, 3, -0.5, 0.25, 8, 0, 0, 1e-7;
  s.values.resize(3, 3);
  s.values << 0.125, -3, 17.5, 1e-12, 2, 3, 4, 5, 6;
  s.weights.resize(3);
  s.weights << 0.5, 1.5, 2.5;

  const std::string path = "/tmp/cws_test_samples.csv";
  write_field_samples_csv(path, s);
  FieldSamples r = load_field_samples_csv(path);
  CHECK((r.points - s.points).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.values - s.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.weights - s.weights).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("vtk structured points header") {
  const std::string path = "/tmp/cws_test_box.vtk";
  write_vtk_structured_points(
      path, [](const Vector3d& x) { return Vector3d(x[0], 0, 1); },
      {0, 0, 0}, {1, 1, 1}, 3, 3, 2);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# vtk DataFile Version 3.0");
  int vectors_line = 0, dims_ok = 0, count = 0;
  while (std::getline(in, line)) {
    if (line.rfind("DIMENSIONS 3 3 2", 0) == 0) dims_ok = 1;
    if (line.rfind("VECTORS", 0) == 0) vectors_line = 1;
    ++count;
  }
  CHECK(dims_ok == 1);
  CHECK(vectors_line == 1);
  CHECK(count >= 6 + 18);
  std::remove(path.c_str());
}

TEST_CASE("error json carries type and key") {
  json e = error_json("config", "broken", "plasma.n_s");
  CHECK(e["error"]["type"] == "config");
  CHECK(e["error"]["key"] == "plasma.n_s");
  json e2 = error_json("numerical", "diverged");
  CHECK(e2["error"].contains("key") == false);
}

TEST_CASE("current csv lists every node") {
  auto grid = circular_grid(8);
  TangentField j{grid, MatrixX3d::Zero(grid->size(), 3)};
  const std::string path = "/tmp/cws_test_current.csv";
  write_current_csv(path, j);
  std::ifstream in(path);
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 1 + grid->size());
  std::remove(path.c_str());
}
