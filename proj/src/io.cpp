#include "cws/io.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace cws {

namespace {

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object())
    throw ConfigError(where + " must be a JSON object", where);
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where,
                        where + "." + key);
  }
}

CoeffTable parse_coeffs(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array", where);
  CoeffTable table;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 3)
      throw ConfigError(where + " entries must be [m, n, value]", where);
    table.emplace_back(e[0].get<int>(), e[1].get<int>(), e[2].get<double>());
  }
  return table;
}

Vector3d parse_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError(where + " must be [x, y, z]", where);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

RunConfig parse_config(const json& j) {
  RunConfig cfg;
  check_keys(j, "config",
             {"surface", "plasma", "target", "step1", "step2", "kernel",
              "tikhonov", "output", "seed"});
  if (!j.contains("surface"))
    throw ConfigError("config requires a 'surface' section", "surface");

  const json& s = j.at("surface");
  check_keys(s, "surface", {"nfp", "r_coeffs", "z_coeffs", "n_theta", "n_phi"});
  if (s.contains("nfp")) cfg.nfp = s.at("nfp").get<int>();
  cfg.r_coeffs = parse_coeffs(s.at("r_coeffs"), "surface.r_coeffs");
  if (s.contains("z_coeffs"))
    cfg.z_coeffs = parse_coeffs(s.at("z_coeffs"), "surface.z_coeffs");
  if (s.contains("n_theta")) cfg.n_theta = s.at("n_theta").get<int>();
  if (s.contains("n_phi")) cfg.n_phi = s.at("n_phi").get<int>();

  if (j.contains("plasma")) {
    const json& p = j.at("plasma");
    check_keys(p, "plasma", {"minor_scale", "n_s", "n_theta", "n_phi"});
    if (p.contains("minor_scale"))
      cfg.minor_scale = p.at("minor_scale").get<double>();
    if (p.contains("n_s")) cfg.plasma_n_s = p.at("n_s").get<int>();
    if (p.contains("n_theta")) cfg.plasma_n_theta = p.at("n_theta").get<int>();
    if (p.contains("n_phi")) cfg.plasma_n_phi = p.at("n_phi").get<int>();
  }

  if (j.contains("target")) {
    const json& t = j.at("target");
    check_keys(t, "target", {"uniform", "loop", "samples"});
    if (t.size() != 1)
      throw ConfigError("target must carry exactly one of uniform/loop/samples",
                        "target");
    if (t.contains("uniform")) {
      cfg.target_kind = RunConfig::TargetKind::uniform;
      cfg.uniform_b = parse_vec3(t.at("uniform"), "target.uniform");
    } else if (t.contains("loop")) {
      cfg.target_kind = RunConfig::TargetKind::loop;
      const json& l = t.at("loop");
      check_keys(l, "target.loop", {"center", "radius", "normal", "current"});
      cfg.loop_center = parse_vec3(l.at("center"), "target.loop.center");
      cfg.loop_radius = l.at("radius").get<double>();
      cfg.loop_normal = l.contains("normal")
                            ? parse_vec3(l.at("normal"), "target.loop.normal")
                            : Vector3d(0, 0, 1);
      if (l.contains("current"))
        cfg.loop_current = l.at("current").get<double>();
    } else {
      cfg.target_kind = RunConfig::TargetKind::samples;
      cfg.samples_path = t.at("samples").get<std::string>();
    }
  }

  if (j.contains("step1")) {
    check_keys(j.at("step1"), "step1", {"n_modes"});
    if (j.at("step1").contains("n_modes"))
      cfg.step1_n_modes = j.at("step1").at("n_modes").get<int>();
  }
  if (j.contains("step2")) {
    check_keys(j.at("step2"), "step2", {"iterations"});
    if (j.at("step2").contains("iterations"))
      cfg.step2_iterations = j.at("step2").at("iterations").get<int>();
  }
  if (j.contains("kernel")) {
    check_keys(j.at("kernel"), "kernel", {"route", "iterations"});
    if (j.at("kernel").contains("route"))
      cfg.kernel_route = j.at("kernel").at("route").get<std::string>();
    if (j.at("kernel").contains("iterations"))
      cfg.kernel_iterations = j.at("kernel").at("iterations").get<int>();
    parse_kernel_route(cfg.kernel_route);
  }
  if (j.contains("tikhonov")) {
    check_keys(j.at("tikhonov"), "tikhonov", {"lambda_sweep", "n_modes"});
    if (j.at("tikhonov").contains("lambda_sweep"))
      cfg.tikhonov_lambda_sweep =
          j.at("tikhonov").at("lambda_sweep").get<std::vector<double>>();
    if (j.at("tikhonov").contains("n_modes"))
      cfg.tikhonov_n_modes = j.at("tikhonov").at("n_modes").get<int>();
  }
  if (j.contains("output")) cfg.output_dir = j.at("output").get<std::string>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<unsigned long>();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path, "config");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what(),
                      "config");
  }
  return parse_config(j);
}

FieldSamples load_field_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open samples file: " + path,
                             "target.samples");
  std::vector<std::array<double, 7>> rows;
  std::string line;
  bool has_weights = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ss(line);
    std::array<double, 7> row{};
    int got = 0;
    while (got < 7 && (ss >> row[got])) ++got;
    if (got == 0) continue;
    if (got < 6)
      throw ConfigError("samples row needs x,y,z,Bx,By,Bz[,w]",
                        "target.samples");
    if (got == 7) has_weights = true;
    if (got == 6) row[6] = 1.0;
    rows.push_back(row);
  }
  FieldSamples s;
  s.points.resize(rows.size(), 3);
  s.values.resize(rows.size(), 3);
  if (has_weights) s.weights.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    s.points.row(i) << rows[i][0], rows[i][1], rows[i][2];
    s.values.row(i) << rows[i][3], rows[i][4], rows[i][5];
    if (has_weights) s.weights[i] = rows[i][6];
  }
  return s;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_field_samples_csv(const std::string& path, const FieldSamples& s) {
  std::ofstream out(path);
  out << "x,y,z,Bx,By,Bz,w\n";
  for (int p = 0; p < s.points.rows(); ++p) {
    out << fmt(s.points(p, 0)) << ',' << fmt(s.points(p, 1)) << ','
        << fmt(s.points(p, 2)) << ',' << fmt(s.values(p, 0)) << ','
        << fmt(s.values(p, 1)) << ',' << fmt(s.values(p, 2)) << ','
        << fmt(s.weights.size() ? s.weights[p] : 1.0) << '\n';
  }
}

void write_current_csv(const std::string& path, const TangentField& j) {
  const SurfaceGrid& g = *j.grid;
  std::ofstream out(path);
  out << "theta,phi,x,y,z,jx,jy,jz\n";
  for (int jp = 0; jp < g.n_phi; ++jp)
    for (int it = 0; it < g.n_theta; ++it) {
      const int k = g.index(it, jp);
      out << fmt(g.theta[it]) << ',' << fmt(g.phi[jp]) << ','
          << fmt(g.nodes(k, 0)) << ',' << fmt(g.nodes(k, 1)) << ','
          << fmt(g.nodes(k, 2)) << ',' << fmt(j.values(k, 0)) << ','
          << fmt(j.values(k, 1)) << ',' << fmt(j.values(k, 2)) << '\n';
    }
}

void write_residuals_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, VectorXd>>& columns) {
  std::ofstream out(path);
  out << "index";
  Eigen::Index rows = 0;
  for (const auto& [name, col] : columns) {
    out << ',' << name;
    rows = std::max(rows, col.size());
  }
  out << '\n';
  for (Eigen::Index r = 0; r < rows; ++r) {
    out << r;
    for (const auto& [name, col] : columns) {
      out << ',';
      if (r < col.size()) out << fmt(col[r]);
    }
    out << '\n';
  }
}

void write_vtk_structured_points(const std::string& path,
                                 const FieldSampler& field, const Vector3d& lo,
                                 const Vector3d& hi, int nx, int ny, int nz) {
  std::ofstream out(path);
  out << "# vtk DataFile Version 3.0\n";
  out << "field samples\n";
  out << "ASCII\n";
  out << "DATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << nx << ' ' << ny << ' ' << nz << '\n';
  out << "ORIGIN " << fmt(lo[0]) << ' ' << fmt(lo[1]) << ' ' << fmt(lo[2])
      << '\n';
  const Vector3d d((hi - lo).array() /
                   Vector3d(std::max(nx - 1, 1), std::max(ny - 1, 1),
                            std::max(nz - 1, 1))
                       .array());
  out << "SPACING " << fmt(d[0]) << ' ' << fmt(d[1]) << ' ' << fmt(d[2])
      << '\n';
  out << "POINT_DATA " << nx * ny * nz << '\n';
  out << "VECTORS B double\n";
  for (int k = 0; k < nz; ++k)
    for (int jj = 0; jj < ny; ++jj)
      for (int i = 0; i < nx; ++i) {
        const Vector3d x = lo + Vector3d(i * d[0], jj * d[1], k * d[2]);
        const Vector3d b = field(x);
        out << fmt(b[0]) << ' ' << fmt(b[1]) << ' ' << fmt(b[2]) << '\n';
      }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

json error_json(const std::string& type, const std::string& message,
                const std::string& key) {
  json e;
  e["error"]["type"] = type;
  e["error"]["message"] = message;
  if (!key.empty()) e["error"]["key"] = key;
  return e;
}

}  // namespace cws
