#include <cstdio>
#include <fstream>
#include <iterator>

#include "weakform/canonical_json.hpp"
#include "weakform/field_io.hpp"
#include "weakform/json_util.hpp"
#include "weakform/weak_calculus.hpp"

namespace weakform {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string numbered(const char* stem, std::size_t k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu.wf", stem, k);
  return buf;
}

void write_manifest(const fs::path& dir, const json& manifest) {
  std::ofstream os(dir / "manifest.json", std::ios::binary);
  if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
  os << canonical_dump(manifest) << "\n";
}

json read_manifest(const fs::path& dir, const char* kind) {
  std::ifstream is(dir / "manifest.json", std::ios::binary);
  if (!is) throw IoError("cannot open " + (dir / "manifest.json").string());
  json j;
  try {
    j = json::parse(std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>()));
  } catch (const json::exception& e) {
    throw IoError(std::string("manifest is not JSON: ") + e.what());
  }
  if (j.value("schema", 0) != 1 || j.value("kind", "") != kind)
    throw IoError(std::string("manifest does not describe a ") + kind);
  return j;
}

json tolerances_json(const DensityTolerances& t) { return {{"norm", t.norm}, {"boundary", t.boundary}}; }

DensityTolerances tolerances_from(const json& j) {
  return DensityTolerances{j.at("norm").get<double>(), j.at("boundary").get<double>()};
}

}  // namespace

void save_curve(const WeakCurve& curve, const fs::path& dir) {
  fs::create_directories(dir);
  json snaps = json::array();
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const std::string r = numbered("rho", k), v = numbered("vel", k);
    write_field(dir / r, curve.rho(k).field());
    write_field(dir / v, curve.vel(k));
    snaps.push_back({{"rho", r}, {"vel", v}});
  }
  write_manifest(dir, {{"schema", 1},
                       {"kind", "weak_curve"},
                       {"times", curve.times()},
                       {"grid", grid_to_json(curve.grid())},
                       {"tolerances", tolerances_json(DensityTolerances{})},
                       {"snapshots", snaps}});
}

WeakCurve load_curve(const fs::path& dir) {
  const json j = read_manifest(dir, "weak_curve");
  try {
    const Grid grid = grid_from_json(j.at("grid"));
    const DensityTolerances tol = tolerances_from(j.at("tolerances"));
    std::vector<DensityField> rho;
    std::vector<VectorField> vel;
    for (const json& s : j.at("snapshots")) {
      ScalarField r = read_field(dir / s.at("rho").get<std::string>()).scalar();
      VectorField v = read_field(dir / s.at("vel").get<std::string>()).vector();
      require_same_grid(r.grid(), grid, "stored curve");
      rho.emplace_back(std::move(r), tol);
      vel.push_back(std::move(v));
    }
    return WeakCurve(j.at("times").get<std::vector<double>>(), std::move(rho), std::move(vel));
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed curve manifest: ") + e.what());
  }
}

void save_weak_function(const WeakFunction& wf, const fs::path& dir) {
  fs::create_directories(dir);
  json nodes = json::array();
  for (std::size_t q = 0; q < wf.params().size(); ++q) {
    const WeakNode node = wf.node(q);
    const std::string r = numbered("rho", q);
    write_field(dir / r, node.rho.field());
    json vels = json::array();
    for (std::size_t j = 0; j < node.vel.size(); ++j) {
      const std::string v = numbered(("vel" + std::to_string(j + 1)).c_str(), q);
      write_field(dir / v, node.vel[j]);
      vels.push_back(v);
    }
    nodes.push_back({{"rho", r}, {"vel", vels}});
  }
  write_manifest(dir, {{"schema", 1},
                       {"kind", "weak_function"},
                       {"params", grid_to_json(wf.params())},
                       {"target", grid_to_json(wf.target())},
                       {"tolerances", tolerances_json(wf.tolerances())},
                       {"nodes", nodes}});
}

WeakFunction load_weak_function(const fs::path& dir) {
  const json j = read_manifest(dir, "weak_function");
  try {
    const Grid params = grid_from_json(j.at("params"));
    const Grid target = grid_from_json(j.at("target"));
    const DensityTolerances tol = tolerances_from(j.at("tolerances"));
    if (j.at("nodes").size() != params.size()) throw IoError("manifest node count differs from the parameter grid");
    std::vector<WeakNode> nodes;
    for (const json& n : j.at("nodes")) {
      ScalarField r = read_field(dir / n.at("rho").get<std::string>()).scalar();
      require_same_grid(r.grid(), target, "stored weak function");
      WeakNode node{DensityField(std::move(r), tol), {}};
      for (const json& v : n.at("vel")) node.vel.push_back(read_field(dir / v.get<std::string>()).vector());
      if (node.vel.size() != params.dim()) throw IoError("stored node has the wrong number of velocities");
      nodes.push_back(std::move(node));
    }
    return WeakFunction(params, target, materialized_family(params, std::move(nodes)), tol);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed weak function manifest: ") + e.what());
  }
}

}  // namespace weakform
