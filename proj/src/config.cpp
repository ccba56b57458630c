#include "scaffold/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

namespace scaffold {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(section + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(section + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key + ": wrong type");
  }
}

Eigen::Vector3d read_vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
  try {
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  } catch (const json::exception&) {
    throw ConfigError(where + ": expected numbers");
  }
}

int parse_tag(const std::string& key, const std::string& where) {
  try {
    std::size_t used = 0;
    const int tag = std::stoi(key, &used);
    if (used == key.size()) return tag;
  } catch (const std::exception&) {
  }
  throw ConfigError(where + ": physical tag '" + key + "' is not an integer");
}

template <typename Enum>
Enum parse_enum(const json& v, const std::string& where,
                std::initializer_list<std::pair<const char*, Enum>> options) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    for (const auto& [name, value] : options) {
      if (s == name) return value;
    }
  }
  std::string names;
  for (const auto& [name, value] : options) names += std::string(names.empty() ? "" : ", ") + name;
  throw ConfigError(where + ": expected one of " + names);
}

void parse_mesh(const json& j, MeshSource& mesh, const std::filesystem::path& base) {
  check_keys(j, "mesh", {"box", "path", "facet_tags", "element_tags"});
  if (j.contains("box") == j.contains("path")) {
    throw ConfigError("mesh: give exactly one of 'box' or 'path'");
  }
  if (j.contains("box")) {
    const json& b = j["box"];
    check_keys(b, "mesh.box", {"cells", "lengths", "fixture"});
    BoxSpec spec;
    if (b.contains("cells")) {
      const json& c = b["cells"];
      if (!c.is_array() || c.size() != 3) throw ConfigError("mesh.box.cells: expected [nx, ny, nz]");
      for (int i = 0; i < 3; ++i) {
        if (!c[i].is_number_integer() || c[i].get<int>() < 1) {
          throw ConfigError("mesh.box.cells: expected positive integers");
        }
        spec.cells[i] = c[i].get<int>();
      }
    }
    if (b.contains("lengths")) spec.lengths = read_vec3(b["lengths"], "mesh.box.lengths");
    if (spec.lengths.minCoeff() <= 0) throw ConfigError("mesh.box.lengths: must be positive");
    if (b.contains("fixture")) {
      const json& f = b["fixture"];
      check_keys(f, "mesh.box.fixture", {"axis", "max_coord"});
      FixtureSlab slab;
      read(f, "axis", slab.axis, "mesh.box.fixture");
      read(f, "max_coord", slab.max_coord, "mesh.box.fixture");
      if (slab.axis < 0 || slab.axis > 2) throw ConfigError("mesh.box.fixture.axis: 0, 1 or 2");
      spec.fixture = slab;
    }
    mesh.box = spec;
  } else {
    if (!j["path"].is_string()) throw ConfigError("mesh.path: expected a string");
    mesh.path = j["path"].get<std::string>();
    if (mesh.path.is_relative() && !base.empty()) mesh.path = base / mesh.path;
  }
  if (j.contains("facet_tags")) {
    const json& ft = j["facet_tags"];
    if (!ft.is_object()) throw ConfigError("mesh.facet_tags: expected an object");
    for (const auto& [key, value] : ft.items()) {
      const std::string where = "mesh.facet_tags." + key;
      check_keys(value, where, {"elastic", "diffusion"});
      FacetTags tags;
      if (value.contains("elastic")) {
        tags.elastic = parse_enum<ElasticTag>(value["elastic"], where + ".elastic",
                                              {{"dirichlet", ElasticTag::Dirichlet},
                                               {"neumann_loaded", ElasticTag::NeumannLoaded},
                                               {"neumann_free", ElasticTag::NeumannFree}});
      }
      if (value.contains("diffusion")) {
        tags.diffusion = parse_enum<DiffusionTag>(value["diffusion"], where + ".diffusion",
                                                  {{"dirichlet", DiffusionTag::Dirichlet},
                                                   {"neumann", DiffusionTag::Neumann}});
      }
      mesh.tags.facets[parse_tag(key, "mesh.facet_tags")] = tags;
    }
  }
  if (j.contains("element_tags")) {
    const json& et = j["element_tags"];
    if (!et.is_object()) throw ConfigError("mesh.element_tags: expected an object");
    for (const auto& [key, value] : et.items()) {
      mesh.tags.elements[parse_tag(key, "mesh.element_tags")] = parse_enum<Region>(
          value, "mesh.element_tags." + key,
          {{"design", Region::Design}, {"fixture", Region::Fixture}});
    }
  }
  if (mesh.box && (!mesh.tags.facets.empty() || !mesh.tags.elements.empty())) {
    throw ConfigError("mesh: tag maps apply to mesh files only");
  }
}

void parse_materials(const json& j, MaterialParams& m) {
  const std::string s = "materials";
  check_keys(j, s,
             {"k1", "k2", "k3", "k4", "k6", "k7", "E_scaffold", "E_bone", "E_fixture", "nu", "D0",
              "c_P", "C_P", "stimulus"});
  read(j, "k1", m.k1, s);
  read(j, "k2", m.k2, s);
  read(j, "k3", m.k3, s);
  read(j, "k4", m.k4, s);
  read(j, "k6", m.k6, s);
  read(j, "k7", m.k7, s);
  read(j, "E_scaffold", m.E_scaffold, s);
  read(j, "E_bone", m.E_bone, s);
  read(j, "E_fixture", m.E_fixture, s);
  read(j, "nu", m.nu, s);
  read(j, "D0", m.D0, s);
  read(j, "c_P", m.c_P, s);
  read(j, "C_P", m.C_P, s);
  if (j.contains("stimulus")) {
    const json& st = j["stimulus"];
    check_keys(st, "materials.stimulus", {"law", "lo", "hi", "width"});
    if (st.contains("law")) {
      m.stimulus.law = parse_enum<StimulusLaw>(
          st["law"], "materials.stimulus.law",
          {{"frobenius", StimulusLaw::Frobenius}, {"bandpass", StimulusLaw::Bandpass}});
    }
    read(st, "lo", m.stimulus.lo, "materials.stimulus");
    read(st, "hi", m.stimulus.hi, "materials.stimulus");
    read(st, "width", m.stimulus.width, "materials.stimulus");
  }
}

void parse_load(const json& j, LoadSpec& load) {
  check_keys(j, "load", {"compressive_force_N", "tractions", "displacements"});
  if (j.contains("compressive_force_N")) {
    double f = 0.0;
    read(j, "compressive_force_N", f, "load");
    load.compressive_force = f;
    if (j.contains("tractions")) {
      throw ConfigError("load: 'compressive_force_N' and 'tractions' are exclusive");
    }
  }
  if (j.contains("tractions")) {
    if (!j["tractions"].is_object()) throw ConfigError("load.tractions: expected an object");
    for (const auto& [key, value] : j["tractions"].items()) {
      load.explicit_load.tractions[parse_tag(key, "load.tractions")] =
          read_vec3(value, "load.tractions." + key);
    }
  }
  if (j.contains("displacements")) {
    if (!j["displacements"].is_object()) throw ConfigError("load.displacements: expected an object");
    for (const auto& [key, value] : j["displacements"].items()) {
      load.explicit_load.displacements[parse_tag(key, "load.displacements")] =
          read_vec3(value, "load.displacements." + key);
    }
  }
}

void parse_objective(const json& j, ObjectiveSpec& o) {
  check_keys(j, "objective", {"kind", "p", "eta", "beta", "sense"});
  if (j.contains("kind")) {
    o.kind = parse_enum<ObjectiveKind>(j["kind"], "objective.kind",
                                       {{"max_energy_lp", ObjectiveKind::MaxEnergyLp},
                                        {"min_energy_lp", ObjectiveKind::MinEnergyLp},
                                        {"bone_volume", ObjectiveKind::BoneVolume},
                                        {"none", ObjectiveKind::None}});
  }
  read(j, "p", o.p, "objective");
  read(j, "eta", o.eta, "objective");
  read(j, "beta", o.beta, "objective");
  if (j.contains("sense")) {
    o.sense = parse_enum<Sense>(j["sense"], "objective.sense",
                                {{"min", Sense::Min}, {"max", Sense::Max}});
  }
}

void parse_optimizer(const json& j, OptimizerOptions& o, double& rho0) {
  const std::string s = "optimizer";
  check_keys(j, s,
             {"tau0", "auto_step_fraction", "max_iter", "shrink", "grow", "max_growth",
              "max_halvings", "tol_g", "rho0"});
  read(j, "tau0", o.tau0, s);
  read(j, "auto_step_fraction", o.auto_step_fraction, s);
  read(j, "max_iter", o.max_iter, s);
  read(j, "shrink", o.shrink, s);
  read(j, "grow", o.grow, s);
  read(j, "max_growth", o.max_growth, s);
  read(j, "max_halvings", o.max_halvings, s);
  read(j, "tol_g", o.tol_g, s);
  read(j, "rho0", rho0, s);
  if (o.max_iter < 0 || o.max_halvings < 0) throw ConfigError("optimizer: negative iteration count");
  if (!(o.shrink > 0 && o.shrink < 1)) throw ConfigError("optimizer.shrink: must be in (0, 1)");
  if (!(o.grow >= 1)) throw ConfigError("optimizer.grow: must be >= 1");
}

}  // namespace

double RunConfig::initial_density() const {
  return rho0 < 0 ? 0.5 * (materials.c_P + materials.C_P) : rho0;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& ex) {
    throw ConfigError(std::string("config is not valid JSON: ") + ex.what());
  }
  check_keys(root, "config",
             {"mesh", "materials", "load", "schedule", "elastic_mode", "fixture_active", "objective",
              "optimizer", "solver", "gradient", "output", "seed"});
  if (!root.contains("mesh")) throw ConfigError("config: 'mesh' section is required");

  RunConfig cfg;
  parse_mesh(root["mesh"], cfg.mesh, base_dir);
  if (root.contains("materials")) parse_materials(root["materials"], cfg.materials);
  if (root.contains("load")) parse_load(root["load"], cfg.load);
  if (root.contains("schedule")) {
    check_keys(root["schedule"], "schedule", {"T", "dt"});
    read(root["schedule"], "T", cfg.schedule.horizon, "schedule");
    read(root["schedule"], "dt", cfg.schedule.dt, "schedule");
  }
  if (root.contains("elastic_mode")) {
    cfg.forward.elastic_mode = parse_enum<ElasticMode>(
        root["elastic_mode"], "elastic_mode",
        {{"pure_neumann", ElasticMode::PureNeumann}, {"hard_dirichlet", ElasticMode::HardDirichlet}});
  }
  read(root, "fixture_active", cfg.forward.fixture_active, "config");
  if (root.contains("objective")) parse_objective(root["objective"], cfg.objective);
  if (root.contains("optimizer")) parse_optimizer(root["optimizer"], cfg.optimizer, cfg.rho0);
  if (root.contains("solver")) {
    check_keys(root["solver"], "solver", {"cg_tol", "cg_max_iter", "density_slack"});
    read(root["solver"], "cg_tol", cfg.forward.cg.tol, "solver");
    read(root["solver"], "cg_max_iter", cfg.forward.cg.max_iter, "solver");
    read(root["solver"], "density_slack", cfg.forward.density_slack, "solver");
  }
  if (root.contains("gradient")) {
    check_keys(root["gradient"], "gradient", {"fd_step", "tolerance", "directions", "cg_tol"});
    read(root["gradient"], "fd_step", cfg.gradient.fd_step, "gradient");
    read(root["gradient"], "tolerance", cfg.gradient.tolerance, "gradient");
    read(root["gradient"], "directions", cfg.gradient.directions, "gradient");
    read(root["gradient"], "cg_tol", cfg.gradient.cg_tol, "gradient");
    if (!(cfg.gradient.fd_step > 0)) throw ConfigError("gradient.fd_step: must be positive");
    if (cfg.gradient.directions < 0) throw ConfigError("gradient.directions: must be >= 0");
  }
  if (root.contains("output")) {
    check_keys(root["output"], "output", {"dir", "every", "snapshot_every"});
    std::string dir = cfg.output.dir.string();
    read(root["output"], "dir", dir, "output");
    cfg.output.dir = dir;
    read(root["output"], "every", cfg.output.every, "output");
    read(root["output"], "snapshot_every", cfg.output.snapshot_every, "output");
    if (cfg.output.every < 1) throw ConfigError("output.every: must be >= 1");
    if (cfg.output.snapshot_every < 0) throw ConfigError("output.snapshot_every: must be >= 0");
  }
  read(root, "seed", cfg.seed, "config");

  try {
    cfg.schedule.steps();
    cfg.materials.validate();
    cfg.objective.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what());
  }
  const double rho0 = cfg.initial_density();
  if (!(rho0 >= cfg.materials.c_P && rho0 <= cfg.materials.C_P)) {
    throw ConfigError("optimizer.rho0: outside [c_P, C_P]");
  }
  if (cfg.load.compressive_force && !cfg.mesh.box) {
    throw ConfigError("load.compressive_force_N: only defined for box meshes");
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError(path);
  std::ostringstream text;
  text << in.rdbuf();
  RunConfig cfg = parse_config(text.str(), path.parent_path());
  cfg.source = path;
  return cfg;
}

TetMesh build_mesh(const RunConfig& config) {
  if (config.mesh.box) return generate_box_mesh(*config.mesh.box);
  if (!std::filesystem::exists(config.mesh.path)) throw MissingInputError(config.mesh.path);
  return load_mesh(config.mesh.path, config.mesh.tags);
}

LoadCase build_load(const RunConfig& config, const TetMesh& mesh) {
  LoadCase load = config.load.explicit_load;
  if (config.load.compressive_force) {
    load.tractions = compressive_box_load(mesh, *config.load.compressive_force);
  }
  // Every referenced tag must exist on the boundary.
  auto check = [&](int tag, const char* what) {
    for (const auto& f : mesh.facets) {
      if (f.physical == tag) return;
    }
    throw ConfigError(std::string("load.") + what + ": physical tag " + std::to_string(tag) +
                      " has no boundary facets");
  };
  for (const auto& [tag, value] : load.tractions) check(tag, "tractions");
  for (const auto& [tag, value] : load.displacements) check(tag, "displacements");
  return load;
}

}  // namespace scaffold
