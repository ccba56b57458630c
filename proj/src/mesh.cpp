#include "scaffold/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace scaffold {

namespace {

using FaceKey = std::array<int, 3>;

FaceKey sorted_face(int a, int b, int c) {
  FaceKey key{a, b, c};
  std::sort(key.begin(), key.end());
  return key;
}

// Local faces of a tet, opposite to vertex 0..3.
constexpr std::array<std::array<int, 3>, 4> kTetFaces{{{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

std::map<FaceKey, int> face_counts(const TetMesh& mesh) {
  std::map<FaceKey, int> counts;
  for (const auto& tet : mesh.tets) {
    for (const auto& f : kTetFaces) {
      ++counts[sorted_face(tet[f[0]], tet[f[1]], tet[f[2]])];
    }
  }
  return counts;
}

}  // namespace

bool TetMesh::has_fixture() const {
  return std::any_of(regions.begin(), regions.end(), [](Region r) { return r == Region::Fixture; });
}

Eigen::Vector3d TetMesh::centroid(int e) const {
  const auto& t = tets[e];
  return 0.25 * (nodes[t[0]] + nodes[t[1]] + nodes[t[2]] + nodes[t[3]]);
}

void validate_mesh(const TetMesh& mesh) {
  const int n = mesh.num_nodes();
  if (mesh.tets.empty()) throw MeshValidationError("mesh has no tetrahedra");
  if (mesh.regions.size() != mesh.tets.size()) {
    throw MeshValidationError("region tags do not match element count");
  }
  auto in_range = [n](int i) { return i >= 0 && i < n; };

  std::set<std::array<int, 4>> seen;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& t = mesh.tets[e];
    if (!std::all_of(t.begin(), t.end(), in_range)) {
      throw MeshValidationError("tet " + std::to_string(e) + " references a node out of range");
    }
    auto key = t;
    std::sort(key.begin(), key.end());
    if (std::adjacent_find(key.begin(), key.end()) != key.end()) {
      throw MeshValidationError("tet " + std::to_string(e) + " repeats a node");
    }
    if (!seen.insert(key).second) {
      throw MeshValidationError("tet " + std::to_string(e) + " is listed twice");
    }
    const auto geom = tet_geometry<double>(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]],
                                           mesh.nodes[t[3]]);
    if (!(geom.volume > kDegenerateVolume)) {
      throw MeshValidationError("tet " + std::to_string(e) + " is inverted or degenerate (volume " +
                                std::to_string(geom.volume) + ")");
    }
  }

  const auto counts = face_counts(mesh);
  for (const auto& [face, count] : counts) {
    if (count > 2) throw MeshValidationError("non-manifold face shared by more than two tets");
  }

  std::set<FaceKey> tagged;
  for (std::size_t i = 0; i < mesh.facets.size(); ++i) {
    const auto& f = mesh.facets[i].nodes;
    if (!std::all_of(f.begin(), f.end(), in_range)) {
      throw MeshValidationError("facet " + std::to_string(i) + " references a node out of range");
    }
    const auto key = sorted_face(f[0], f[1], f[2]);
    const auto it = counts.find(key);
    if (it == counts.end()) {
      throw MeshValidationError("facet " + std::to_string(i) + " is not a face of any tet");
    }
    if (it->second != 1) {
      throw MeshValidationError("facet " + std::to_string(i) + " lies in the interior");
    }
    if (!tagged.insert(key).second) {
      throw MeshValidationError("facet " + std::to_string(i) + " is listed twice");
    }
  }
  for (const auto& [face, count] : counts) {
    if (count == 1 && !tagged.count(face)) {
      throw MeshValidationError("boundary face (" + std::to_string(face[0]) + "," +
                                std::to_string(face[1]) + "," + std::to_string(face[2]) +
                                ") carries no boundary tag");
    }
  }
}

TetMesh load_mesh(const std::filesystem::path& path, const TagMap& tags) {
  std::ifstream in(path);
  if (!in) throw MeshParseError("cannot open mesh file '" + path.string() + "'");

  TetMesh mesh;
  std::unordered_map<long, int> node_index;
  struct RawTet {
    std::array<long, 4> nodes;
    int physical;
  };
  struct RawTri {
    std::array<long, 3> nodes;
    int physical;
  };
  std::vector<RawTet> raw_tets;
  std::vector<RawTri> raw_tris;
  bool have_format = false;
  bool have_nodes = false;
  bool have_elements = false;

  auto fail = [&](const std::string& what) {
    throw MeshParseError(path.string() + ": " + what);
  };
  auto expect_end = [&](const std::string& section) {
    std::string line;
    in >> line;
    if (line != "$End" + section) fail("missing $End" + section);
  };

  std::string token;
  while (in >> token) {
    if (token == "$MeshFormat") {
      double version = 0;
      int file_type = -1, data_size = 0;
      if (!(in >> version >> file_type >> data_size)) fail("malformed $MeshFormat");
      if (version < 2.0 || version >= 3.0) fail("only MSH 2.x is supported");
      if (file_type != 0) fail("only ASCII MSH files are supported");
      expect_end("MeshFormat");
      have_format = true;
    } else if (token == "$Nodes") {
      long count = 0;
      if (!(in >> count) || count < 0) fail("malformed node count");
      mesh.nodes.reserve(count);
      for (long i = 0; i < count; ++i) {
        long id;
        double x, y, z;
        if (!(in >> id >> x >> y >> z)) fail("malformed node record");
        if (!node_index.emplace(id, static_cast<int>(mesh.nodes.size())).second) {
          fail("duplicate node id " + std::to_string(id));
        }
        mesh.nodes.emplace_back(x, y, z);
      }
      expect_end("Nodes");
      have_nodes = true;
    } else if (token == "$Elements") {
      long count = 0;
      if (!(in >> count) || count < 0) fail("malformed element count");
      std::string line;
      std::getline(in, line);
      for (long i = 0; i < count; ++i) {
        if (!std::getline(in, line)) fail("truncated $Elements section");
        std::istringstream rec(line);
        long id;
        int type, ntags;
        if (!(rec >> id >> type >> ntags) || ntags < 0) fail("malformed element record");
        std::vector<int> etags(ntags);
        for (auto& t : etags) {
          if (!(rec >> t)) fail("malformed element tags");
        }
        const int physical = ntags > 0 ? etags[0] : 0;
        if (type == 4) {
          RawTet t{{}, physical};
          for (auto& v : t.nodes) {
            if (!(rec >> v)) fail("malformed tetrahedron");
          }
          raw_tets.push_back(t);
        } else if (type == 2) {
          RawTri t{{}, physical};
          for (auto& v : t.nodes) {
            if (!(rec >> v)) fail("malformed triangle");
          }
          raw_tris.push_back(t);
        }
        // Points, lines and other element types carry no information we use.
      }
      expect_end("Elements");
      have_elements = true;
    } else if (token.size() > 1 && token[0] == '$' && token.rfind("$End", 0) != 0) {
      const std::string end = "$End" + token.substr(1);
      std::string skip;
      while (in >> skip && skip != end) {
      }
      if (skip != end) fail("unterminated section " + token);
    } else {
      fail("unexpected token '" + token + "'");
    }
  }
  if (!have_format || !have_nodes || !have_elements) {
    fail("missing $MeshFormat, $Nodes or $Elements section");
  }

  auto lookup = [&](long id) {
    const auto it = node_index.find(id);
    if (it == node_index.end()) fail("element references unknown node " + std::to_string(id));
    return it->second;
  };
  for (const auto& t : raw_tets) {
    mesh.tets.push_back({lookup(t.nodes[0]), lookup(t.nodes[1]), lookup(t.nodes[2]),
                         lookup(t.nodes[3])});
    const auto it = tags.elements.find(t.physical);
    mesh.regions.push_back(it == tags.elements.end() ? Region::Design : it->second);
  }
  for (const auto& t : raw_tris) {
    const auto it = tags.facets.find(t.physical);
    if (it == tags.facets.end()) {
      throw MeshValidationError("boundary facet with physical tag " + std::to_string(t.physical) +
                                " has no entry in the tag map");
    }
    mesh.facets.push_back(
        {{lookup(t.nodes[0]), lookup(t.nodes[1]), lookup(t.nodes[2])}, t.physical, it->second});
  }
  validate_mesh(mesh);
  return mesh;
}

TetMesh generate_box_mesh(const BoxSpec& spec) {
  const auto [nx, ny, nz] = spec.cells;
  if (nx < 1 || ny < 1 || nz < 1) throw std::invalid_argument("box subdivisions must be >= 1");
  if (!(spec.lengths.array() > 0.0).all()) throw std::invalid_argument("box lengths must be > 0");

  TetMesh mesh;
  auto node_id = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };
  mesh.nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1));
  for (int k = 0; k <= nz; ++k) {
    for (int j = 0; j <= ny; ++j) {
      for (int i = 0; i <= nx; ++i) {
        mesh.nodes.emplace_back(spec.lengths.x() * i / nx, spec.lengths.y() * j / ny,
                                spec.lengths.z() * k / nz);
      }
    }
  }

  constexpr std::array<std::array<int, 3>, 6> kPermutations{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        for (const auto& perm : kPermutations) {
          std::array<int, 3> pos{i, j, k};
          std::array<int, 4> tet{};
          tet[0] = node_id(pos[0], pos[1], pos[2]);
          for (int s = 0; s < 3; ++s) {
            ++pos[perm[s]];
            tet[s + 1] = node_id(pos[0], pos[1], pos[2]);
          }
          const auto g = tet_geometry<double>(mesh.nodes[tet[0]], mesh.nodes[tet[1]],
                                              mesh.nodes[tet[2]], mesh.nodes[tet[3]]);
          if (g.volume < 0) std::swap(tet[2], tet[3]);
          mesh.tets.push_back(tet);
        }
      }
    }
  }

  mesh.regions.assign(mesh.tets.size(), Region::Design);
  if (spec.fixture) {
    if (spec.fixture->axis < 0 || spec.fixture->axis > 2) {
      throw std::invalid_argument("fixture axis must be 0, 1 or 2");
    }
    for (int e = 0; e < mesh.num_elements(); ++e) {
      if (mesh.centroid(e)[spec.fixture->axis] < spec.fixture->max_coord) {
        mesh.regions[e] = Region::Fixture;
      }
    }
  }

  // Boundary faces are those seen once; classify by the integer z-layer of their nodes.
  const auto counts = face_counts(mesh);
  auto layer = [&](int node) { return node / ((nx + 1) * (ny + 1)); };
  for (const auto& tet : mesh.tets) {
    for (const auto& f : kTetFaces) {
      const std::array<int, 3> nodes{tet[f[0]], tet[f[1]], tet[f[2]]};
      if (counts.at(sorted_face(nodes[0], nodes[1], nodes[2])) != 1) continue;
      BoundaryFacet facet;
      facet.nodes = nodes;
      const bool bottom = layer(nodes[0]) == 0 && layer(nodes[1]) == 0 && layer(nodes[2]) == 0;
      const bool top = layer(nodes[0]) == nz && layer(nodes[1]) == nz && layer(nodes[2]) == nz;
      if (bottom || top) {
        facet.physical = bottom ? kBoxBottom : kBoxTop;
        facet.tags = {ElasticTag::NeumannLoaded, DiffusionTag::Dirichlet};
      } else {
        facet.physical = kBoxLateral;
        facet.tags = {ElasticTag::NeumannFree, DiffusionTag::Neumann};
      }
      mesh.facets.push_back(facet);
    }
  }
  validate_mesh(mesh);
  return mesh;
}

ElementGeometry<double> element_geometry(const TetMesh& mesh, int e) {
  if (e < 0 || e >= mesh.num_elements()) throw std::out_of_range("element index out of range");
  const auto& t = mesh.tets[e];
  auto geom = tet_geometry<double>(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]],
                                   mesh.nodes[t[3]]);
  if (!(geom.volume >= kDegenerateVolume)) {
    throw MeshError("degenerate element " + std::to_string(e));
  }
  return geom;
}

double facet_area(const TetMesh& mesh, const BoundaryFacet& facet) {
  const auto& a = mesh.nodes[facet.nodes[0]];
  const auto& b = mesh.nodes[facet.nodes[1]];
  const auto& c = mesh.nodes[facet.nodes[2]];
  return 0.5 * (b - a).cross(c - a).norm();
}

Eigen::Vector3d facet_centroid(const TetMesh& mesh, const BoundaryFacet& facet) {
  return (mesh.nodes[facet.nodes[0]] + mesh.nodes[facet.nodes[1]] + mesh.nodes[facet.nodes[2]]) /
         3.0;
}

PartitionReport validate_boundary_partition(const TetMesh& mesh, ElasticMode mode) {
  PartitionReport report;
  bool any_dirichlet = false;
  for (const auto& f : mesh.facets) {
    const double area = facet_area(mesh, f);
    report.total_area += area;
    switch (f.tags.elastic) {
      case ElasticTag::Dirichlet:
        report.elastic_dirichlet_area += area;
        any_dirichlet = true;
        break;
      case ElasticTag::NeumannLoaded:
        report.elastic_loaded_area += area;
        break;
      case ElasticTag::NeumannFree:
        report.elastic_free_area += area;
        break;
    }
    if (f.tags.diffusion == DiffusionTag::Dirichlet) {
      report.diffusion_dirichlet_area += area;
    } else {
      report.diffusion_neumann_area += area;
    }
  }
  if (report.diffusion_dirichlet_area <= 0.0) {
    throw BoundaryPartitionError("no diffusion Dirichlet boundary: a=1 saturation boundary missing");
  }
  if (mode == ElasticMode::HardDirichlet) {
    if (report.elastic_dirichlet_area <= 0.0) {
      throw BoundaryPartitionError("hard-Dirichlet mode requires elastic Dirichlet facets");
    }
  } else {
    if (any_dirichlet) {
      throw BoundaryPartitionError("pure-Neumann mode forbids elastic Dirichlet facets");
    }
    report.rigid_body_handling = true;
  }
  return report;
}

}  // namespace scaffold
