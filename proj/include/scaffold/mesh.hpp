#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace scaffold {

// Units throughout the library: mm, N, MPa, weeks.

enum class ElasticTag { Dirichlet, NeumannLoaded, NeumannFree };
enum class DiffusionTag { Dirichlet, Neumann };
enum class Region { Design, Fixture };

struct FacetTags {
  ElasticTag elastic = ElasticTag::NeumannFree;
  DiffusionTag diffusion = DiffusionTag::Neumann;
};

struct BoundaryFacet {
  std::array<int, 3> nodes{};
  int physical = 0;
  FacetTags tags;
};

/// Maps Gmsh physical tags onto the two boundary partitions and element regions.
/// Element tags missing from `elements` default to Region::Design; facet tags
/// missing from `facets` are a validation error.
struct TagMap {
  std::map<int, FacetTags> facets;
  std::map<int, Region> elements;
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MeshParseError : public MeshError {
 public:
  using MeshError::MeshError;
};

class MeshValidationError : public MeshError {
 public:
  using MeshError::MeshError;
};

struct TetMesh {
  std::vector<Eigen::Vector3d> nodes;
  std::vector<std::array<int, 4>> tets;
  std::vector<BoundaryFacet> facets;
  std::vector<Region> regions;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_elements() const { return static_cast<int>(tets.size()); }
  bool has_fixture() const;
  Eigen::Vector3d centroid(int e) const;
};

/// Checks every TetMesh invariant; throws MeshValidationError naming the
/// first offending tet or facet.
void validate_mesh(const TetMesh& mesh);

TetMesh load_mesh(const std::filesystem::path& path, const TagMap& tags);

// Physical ids used by the structured box generator.
inline constexpr int kBoxBottom = 1;
inline constexpr int kBoxTop = 2;
inline constexpr int kBoxLateral = 3;

/// Elements whose centroid coordinate along `axis` is below `max_coord` are FIXTURE.
struct FixtureSlab {
  int axis = 0;
  double max_coord = 0.0;
};

struct BoxSpec {
  std::array<int, 3> cells{1, 1, 1};
  Eigen::Vector3d lengths = Eigen::Vector3d::Ones();
  std::optional<FixtureSlab> fixture;
};

/// Structured box [0,Lx]x[0,Ly]x[0,Lz]; every hex is split into 6 path tetrahedra
/// sharing the main diagonal. Bottom/top faces are loaded and carry the
/// diffusion Dirichlet condition, lateral faces are free and no-flux.
TetMesh generate_box_mesh(const BoxSpec& spec);

template <typename Scalar>
struct ElementGeometry {
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  Scalar volume{};
  std::array<Vec3, 4> grads;
};

/// Volume and constant P1 basis gradients of the tetrahedron p0..p3.
/// Returns a negative volume for inverted orientation; callers decide.
template <typename Scalar>
ElementGeometry<Scalar> tet_geometry(const Eigen::Matrix<Scalar, 3, 1>& p0,
                                     const Eigen::Matrix<Scalar, 3, 1>& p1,
                                     const Eigen::Matrix<Scalar, 3, 1>& p2,
                                     const Eigen::Matrix<Scalar, 3, 1>& p3) {
  Eigen::Matrix<Scalar, 3, 3> jac;
  jac.col(0) = p1 - p0;
  jac.col(1) = p2 - p0;
  jac.col(2) = p3 - p0;
  const Scalar det = jac.determinant();
  ElementGeometry<Scalar> geom;
  geom.volume = det / Scalar(6);
  // Rows of J^{-1} are the gradients of the barycentric coordinates 1..3.
  const Eigen::Matrix<Scalar, 3, 3> inv = jac.inverse();
  geom.grads[1] = inv.row(0).transpose();
  geom.grads[2] = inv.row(1).transpose();
  geom.grads[3] = inv.row(2).transpose();
  geom.grads[0] = -(geom.grads[1] + geom.grads[2] + geom.grads[3]);
  return geom;
}

inline constexpr double kDegenerateVolume = 1e-14;

/// Throws MeshError for elements with volume below kDegenerateVolume.
ElementGeometry<double> element_geometry(const TetMesh& mesh, int e);

double facet_area(const TetMesh& mesh, const BoundaryFacet& facet);
Eigen::Vector3d facet_centroid(const TetMesh& mesh, const BoundaryFacet& facet);

enum class ElasticMode { HardDirichlet, PureNeumann };

struct PartitionReport {
  double elastic_dirichlet_area = 0.0;
  double elastic_loaded_area = 0.0;
  double elastic_free_area = 0.0;
  double diffusion_dirichlet_area = 0.0;
  double diffusion_neumann_area = 0.0;
  double total_area = 0.0;
  bool rigid_body_handling = false;
};

class BoundaryPartitionError : public MeshError {
 public:
  using MeshError::MeshError;
};

PartitionReport validate_boundary_partition(const TetMesh& mesh, ElasticMode mode);

}  // namespace scaffold
