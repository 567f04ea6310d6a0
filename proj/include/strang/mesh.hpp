// Two-dimensional polytopal meshes: geometry, validation, perturbation and
// a small line-oriented text format.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace strang {

using Point = Eigen::Vector2d;

/// Raised for malformed or invalid meshes; the message carries the diagnostic.
class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kNoCell = -1;

struct Face {
  std::array<std::size_t, 2> vertices{};
  // cells[0] is the lower-index neighbour (T1); cells[1] is T2 or kNoCell.
  std::array<int, 2> cells{kNoCell, kNoCell};
  double measure = 0.0;
  double diameter = 0.0;
  Point centroid = Point::Zero();
  Point point = Point::Zero();    // x_F, defaults to the centroid
  Point normal = Point::Zero();   // unit normal pointing out of cells[0]
  Point tangent = Point::Zero();  // unit vector from vertices[0] to vertices[1]

  bool is_boundary() const { return cells[1] == kNoCell; }
};

struct Cell {
  std::vector<std::size_t> vertices;  // counter-clockwise loop
  std::vector<std::size_t> faces;     // faces[i] joins vertices[i] and vertices[i+1]
  std::vector<Point> normals;         // outward unit normals n_TF
  std::vector<double> distances;      // d_TF: distance from x_T to the line of F
  double measure = 0.0;
  double diameter = 0.0;
  Point centroid = Point::Zero();
  Point point = Point::Zero();  // x_T, defaults to the centroid
  int subdomain = 0;

  std::size_t num_faces() const { return faces.size(); }
  /// Local position of global face `f`; throws if `f` is not a face of this cell.
  std::size_t local_index(std::size_t f) const;
};

struct Rectangle {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
};

struct RegularityMetrics {
  double h = 0.0;
  double theta = 0.0;
  double eta_jump = 0.0;
  std::size_t max_faces_per_cell = 0;
};

class Mesh {
 public:
  /// Builds all geometric quantities from vertex coordinates and ccw cell loops
  /// and validates the result. Cell points default to centroids.
  static Mesh from_cells(std::vector<Point> vertices,
                         std::vector<std::vector<std::size_t>> cells,
                         std::vector<int> subdomains = {},
                         std::optional<std::vector<Point>> cell_points = std::nullopt);

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Cell>& cells() const { return cells_; }
  const Face& face(std::size_t f) const { return faces_[f]; }
  const Cell& cell(std::size_t c) const { return cells_[c]; }
  std::size_t num_cells() const { return cells_.size(); }
  std::size_t num_faces() const { return faces_.size(); }
  std::size_t num_vertices() const { return vertices_.size(); }
  const std::vector<std::size_t>& boundary_faces() const { return boundary_faces_; }
  const std::vector<std::size_t>& internal_faces() const { return internal_faces_; }
  int num_subdomains() const;

  /// Copy of this mesh with relocated cell and/or face points. Distances are
  /// recomputed and the mesh is re-validated.
  Mesh with_points(std::optional<std::vector<Point>> cell_points,
                   std::optional<std::vector<Point>> face_points) const;

  /// Throws MeshError describing the first violated invariant.
  void validate() const;

  bool operator==(const Mesh& other) const;

 private:
  void compute_distances();

  std::vector<Point> vertices_;
  std::vector<Face> faces_;
  std::vector<Cell> cells_;
  std::vector<std::size_t> boundary_faces_;
  std::vector<std::size_t> internal_faces_;
};

/// Uniform nx-by-ny rectangles. Subdomains are vertical strips of equal width;
/// n_subdomains_x must divide nx so that strip interfaces are mesh lines.
Mesh build_cartesian(std::size_t nx, std::size_t ny, const Rectangle& domain = {},
                     std::size_t n_subdomains_x = 1);

/// Moves interior vertices by a seeded pseudo-random offset of at most
/// amplitude times the shortest incident edge. Vertices on the boundary or on a
/// subdomain interface stay fixed. Cell points are reset to centroids.
Mesh perturb(const Mesh& mesh, double amplitude, std::uint64_t seed);

RegularityMetrics regularity_metrics(const Mesh& mesh);

Mesh read_mesh(const std::string& path);
Mesh parse_mesh(const std::string& text);
void write_mesh(const Mesh& mesh, const std::string& path);
std::string format_mesh(const Mesh& mesh);

}  // namespace strang
