#ifndef MTFE_MESH_HPP
#define MTFE_MESH_HPP

#include "mtfe/core.hpp"

#include <optional>
#include <vector>

namespace mtfe {

// Provenance record for meshes generated from a structured box grid.
struct StructuredDesc {
  int n = 0;
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
};

// Constant affine data of one simplex: vertex positions, barycentric gradients,
// unsigned volume and diameter.
struct CellFrame {
  int dim = 2;
  std::array<Vec3, 4> vertex{};
  std::array<Vec3, 4> grad_lambda{};
  double volume = 0.0;
  double diameter = 0.0;
};

// Orthonormal frame of a 3D edge: tangent from the lower-index to the
// higher-index endpoint, n1 the normalized projection of the least-aligned
// coordinate axis, n2 = t x n1.
struct EdgeFrame {
  Vec3 t, n1, n2;
};

// Conforming simplicial mesh with canonical (sorted ascending) entity tuples.
// Facets are edges in 2D and triangles in 3D.
struct Mesh {
  int dim = 2;
  std::vector<Vec3> vertices;
  std::vector<std::array<Index, 4>> cells;  // sorted; [3] = -1 in 2D

  std::vector<std::array<Index, 2>> edges;    // lexicographically ordered pairs
  std::vector<std::array<Index, 3>> tri_faces;  // 3D only

  // cell -> entity tables.
  // 2D: cell_edges[c][k] = edge opposite local vertex k (k = 0,1,2).
  // 3D: cell_edges[c][k] over local pairs (01,02,03,12,13,23);
  //     cell_faces[c][k] = face opposite local vertex k.
  std::vector<std::array<Index, 6>> cell_edges;
  std::vector<std::array<Index, 4>> cell_faces;

  // facet incidence: lower cell index first, -1 second entry on the boundary.
  std::vector<std::array<Index, 2>> facet_cells;
  // Unit normal: outward on the boundary, otherwise pointing from the
  // lower-indexed towards the higher-indexed incident cell.
  std::vector<Vec3> facet_normal;
  std::vector<double> facet_measure;

  std::vector<char> vertex_on_boundary;
  std::vector<char> edge_on_boundary;
  std::vector<char> facet_on_boundary;
  // Boundary vertices where the box boundary is not differentiable
  // (2D corners; 3D box edges and corners), detected geometrically.
  std::vector<char> vertex_nonsmooth;

  std::vector<double> cell_vol;
  std::vector<double> cell_diam;
  std::vector<double> vertex_h;  // mean incident-cell diameter

  // 2D newest-vertex bisection state: local edge index of the refinement edge.
  std::vector<signed char> nvb_edge;

  std::optional<StructuredDesc> structured;
  // Volume of the meshed domain when known (box builders and the refiners
  // propagate it); enables the partition check in validate().
  std::optional<double> domain_volume;
  Vec3 box_lo = Vec3::Zero(), box_hi = Vec3::Zero();

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }
  int n_facets() const {
    return dim == 2 ? n_edges() : static_cast<int>(tri_faces.size());
  }
  int verts_per_cell() const { return dim + 1; }
  int facets_per_cell() const { return dim + 1; }

  // Vertices of facet f as a sorted tuple (2 ids in 2D, 3 in 3D).
  std::array<Index, 3> facet_vertices(Index f) const;
  // Facet opposite local vertex k of cell c.
  Index cell_facet(Index c, int k) const;
  // Local facet index of facet f within cell c (-1 if not incident).
  int local_facet_index(Index c, Index f) const;

  CellFrame frame(Index c) const;
  EdgeFrame edge_frame(Index e) const;  // 3D
  // Orthonormal tangents of facet f (1 vector in 2D, 2 in 3D).
  std::array<Vec3, 2> facet_tangents(Index f) const;
  Vec3 facet_centroid(Index f) const;

  double shape_regularity() const;  // max circumradius/inradius over cells
  void validate() const;
};

Mesh build_structured_2d(int n, const Vec3& lo, const Vec3& hi);
Mesh build_structured_3d(int n, const Vec3& lo, const Vec3& hi);
// Assembles entity tables for raw cell/vertex data (used for standalone cells).
Mesh build_from_cells(int dim, std::vector<Vec3> vertices,
                      std::vector<std::array<Index, 4>> cells);

// Red refinement in 2D; structured regeneration at 2n in 3D.
Mesh refine_uniform(const Mesh& m);
// Newest-vertex bisection of the marked cells with conforming closure (2D).
Mesh refine_nvb(const Mesh& m, const std::vector<Index>& marked);
// Random perturbation of interior vertices, bounded by rel_amplitude times the
// shortest incident edge. Boundary vertices stay put.
Mesh perturb_interior(const Mesh& m, double rel_amplitude, unsigned seed);

CellFrame make_cell_frame(int dim, const std::array<Vec3, 4>& verts);

}  // namespace mtfe

#endif
