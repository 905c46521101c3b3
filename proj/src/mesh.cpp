#include "mtfe/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace mtfe {

namespace {

// Deterministic uniform double in [-1, 1).
double symmetric_uniform(std::mt19937_64& rng) {
  return 2.0 * ((rng() >> 11) * 0x1p-53) - 1.0;
}

std::array<Index, 2> sorted_pair(Index a, Index b) {
  return a < b ? std::array<Index, 2>{a, b} : std::array<Index, 2>{b, a};
}

std::array<Index, 3> sorted_triple(Index a, Index b, Index c) {
  std::array<Index, 3> t{a, b, c};
  std::sort(t.begin(), t.end());
  return t;
}

// Local vertex pairs of the six tet edges, in the canonical order used by
// cell_edges in 3D.
constexpr int kTetEdge[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

double circum_inradius_ratio(const CellFrame& fr) {
  if (fr.dim == 2) {
    const double a = (fr.vertex[1] - fr.vertex[2]).norm();
    const double b = (fr.vertex[0] - fr.vertex[2]).norm();
    const double c = (fr.vertex[0] - fr.vertex[1]).norm();
    const double K = fr.volume;
    const double R = a * b * c / (4.0 * K);
    const double r = 2.0 * K / (a + b + c);
    return R / r;
  }
  Eigen::Matrix3d A;
  Eigen::Vector3d rhs;
  for (int i = 1; i < 4; ++i) {
    const Vec3 d = fr.vertex[i] - fr.vertex[0];
    A.row(i - 1) = 2.0 * d.transpose();
    rhs(i - 1) = fr.vertex[i].squaredNorm() - fr.vertex[0].squaredNorm();
  }
  const Vec3 center = A.partialPivLu().solve(rhs);
  const double R = (center - fr.vertex[0]).norm();
  double area_sum = 0.0;
  for (int k = 0; k < 4; ++k) {
    std::array<Vec3, 3> p;
    int m = 0;
    for (int i = 0; i < 4; ++i)
      if (i != k) p[m++] = fr.vertex[i];
    area_sum += 0.5 * ((p[1] - p[0]).cross(p[2] - p[0])).norm();
  }
  const double r = 3.0 * fr.volume / area_sum;
  return R / r;
}

void assign_nvb_edges(Mesh& m) {
  if (m.dim != 2) return;
  m.nvb_edge.assign(m.cells.size(), -1);
  for (Index c = 0; c < m.n_cells(); ++c) {
    const auto& cell = m.cells[c];
    double best = -1.0;
    int best_k = 0;
    for (int k = 0; k < 3; ++k) {
      const Index a = cell[(k + 1) % 3], b = cell[(k + 2) % 3];
      const double len = (m.vertices[a] - m.vertices[b]).norm();
      if (len > best * (1.0 + 1e-12)) {
        best = len;
        best_k = k;
      }
    }
    m.nvb_edge[c] = static_cast<signed char>(best_k);
  }
}

// Builds every derived table from dim/vertices/cells.
void finalize(Mesh& m) {
  const int nc = m.n_cells();
  const int nv = m.n_vertices();
  for (auto& cell : m.cells) {
    std::sort(cell.begin(), cell.begin() + m.dim + 1);
    if (m.dim == 2) cell[3] = -1;
  }

  std::map<std::array<Index, 2>, Index> edge_ids;
  for (const auto& cell : m.cells) {
    if (m.dim == 2) {
      for (int k = 0; k < 3; ++k)
        edge_ids.emplace(sorted_pair(cell[(k + 1) % 3], cell[(k + 2) % 3]), 0);
    } else {
      for (const auto& le : kTetEdge)
        edge_ids.emplace(sorted_pair(cell[le[0]], cell[le[1]]), 0);
    }
  }
  m.edges.clear();
  m.edges.reserve(edge_ids.size());
  for (auto& [key, id] : edge_ids) {
    id = static_cast<Index>(m.edges.size());
    m.edges.push_back(key);
  }

  m.cell_edges.assign(nc, {-1, -1, -1, -1, -1, -1});
  for (Index c = 0; c < nc; ++c) {
    const auto& cell = m.cells[c];
    if (m.dim == 2) {
      for (int k = 0; k < 3; ++k)
        m.cell_edges[c][k] =
            edge_ids.at(sorted_pair(cell[(k + 1) % 3], cell[(k + 2) % 3]));
    } else {
      for (int k = 0; k < 6; ++k)
        m.cell_edges[c][k] =
            edge_ids.at(sorted_pair(cell[kTetEdge[k][0]], cell[kTetEdge[k][1]]));
    }
  }

  m.tri_faces.clear();
  m.cell_faces.assign(nc, {-1, -1, -1, -1});
  if (m.dim == 3) {
    std::map<std::array<Index, 3>, Index> face_ids;
    for (const auto& cell : m.cells)
      for (int k = 0; k < 4; ++k) {
        std::array<Index, 3> f;
        int mm = 0;
        for (int i = 0; i < 4; ++i)
          if (i != k) f[mm++] = cell[i];
        face_ids.emplace(sorted_triple(f[0], f[1], f[2]), 0);
      }
    m.tri_faces.reserve(face_ids.size());
    for (auto& [key, id] : face_ids) {
      id = static_cast<Index>(m.tri_faces.size());
      m.tri_faces.push_back(key);
    }
    for (Index c = 0; c < nc; ++c)
      for (int k = 0; k < 4; ++k) {
        std::array<Index, 3> f;
        int mm = 0;
        for (int i = 0; i < 4; ++i)
          if (i != k) f[mm++] = m.cells[c][i];
        m.cell_faces[c][k] = face_ids.at(sorted_triple(f[0], f[1], f[2]));
      }
  }

  const int nf = m.n_facets();
  m.facet_cells.assign(nf, {-1, -1});
  for (Index c = 0; c < nc; ++c)
    for (int k = 0; k <= m.dim; ++k) {
      const Index f = m.cell_facet(c, k);
      auto& fc = m.facet_cells[f];
      if (fc[0] < 0)
        fc[0] = c;
      else if (fc[1] < 0)
        fc[1] = c;
      else
        throw InternalError("mesh: facet with more than two incident cells");
    }

  m.cell_vol.resize(nc);
  m.cell_diam.resize(nc);
  for (Index c = 0; c < nc; ++c) {
    const CellFrame fr = m.frame(c);
    m.cell_vol[c] = fr.volume;
    m.cell_diam[c] = fr.diameter;
  }

  m.vertex_h.assign(nv, 0.0);
  std::vector<int> incident(nv, 0);
  for (Index c = 0; c < nc; ++c)
    for (int k = 0; k <= m.dim; ++k) {
      m.vertex_h[m.cells[c][k]] += m.cell_diam[c];
      ++incident[m.cells[c][k]];
    }
  for (int v = 0; v < nv; ++v)
    if (incident[v] > 0) m.vertex_h[v] /= incident[v];

  m.facet_measure.resize(nf);
  m.facet_normal.resize(nf);
  m.facet_on_boundary.assign(nf, 0);
  for (Index f = 0; f < nf; ++f) {
    const auto fv = m.facet_vertices(f);
    Vec3 n;
    if (m.dim == 2) {
      const Vec3 d = m.vertices[fv[1]] - m.vertices[fv[0]];
      m.facet_measure[f] = d.norm();
      n = Vec3(d.y(), -d.x(), 0.0).normalized();
    } else {
      const Vec3 c = (m.vertices[fv[1]] - m.vertices[fv[0]])
                         .cross(m.vertices[fv[2]] - m.vertices[fv[0]]);
      m.facet_measure[f] = 0.5 * c.norm();
      n = c.normalized();
    }
    const auto& fc = m.facet_cells[f];
    m.facet_on_boundary[f] = fc[1] < 0;
    Vec3 ref;
    const Vec3 mid = m.facet_centroid(f);
    if (fc[1] < 0) {
      // outward: away from the single incident cell's centroid
      Vec3 cen = Vec3::Zero();
      for (int k = 0; k <= m.dim; ++k) cen += m.vertices[m.cells[fc[0]][k]];
      cen /= m.dim + 1;
      ref = mid - cen;
    } else {
      Vec3 cl = Vec3::Zero(), ch = Vec3::Zero();
      for (int k = 0; k <= m.dim; ++k) {
        cl += m.vertices[m.cells[fc[0]][k]];
        ch += m.vertices[m.cells[fc[1]][k]];
      }
      ref = (ch - cl) / (m.dim + 1);
    }
    if (n.dot(ref) < 0.0) n = -n;
    m.facet_normal[f] = n;
  }

  m.vertex_on_boundary.assign(nv, 0);
  m.edge_on_boundary.assign(m.edges.size(), 0);
  std::map<std::array<Index, 2>, Index> edge_lookup;
  if (m.dim == 3)
    for (Index e = 0; e < m.n_edges(); ++e) edge_lookup.emplace(m.edges[e], e);
  for (Index f = 0; f < nf; ++f) {
    if (!m.facet_on_boundary[f]) continue;
    const auto fv = m.facet_vertices(f);
    for (int k = 0; k < m.dim; ++k) m.vertex_on_boundary[fv[k]] = 1;
    if (m.dim == 2) {
      m.edge_on_boundary[f] = 1;
    } else {
      for (int k = 0; k < 3; ++k)
        m.edge_on_boundary[edge_lookup.at(
            sorted_pair(fv[k], fv[(k + 1) % 3]))] = 1;
    }
  }

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
  Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
  for (const auto& p : m.vertices) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  if (m.dim == 2) lo.z() = hi.z() = 0.0;
  m.box_lo = lo;
  m.box_hi = hi;

  m.vertex_nonsmooth.assign(nv, 0);
  const Vec3 extent = hi - lo;
  for (int v = 0; v < nv; ++v) {
    if (!m.vertex_on_boundary[v]) continue;
    int at_bound = 0;
    for (int a = 0; a < m.dim; ++a) {
      const double tol = 1e-12 * std::max(extent[a], 1.0);
      if (std::abs(m.vertices[v][a] - lo[a]) < tol ||
          std::abs(m.vertices[v][a] - hi[a]) < tol)
        ++at_bound;
    }
    m.vertex_nonsmooth[v] = at_bound >= 2;
  }

  if (m.dim == 2 && m.nvb_edge.size() != m.cells.size()) assign_nvb_edges(m);
}

}  // namespace

CellFrame make_cell_frame(int dim, const std::array<Vec3, 4>& verts) {
  CellFrame fr;
  fr.dim = dim;
  fr.vertex = verts;
  // lambda_i(x) = a_i + g_i . x with lambda_i(p_j) = delta_ij
  Eigen::MatrixXd M(dim + 1, dim + 1);
  for (int j = 0; j <= dim; ++j) {
    M(j, 0) = 1.0;
    for (int a = 0; a < dim; ++a) M(j, a + 1) = verts[j][a];
  }
  const Eigen::MatrixXd Minv =
      M.fullPivLu().solve(Eigen::MatrixXd::Identity(dim + 1, dim + 1));
  for (int i = 0; i <= dim; ++i) {
    fr.grad_lambda[i] = Vec3::Zero();
    for (int a = 0; a < dim; ++a) fr.grad_lambda[i][a] = Minv(a + 1, i);
  }
  if (dim == 2) {
    const Vec3 d1 = verts[1] - verts[0], d2 = verts[2] - verts[0];
    fr.volume = 0.5 * std::abs(d1.x() * d2.y() - d1.y() * d2.x());
  } else {
    fr.volume = std::abs((verts[1] - verts[0])
                             .cross(verts[2] - verts[0])
                             .dot(verts[3] - verts[0])) /
                6.0;
  }
  fr.diameter = 0.0;
  for (int i = 0; i <= dim; ++i)
    for (int j = i + 1; j <= dim; ++j)
      fr.diameter = std::max(fr.diameter, (verts[i] - verts[j]).norm());
  return fr;
}

std::array<Index, 3> Mesh::facet_vertices(Index f) const {
  if (dim == 2) return {edges[f][0], edges[f][1], -1};
  return tri_faces[f];
}

Index Mesh::cell_facet(Index c, int k) const {
  return dim == 2 ? cell_edges[c][k] : cell_faces[c][k];
}

int Mesh::local_facet_index(Index c, Index f) const {
  for (int k = 0; k <= dim; ++k)
    if (cell_facet(c, k) == f) return k;
  return -1;
}

CellFrame Mesh::frame(Index c) const {
  std::array<Vec3, 4> v{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  for (int k = 0; k <= dim; ++k) v[k] = vertices[cells[c][k]];
  return make_cell_frame(dim, v);
}

EdgeFrame Mesh::edge_frame(Index e) const {
  internal_check(dim == 3, "edge_frame: 3D only");
  EdgeFrame fr;
  fr.t = (vertices[edges[e][1]] - vertices[edges[e][0]]).normalized();
  int axis = 0;
  double best = std::numeric_limits<double>::max();
  for (int a = 0; a < 3; ++a)
    if (std::abs(fr.t[a]) < best - 1e-15) {
      best = std::abs(fr.t[a]);
      axis = a;
    }
  Vec3 ek = Vec3::Zero();
  ek[axis] = 1.0;
  fr.n1 = (ek - fr.t[axis] * fr.t).normalized();
  fr.n2 = fr.t.cross(fr.n1);
  return fr;
}

std::array<Vec3, 2> Mesh::facet_tangents(Index f) const {
  const auto fv = facet_vertices(f);
  if (dim == 2) {
    const Vec3 t = (vertices[fv[1]] - vertices[fv[0]]).normalized();
    return {t, Vec3::Zero()};
  }
  const Vec3 t1 = (vertices[fv[1]] - vertices[fv[0]]).normalized();
  return {t1, facet_normal[f].cross(t1)};
}

Vec3 Mesh::facet_centroid(Index f) const {
  const auto fv = facet_vertices(f);
  Vec3 c = Vec3::Zero();
  for (int k = 0; k < dim; ++k) c += vertices[fv[k]];
  return c / dim;
}

double Mesh::shape_regularity() const {
  double worst = 0.0;
  for (Index c = 0; c < n_cells(); ++c)
    worst = std::max(worst, circum_inradius_ratio(frame(c)));
  return worst;
}

void Mesh::validate() const {
  require(dim == 2 || dim == 3, "mesh: dim must be 2 or 3");
  for (const auto& cell : cells) {
    for (int k = 0; k <= dim; ++k)
      require(cell[k] >= 0 && cell[k] < n_vertices(), "mesh: vertex id range");
    for (int k = 0; k + 1 <= dim; ++k)
      require(cell[k] < cell[k + 1], "mesh: cell tuple not sorted ascending");
  }
  double vol_sum = 0.0;
  for (Index c = 0; c < n_cells(); ++c) {
    const double scale = std::pow(cell_diam[c], dim);
    internal_check(cell_vol[c] > 1e-13 * scale, "mesh: degenerate cell");
    vol_sum += cell_vol[c];
  }
  if (domain_volume) {
    internal_check(std::abs(vol_sum - *domain_volume) <=
                       1e-9 * std::abs(*domain_volume),
                   "mesh: cell volumes do not partition the domain");
    // Boundary facets must lie on the box boundary (catches hanging nodes).
    for (Index f = 0; f < n_facets(); ++f) {
      if (!facet_on_boundary[f]) continue;
      const Vec3 mid = facet_centroid(f);
      bool on_box = false;
      for (int a = 0; a < dim; ++a) {
        const double tol = 1e-10 * std::max(box_hi[a] - box_lo[a], 1.0);
        if (std::abs(mid[a] - box_lo[a]) < tol ||
            std::abs(mid[a] - box_hi[a]) < tol)
          on_box = true;
      }
      internal_check(on_box, "mesh: interior facet with one incident cell");
    }
  }
  for (Index f = 0; f < n_facets(); ++f)
    internal_check(facet_cells[f][0] >= 0, "mesh: facet without cells");
}

Mesh build_from_cells(int dim, std::vector<Vec3> vertices,
                      std::vector<std::array<Index, 4>> cells) {
  Mesh m;
  m.dim = dim;
  m.vertices = std::move(vertices);
  m.cells = std::move(cells);
  finalize(m);
  return m;
}

Mesh build_structured_2d(int n, const Vec3& lo, const Vec3& hi) {
  require(n >= 1, "build_structured_2d: n >= 1");
  require(hi.x() > lo.x() && hi.y() > lo.y(), "build_structured_2d: empty box");
  Mesh m;
  m.dim = 2;
  const double hx = (hi.x() - lo.x()) / n, hy = (hi.y() - lo.y()) / n;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      m.vertices.emplace_back(lo.x() + i * hx, lo.y() + j * hy, 0.0);
  const auto vid = [n](int i, int j) { return Index(j * (n + 1) + i); };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      // diagonal from (i, j) to (i+1, j+1)
      m.cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), -1});
      m.cells.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1), -1});
    }
  finalize(m);
  m.structured = StructuredDesc{n, Vec3(lo.x(), lo.y(), 0), Vec3(hi.x(), hi.y(), 0)};
  m.domain_volume = (hi.x() - lo.x()) * (hi.y() - lo.y());
  m.validate();
  return m;
}

Mesh build_structured_3d(int n, const Vec3& lo, const Vec3& hi) {
  require(n >= 1, "build_structured_3d: n >= 1");
  require(hi.x() > lo.x() && hi.y() > lo.y() && hi.z() > lo.z(),
          "build_structured_3d: empty box");
  Mesh m;
  m.dim = 3;
  const Vec3 h = (hi - lo) / n;
  const auto vid = [n](int i, int j, int k) {
    return Index((k * (n + 1) + j) * (n + 1) + i);
  };
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i)
        m.vertices.emplace_back(lo.x() + i * h.x(), lo.y() + j * h.y(),
                                lo.z() + k * h.z());
  // Kuhn subdivision: one tet per permutation of the axis walk through a cube.
  constexpr int kPerm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                               {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (const auto& perm : kPerm) {
          int c[3] = {i, j, k};
          std::array<Index, 4> tet;
          tet[0] = vid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[perm[s]];
            tet[s + 1] = vid(c[0], c[1], c[2]);
          }
          m.cells.push_back(tet);
        }
  finalize(m);
  m.structured = StructuredDesc{n, lo, hi};
  m.domain_volume =
      (hi.x() - lo.x()) * (hi.y() - lo.y()) * (hi.z() - lo.z());
  m.validate();
  return m;
}

Mesh refine_uniform(const Mesh& m) {
  if (m.dim == 3) {
    if (!m.structured)
      throw UnsupportedError(
          "refine_uniform: 3D refinement requires a structured mesh");
    return build_structured_3d(2 * m.structured->n, m.structured->lo,
                               m.structured->hi);
  }
  Mesh out;
  out.dim = 2;
  out.vertices = m.vertices;
  std::map<std::array<Index, 2>, Index> midpoint;
  const auto mid = [&](Index a, Index b) {
    const auto key = sorted_pair(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const Index id = static_cast<Index>(out.vertices.size());
    out.vertices.push_back(0.5 * (m.vertices[a] + m.vertices[b]));
    midpoint.emplace(key, id);
    return id;
  };
  for (const auto& cell : m.cells) {
    const Index v0 = cell[0], v1 = cell[1], v2 = cell[2];
    const Index m01 = mid(v0, v1), m02 = mid(v0, v2), m12 = mid(v1, v2);
    out.cells.push_back({v0, m01, m02, -1});
    out.cells.push_back({v1, m01, m12, -1});
    out.cells.push_back({v2, m02, m12, -1});
    out.cells.push_back({m01, m02, m12, -1});
  }
  finalize(out);
  if (m.structured)
    out.structured =
        StructuredDesc{2 * m.structured->n, m.structured->lo, m.structured->hi};
  out.domain_volume = m.domain_volume;
  out.validate();
  return out;
}

Mesh refine_nvb(const Mesh& m, const std::vector<Index>& marked) {
  if (m.dim != 2) throw UnsupportedError("refine_nvb: 2D only");
  require(m.nvb_edge.size() == m.cells.size(), "refine_nvb: missing NVB state");
  for (Index c : marked)
    require(c >= 0 && c < m.n_cells(), "refine_nvb: marked cell out of range");

  // Working cell (a, b, peak): refinement edge (a, b), newest vertex `peak`.
  struct WCell {
    Index a, b, peak;
  };
  std::vector<WCell> work;
  work.reserve(m.cells.size());
  for (Index c = 0; c < m.n_cells(); ++c) {
    const auto& cell = m.cells[c];
    const int k = m.nvb_edge[c];
    work.push_back({cell[(k + 1) % 3], cell[(k + 2) % 3], cell[k]});
  }
  std::vector<Vec3> verts = m.vertices;
  std::map<std::array<Index, 2>, Index> midpoint;
  const auto midpoint_of = [&](Index a, Index b) {
    const auto key = sorted_pair(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const Index id = static_cast<Index>(verts.size());
    verts.push_back(0.5 * (verts[a] + verts[b]));
    midpoint.emplace(key, id);
    return id;
  };
  const auto bisect = [&](std::size_t i) {
    const WCell cell = work[i];
    const Index mp = midpoint_of(cell.a, cell.b);
    work[i] = {cell.a, cell.peak, mp};
    work.push_back({cell.b, cell.peak, mp});
  };

  std::vector<char> do_bisect(work.size(), 0);
  for (Index c : marked) do_bisect[c] = 1;
  for (std::size_t i = 0; i < do_bisect.size(); ++i)
    if (do_bisect[i]) bisect(i);

  // Conforming closure: bisect any cell owning an edge whose midpoint exists.
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < work.size(); ++i) {
      const WCell& w = work[i];
      const std::array<std::array<Index, 2>, 3> es = {
          sorted_pair(w.a, w.b), sorted_pair(w.a, w.peak),
          sorted_pair(w.b, w.peak)};
      for (const auto& e : es)
        if (midpoint.count(e)) {
          bisect(i);
          changed = true;
          break;
        }
    }
  }

  Mesh out;
  out.dim = 2;
  out.vertices = std::move(verts);
  out.nvb_edge.resize(work.size());
  for (std::size_t i = 0; i < work.size(); ++i) {
    std::array<Index, 4> cell{work[i].a, work[i].b, work[i].peak, -1};
    std::sort(cell.begin(), cell.begin() + 3);
    out.cells.push_back(cell);
    for (int k = 0; k < 3; ++k)
      if (cell[k] == work[i].peak) out.nvb_edge[i] = static_cast<signed char>(k);
  }
  finalize(out);
  out.domain_volume = m.domain_volume;
  out.validate();
  return out;
}

Mesh perturb_interior(const Mesh& m, double rel_amplitude, unsigned seed) {
  require(rel_amplitude >= 0.0 && rel_amplitude < 0.5,
          "perturb_interior: amplitude in [0, 0.5)");
  std::vector<double> min_edge(m.n_vertices(),
                               std::numeric_limits<double>::max());
  for (const auto& e : m.edges) {
    const double len = (m.vertices[e[0]] - m.vertices[e[1]]).norm();
    min_edge[e[0]] = std::min(min_edge[e[0]], len);
    min_edge[e[1]] = std::min(min_edge[e[1]], len);
  }
  double amp = rel_amplitude;
  for (int attempt = 0; attempt < 6; ++attempt) {
    std::mt19937_64 rng(seed + 77771u * attempt);
    Mesh out;
    out.dim = m.dim;
    out.vertices = m.vertices;
    out.cells = m.cells;
    for (int v = 0; v < m.n_vertices(); ++v) {
      if (m.vertex_on_boundary[v]) continue;
      for (int a = 0; a < m.dim; ++a)
        out.vertices[v][a] += amp * min_edge[v] * symmetric_uniform(rng);
    }
    finalize(out);
    if (m.dim == 2) out.nvb_edge = m.nvb_edge;
    out.domain_volume = m.domain_volume;
    try {
      out.validate();
      return out;
    } catch (const Error&) {
      amp *= 0.5;  // retry gentler
    }
  }
  throw InternalError("perturb_interior: could not keep the mesh valid");
}

}  // namespace mtfe
