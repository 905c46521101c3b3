#include "mtfe/femspace.hpp"

#include "mtfe/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace mtfe {

namespace {

bool is_vertex_kind(DofKind k) {
  return k == DofKind::VertexValue || k == DofKind::VertexGrad ||
         k == DofKind::VertexHess;
}
bool is_edge_kind(DofKind k) {
  return k == DofKind::EdgeValue || k == DofKind::EdgeNormal;
}
bool is_face_kind(DofKind k) {
  return k == DofKind::FaceValue || k == DofKind::FaceNormal;
}

bool is_facet_normal_kind(DofKind k, int dim) {
  return dim == 2 ? k == DofKind::EdgeNormal : k == DofKind::FaceNormal;
}

// Entity-local slot lists shared by all entities of one dimension, plus the
// category/position decoding of every layout entry.
struct SlotLayout {
  std::vector<DofDescriptor> vertex, edge, face, cell;
  // per layout entry: 0 vertex, 1 edge, 2 face, 3 cell, 4 relaxed duplicate
  std::vector<int> category;
  std::vector<int> pos;  // slot (or duplicate counter) within the category
  int n_dup = 0;
};

int slot_pos(const std::vector<DofDescriptor>& slots, const DofDescriptor& d) {
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (slots[i].kind == d.kind && slots[i].comp == d.comp &&
        slots[i].expo == d.expo)
      return static_cast<int>(i);
  throw InternalError("femspace: dof slot not found");
}

SlotLayout slot_layout(const ElementSpec& spec, SpaceMode mode) {
  SlotLayout out;
  const int dim = spec.dim();
  const auto& layout = dof_layout(spec);
  for (const auto& d : layout) {
    if (d.entity != 0) continue;
    if (mode == SpaceMode::Relaxed && is_facet_normal_kind(d.kind, dim))
      continue;
    if (is_vertex_kind(d.kind))
      out.vertex.push_back(d);
    else if (is_edge_kind(d.kind))
      out.edge.push_back(d);
    else if (is_face_kind(d.kind))
      out.face.push_back(d);
    else
      out.cell.push_back(d);
  }
  out.category.reserve(layout.size());
  out.pos.reserve(layout.size());
  for (const auto& d : layout) {
    if (mode == SpaceMode::Relaxed && is_facet_normal_kind(d.kind, dim)) {
      out.category.push_back(4);
      out.pos.push_back(out.n_dup++);
    } else if (is_vertex_kind(d.kind)) {
      out.category.push_back(0);
      out.pos.push_back(slot_pos(out.vertex, d));
    } else if (is_edge_kind(d.kind)) {
      out.category.push_back(1);
      out.pos.push_back(slot_pos(out.edge, d));
    } else if (is_face_kind(d.kind)) {
      out.category.push_back(2);
      out.pos.push_back(slot_pos(out.face, d));
    } else {
      out.category.push_back(3);
      out.pos.push_back(slot_pos(out.cell, d));
    }
  }
  return out;
}

std::array<int, 2> tri_edge_ends(int k) {
  switch (k) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
  }
}

void add_plane(std::vector<Vec3>& planes, const Vec3& n) {
  for (const auto& p : planes)
    if (p.dot(n) > 1.0 - 1e-8) return;
  planes.push_back(n);
}

std::array<Vec3, 2> plane_tangents(const Vec3& n) {
  int least = 0;
  for (int a = 1; a < 3; ++a)
    if (std::abs(n[a]) < std::abs(n[least])) least = a;
  const Vec3 t1 = n.cross(Vec3::Unit(least)).normalized();
  return {t1, n.cross(t1)};
}

// Frobenius-isometric coordinates of sym(a b^T) in the (i <= j) pair order.
Eigen::VectorXd embed_sym(const Vec3& a, const Vec3& b) {
  const Mat3 s = 0.5 * (a * b.transpose() + b * a.transpose());
  Eigen::VectorXd v(6);
  const double r2 = std::sqrt(2.0);
  v << s(0, 0), r2 * s(0, 1), r2 * s(0, 2), s(1, 1), r2 * s(1, 2), s(2, 2);
  return v;
}

Eigen::VectorXd hess_scale() {
  Eigen::VectorXd s(6);
  const double r2 = std::sqrt(2.0);
  s << 1.0, r2, r2, 1.0, r2, 1.0;
  return s;
}

void push_fixed(std::vector<ConstraintBlock>& blocks, Index idx) {
  ConstraintBlock b;
  b.start = idx;
  b.size = 1;
  b.n_fix = 1;
  b.Q = Eigen::MatrixXd::Identity(1, 1);
  b.scale = Eigen::VectorXd::Ones(1);
  blocks.push_back(std::move(b));
}

// Orthonormalizes the constrained directions (in scaled coordinates) and
// completes them with canonical axes; no block is stored when they are all
// dependent or empty.
void push_rotated(std::vector<ConstraintBlock>& blocks, Index start, int n,
                  const std::vector<Eigen::VectorXd>& dirs,
                  const Eigen::VectorXd& scale) {
  std::vector<Eigen::VectorXd> rows;
  auto try_add = [&rows](Eigen::VectorXd v, double tol) {
    for (const auto& r : rows) v -= r.dot(v) * r;
    const double nn = v.norm();
    if (nn <= tol) return false;
    rows.push_back(v / nn);
    return true;
  };
  int n_fix = 0;
  for (const auto& d : dirs) {
    if (static_cast<int>(rows.size()) == n) break;
    if (try_add(d, 1e-10 * std::max(1.0, d.norm()))) ++n_fix;
  }
  if (n_fix == 0) return;
  for (int i = 0; i < n && static_cast<int>(rows.size()) < n; ++i)
    try_add(Eigen::VectorXd::Unit(n, i), 1e-6);
  internal_check(static_cast<int>(rows.size()) == n,
                 "femspace: constraint basis completion failed");
  ConstraintBlock b;
  b.start = start;
  b.size = n;
  b.n_fix = n_fix;
  b.Q.resize(n, n);
  for (int r = 0; r < n; ++r) b.Q.row(r) = rows[r].transpose();
  b.scale = scale;
  blocks.push_back(std::move(b));
}

// Outward plane normals of the boundary pieces meeting each vertex (and each
// edge in 3D), collected from the incident boundary facets.
struct BoundaryPlanes {
  std::vector<std::vector<Vec3>> vertex;
  std::vector<std::vector<Vec3>> edge;
};

BoundaryPlanes boundary_planes(const Mesh& m) {
  BoundaryPlanes bp;
  bp.vertex.resize(m.n_vertices());
  if (m.dim == 3) bp.edge.resize(m.n_edges());
  std::unordered_map<std::int64_t, Index> edge_of;
  if (m.dim == 3) {
    edge_of.reserve(m.edges.size() * 2);
    for (Index e = 0; e < m.n_edges(); ++e)
      edge_of[static_cast<std::int64_t>(m.edges[e][0]) * m.n_vertices() +
              m.edges[e][1]] = e;
  }
  for (Index f = 0; f < m.n_facets(); ++f) {
    if (!m.facet_on_boundary[f]) continue;
    const Vec3 n = m.facet_normal[f];
    const auto fv = m.facet_vertices(f);
    const int nfv = m.dim;
    for (int i = 0; i < nfv; ++i) add_plane(bp.vertex[fv[i]], n);
    if (m.dim == 3)
      for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
          const auto it = edge_of.find(
              static_cast<std::int64_t>(fv[i]) * m.n_vertices() + fv[j]);
          internal_check(it != edge_of.end(), "femspace: facet edge missing");
          add_plane(bp.edge[it->second], n);
        }
  }
  return bp;
}

void build_constraints(FeSpace& sp, const SlotLayout& sl) {
  const Mesh& m = *sp.mesh;
  const int dim = m.dim;
  const bool h20 = sp.bc == BcKind::ClampedH20;
  const BoundaryPlanes bp = boundary_planes(m);
  auto& blocks = sp.blocks;

  const int nvs = static_cast<int>(sl.vertex.size());
  const int nes = static_cast<int>(sl.edge.size());
  const int nfs = static_cast<int>(sl.face.size());
  const Index ebase = static_cast<Index>(m.n_vertices()) * nvs;
  const Index fbase = ebase + static_cast<Index>(m.n_edges()) * nes;
  const Index n_faces = dim == 3 ? static_cast<Index>(m.tri_faces.size()) : 0;
  const Index cbase = fbase + n_faces * nfs;
  const Index rbase =
      cbase + static_cast<Index>(m.n_cells() * sl.cell.size());

  for (Index v = 0; v < m.n_vertices(); ++v) {
    if (!m.vertex_on_boundary[v]) continue;
    const Index base = v * nvs;
    const auto& planes = bp.vertex[v];
    for (int s = 0; s < nvs; ++s) {
      const auto& d = sl.vertex[s];
      if (d.kind == DofKind::VertexValue) push_fixed(blocks, base + s);
      if (d.kind == DofKind::VertexGrad && d.comp == 0) {
        std::vector<Eigen::VectorXd> dirs;
        auto dir_of = [dim](const Vec3& t) {
          Eigen::VectorXd u(dim);
          for (int a = 0; a < dim; ++a) u[a] = t[a];
          return u;
        };
        if (h20) {
          for (int a = 0; a < dim; ++a)
            dirs.push_back(Eigen::VectorXd::Unit(dim, a));
        } else {
          for (const auto& n : planes) {
            if (dim == 2) {
              dirs.push_back(dir_of(Vec3(-n.y(), n.x(), 0.0)));
            } else {
              const auto t = plane_tangents(n);
              dirs.push_back(dir_of(t[0]));
              dirs.push_back(dir_of(t[1]));
            }
          }
        }
        push_rotated(blocks, base + s, dim, dirs, Eigen::VectorXd::Ones(dim));
      }
      if (d.kind == DofKind::VertexHess && d.comp == 0) {
        std::vector<Eigen::VectorXd> dirs;
        for (const auto& n : planes) {
          const auto t = plane_tangents(n);
          dirs.push_back(embed_sym(t[0], t[0]));
          dirs.push_back(embed_sym(t[0], t[1]));
          dirs.push_back(embed_sym(t[1], t[1]));
          if (h20) {
            dirs.push_back(embed_sym(t[0], n));
            dirs.push_back(embed_sym(t[1], n));
          }
        }
        push_rotated(blocks, base + s, 6, dirs, hess_scale());
      }
    }
  }

  for (Index e = 0; e < m.n_edges(); ++e) {
    const bool on_bd =
        dim == 2 ? m.facet_on_boundary[e] != 0 : m.edge_on_boundary[e] != 0;
    if (!on_bd) continue;
    const Index base = ebase + e * nes;
    for (int s = 0; s < nes; ++s) {
      const auto& d = sl.edge[s];
      if (d.kind == DofKind::EdgeValue) push_fixed(blocks, base + s);
      if (d.kind != DofKind::EdgeNormal) continue;
      if (dim == 2) {
        if (h20 && sp.mode == SpaceMode::Coupled) push_fixed(blocks, base + s);
        continue;
      }
      if (d.comp != 0) continue;
      internal_check(s + 1 < nes && sl.edge[s + 1].kind == DofKind::EdgeNormal &&
                         sl.edge[s + 1].comp == 1 &&
                         sl.edge[s + 1].expo == d.expo,
                     "femspace: edge normal pair not contiguous");
      std::vector<Eigen::VectorXd> dirs;
      if (h20) {
        dirs.push_back(Eigen::VectorXd::Unit(2, 0));
        dirs.push_back(Eigen::VectorXd::Unit(2, 1));
      } else {
        const EdgeFrame fr = m.edge_frame(e);
        for (const auto& n : bp.edge[e]) {
          const Vec3 mdir = n.cross(fr.t);
          Eigen::VectorXd u(2);
          u << mdir.dot(fr.n1), mdir.dot(fr.n2);
          dirs.push_back(u);
        }
      }
      push_rotated(blocks, base + s, 2, dirs, Eigen::VectorXd::Ones(2));
    }
  }

  if (dim == 3) {
    for (Index f = 0; f < n_faces; ++f) {
      if (!m.facet_on_boundary[f]) continue;
      const Index base = fbase + f * nfs;
      for (int s = 0; s < nfs; ++s) {
        const auto& d = sl.face[s];
        if (d.kind == DofKind::FaceValue) push_fixed(blocks, base + s);
        if (d.kind == DofKind::FaceNormal && h20 &&
            sp.mode == SpaceMode::Coupled)
          push_fixed(blocks, base + s);
      }
    }
  }

  if (sp.mode == SpaceMode::Relaxed && h20) {
    for (Index i = rbase; i < sp.n_global; ++i)
      if (m.facet_on_boundary[sp.dofs[i].entity]) push_fixed(blocks, i);
  }

  std::sort(blocks.begin(), blocks.end(),
            [](const ConstraintBlock& a, const ConstraintBlock& b) {
              return a.start < b.start;
            });
  for (std::size_t i = 1; i < blocks.size(); ++i)
    internal_check(blocks[i].start >= blocks[i - 1].start + blocks[i - 1].size,
                   "femspace: overlapping constraint blocks");
}

void assemble_constraint_matrix(FeSpace& sp) {
  std::vector<Index> block_at(sp.n_global, -1);
  for (std::size_t bi = 0; bi < sp.blocks.size(); ++bi)
    block_at[sp.blocks[bi].start] = static_cast<Index>(bi);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(sp.n_global * 2);
  Index col = 0;
  Index i = 0;
  while (i < sp.n_global) {
    if (block_at[i] >= 0) {
      const auto& b = sp.blocks[block_at[i]];
      for (int r = b.n_fix; r < b.size; ++r) {
        for (int k = 0; k < b.size; ++k) {
          const double val = b.Q(r, k) / b.scale[k];
          if (val != 0.0) trip.emplace_back(b.start + k, col, val);
        }
        ++col;
      }
      i += b.size;
    } else {
      trip.emplace_back(i, col, 1.0);
      ++col;
      ++i;
    }
  }
  sp.n_free = col;
  sp.C.resize(sp.n_global, sp.n_free);
  sp.C.setFromTriplets(trip.begin(), trip.end());
  sp.x_bc = Eigen::VectorXd::Zero(sp.n_global);
}

// --- cached tabulations for the facet and cell checks -----------------------

struct CheckTables {
  QuadRule cell_rule;
  PolyTables cell;        // with second derivatives
  QuadRule facet_param;   // rule in facet parameter coordinates
  std::vector<PolyTables> facet;  // per local facet, with second derivatives
};

const CheckTables& check_tables(const ElementSpec& spec) {
  using Key = std::pair<int, int>;
  static std::map<Key, CheckTables> cache;
  static std::mutex mtx;
  const Key key{static_cast<int>(spec.family), spec.ell};
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  const int dim = spec.dim();
  const int deg = shape_degree(spec);
  const auto& shapes = shape_basis(spec);
  CheckTables t;
  t.cell_rule = simplex_rule(dim, std::max(0, 2 * (deg - 2)));
  t.cell = tabulate(shapes, t.cell_rule, true);

  const int fdeg = 2 * deg - 2;
  if (dim == 2) {
    std::vector<double> gx, gw;
    gauss_legendre_01(fdeg / 2 + 1, gx, gw);
    t.facet_param.dim = 1;
    t.facet_param.degree = fdeg;
    for (std::size_t q = 0; q < gx.size(); ++q) {
      t.facet_param.points.push_back({1.0 - gx[q], gx[q], 0.0, 0.0});
      t.facet_param.weights.push_back(gw[q]);
    }
  } else {
    t.facet_param = simplex_rule(2, fdeg);
  }
  for (int k = 0; k < dim + 1; ++k) {
    QuadRule embedded;
    embedded.dim = dim;
    embedded.degree = fdeg;
    embedded.weights = t.facet_param.weights;
    std::vector<int> kept;
    for (int i = 0; i <= dim; ++i)
      if (i != k) kept.push_back(i);
    for (const auto& p : t.facet_param.points) {
      std::array<double, 4> bary{0.0, 0.0, 0.0, 0.0};
      for (std::size_t i = 0; i < kept.size(); ++i) bary[kept[i]] = p[i];
      embedded.points.push_back(bary);
    }
    t.facet.push_back(tabulate(shapes, embedded, true));
  }
  return cache.emplace(key, std::move(t)).first->second;
}

// Expansion coefficients of the discrete function in the cellwise shape basis.
std::vector<Eigen::VectorXd> shape_coefficients(const FeSpace& sp,
                                                const Eigen::VectorXd& x_full) {
  const Mesh& m = *sp.mesh;
  const int nd = n_dofs(sp.spec);
  std::vector<Eigen::VectorXd> out(m.n_cells());
  Eigen::VectorXd loc(nd);
  for (Index c = 0; c < m.n_cells(); ++c) {
    for (int j = 0; j < nd; ++j) loc[j] = x_full[sp.cell_dofs[c][j]];
    out[c] = nodal_basis(sp.spec, m, c).coeff * loc;
  }
  return out;
}

Mat3 hessian_at(const PolyTables& tab, const Eigen::VectorXd& a,
                const CellFrame& fr, int nv, int q) {
  Mat3 h = Mat3::Zero();
  for (int p = 0; p < n_pairs(nv); ++p) {
    const double dij = tab.d2[p].col(q).dot(a);
    if (dij == 0.0) continue;
    const auto ij = pair_vars(nv, p);
    const Mat3 outer =
        fr.grad_lambda[ij[0]] * fr.grad_lambda[ij[1]].transpose();
    h += dij * (ij[0] == ij[1] ? outer : Mat3(outer + outer.transpose()));
  }
  return h;
}

Vec3 gradient_at(const PolyTables& tab, const Eigen::VectorXd& a,
                 const CellFrame& fr, int nv, int q) {
  Vec3 g = Vec3::Zero();
  for (int i = 0; i < nv; ++i) g += tab.d1[i].col(q).dot(a) * fr.grad_lambda[i];
  return g;
}

}  // namespace

FeSpace build_space(const Mesh& mesh, const ElementSpec& spec, BcKind bc,
                    SpaceMode mode) {
  validate_spec(spec);
  require(mesh.dim == spec.dim(), "build_space: mesh/element dimension clash");
  FeSpace sp;
  sp.spec = spec;
  sp.bc = bc;
  sp.mode = mode;
  sp.mesh = &mesh;

  const SlotLayout sl = slot_layout(spec, mode);
  const auto& layout = dof_layout(spec);
  const int nvs = static_cast<int>(sl.vertex.size());
  const int nes = static_cast<int>(sl.edge.size());
  const int nfs = static_cast<int>(sl.face.size());
  const int ncs = static_cast<int>(sl.cell.size());
  const Index n_faces =
      mesh.dim == 3 ? static_cast<Index>(mesh.tri_faces.size()) : 0;
  const Index ebase = static_cast<Index>(mesh.n_vertices()) * nvs;
  const Index fbase = ebase + static_cast<Index>(mesh.n_edges()) * nes;
  const Index cbase = fbase + n_faces * nfs;
  const Index rbase = cbase + static_cast<Index>(mesh.n_cells()) * ncs;
  sp.n_global = rbase + static_cast<Index>(mesh.n_cells()) * sl.n_dup;

  sp.dofs.resize(sp.n_global);
  sp.cell_dofs.assign(mesh.n_cells(), {});
  for (Index c = 0; c < mesh.n_cells(); ++c) {
    auto& map = sp.cell_dofs[c];
    map.reserve(layout.size());
    for (std::size_t li = 0; li < layout.size(); ++li) {
      const auto& d = layout[li];
      Index idx = -1;
      GlobalDof gd;
      gd.kind = d.kind;
      gd.comp = d.comp;
      gd.expo = d.expo;
      switch (sl.category[li]) {
        case 0: {
          const Index gv = mesh.cells[c][d.entity];
          idx = gv * nvs + sl.pos[li];
          gd.entity_dim = 0;
          gd.entity = gv;
          break;
        }
        case 1: {
          const Index ge = mesh.cell_edges[c][d.entity];
          idx = ebase + ge * nes + sl.pos[li];
          gd.entity_dim = 1;
          gd.entity = ge;
          break;
        }
        case 2: {
          const Index gf = mesh.cell_faces[c][d.entity];
          idx = fbase + gf * nfs + sl.pos[li];
          gd.entity_dim = 2;
          gd.entity = gf;
          break;
        }
        case 3: {
          idx = cbase + c * ncs + sl.pos[li];
          gd.entity_dim = mesh.dim;
          gd.entity = c;
          break;
        }
        default: {
          idx = rbase + c * sl.n_dup + sl.pos[li];
          gd.entity_dim = mesh.dim - 1;
          gd.entity = mesh.dim == 2 ? mesh.cell_edges[c][d.entity]
                                    : mesh.cell_faces[c][d.entity];
          gd.owner_cell = c;
          break;
        }
      }
      map.push_back(idx);
      sp.dofs[idx] = gd;
    }
  }

  if (sp.bc != BcKind::None) build_constraints(sp, sl);
  assemble_constraint_matrix(sp);
  return sp;
}

void set_dirichlet_data(FeSpace& sp, const ScalarField& g) {
  sp.x_bc.setZero();
  if (sp.bc == BcKind::None || sp.blocks.empty()) return;
  const Mesh& m = *sp.mesh;
  Eigen::VectorXd gfull = Eigen::VectorXd::Zero(sp.n_global);
  for (Index c = 0; c < m.n_cells(); ++c) {
    bool touches = false;
    for (int k = 0; k <= m.dim; ++k)
      touches = touches || m.vertex_on_boundary[m.cells[c][k]] != 0;
    if (!touches) continue;
    const Eigen::VectorXd vals = dof_values(sp.spec, m, c, g);
    for (int j = 0; j < vals.size(); ++j) gfull[sp.cell_dofs[c][j]] = vals[j];
  }
  for (const auto& b : sp.blocks) {
    Eigen::VectorXd y =
        b.Q * (b.scale.asDiagonal() * gfull.segment(b.start, b.size));
    y.tail(b.size - b.n_fix).setZero();
    sp.x_bc.segment(b.start, b.size) =
        (b.Q.transpose() * y).cwiseQuotient(b.scale);
  }
}

Eigen::VectorXd expand(const FeSpace& sp, const Eigen::VectorXd& x_free) {
  require(x_free.size() == sp.n_free, "expand: wrong free vector size");
  return sp.C * x_free + sp.x_bc;
}

Eigen::VectorXd interpolate(const FeSpace& sp, const ScalarField& u) {
  const Mesh& m = *sp.mesh;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(sp.n_global);
  for (Index c = 0; c < m.n_cells(); ++c) {
    const Eigen::VectorXd vals = dof_values(sp.spec, m, c, u);
    for (int j = 0; j < vals.size(); ++j) x[sp.cell_dofs[c][j]] = vals[j];
  }
  return x;
}

PolyValue eval_global(const FeSpace& sp, const Eigen::VectorXd& x_full,
                      Index cell, const std::array<double, 4>& bary) {
  require(x_full.size() == sp.n_global, "eval_global: wrong dof vector size");
  const Mesh& m = *sp.mesh;
  const auto& shapes = shape_basis(sp.spec);
  const int nd = n_dofs(sp.spec);
  Eigen::VectorXd loc(nd);
  for (int j = 0; j < nd; ++j) loc[j] = x_full[sp.cell_dofs[cell][j]];
  const Eigen::VectorXd a = nodal_basis(sp.spec, m, cell).coeff * loc;
  const CellFrame fr = m.frame(cell);
  PolyValue out;
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    if (a[static_cast<int>(s)] == 0.0) continue;
    const PolyValue pv = eval_derivatives(shapes[s], fr, bary);
    out.value += a[static_cast<int>(s)] * pv.value;
    out.gradient += a[static_cast<int>(s)] * pv.gradient;
    out.hessian += a[static_cast<int>(s)] * pv.hessian;
  }
  return out;
}

double check_jump_moments(const FeSpace& sp, const Eigen::VectorXd& x_free) {
  const Mesh& m = *sp.mesh;
  const int dim = m.dim;
  const int nv = dim + 1;
  const auto& tabs = check_tables(sp.spec);
  const auto coef = shape_coefficients(sp, expand(sp, x_free));
  const auto monos = monomial_exponents(dim - 1, sp.spec.ell - 2);
  const int nq = tabs.facet_param.size();
  const double jac_ref = dim == 2 ? 1.0 : reference_measure(2);

  std::vector<CellFrame> frames(m.n_cells());
  for (Index c = 0; c < m.n_cells(); ++c) frames[c] = m.frame(c);

  double worst = 0.0;
  for (Index f = 0; f < m.n_facets(); ++f) {
    if (m.facet_on_boundary[f]) continue;
    const Index cp = m.facet_cells[f][0], cm = m.facet_cells[f][1];
    const int kp = m.local_facet_index(cp, f), km = m.local_facet_index(cm, f);
    const auto& tp = tabs.facet[kp];
    const auto& tm = tabs.facet[km];
    const Vec3 n = m.facet_normal[f];
    const double jac = m.facet_measure[f] / jac_ref;

    Eigen::VectorXd jump(nq);
    double nrm2 = 0.0;
    for (int q = 0; q < nq; ++q) {
      const double dnp = gradient_at(tp, coef[cp], frames[cp], nv, q).dot(n);
      const double dnm = gradient_at(tm, coef[cm], frames[cm], nv, q).dot(n);
      jump[q] = dnp - dnm;
      nrm2 += tabs.facet_param.weights[q] * (dnp * dnp + dnm * dnm);
    }
    const double scale = std::sqrt(std::max(nrm2 * jac, 0.0));
    for (const auto& expo : monos) {
      double mom = 0.0, qn2 = 0.0;
      for (int q = 0; q < nq; ++q) {
        const double qv = eval_entity_monomial(expo, tabs.facet_param.points[q]);
        mom += tabs.facet_param.weights[q] * jump[q] * qv;
        qn2 += tabs.facet_param.weights[q] * qv * qv;
      }
      const double denom = std::sqrt(qn2 * jac) * scale + 1e-300;
      worst = std::max(worst, std::abs(mom * jac) / denom);
    }
  }
  return worst;
}

MtIdentity check_mt_identity(const FeSpace& sp, const Eigen::VectorXd& x_free) {
  const Mesh& m = *sp.mesh;
  const int dim = m.dim;
  const int nv = dim + 1;
  const auto& tabs = check_tables(sp.spec);
  const auto coef = shape_coefficients(sp, expand(sp, x_free));

  std::vector<CellFrame> frames(m.n_cells());
  for (Index c = 0; c < m.n_cells(); ++c) frames[c] = m.frame(c);

  MtIdentity out;
  const double cell_ref = reference_measure(dim);
  for (Index c = 0; c < m.n_cells(); ++c) {
    const double jac = m.cell_vol[c] / cell_ref;
    for (int q = 0; q < tabs.cell_rule.size(); ++q) {
      const Mat3 h = hessian_at(tabs.cell, coef[c], frames[c], nv, q);
      const double lap = h.trace();
      const double w = tabs.cell_rule.weights[q] * jac;
      out.hess_sq += w * h.squaredNorm();
      out.lap_sq += w * lap * lap;
    }
  }

  const double jac_ref = dim == 2 ? 1.0 : reference_measure(2);
  const int nq = tabs.facet_param.size();
  for (Index f = 0; f < m.n_facets(); ++f) {
    const Index cp = m.facet_cells[f][0], cm = m.facet_cells[f][1];
    const int kp = m.local_facet_index(cp, f);
    const auto& tp = tabs.facet[kp];
    const Vec3 n = m.facet_normal[f];
    const auto tan = m.facet_tangents(f);
    const double jac = m.facet_measure[f] / jac_ref;
    const int km = cm >= 0 ? m.local_facet_index(cm, f) : -1;

    double acc = 0.0;
    for (int q = 0; q < nq; ++q) {
      double jump = gradient_at(tp, coef[cp], frames[cp], nv, q).dot(n);
      if (cm >= 0)
        jump -= gradient_at(tabs.facet[km], coef[cm], frames[cm], nv, q).dot(n);
      const Mat3 h = hessian_at(tp, coef[cp], frames[cp], nv, q);
      double tt = 0.0;
      for (int i = 0; i < dim - 1; ++i) tt += tan[i].dot(h * tan[i]);
      acc += tabs.facet_param.weights[q] * jump * tt;
    }
    out.face_sum += 2.0 * jac * acc;
  }
  return out;
}

}  // namespace mtfe
