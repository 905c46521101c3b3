#include "mtfe/elements.hpp"

#include "mtfe/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace mtfe {

namespace {

constexpr int kTetEdge[6][2] = {{0, 1}, {0, 2}, {0, 3},
                                {1, 2}, {1, 3}, {2, 3}};

// Local endpoints (ascending) of the 2D edge opposite vertex k.
std::array<int, 2> tri_edge_ends(int k) {
  switch (k) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
  }
}

double multinomial(int total, const std::array<int, 4>& a) {
  double value = 1.0;
  int used = 0;
  for (int i = 0; i < 4; ++i) {
    for (int r = 1; r <= a[i]; ++r) {
      ++used;
      value *= static_cast<double>(used) / r;
    }
  }
  internal_check(used == total, "multinomial exponent mismatch");
  return value;
}

std::vector<BaryPoly> bernstein_basis(int nvars, int degree) {
  std::vector<BaryPoly> out;
  for (const auto& mono : homogeneous_monomials(nvars, degree)) {
    const auto& [expo, coeff] = *mono.terms.begin();
    BaryPoly p(nvars);
    p.add_term(expo, coeff * multinomial(degree, expo));
    out.push_back(p);
  }
  return out;
}

// Scales a bubble so its largest sampled magnitude is one.
BaryPoly normalized(const BaryPoly& p, const QuadRule& rule) {
  double peak = 0.0;
  for (int q = 0; q < rule.size(); ++q)
    peak = std::max(peak, std::abs(p.eval(rule.points[q])));
  internal_check(peak > 0.0, "degenerate enrichment bubble");
  return (1.0 / peak) * p;
}

QuadRule points_only_rule(int dim, std::vector<std::array<double, 4>> pts) {
  QuadRule rule;
  rule.dim = dim;
  rule.degree = 0;
  rule.points = std::move(pts);
  rule.weights.assign(rule.points.size(), 0.0);
  return rule;
}

struct ElemTables {
  const std::vector<BaryPoly>* shapes = nullptr;
  PolyTables vert;
  std::vector<double> gx, gw;
  std::vector<PolyTables> edge;
  std::vector<std::array<int, 2>> edge_ends;
  const QuadRule* face_rule = nullptr;
  std::vector<PolyTables> face;
  std::vector<std::array<int, 3>> face_kept;
  const QuadRule* cell_rule = nullptr;
  PolyTables cell;
};

ElemTables build_tables(const std::vector<BaryPoly>& polys, int dim,
                        int max_poly_degree, int max_moment_degree) {
  ElemTables t;
  t.shapes = &polys;
  const int nvars = dim + 1;

  std::vector<std::array<double, 4>> vert_pts;
  for (int v = 0; v < nvars; ++v) {
    std::array<double, 4> b{0, 0, 0, 0};
    b[v] = 1.0;
    vert_pts.push_back(b);
  }
  t.vert = tabulate(polys, points_only_rule(dim, vert_pts), dim == 3);

  const int line_degree = max_poly_degree + max_moment_degree;
  gauss_legendre_01(line_degree / 2 + 2, t.gx, t.gw);
  const int n_edges = dim == 2 ? 3 : 6;
  for (int e = 0; e < n_edges; ++e) {
    std::array<int, 2> ends =
        dim == 2 ? tri_edge_ends(e)
                 : std::array<int, 2>{kTetEdge[e][0], kTetEdge[e][1]};
    t.edge_ends.push_back(ends);
    std::vector<std::array<double, 4>> pts;
    for (double s : t.gx) {
      std::array<double, 4> b{0, 0, 0, 0};
      b[ends[0]] = 1.0 - s;
      b[ends[1]] = s;
      pts.push_back(b);
    }
    t.edge.push_back(tabulate(polys, points_only_rule(dim, pts), false));
  }

  if (dim == 3) {
    t.face_rule = &simplex_rule(2, line_degree);
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> kept{};
      int slot = 0;
      for (int v = 0; v < 4; ++v)
        if (v != f) kept[slot++] = v;
      t.face_kept.push_back(kept);
      std::vector<std::array<double, 4>> pts;
      for (const auto& fp : t.face_rule->points) {
        std::array<double, 4> b{0, 0, 0, 0};
        for (int v = 0; v < 3; ++v) b[kept[v]] = fp[v];
        pts.push_back(b);
      }
      t.face.push_back(tabulate(polys, points_only_rule(dim, pts), false));
    }
  }

  t.cell_rule = &simplex_rule(dim, line_degree);
  t.cell = tabulate(polys, *t.cell_rule, false);
  return t;
}

Eigen::MatrixXd apply_tables(const std::vector<DofDescriptor>& layout,
                             const ElemTables& t, const Mesh& mesh,
                             Index cell) {
  const int dim = mesh.dim;
  const int nvars = dim + 1;
  const CellFrame fr = mesh.frame(cell);
  const int ns = static_cast<int>(t.shapes->size());
  const int ng = static_cast<int>(t.gx.size());
  Eigen::MatrixXd V(layout.size(), ns);

  for (std::size_t j = 0; j < layout.size(); ++j) {
    const DofDescriptor& d = layout[j];
    switch (d.kind) {
      case DofKind::VertexValue:
        V.row(j) = t.vert.val.col(d.entity).transpose();
        break;
      case DofKind::VertexGrad: {
        const double h = mesh.vertex_h[mesh.cells[cell][d.entity]];
        for (int s = 0; s < ns; ++s) {
          double g = 0.0;
          for (int i = 0; i < nvars; ++i)
            g += t.vert.d1[i](s, d.entity) * fr.grad_lambda[i][d.comp];
          V(j, s) = h * g;
        }
        break;
      }
      case DofKind::VertexHess: {
        const double h = mesh.vertex_h[mesh.cells[cell][d.entity]];
        const auto [ci, cj] = pair_vars(3, d.comp);
        for (int s = 0; s < ns; ++s) {
          double acc = 0.0;
          for (int p = 0; p < n_pairs(nvars); ++p) {
            const auto [i, k] = pair_vars(nvars, p);
            const Vec3& gi = fr.grad_lambda[i];
            const Vec3& gk = fr.grad_lambda[k];
            double w = gi[ci] * gk[cj];
            if (i != k) w += gk[ci] * gi[cj];
            acc += t.vert.d2[p](s, d.entity) * w;
          }
          V(j, s) = h * h * acc;
        }
        break;
      }
      case DofKind::EdgeValue: {
        const PolyTables& et = t.edge[d.entity];
        for (int s = 0; s < ns; ++s) {
          double acc = 0.0;
          for (int q = 0; q < ng; ++q)
            acc += t.gw[q] * et.val(s, q) * std::pow(t.gx[q], d.expo[0]);
          V(j, s) = acc;
        }
        break;
      }
      case DofKind::EdgeNormal: {
        const PolyTables& et = t.edge[d.entity];
        Vec3 n;
        double scale;
        if (dim == 2) {
          const Index fid = mesh.cell_edges[cell][d.entity];
          n = mesh.facet_normal[fid];
          scale = mesh.facet_measure[fid];
        } else {
          const Index ge = mesh.cell_edges[cell][d.entity];
          const EdgeFrame ef = mesh.edge_frame(ge);
          n = d.comp == 0 ? ef.n1 : ef.n2;
          scale = (mesh.vertices[mesh.edges[ge][1]] -
                   mesh.vertices[mesh.edges[ge][0]])
                      .norm();
        }
        std::array<double, 4> gdotn{};
        for (int i = 0; i < nvars; ++i) gdotn[i] = fr.grad_lambda[i].dot(n);
        for (int s = 0; s < ns; ++s) {
          double acc = 0.0;
          for (int q = 0; q < ng; ++q) {
            double dn = 0.0;
            for (int i = 0; i < nvars; ++i) dn += et.d1[i](s, q) * gdotn[i];
            acc += t.gw[q] * dn * std::pow(t.gx[q], d.expo[0]);
          }
          V(j, s) = scale * acc;
        }
        break;
      }
      case DofKind::FaceValue:
      case DofKind::FaceNormal: {
        const PolyTables& ft = t.face[d.entity];
        const QuadRule& rule = *t.face_rule;
        const double meas = reference_measure(2);
        const Index fid = mesh.cell_faces[cell][d.entity];
        Vec3 n = mesh.facet_normal[fid];
        std::array<double, 4> gdotn{};
        for (int i = 0; i < nvars; ++i) gdotn[i] = fr.grad_lambda[i].dot(n);
        const double scale = d.kind == DofKind::FaceNormal
                                 ? std::sqrt(2.0 * mesh.facet_measure[fid])
                                 : 1.0;
        for (int s = 0; s < ns; ++s) {
          double acc = 0.0;
          for (int q = 0; q < rule.size(); ++q) {
            double f;
            if (d.kind == DofKind::FaceValue) {
              f = ft.val(s, q);
            } else {
              f = 0.0;
              for (int i = 0; i < nvars; ++i)
                f += ft.d1[i](s, q) * gdotn[i];
            }
            acc += rule.weights[q] * f *
                   eval_entity_monomial(d.expo, rule.points[q]);
          }
          V(j, s) = scale * acc / meas;
        }
        break;
      }
      case DofKind::CellValue: {
        const QuadRule& rule = *t.cell_rule;
        const double meas = reference_measure(dim);
        for (int s = 0; s < ns; ++s) {
          double acc = 0.0;
          for (int q = 0; q < rule.size(); ++q)
            acc += rule.weights[q] * t.cell.val(s, q) *
                   eval_entity_monomial(d.expo, rule.points[q]);
          V(j, s) = acc / meas;
        }
        break;
      }
    }
  }
  return V;
}

struct SpecKey {
  int family;
  int ell;
  bool operator<(const SpecKey& o) const {
    return family != o.family ? family < o.family : ell < o.ell;
  }
};

SpecKey key_of(const ElementSpec& spec) {
  return {static_cast<int>(spec.family), spec.ell};
}

std::mutex g_cache_mutex;
std::map<SpecKey, std::vector<BaryPoly>> g_shape_cache;
std::map<SpecKey, std::vector<DofDescriptor>> g_layout_cache;
std::map<SpecKey, ElemTables> g_table_cache;

std::vector<BaryPoly> build_shapes(const ElementSpec& spec) {
  const QuadRule& sample = simplex_rule(spec.dim(), 11);
  std::vector<BaryPoly> shapes;
  if (spec.family == Family::Specht) {
    shapes = bernstein_basis(3, 3);
    auto bubbles = specht_bubbles();
    shapes.push_back(normalized(bubbles[1], sample));
    shapes.push_back(normalized(bubbles[2], sample));
  } else if (spec.family == Family::BubbleTri) {
    shapes = bernstein_basis(3, spec.ell);
    BaryPoly bt = BaryPoly::variable(3, 0) * BaryPoly::variable(3, 1) *
                  BaryPoly::variable(3, 2);
    for (int k = 0; k < 3; ++k) {
      const auto ends = tri_edge_ends(k);
      BaryPoly bubble = bt * BaryPoly::variable(3, ends[0]) *
                        BaryPoly::variable(3, ends[1]);
      if (spec.ell >= 4) {
        bubble = bubble * eval_poly1d_at(edge_orth_psi(spec.ell),
                                         BaryPoly::variable(3, ends[1]));
      }
      shapes.push_back(normalized(bubble, sample));
    }
  } else {
    shapes = bernstein_basis(4, spec.ell);
    const FaceOrthoSystem& sys = face_ortho_system(spec.ell);
    for (int f = 0; f < 4; ++f)
      for (const auto& xi : sys.xi[f]) shapes.push_back(normalized(xi, sample));
  }
  return shapes;
}

std::vector<DofDescriptor> build_layout(const ElementSpec& spec) {
  if (spec.family == Family::Specht) {
    std::vector<DofDescriptor> out = bubble_tri_layout(3);
    std::erase_if(out, [](const DofDescriptor& d) {
      return d.kind == DofKind::CellValue;
    });
    return out;
  }
  if (spec.dim() == 2) return bubble_tri_layout(spec.ell);

  const int ell = spec.ell;
  std::vector<DofDescriptor> out;
  for (int v = 0; v < 4; ++v) {
    out.push_back({DofKind::VertexValue, v, 0, {0, 0, 0}});
    for (int k = 0; k < 3; ++k)
      out.push_back({DofKind::VertexGrad, v, k, {0, 0, 0}});
    for (int p = 0; p < 6; ++p)
      out.push_back({DofKind::VertexHess, v, p, {0, 0, 0}});
  }
  for (int e = 0; e < 6; ++e) {
    for (int p = 0; p <= ell - 6; ++p)
      out.push_back({DofKind::EdgeValue, e, 0, {p, 0, 0}});
    for (int p = 0; p <= ell - 5; ++p)
      for (int c = 0; c < 2; ++c)
        out.push_back({DofKind::EdgeNormal, e, c, {p, 0, 0}});
  }
  for (int f = 0; f < 4; ++f) {
    if (ell - 6 >= 0)
      for (const auto& m : monomial_exponents(2, ell - 6))
        out.push_back({DofKind::FaceValue, f, 0, m});
    for (const auto& m : monomial_exponents(2, ell - 4))
      out.push_back({DofKind::FaceNormal, f, 0, m});
  }
  for (const auto& m : monomial_exponents(3, ell - 4))
    out.push_back({DofKind::CellValue, 0, 0, m});
  return out;
}

const ElemTables& elem_tables(const ElementSpec& spec) {
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  const SpecKey key = key_of(spec);
  auto it = g_table_cache.find(key);
  if (it != g_table_cache.end()) return it->second;
  auto sit = g_shape_cache.find(key);
  if (sit == g_shape_cache.end())
    sit = g_shape_cache.emplace(key, build_shapes(spec)).first;
  ElemTables t =
      build_tables(sit->second, spec.dim(), shape_degree(spec), spec.ell);
  return g_table_cache.emplace(key, std::move(t)).first->second;
}

}  // namespace

void validate_spec(const ElementSpec& spec) {
  switch (spec.family) {
    case Family::Specht:
      require(spec.ell == 3, "specht takes degree 3");
      break;
    case Family::BubbleTri:
      require(spec.ell == 3 || (spec.ell >= 4 && spec.ell % 2 == 0),
              "triangle family needs degree 3 or an even degree >= 4");
      require(spec.ell <= 10, "triangle family capped at degree 10");
      break;
    case Family::BubbleTet:
      require(spec.ell >= 5 && spec.ell <= 10,
              "tetrahedron family supports degrees 5..10");
      break;
  }
}

ElementSpec parse_element(const std::string& name) {
  if (name == "specht") return {Family::Specht, 3};
  auto parse_tail = [&](std::size_t prefix) {
    try {
      return std::stoi(name.substr(prefix));
    } catch (const std::exception&) {
      throw InvalidArgumentError("unknown element: " + name);
    }
  };
  ElementSpec spec;
  if (name.rfind("tri", 0) == 0) {
    spec = {Family::BubbleTri, parse_tail(3)};
  } else if (name.rfind("tet", 0) == 0) {
    spec = {Family::BubbleTet, parse_tail(3)};
  } else {
    throw InvalidArgumentError("unknown element: " + name);
  }
  validate_spec(spec);
  return spec;
}

std::string element_name(const ElementSpec& spec) {
  switch (spec.family) {
    case Family::Specht: return "specht";
    case Family::BubbleTri: return "tri" + std::to_string(spec.ell);
    default: return "tet" + std::to_string(spec.ell);
  }
}

int shape_degree(const ElementSpec& spec) {
  switch (spec.family) {
    case Family::Specht: return 5;
    case Family::BubbleTri: return spec.ell == 3 ? 5 : spec.ell + 2;
    default: return spec.ell + 5;
  }
}

std::vector<DofDescriptor> bubble_tri_layout(int ell) {
  std::vector<DofDescriptor> out;
  for (int v = 0; v < 3; ++v) {
    out.push_back({DofKind::VertexValue, v, 0, {0, 0, 0}});
    for (int k = 0; k < 2; ++k)
      out.push_back({DofKind::VertexGrad, v, k, {0, 0, 0}});
  }
  for (int e = 0; e < 3; ++e) {
    for (int p = 0; p <= ell - 4; ++p)
      out.push_back({DofKind::EdgeValue, e, 0, {p, 0, 0}});
    for (int p = 0; p <= ell - 3; ++p)
      out.push_back({DofKind::EdgeNormal, e, 0, {p, 0, 0}});
  }
  const int cell_deg = ell == 3 ? 0 : ell - 6;
  if (cell_deg >= 0)
    for (const auto& m : monomial_exponents(2, cell_deg))
      out.push_back({DofKind::CellValue, 0, 0, m});
  return out;
}

const std::vector<BaryPoly>& shape_basis(const ElementSpec& spec) {
  validate_spec(spec);
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  const SpecKey key = key_of(spec);
  auto it = g_shape_cache.find(key);
  if (it == g_shape_cache.end())
    it = g_shape_cache.emplace(key, build_shapes(spec)).first;
  return it->second;
}

const std::vector<DofDescriptor>& dof_layout(const ElementSpec& spec) {
  validate_spec(spec);
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  const SpecKey key = key_of(spec);
  auto it = g_layout_cache.find(key);
  if (it == g_layout_cache.end())
    it = g_layout_cache.emplace(key, build_layout(spec)).first;
  return it->second;
}

int n_dofs(const ElementSpec& spec) {
  return static_cast<int>(dof_layout(spec).size());
}

Eigen::MatrixXd apply_dofs(const std::vector<DofDescriptor>& layout,
                           const std::vector<BaryPoly>& polys,
                           const Mesh& mesh, Index cell) {
  int max_deg = 1, max_mom = 0;
  for (const auto& p : polys) max_deg = std::max(max_deg, p.degree());
  for (const auto& d : layout)
    max_mom = std::max(max_mom, d.expo[0] + d.expo[1] + d.expo[2]);
  ElemTables t = build_tables(polys, mesh.dim, max_deg, max_mom);
  return apply_tables(layout, t, mesh, cell);
}

Eigen::MatrixXd dof_matrix(const ElementSpec& spec, const Mesh& mesh,
                           Index cell) {
  require(mesh.dim == spec.dim(), "element and mesh dimensions disagree");
  const ElemTables& t = elem_tables(spec);
  const auto& layout = dof_layout(spec);
  Eigen::MatrixXd V = apply_tables(layout, t, mesh, cell);
  internal_check(V.rows() == V.cols(), "dof/shape count mismatch");
  return V;
}

Eigen::VectorXd dof_values(const ElementSpec& spec, const Mesh& mesh,
                           Index cell, const ScalarField& u) {
  require(mesh.dim == spec.dim(), "element and mesh dimensions disagree");
  const ElemTables& t = elem_tables(spec);
  const auto& layout = dof_layout(spec);
  const CellFrame fr = mesh.frame(cell);
  const int dim = mesh.dim;
  const int ng = static_cast<int>(t.gx.size());
  Eigen::VectorXd out(layout.size());

  for (std::size_t j = 0; j < layout.size(); ++j) {
    const DofDescriptor& d = layout[j];
    switch (d.kind) {
      case DofKind::VertexValue:
        out[j] = u.value(fr.vertex[d.entity]);
        break;
      case DofKind::VertexGrad: {
        const double h = mesh.vertex_h[mesh.cells[cell][d.entity]];
        out[j] = h * u.gradient(fr.vertex[d.entity])[d.comp];
        break;
      }
      case DofKind::VertexHess: {
        const double h = mesh.vertex_h[mesh.cells[cell][d.entity]];
        const auto [ci, cj] = pair_vars(3, d.comp);
        out[j] = h * h * u.hessian(fr.vertex[d.entity])(ci, cj);
        break;
      }
      case DofKind::EdgeValue:
      case DofKind::EdgeNormal: {
        const auto ends = t.edge_ends[d.entity];
        const Vec3 A = fr.vertex[ends[0]], B = fr.vertex[ends[1]];
        Vec3 n = Vec3::Zero();
        double scale = 1.0;
        if (d.kind == DofKind::EdgeNormal) {
          if (dim == 2) {
            const Index fid = mesh.cell_edges[cell][d.entity];
            n = mesh.facet_normal[fid];
            scale = mesh.facet_measure[fid];
          } else {
            const Index ge = mesh.cell_edges[cell][d.entity];
            const EdgeFrame ef = mesh.edge_frame(ge);
            n = d.comp == 0 ? ef.n1 : ef.n2;
            scale = (B - A).norm();
          }
        }
        double acc = 0.0;
        for (int q = 0; q < ng; ++q) {
          const Vec3 x = (1.0 - t.gx[q]) * A + t.gx[q] * B;
          const double f = d.kind == DofKind::EdgeValue
                               ? u.value(x)
                               : u.gradient(x).dot(n);
          acc += t.gw[q] * f * std::pow(t.gx[q], d.expo[0]);
        }
        out[j] = scale * acc;
        break;
      }
      case DofKind::FaceValue:
      case DofKind::FaceNormal: {
        const QuadRule& rule = *t.face_rule;
        const auto& kept = t.face_kept[d.entity];
        const Index fid = mesh.cell_faces[cell][d.entity];
        const Vec3 n = mesh.facet_normal[fid];
        const double scale = d.kind == DofKind::FaceNormal
                                 ? std::sqrt(2.0 * mesh.facet_measure[fid])
                                 : 1.0;
        double acc = 0.0;
        for (int q = 0; q < rule.size(); ++q) {
          Vec3 x = Vec3::Zero();
          for (int v = 0; v < 3; ++v)
            x += rule.points[q][v] * fr.vertex[kept[v]];
          const double f = d.kind == DofKind::FaceValue
                               ? u.value(x)
                               : u.gradient(x).dot(n);
          acc += rule.weights[q] * f *
                 eval_entity_monomial(d.expo, rule.points[q]);
        }
        out[j] = scale * acc / reference_measure(2);
        break;
      }
      case DofKind::CellValue: {
        const QuadRule& rule = *t.cell_rule;
        double acc = 0.0;
        for (int q = 0; q < rule.size(); ++q) {
          Vec3 x = Vec3::Zero();
          for (int v = 0; v <= dim; ++v)
            x += rule.points[q][v] * fr.vertex[v];
          acc += rule.weights[q] * u.value(x) *
                 eval_entity_monomial(d.expo, rule.points[q]);
        }
        out[j] = acc / reference_measure(dim);
        break;
      }
    }
  }
  return out;
}

NodalBasis nodal_basis(const ElementSpec& spec, const Mesh& mesh, Index cell) {
  const Eigen::MatrixXd V = dof_matrix(spec, mesh, cell);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(V);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-12))
    throw UnisolvenceFailure("dof matrix conditioning beyond 1e12 on cell " +
                             std::to_string(cell) +
                             " (rcond = " + std::to_string(rcond) + ")");
  NodalBasis nb;
  nb.coeff = lu.inverse();
  nb.rcond = rcond;
  return nb;
}

}  // namespace mtfe
