#include "mtfe/assembly.hpp"

#include "mtfe/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace mtfe {

namespace {

struct TableKey {
  int family;
  int ell;
  int degree;
  bool operator<(const TableKey& o) const {
    if (family != o.family) return family < o.family;
    if (ell != o.ell) return ell < o.ell;
    return degree < o.degree;
  }
};

struct CellTables {
  const QuadRule* rule = nullptr;
  PolyTables tab;
};

const CellTables& cell_tables(const ElementSpec& spec, int degree) {
  static std::mutex mtx;
  static std::map<TableKey, CellTables> cache;
  std::lock_guard<std::mutex> lock(mtx);
  const TableKey key{static_cast<int>(spec.family), spec.ell, degree};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  CellTables t;
  t.rule = &simplex_rule(spec.dim(), degree);
  t.tab = tabulate(shape_basis(spec), *t.rule, true);
  return cache.emplace(key, std::move(t)).first->second;
}

Vec3 physical_point(const CellFrame& fr, const std::array<double, 4>& bary) {
  Vec3 x = Vec3::Zero();
  for (int i = 0; i <= fr.dim; ++i) x += bary[i] * fr.vertex[i];
  return x;
}

double block_trace(const Mat3& a, int dim) {
  double tr = 0.0;
  for (int i = 0; i < dim; ++i) tr += a(i, i);
  return tr;
}

double block_frob2(const Mat3& a, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) s += a(i, j) * a(i, j);
  return s;
}

// Symmetric outer products paired with the second-derivative tables:
// hess v = sum_p d2_p(v) * M_p.
std::vector<Mat3> pair_matrices(const CellFrame& fr) {
  const int nv = fr.dim + 1;
  std::vector<Mat3> out(n_pairs(nv));
  for (int p = 0; p < n_pairs(nv); ++p) {
    const auto ij = pair_vars(nv, p);
    const Mat3 outer =
        fr.grad_lambda[ij[0]] * fr.grad_lambda[ij[1]].transpose();
    out[p] = ij[0] == ij[1] ? outer : Mat3(outer + outer.transpose());
  }
  return out;
}

// Weights of the free columns in each row of the constraint matrix.
std::vector<std::vector<std::pair<Index, double>>> constraint_rows(
    const FeSpace& sp) {
  std::vector<std::vector<std::pair<Index, double>>> rows(sp.n_global);
  for (int j = 0; j < sp.C.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sp.C, j); it; ++it)
      rows[it.row()].push_back({static_cast<Index>(j), it.value()});
  return rows;
}

int resolve_degree(const ElementSpec& spec, int requested) {
  const int base = default_quad_degree(spec);
  if (requested < 0) return base;
  require(requested >= base,
          "assemble: quadrature degree below the module default");
  require(requested <= kMaxQuadDegree, "assemble: quadrature degree too high");
  return requested;
}

void scatter_cell(const FeSpace& sp, Index c,
                  const std::vector<std::vector<std::pair<Index, double>>>& rows,
                  const Eigen::MatrixXd& Kl, const Eigen::VectorXd& bl,
                  std::vector<Eigen::Triplet<double>>& trips,
                  Eigen::VectorXd& b) {
  const int nd = static_cast<int>(sp.cell_dofs[c].size());
  Eigen::VectorXd xbc(nd);
  for (int a = 0; a < nd; ++a) xbc[a] = sp.x_bc[sp.cell_dofs[c][a]];
  const Eigen::VectorXd rhs = bl - Kl * xbc;
  for (int a = 0; a < nd; ++a) {
    const auto& ra = rows[sp.cell_dofs[c][a]];
    if (ra.empty()) continue;
    for (const auto& [ja, wa] : ra) {
      b[ja] += wa * rhs[a];
      for (int bb = 0; bb < nd; ++bb) {
        const double kab = Kl(a, bb);
        if (kab == 0.0) continue;
        for (const auto& [jb, wb] : rows[sp.cell_dofs[c][bb]])
          trips.emplace_back(ja, jb, wa * kab * wb);
      }
    }
  }
}

SparseSystem finalize(std::vector<Eigen::Triplet<double>>& trips,
                      Eigen::VectorXd&& b, Index n, bool symmetric) {
  SparseSystem sys;
  sys.K.resize(n, n);
  sys.K.setFromTriplets(trips.begin(), trips.end());
  sys.K.prune(0.0, 0.0);
  sys.K.makeCompressed();
  for (Index r = 0; r < n; ++r)
    internal_check(sys.K.outerIndexPtr()[r + 1] > sys.K.outerIndexPtr()[r],
                   "assemble: empty matrix row");
  sys.b = std::move(b);
  sys.symmetric = symmetric;
  return sys;
}

}  // namespace

double ProblemSpec::gamma(const Vec3& x) const {
  require(static_cast<bool>(A), "gamma: no coefficient field");
  const Mat3 a = A(x);
  const double fro2 = block_frob2(a, dim);
  require(fro2 > 0.0, "gamma: zero coefficient");
  return block_trace(a, dim) / fro2;
}

CordesInfo cordes_parameters(const MatrixField& A, int dim,
                             const std::vector<Vec3>& samples) {
  require(dim == 2 || dim == 3, "cordes_parameters: dim must be 2 or 3");
  require(static_cast<bool>(A), "cordes_parameters: no coefficient field");
  require(!samples.empty(), "cordes_parameters: no sample points");
  CordesInfo info;
  info.eps = 2.0;
  info.gamma_min = std::numeric_limits<double>::infinity();
  info.lambda_min = std::numeric_limits<double>::infinity();
  for (const Vec3& x : samples) {
    const Mat3 a = A(x);
    double asym = 0.0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        asym = std::max(asym, std::abs(a(i, j) - a(j, i)));
    require(asym <= 1e-12 * (1.0 + block_frob2(a, dim)),
            "cordes_parameters: coefficient not symmetric");
    const double tr = block_trace(a, dim);
    const double fro2 = block_frob2(a, dim);
    require(fro2 > 0.0, "cordes_parameters: zero coefficient");
    info.eps = std::min(info.eps, tr * tr / fro2 - (dim - 1));
    info.gamma_min = std::min(info.gamma_min, tr / fro2);
    info.gamma_max = std::max(info.gamma_max, tr / fro2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        a.topLeftCorner(dim, dim));
    info.lambda_min = std::min(info.lambda_min, es.eigenvalues().minCoeff());
    info.lambda_max = std::max(info.lambda_max, es.eigenvalues().maxCoeff());
  }
  if (info.eps <= 0.0)
    throw CordesViolation("cordes_parameters: (tr A)^2/|A|^2 - (d-1) = " +
                          std::to_string(info.eps) + " at a sample point");
  info.eps = std::min(info.eps, 1.0);
  info.delta = 1.0 - std::sqrt(1.0 - info.eps);
  return info;
}

int default_quad_degree(const ElementSpec& spec) {
  return 2 * (shape_degree(spec) - 2);
}

SparseSystem assemble_nondivergence(const FeSpace& space,
                                    const ProblemSpec& problem,
                                    int quad_degree) {
  require(problem.kind == ProblemKind::Nondivergence,
          "assemble_nondivergence: wrong problem kind");
  require(space.bc == BcKind::DirichletH10,
          "assemble_nondivergence: space must impose first-order Dirichlet "
          "conditions");
  require(static_cast<bool>(problem.A) && static_cast<bool>(problem.f),
          "assemble_nondivergence: coefficient and right-hand side required");
  const Mesh& m = *space.mesh;
  const int deg = resolve_degree(space.spec, quad_degree);
  const CellTables& ct = cell_tables(space.spec, deg);
  const int nq = ct.rule->size();
  const int nd = n_dofs(space.spec);
  const auto rows = constraint_rows(space);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(m.n_cells()) * nd * 4);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(space.n_free);

  Eigen::VectorXd lap(nd), add(nd);
  Eigen::MatrixXd Ks(nd, nd), Kl(nd, nd);
  Eigen::VectorXd bs(nd), bl(nd);
  for (Index c = 0; c < m.n_cells(); ++c) {
    const CellFrame fr = m.frame(c);
    const double jac = fr.volume / reference_measure(m.dim);
    const auto pm = pair_matrices(fr);
    const int np = static_cast<int>(pm.size());
    Ks.setZero();
    bs.setZero();
    for (int q = 0; q < nq; ++q) {
      const Vec3 x = physical_point(fr, ct.rule->points[q]);
      const Mat3 a = problem.A(x);
      const double fro2 = block_frob2(a, m.dim);
      require(fro2 > 0.0, "assemble_nondivergence: zero coefficient");
      const double gam = block_trace(a, m.dim) / fro2;
      lap.setZero();
      add.setZero();
      for (int p = 0; p < np; ++p) {
        const double trp = block_trace(pm[p], m.dim);
        const double ap = (a.topLeftCorner(m.dim, m.dim)
                               .cwiseProduct(pm[p].topLeftCorner(m.dim, m.dim)))
                              .sum();
        lap.noalias() += trp * ct.tab.d2[p].col(q);
        add.noalias() += ap * ct.tab.d2[p].col(q);
      }
      const double w = ct.rule->weights[q] * jac * gam;
      Ks.noalias() += w * lap * add.transpose();
      bs.noalias() += (w * problem.f(x)) * lap;
    }
    const NodalBasis nb = nodal_basis(space.spec, m, c);
    Kl.noalias() = nb.coeff.transpose() * Ks * nb.coeff;
    bl.noalias() = nb.coeff.transpose() * bs;
    scatter_cell(space, c, rows, Kl, bl, trips, b);
  }
  return finalize(trips, std::move(b), space.n_free, false);
}

SparseSystem assemble_biharmonic(const FeSpace& space,
                                 const ProblemSpec& problem, int quad_degree) {
  require(problem.kind == ProblemKind::Biharmonic,
          "assemble_biharmonic: wrong problem kind");
  require(space.bc == BcKind::ClampedH20,
          "assemble_biharmonic: space must impose clamped conditions");
  require(static_cast<bool>(problem.f),
          "assemble_biharmonic: right-hand side required");
  const Mesh& m = *space.mesh;
  const int deg = resolve_degree(space.spec, quad_degree);
  const CellTables& ct = cell_tables(space.spec, deg);
  const int nq = ct.rule->size();
  const int nd = n_dofs(space.spec);
  const auto rows = constraint_rows(space);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(m.n_cells()) * nd * 4);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(space.n_free);

  const int nemb = n_pairs(m.dim);
  Eigen::MatrixXd Ks(nd, nd), Kl(nd, nd), D, E;
  Eigen::VectorXd bs(nd), bl(nd);
  for (Index c = 0; c < m.n_cells(); ++c) {
    const CellFrame fr = m.frame(c);
    const double jac = fr.volume / reference_measure(m.dim);
    const auto pm = pair_matrices(fr);
    const int np = static_cast<int>(pm.size());
    // R maps pair derivatives to the Frobenius embedding of the hessian
    Eigen::MatrixXd R(nemb, np);
    for (int r = 0; r < nemb; ++r) {
      const auto ij = pair_vars(m.dim, r);
      const double s = ij[0] == ij[1] ? 1.0 : std::sqrt(2.0);
      for (int p = 0; p < np; ++p) R(r, p) = s * pm[p](ij[0], ij[1]);
    }
    D.resize(np, nd);
    Ks.setZero();
    bs.setZero();
    for (int q = 0; q < nq; ++q) {
      for (int p = 0; p < np; ++p) D.row(p) = ct.tab.d2[p].col(q).transpose();
      E.noalias() = R * D;
      const double w = ct.rule->weights[q] * jac;
      Ks.noalias() += w * E.transpose() * E;
      const Vec3 x = physical_point(fr, ct.rule->points[q]);
      bs.noalias() += (w * problem.f(x)) * ct.tab.val.col(q);
    }
    const NodalBasis nb = nodal_basis(space.spec, m, c);
    Kl.noalias() = nb.coeff.transpose() * Ks * nb.coeff;
    bl.noalias() = nb.coeff.transpose() * bs;
    scatter_cell(space, c, rows, Kl, bl, trips, b);
  }
  return finalize(trips, std::move(b), space.n_free, true);
}

Eigen::VectorXd solve(const SparseSystem& system, const SolveOptions& opts,
                      SolveStats* stats) {
  require(system.K.rows() == system.K.cols(), "solve: matrix not square");
  require(system.K.rows() == system.b.size(), "solve: size mismatch");
  const Eigen::SparseMatrix<double> A = system.K;
  Eigen::VectorXd x;
  int iterations = 0;
  if (opts.iterative) {
    Eigen::GMRES<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>>
        gmres;
    gmres.setMaxIterations(opts.max_iterations);
    gmres.set_restart(opts.restart);
    gmres.setTolerance(opts.tol);
    gmres.compute(A);
    if (gmres.info() != Eigen::Success)
      throw SolverFailure("solve: preconditioner setup failed");
    x = gmres.solve(system.b);
    iterations = static_cast<int>(gmres.iterations());
    if (gmres.info() != Eigen::Success)
      throw SolverFailure("solve: gmres stalled at relative residual " +
                          std::to_string(gmres.error()) + " after " +
                          std::to_string(iterations) + " iterations");
  } else if (system.symmetric) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    if (ldlt.info() != Eigen::Success)
      throw SolverFailure("solve: symmetric factorization failed");
    const double dmin = ldlt.vectorD().cwiseAbs().minCoeff();
    if (!(dmin > 0.0))
      throw SolverFailure("solve: singular matrix, smallest pivot " +
                          std::to_string(dmin));
    x = ldlt.solve(system.b);
  } else {
    Eigen::SparseLU<Eigen::SparseMatrix<double>,
                    Eigen::COLAMDOrdering<int>>
        lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
      throw SolverFailure("solve: lu factorization failed: " +
                          lu.lastErrorMessage());
    x = lu.solve(system.b);
  }
  const double bn = system.b.norm();
  const double rel = (system.b - A * x).norm() / (bn > 0.0 ? bn : 1.0);
  if (stats != nullptr) {
    stats->rel_residual = rel;
    stats->iterations = iterations;
  }
  return x;
}

ErrorNorms error_norms(const FeSpace& space, const Eigen::VectorXd& x_full,
                       const ScalarField& u, int quad_degree) {
  require(static_cast<bool>(u.value) && static_cast<bool>(u.hessian),
          "error_norms: exact value and hessian required");
  require(x_full.size() == space.n_global, "error_norms: coefficient size");
  const Mesh& m = *space.mesh;
  const int deg = quad_degree < 0
                      ? std::min(2 * shape_degree(space.spec) + 4,
                                 kMaxQuadDegree)
                      : quad_degree;
  const CellTables& ct = cell_tables(space.spec, deg);
  const int nq = ct.rule->size();
  const int nd = n_dofs(space.spec);
  Eigen::VectorXd loc(nd);
  double e0 = 0.0, u0 = 0.0, e2 = 0.0, u2 = 0.0;
  for (Index c = 0; c < m.n_cells(); ++c) {
    const CellFrame fr = m.frame(c);
    const double jac = fr.volume / reference_measure(m.dim);
    const auto pm = pair_matrices(fr);
    for (int j = 0; j < nd; ++j) loc[j] = x_full[space.cell_dofs[c][j]];
    const Eigen::VectorXd a = nodal_basis(space.spec, m, c).coeff * loc;
    for (int q = 0; q < nq; ++q) {
      const Vec3 x = physical_point(fr, ct.rule->points[q]);
      const double w = ct.rule->weights[q] * jac;
      const double uv = u.value(x);
      const double uh = ct.tab.val.col(q).dot(a);
      e0 += w * (uv - uh) * (uv - uh);
      u0 += w * uv * uv;
      Mat3 h = -u.hessian(x);
      for (std::size_t p = 0; p < pm.size(); ++p)
        h += ct.tab.d2[p].col(q).dot(a) * pm[p];
      e2 += w * block_frob2(h, m.dim);
      u2 += w * block_frob2(u.hessian(x), m.dim);
    }
  }
  ErrorNorms out;
  out.l2_abs = std::sqrt(std::max(e0, 0.0));
  out.h2_abs = std::sqrt(std::max(e2, 0.0));
  out.u_l2 = std::sqrt(std::max(u0, 0.0));
  out.u_h2 = std::sqrt(std::max(u2, 0.0));
  require(out.u_l2 > 0.0, "error_norms: exact solution has zero norm");
  require(out.u_h2 > 0.0, "error_norms: exact solution has zero energy");
  out.l2_rel = out.l2_abs / out.u_l2;
  out.h2_rel = out.h2_abs / out.u_h2;
  return out;
}

EtaIndicator eta_indicator(const FeSpace& space, const Eigen::VectorXd& x_full,
                           const ProblemSpec& problem, int quad_degree) {
  require(problem.kind == ProblemKind::Nondivergence,
          "eta_indicator: nondivergence problems only");
  require(static_cast<bool>(problem.A) && static_cast<bool>(problem.f),
          "eta_indicator: coefficient and right-hand side required");
  require(x_full.size() == space.n_global, "eta_indicator: coefficient size");
  const Mesh& m = *space.mesh;
  const int deg = quad_degree < 0
                      ? std::min(2 * shape_degree(space.spec) + 4,
                                 kMaxQuadDegree)
                      : quad_degree;
  const CellTables& ct = cell_tables(space.spec, deg);
  const int nq = ct.rule->size();
  const int nd = n_dofs(space.spec);
  Eigen::VectorXd loc(nd);
  EtaIndicator out;
  out.per_cell = Eigen::VectorXd::Zero(m.n_cells());
  double total2 = 0.0;
  for (Index c = 0; c < m.n_cells(); ++c) {
    const CellFrame fr = m.frame(c);
    const double jac = fr.volume / reference_measure(m.dim);
    const auto pm = pair_matrices(fr);
    for (int j = 0; j < nd; ++j) loc[j] = x_full[space.cell_dofs[c][j]];
    const Eigen::VectorXd a = nodal_basis(space.spec, m, c).coeff * loc;
    double acc = 0.0;
    for (int q = 0; q < nq; ++q) {
      const Vec3 x = physical_point(fr, ct.rule->points[q]);
      const Mat3 acf = problem.A(x);
      double r = problem.f(x);
      for (std::size_t p = 0; p < pm.size(); ++p)
        r -= ct.tab.d2[p].col(q).dot(a) *
             (acf.topLeftCorner(m.dim, m.dim)
                  .cwiseProduct(pm[p].topLeftCorner(m.dim, m.dim)))
                 .sum();
      acc += ct.rule->weights[q] * jac * r * r;
    }
    out.per_cell[c] = std::sqrt(std::max(acc, 0.0));
    total2 += acc;
  }
  out.total = std::sqrt(std::max(total2, 0.0));
  return out;
}

}  // namespace mtfe
