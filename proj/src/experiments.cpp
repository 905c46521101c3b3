#include "mtfe/experiments.hpp"

#include "mtfe/vtk.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace mtfe {

namespace {

double sgn(double v) { return v >= 0.0 ? 1.0 : -1.0; }

// f(x) = A(x) : D^2 u(x), the nondivergence right-hand side of a
// manufactured solution.
std::function<double(const Vec3&)> contraction_rhs(const MatrixField& A,
                                                   const ScalarField& u,
                                                   int dim) {
  return [A, hess = u.hessian, dim](const Vec3& p) {
    const Mat3 a = A(p);
    const Mat3 h = hess(p);
    double s = 0.0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) s += a(i, j) * h(i, j);
    return s;
  };
}

// phi(t) = t (1 - e^{1-|t|}), the factor of the first 2D solution;
// phi(+-1) = 0 and phi'' jumps at t = 0.
struct Cut {
  double v, d1, d2;
};
Cut phi_exp(double t) {
  const double a = std::abs(t);
  const double e = std::exp(1.0 - a);
  return {t * (1.0 - e), 1.0 - (1.0 - a) * e, sgn(t) * (2.0 - a) * e};
}

ScalarField product_exp_solution() {
  ScalarField u;
  u.value = [](const Vec3& p) { return phi_exp(p.x()).v * phi_exp(p.y()).v; };
  u.gradient = [](const Vec3& p) {
    const Cut x = phi_exp(p.x()), y = phi_exp(p.y());
    return Vec3(x.d1 * y.v, x.v * y.d1, 0.0);
  };
  u.hessian = [](const Vec3& p) {
    const Cut x = phi_exp(p.x()), y = phi_exp(p.y());
    Mat3 h = Mat3::Zero();
    h(0, 0) = x.d2 * y.v;
    h(1, 1) = x.v * y.d2;
    h(0, 1) = h(1, 0) = x.d1 * y.d1;
    return h;
  };
  return u;
}

// w(y) = (y+1)/2 + (C - e^{(y-1)/(2 iota)})/(1 - C) with C = e^{-1/iota}:
// boundary layer at y = 1, w(-1) = w(1) = 0.
Cut layer(double y, double iota) {
  const double c = std::exp(-1.0 / iota);
  const double e = std::exp((y - 1.0) / (2.0 * iota));
  const double den = 1.0 - c;
  return {0.5 * (y + 1.0) + (c - e) / den, 0.5 - e / (2.0 * iota * den),
          -e / (4.0 * iota * iota * den)};
}

// u = r^{3/2} w(y): H^{5/2-} point singularity at the origin. The origin
// guards keep the field total; the Hessian is never sampled there.
ScalarField singular_layer_solution(double iota) {
  ScalarField u;
  u.value = [iota](const Vec3& p) {
    const double r = std::hypot(p.x(), p.y());
    return r * std::sqrt(r) * layer(p.y(), iota).v;
  };
  u.gradient = [iota](const Vec3& p) {
    const double r = std::hypot(p.x(), p.y());
    if (r == 0.0) return Vec3(0, 0, 0);
    const Cut w = layer(p.y(), iota);
    const double rq = std::sqrt(r);
    return Vec3(1.5 * p.x() * w.v / rq, 1.5 * p.y() * w.v / rq + r * rq * w.d1,
                0.0);
  };
  u.hessian = [iota](const Vec3& p) {
    const double x = p.x(), y = p.y();
    const double r = std::hypot(x, y);
    Mat3 h = Mat3::Zero();
    if (r == 0.0) return h;
    const Cut w = layer(y, iota);
    const double rq = std::sqrt(r);
    const double r5q = r * r * rq;
    h(0, 0) = 1.5 * w.v * (1.0 / rq - 0.5 * x * x / r5q);
    h(0, 1) = h(1, 0) = 1.5 * x * (w.d1 / rq - 0.5 * y * w.v / r5q);
    h(1, 1) = 1.5 * w.v * (1.0 / rq - 0.5 * y * y / r5q) +
              3.0 * y * w.d1 / rq + r * rq * w.d2;
    return h;
  };
  return u;
}

ScalarField sine_squared_2d() {
  ScalarField u;
  u.value = [](const Vec3& p) {
    const double sx = std::sin(M_PI * p.x()), sy = std::sin(M_PI * p.y());
    return sx * sx * sy * sy;
  };
  u.gradient = [](const Vec3& p) {
    const double s2x = std::sin(2 * M_PI * p.x());
    const double s2y = std::sin(2 * M_PI * p.y());
    const double sx = std::sin(M_PI * p.x()), sy = std::sin(M_PI * p.y());
    return Vec3(M_PI * s2x * sy * sy, M_PI * s2y * sx * sx, 0.0);
  };
  u.hessian = [](const Vec3& p) {
    const double c2x = std::cos(2 * M_PI * p.x());
    const double c2y = std::cos(2 * M_PI * p.y());
    const double s2x = std::sin(2 * M_PI * p.x());
    const double s2y = std::sin(2 * M_PI * p.y());
    const double pi2 = M_PI * M_PI;
    Mat3 h = Mat3::Zero();
    h(0, 0) = 0.5 * pi2 * c2x * (2.0 - 2.0 * c2y);
    h(1, 1) = 0.5 * pi2 * c2y * (2.0 - 2.0 * c2x);
    h(0, 1) = h(1, 0) = pi2 * s2x * s2y;
    return h;
  };
  return u;
}

ScalarField sine_product_3d() {
  ScalarField u;
  u.value = [](const Vec3& p) {
    return std::sin(M_PI * p.x()) * std::sin(M_PI * p.y()) *
           std::sin(M_PI * p.z());
  };
  u.gradient = [](const Vec3& p) {
    const double sx = std::sin(M_PI * p.x()), cx = std::cos(M_PI * p.x());
    const double sy = std::sin(M_PI * p.y()), cy = std::cos(M_PI * p.y());
    const double sz = std::sin(M_PI * p.z()), cz = std::cos(M_PI * p.z());
    return Vec3(M_PI * cx * sy * sz, M_PI * sx * cy * sz, M_PI * sx * sy * cz);
  };
  u.hessian = [](const Vec3& p) {
    const double sx = std::sin(M_PI * p.x()), cx = std::cos(M_PI * p.x());
    const double sy = std::sin(M_PI * p.y()), cy = std::cos(M_PI * p.y());
    const double sz = std::sin(M_PI * p.z()), cz = std::cos(M_PI * p.z());
    const double pi2 = M_PI * M_PI;
    Mat3 h;
    h(0, 0) = -pi2 * sx * sy * sz;
    h(1, 1) = h(0, 0);
    h(2, 2) = h(0, 0);
    h(0, 1) = h(1, 0) = pi2 * cx * cy * sz;
    h(0, 2) = h(2, 0) = pi2 * cx * sy * cz;
    h(1, 2) = h(2, 1) = pi2 * sx * cy * cz;
    return h;
  };
  return u;
}

ScalarField sine_squared_3d() {
  ScalarField u;
  u.value = [](const Vec3& p) {
    const double sx = std::sin(M_PI * p.x()), sy = std::sin(M_PI * p.y());
    const double sz = std::sin(M_PI * p.z());
    return sx * sx * sy * sy * sz * sz;
  };
  u.gradient = [](const Vec3& p) {
    const double sx = std::sin(M_PI * p.x()), sy = std::sin(M_PI * p.y());
    const double sz = std::sin(M_PI * p.z());
    const double s2x = std::sin(2 * M_PI * p.x());
    const double s2y = std::sin(2 * M_PI * p.y());
    const double s2z = std::sin(2 * M_PI * p.z());
    return Vec3(M_PI * s2x * sy * sy * sz * sz,
                M_PI * s2y * sx * sx * sz * sz,
                M_PI * s2z * sx * sx * sy * sy);
  };
  u.hessian = [](const Vec3& p) {
    const double sx = std::sin(M_PI * p.x()), sy = std::sin(M_PI * p.y());
    const double sz = std::sin(M_PI * p.z());
    const double s2x = std::sin(2 * M_PI * p.x());
    const double s2y = std::sin(2 * M_PI * p.y());
    const double s2z = std::sin(2 * M_PI * p.z());
    const double c2x = std::cos(2 * M_PI * p.x());
    const double c2y = std::cos(2 * M_PI * p.y());
    const double c2z = std::cos(2 * M_PI * p.z());
    const double pi2 = M_PI * M_PI;
    Mat3 h;
    h(0, 0) = 2.0 * pi2 * c2x * sy * sy * sz * sz;
    h(1, 1) = 2.0 * pi2 * c2y * sx * sx * sz * sz;
    h(2, 2) = 2.0 * pi2 * c2z * sx * sx * sy * sy;
    h(0, 1) = h(1, 0) = pi2 * s2x * s2y * sz * sz;
    h(0, 2) = h(2, 0) = pi2 * s2x * s2z * sy * sy;
    h(1, 2) = h(2, 1) = pi2 * s2y * s2z * sx * sx;
    return h;
  };
  return u;
}

Mat3 checkerboard_2d(const Vec3& p) {
  Mat3 a = Mat3::Zero();
  const double s = sgn(p.x() * p.y());
  a(0, 0) = a(1, 1) = 2.0;
  a(0, 1) = a(1, 0) = s;
  return a;
}

Mat3 checkerboard_3d(const Vec3& p) {
  const double s = sgn(p.x() * p.y() * p.z());
  Mat3 a;
  a.setConstant(s);
  a.diagonal().setConstant(3.0);
  return a;
}

std::vector<Vec3> orthant_centers(int dim) {
  std::vector<Vec3> pts;
  for (int m = 0; m < (1 << dim); ++m) {
    Vec3 p = Vec3::Zero();
    for (int i = 0; i < dim; ++i) p[i] = (m >> i & 1) ? 0.5 : -0.5;
    pts.push_back(p);
  }
  return pts;
}

int family_dim(Family f) { return f == Family::BubbleTet ? 3 : 2; }

std::vector<Experiment> make_registry() {
  std::vector<Experiment> reg;

  {
    Experiment ex;
    ex.name = "nondiv-2d-1";
    ex.description =
        "sign-pattern coefficient on (-1,1)^2, solution xy(1-e^{1-|x|})"
        "(1-e^{1-|y|})";
    ex.problem.kind = ProblemKind::Nondivergence;
    ex.problem.dim = 2;
    ex.problem.A = checkerboard_2d;
    ex.problem.exact = product_exp_solution();
    ex.problem.f = contraction_rhs(ex.problem.A, ex.problem.exact, 2);
    ex.problem.cordes = cordes_parameters(ex.problem.A, 2, orthant_centers(2));
    ex.lo = Vec3(-1, -1, 0);
    ex.hi = Vec3(1, 1, 0);
    ex.element = {Family::BubbleTri, 4};
    ex.bc = BcKind::DirichletH10;
    ex.initial_n = 4;
    ex.expected_h2_rate = 3.0;
    reg.push_back(std::move(ex));
  }

  for (double iota : {0.1, 0.01}) {
    Experiment ex;
    ex.name = iota == 0.1 ? "nondiv-2d-singular-10" : "nondiv-2d-singular-100";
    ex.description =
        "sign-pattern coefficient, r^{3/2} point singularity with a boundary "
        "layer at y=1";
    ex.problem.kind = ProblemKind::Nondivergence;
    ex.problem.dim = 2;
    ex.problem.A = checkerboard_2d;
    ex.problem.exact = singular_layer_solution(iota);
    ex.problem.f = contraction_rhs(ex.problem.A, ex.problem.exact, 2);
    ex.problem.cordes = cordes_parameters(ex.problem.A, 2, orthant_centers(2));
    ex.lo = Vec3(-1, -1, 0);
    ex.hi = Vec3(1, 1, 0);
    ex.element = {Family::BubbleTri, 3};
    ex.bc = BcKind::DirichletH10;
    ex.homogeneous = false;
    ex.initial_n = 4;
    ex.expected_h2_rate = 0.5;
    reg.push_back(std::move(ex));
  }

  {
    Experiment ex;
    ex.name = "biharmonic-2d";
    ex.description = "clamped plate on (0,1)^2, solution (sin pi x sin pi y)^2";
    ex.problem.kind = ProblemKind::Biharmonic;
    ex.problem.dim = 2;
    ex.problem.exact = sine_squared_2d();
    ex.problem.f = [](const Vec3& p) {
      const double a = std::cos(2 * M_PI * p.x());
      const double b = std::cos(2 * M_PI * p.y());
      const double pi4 = M_PI * M_PI * M_PI * M_PI;
      return 4.0 * pi4 * (4.0 * a * b - a - b);
    };
    ex.lo = Vec3(0, 0, 0);
    ex.hi = Vec3(1, 1, 0);
    ex.element = {Family::BubbleTri, 4};
    ex.bc = BcKind::ClampedH20;
    ex.initial_n = 2;
    ex.expected_h2_rate = 3.0;
    reg.push_back(std::move(ex));
  }

  {
    Experiment ex;
    ex.name = "nondiv-3d";
    ex.description =
        "sign-pattern coefficient on (-1,1)^3, solution sin pi x sin pi y "
        "sin pi z";
    ex.problem.kind = ProblemKind::Nondivergence;
    ex.problem.dim = 3;
    ex.problem.A = checkerboard_3d;
    ex.problem.exact = sine_product_3d();
    ex.problem.f = contraction_rhs(ex.problem.A, ex.problem.exact, 3);
    ex.problem.cordes = cordes_parameters(ex.problem.A, 3, orthant_centers(3));
    ex.lo = Vec3(-1, -1, -1);
    ex.hi = Vec3(1, 1, 1);
    ex.element = {Family::BubbleTet, 5};
    ex.bc = BcKind::DirichletH10;
    ex.initial_n = 2;
    ex.expected_h2_rate = 4.0;
    reg.push_back(std::move(ex));
  }

  {
    Experiment ex;
    ex.name = "biharmonic-3d";
    ex.description =
        "clamped plate on (0,1)^3, solution (sin pi x sin pi y sin pi z)^2";
    ex.problem.kind = ProblemKind::Biharmonic;
    ex.problem.dim = 3;
    ex.problem.exact = sine_squared_3d();
    ex.problem.f = [](const Vec3& p) {
      const double a = std::cos(2 * M_PI * p.x());
      const double b = std::cos(2 * M_PI * p.y());
      const double c = std::cos(2 * M_PI * p.z());
      const double pi4 = M_PI * M_PI * M_PI * M_PI;
      return 2.0 * pi4 *
             (4.0 * (a * b + a * c + b * c) - (a + b + c) - 9.0 * a * b * c);
    };
    ex.lo = Vec3(0, 0, 0);
    ex.hi = Vec3(1, 1, 1);
    ex.element = {Family::BubbleTet, 5};
    ex.bc = BcKind::ClampedH20;
    ex.initial_n = 1;
    ex.expected_h2_rate = 4.0;
    reg.push_back(std::move(ex));
  }

  return reg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// Assemble, solve and measure one level on the given mesh; optionally hands
// back the per-cell indicator and the discrete solution for snapshots.
LevelRecord solve_level(const Mesh& mesh, const Experiment& ex,
                        const ElementSpec& el, const RunOptions& opts,
                        Eigen::VectorXd* eta_cells = nullptr,
                        FeSpace* space_out = nullptr,
                        Eigen::VectorXd* x_full_out = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  LevelRecord lr;
  FeSpace space = build_space(mesh, el, ex.bc);
  if (!ex.homogeneous) set_dirichlet_data(space, ex.problem.exact);
  lr.ndof = space.n_free;

  const SparseSystem sys =
      ex.problem.kind == ProblemKind::Nondivergence
          ? assemble_nondivergence(space, ex.problem, opts.quad_degree)
          : assemble_biharmonic(space, ex.problem, opts.quad_degree);
  const Eigen::VectorXd x = solve(sys, opts.solver);
  const Eigen::VectorXd x_full = expand(space, x);

  const ErrorNorms en = error_norms(space, x_full, ex.problem.exact);
  lr.e_l2 = en.l2_rel;
  lr.e_h2 = en.h2_rel;
  lr.u_h2 = en.u_h2;
  if (ex.problem.kind == ProblemKind::Nondivergence) {
    EtaIndicator eta = eta_indicator(space, x_full, ex.problem);
    lr.eta = eta.total;
    if (eta_cells) *eta_cells = std::move(eta.per_cell);
  }
  if (x_full_out) *x_full_out = x_full;
  if (space_out) *space_out = std::move(space);
  lr.solved = true;
  lr.seconds = seconds_since(t0);
  return lr;
}

std::vector<double> vertex_values(const FeSpace& space,
                                  const Eigen::VectorXd& x_full) {
  std::vector<double> vals(space.mesh->n_vertices(), 0.0);
  for (Index i = 0; i < space.n_global; ++i) {
    const GlobalDof& d = space.dofs[i];
    if (d.kind == DofKind::VertexValue) vals[d.entity] = x_full[i];
  }
  return vals;
}

void format_field(std::string& line, const char* fmt, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), fmt, v);
  line += buf;
}

}  // namespace

const std::vector<Experiment>& experiment_registry() {
  static const std::vector<Experiment> reg = make_registry();
  return reg;
}

const Experiment& find_experiment(const std::string& name) {
  for (const Experiment& ex : experiment_registry())
    if (ex.name == name) return ex;
  std::string known;
  for (const Experiment& ex : experiment_registry())
    known += (known.empty() ? "" : ", ") + ex.name;
  throw InvalidArgumentError("unknown experiment '" + name + "' (known: " +
                             known + ")");
}

ConvergenceRecord run_convergence(const Experiment& ex, int levels,
                                  const RunOptions& opts) {
  require(levels >= 2, "run_convergence: need at least 2 levels");
  const ElementSpec el = opts.element.value_or(ex.element);
  require(family_dim(el.family) == ex.problem.dim,
          "run_convergence: element dimension does not match the experiment");

  ConvergenceRecord rec;
  rec.experiment = ex.name;
  rec.family = family_tag(el);
  for (int k = 1; k <= levels; ++k) {
    const int n = ex.initial_n << (k - 1);
    const Mesh mesh = ex.problem.dim == 2 ? build_structured_2d(n, ex.lo, ex.hi)
                                          : build_structured_3d(n, ex.lo, ex.hi);
    LevelRecord lr;
    try {
      lr = solve_level(mesh, ex, el, opts);
    } catch (const SolverFailure&) {
      lr.solved = false;
    }
    lr.level = k;
    lr.h = (ex.hi.x() - ex.lo.x()) / (2.0 * n);
    rec.levels.push_back(lr);
    if (!lr.solved) break;
  }
  compute_rates(rec);
  return rec;
}

ConvergenceRecord run_adaptive(const Experiment& ex, double theta,
                               Index dof_budget, const RunOptions& opts) {
  require(ex.problem.dim == 2 &&
              ex.problem.kind == ProblemKind::Nondivergence,
          "run_adaptive: supported for 2D nondivergence problems only");
  require(theta > 0.0 && theta < 1.0, "run_adaptive: theta must be in (0,1)");
  require(dof_budget > 0, "run_adaptive: dof budget must be positive");
  const ElementSpec el = opts.element.value_or(ex.element);
  require(family_dim(el.family) == 2,
          "run_adaptive: element dimension does not match the experiment");

  ConvergenceRecord rec;
  rec.experiment = ex.name;
  rec.family = family_tag(el);
  rec.adaptive = true;

  Mesh mesh = build_structured_2d(ex.initial_n, ex.lo, ex.hi);
  const double reg0 = mesh.shape_regularity();
  const int max_iter = 200;
  for (int it = 1; it <= max_iter; ++it) {
    mesh.validate();
    internal_check(mesh.shape_regularity() <= 5.0 * reg0,
                   "run_adaptive: shape regularity degraded");

    Eigen::VectorXd eta_cells;
    LevelRecord lr;
    try {
      FeSpace space;
      Eigen::VectorXd x_full;
      lr = solve_level(mesh, ex, el, opts, &eta_cells, &space, &x_full);
      if (!opts.vtk_dir.empty()) {
        char name[80];
        std::snprintf(name, sizeof(name), "/%s-%s-%03d.vtk", ex.name.c_str(),
                      rec.family.c_str(), it);
        VtkFields fields;
        fields.cell_scalar.assign(eta_cells.begin(), eta_cells.end());
        fields.point_scalar = vertex_values(space, x_full);
        write_vtk(opts.vtk_dir + name, mesh, fields);
      }
    } catch (const SolverFailure&) {
      lr.solved = false;
    }
    lr.level = it;
    rec.levels.push_back(lr);
    if (!lr.solved || lr.ndof >= dof_budget) break;

    // Doerfler marking: smallest cell set holding theta^2 of the squared
    // indicator, ties broken by index.
    std::vector<Index> order(static_cast<std::size_t>(eta_cells.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
      if (eta_cells[a] != eta_cells[b]) return eta_cells[a] > eta_cells[b];
      return a < b;
    });
    const double target = theta * theta * lr.eta * lr.eta;
    std::vector<Index> marked;
    double acc = 0.0;
    for (Index c : order) {
      if (acc >= target && !marked.empty()) break;
      marked.push_back(c);
      acc += eta_cells[c] * eta_cells[c];
    }
    mesh = refine_nvb(mesh, marked);
  }
  compute_rates(rec);
  return rec;
}

void compute_rates(ConvergenceRecord& rec) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < rec.levels.size(); ++k) {
    LevelRecord& cur = rec.levels[k];
    cur.rate_l2 = nan;
    cur.rate_h2 = nan;
    if (k == 0 || !cur.solved) continue;
    const LevelRecord& prev = rec.levels[k - 1];
    if (!prev.solved) continue;
    auto rate = [&](double e_prev, double e_cur) {
      if (!(e_prev > 0.0) || !(e_cur > 0.0)) return nan;
      if (rec.adaptive) {
        if (cur.ndof <= prev.ndof) return nan;
        return std::log(e_cur / e_prev) /
               std::log(double(cur.ndof) / double(prev.ndof));
      }
      return std::log2(e_prev / e_cur);
    };
    cur.rate_l2 = rate(prev.e_l2, cur.e_l2);
    cur.rate_h2 = rate(prev.e_h2, cur.e_h2);
  }
}

double tail_slope(const ConvergenceRecord& rec, double span) {
  require(span > 1.0, "tail_slope: span must exceed 1");
  Index nmax = 0;
  for (const LevelRecord& lr : rec.levels)
    if (lr.solved) nmax = std::max(nmax, lr.ndof);
  std::vector<double> xs, ys;
  for (const LevelRecord& lr : rec.levels) {
    if (!lr.solved || !(lr.e_h2 > 0.0)) continue;
    if (double(lr.ndof) * span < double(nmax)) continue;
    xs.push_back(std::log(double(lr.ndof)));
    ys.push_back(std::log(lr.e_h2));
  }
  require(xs.size() >= 2, "tail_slope: fewer than two usable levels");
  const double xm = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double ym = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xm) * (xs[i] - xm);
    sxy += (xs[i] - xm) * (ys[i] - ym);
  }
  require(sxx > 0.0, "tail_slope: degenerate dof sequence");
  return sxy / sxx;
}

void write_csv(const ConvergenceRecord& rec, std::ostream& out) {
  out << "level,h_or_dof,ndof,eL2,rateL2,eH2,rateH2,eta,seconds\n";
  for (const LevelRecord& lr : rec.levels) {
    std::string line = std::to_string(lr.level);
    line += ',';
    if (rec.adaptive)
      line += std::to_string(lr.ndof);
    else
      format_field(line, "%.6g", lr.h);
    line += ',' + std::to_string(lr.ndof);
    auto optional_field = [&](double v, const char* fmt) {
      line += ',';
      if (std::isfinite(v)) format_field(line, fmt, v);
    };
    if (lr.solved) {
      optional_field(lr.e_l2, "%.6e");
      optional_field(lr.rate_l2, "%.3f");
      optional_field(lr.e_h2, "%.6e");
      optional_field(lr.rate_h2, "%.3f");
      optional_field(lr.eta, "%.6e");
    } else {
      line += ",,,,,";
    }
    format_field(line, ",%.3f", lr.seconds);
    out << line << '\n';
  }
}

std::string family_tag(const ElementSpec& spec) {
  if (spec.family == Family::Specht) return "specht";
  const char* base = spec.family == Family::BubbleTri ? "tri" : "tet";
  return base + std::to_string(spec.ell);
}

ElementSpec parse_family(const std::string& tag) {
  if (tag == "specht") return {Family::Specht, 3};
  if (tag == "tri3") return {Family::BubbleTri, 3};
  if (tag == "tri4") return {Family::BubbleTri, 4};
  if (tag == "tri6") return {Family::BubbleTri, 6};
  if (tag == "tet5") return {Family::BubbleTet, 5};
  if (tag == "tet6") return {Family::BubbleTet, 6};
  throw InvalidArgumentError(
      "unknown element family '" + tag +
      "' (known: specht, tri3, tri4, tri6, tet5, tet6)");
}

}  // namespace mtfe
