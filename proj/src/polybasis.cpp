#include "mtfe/polybasis.hpp"

#include <cmath>
#include <mutex>

namespace mtfe {

namespace {

void enumerate_homogeneous(int nvars, int degree, int var,
                           std::array<int, 4>& expo,
                           std::vector<BaryPoly>& out) {
  if (var == nvars - 1) {
    expo[var] = degree;
    BaryPoly p(nvars);
    p.terms[expo] = 1.0;
    out.push_back(p);
    expo[var] = 0;
    return;
  }
  for (int k = degree; k >= 0; --k) {
    expo[var] = k;
    enumerate_homogeneous(nvars, degree - k, var + 1, expo, out);
  }
  expo[var] = 0;
}

// Solves the small positive-definite Gram systems used by the orthogonal
// constructions, with a conditioning guard.
Eigen::VectorXd guarded_solve(const Eigen::MatrixXd& A,
                              const Eigen::VectorXd& b, const char* what) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double cond = svd.singularValues()(0) /
                      svd.singularValues()(svd.singularValues().size() - 1);
  if (!(cond < 1e12))
    throw ConditioningError(std::string("polybasis: ill-conditioned system: ") +
                            what);
  return svd.solve(b);
}

BaryPoly face_monomial(const std::array<int, 3>& expo) {
  BaryPoly p(3);
  p.terms[{0, expo[0], expo[1], 0}] = 1.0;
  return p;
}

}  // namespace

std::vector<BaryPoly> homogeneous_monomials(int nvars, int degree) {
  std::vector<BaryPoly> out;
  if (degree < 0) return out;
  std::array<int, 4> expo{0, 0, 0, 0};
  enumerate_homogeneous(nvars, degree, 0, expo, out);
  return out;
}

double integrate_reference(const BaryPoly& p) {
  double sum = 0.0;
  for (const auto& [e, c] : p.terms)
    sum += c * exact_monomial_integral(p.nvars - 1, e);
  return sum;
}

BaryPoly eval_poly1d_at(const std::vector<double>& coeffs, const BaryPoly& x) {
  BaryPoly out(x.nvars);
  // Horner from the top coefficient
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
    out = out * x;
    out += BaryPoly::constant(x.nvars, *it);
  }
  return out;
}

double eval_poly1d(const std::vector<double>& coeffs, double x) {
  double v = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * x + *it;
  return v;
}

BaryPoly restrict_to_subentity(const BaryPoly& p,
                               const std::vector<int>& kept) {
  BaryPoly out(static_cast<int>(kept.size()));
  for (const auto& [e, c] : p.terms) {
    bool alive = true;
    std::array<int, 4> sub{0, 0, 0, 0};
    int consumed = 0;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      sub[k] = e[kept[k]];
      consumed += e[kept[k]];
    }
    int total = 0;
    for (int i = 0; i < p.nvars; ++i) total += e[i];
    if (consumed != total) alive = false;  // a zeroed variable appears
    if (alive) out.add_term(sub, c);
  }
  return out;
}

PolyValue eval_derivatives(const BaryPoly& p, const CellFrame& frame,
                           const std::array<double, 4>& bary) {
  PolyValue out;
  out.value = p.eval(bary);
  for (int i = 0; i < p.nvars; ++i) {
    const BaryPoly di = p.derivative(i);
    out.gradient += di.eval(bary) * frame.grad_lambda[i];
    for (int j = i; j < p.nvars; ++j) {
      const double dij = di.derivative(j).eval(bary);
      if (dij == 0.0) continue;
      const Mat3 outer =
          frame.grad_lambda[i] * frame.grad_lambda[j].transpose();
      out.hessian += dij * (i == j ? outer : Mat3(outer + outer.transpose()));
    }
  }
  return out;
}

int n_pairs(int nvars) { return nvars * (nvars + 1) / 2; }

std::array<int, 2> pair_vars(int nvars, int pair) {
  int k = 0;
  for (int i = 0; i < nvars; ++i)
    for (int j = i; j < nvars; ++j)
      if (k++ == pair) return {i, j};
  throw InternalError("pair_vars: index out of range");
}

int pair_index(int nvars, int i, int j) {
  if (i > j) std::swap(i, j);
  int k = 0;
  for (int a = 0; a < nvars; ++a)
    for (int b = a; b < nvars; ++b) {
      if (a == i && b == j) return k;
      ++k;
    }
  throw InternalError("pair_index: out of range");
}

PolyTables tabulate(const std::vector<BaryPoly>& polys, const QuadRule& rule,
                    bool with_second) {
  const int np = static_cast<int>(polys.size());
  const int nq = rule.size();
  const int nv = np > 0 ? polys[0].nvars : rule.dim + 1;
  PolyTables t;
  t.val.resize(np, nq);
  t.d1.assign(nv, Eigen::MatrixXd(np, nq));
  if (with_second) t.d2.assign(n_pairs(nv), Eigen::MatrixXd(np, nq));
  for (int s = 0; s < np; ++s) {
    for (int q = 0; q < nq; ++q) t.val(s, q) = polys[s].eval(rule.points[q]);
    for (int i = 0; i < nv; ++i) {
      const BaryPoly di = polys[s].derivative(i);
      for (int q = 0; q < nq; ++q) t.d1[i](s, q) = di.eval(rule.points[q]);
      if (with_second)
        for (int j = i; j < nv; ++j) {
          const BaryPoly dij = di.derivative(j);
          const int pr = pair_index(nv, i, j);
          for (int q = 0; q < nq; ++q) t.d2[pr](s, q) = dij.eval(rule.points[q]);
        }
    }
  }
  return t;
}

LagrangeFamily lagrange_basis(int nvars, int degree) {
  LagrangeFamily fam;
  fam.degree = degree;
  const auto monos = homogeneous_monomials(nvars, degree);
  const int n = static_cast<int>(monos.size());
  // lattice nodes share the monomial exponent enumeration
  for (const auto& m : monos) fam.node_expo.push_back(m.terms.begin()->first);
  Eigen::MatrixXd V(n, n);
  for (int node = 0; node < n; ++node) {
    std::array<double, 4> bary{0, 0, 0, 0};
    for (int i = 0; i < nvars; ++i)
      bary[i] = static_cast<double>(fam.node_expo[node][i]) / degree;
    for (int s = 0; s < n; ++s) V(node, s) = monos[s].eval(bary);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
  if (!lu.isInvertible())
    throw ConditioningError("lagrange_basis: singular Vandermonde");
  const Eigen::MatrixXd C = lu.solve(Eigen::MatrixXd::Identity(n, n));
  fam.basis.resize(n, BaryPoly(nvars));
  for (int node = 0; node < n; ++node) {
    BaryPoly p(nvars);
    for (int s = 0; s < n; ++s)
      if (C(s, node) != 0.0)
        p.add_term(monos[s].terms.begin()->first, C(s, node));
    fam.basis[node] = p;
  }
  return fam;
}

std::array<BaryPoly, 3> specht_bubbles() { return specht_bubbles_t<double>(); }

std::vector<double> edge_orth_psi(int ell) {
  require(ell >= 4 && ell % 2 == 0, "edge_orth_psi: even ell >= 4");
  const int m = ell - 3;  // leading degree
  const auto moment = [](int a) {
    // int_0^1 s^(a+2) (1-s)^2 ds
    return 2.0 / (double(a + 3) * double(a + 4) * double(a + 5));
  };
  const int n = m;  // unknown coefficients c_0..c_{m-1}
  Eigen::MatrixXd G(n, n);
  Eigen::VectorXd rhs(n);
  for (int row = 0; row < n; ++row) {
    for (int k = 0; k < n; ++k) G(row, k) = moment(row + k);
    rhs(row) = -moment(row + m);
  }
  const Eigen::VectorXd c = guarded_solve(G, rhs, "edge_orth_psi");
  std::vector<double> coeffs(m + 1, 0.0);
  for (int k = 0; k < n; ++k) coeffs[k] = c(k);
  coeffs[m] = 1.0;
  return coeffs;
}

std::vector<double> edge_test_phi(int ell) {
  require(ell >= 3, "edge_test_phi: ell >= 3");
  const int m = ell - 2;
  const auto moment = [](int a) {
    // int_0^1 s^(a+1) (1-s) ds
    return 1.0 / (double(a + 2) * double(a + 3));
  };
  Eigen::MatrixXd G(m, m);
  Eigen::VectorXd rhs(m);
  for (int row = 0; row < m; ++row) {
    for (int k = 0; k < m; ++k) G(row, k) = moment(row + k);
    rhs(row) = -moment(row + m);
  }
  const Eigen::VectorXd c = guarded_solve(G, rhs, "edge_test_phi");
  std::vector<double> coeffs(m + 1, 0.0);
  for (int k = 0; k < m; ++k) coeffs[k] = c(k);
  coeffs[m] = 1.0;
  return coeffs;
}

std::vector<double> orthopoly_weight_1mx2(int k) {
  require(k >= 0, "orthopoly_weight_1mx2: k >= 0");
  const auto moment = [](int j) {
    if (j % 2 == 1) return 0.0;
    return 2.0 / (j + 1.0) - 2.0 / (j + 3.0);
  };
  if (k == 0) return {1.0};
  Eigen::MatrixXd G(k, k);
  Eigen::VectorXd rhs(k);
  for (int row = 0; row < k; ++row) {
    for (int col = 0; col < k; ++col) G(row, col) = moment(row + col);
    rhs(row) = -moment(row + k);
  }
  const Eigen::VectorXd c = guarded_solve(G, rhs, "orthopoly_weight_1mx2");
  std::vector<double> coeffs(k + 1, 0.0);
  for (int j = 0; j < k; ++j) coeffs[j] = c(j);
  coeffs[k] = 1.0;
  return coeffs;
}

const FaceOrthoSystem& face_ortho_system(int ell) {
  require(ell >= 5, "face_ortho_system: ell >= 5");
  static std::map<int, FaceOrthoSystem> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(ell);
  if (it != cache.end()) return it->second;

  FaceOrthoSystem sys;
  sys.ell = ell;
  const BaryPoly bF_face = BaryPoly::variable(3, 0) * BaryPoly::variable(3, 1) *
                           BaryPoly::variable(3, 2);

  for (const auto& e : monomial_exponents(2, ell - 4))
    sys.q_basis.push_back(face_monomial({e[0], e[1], 0}));
  const int nq = static_cast<int>(sys.q_basis.size());

  // extension polynomials of exact degree ell-3 and ell-2, orthogonalized
  // against b_F P_{ell-4}(F)
  Eigen::MatrixXd G(nq, nq);
  for (int i = 0; i < nq; ++i)
    for (int j = 0; j < nq; ++j)
      G(i, j) = integrate_reference(bF_face * sys.q_basis[i] * sys.q_basis[j]);
  for (int deg = ell - 3; deg <= ell - 2; ++deg)
    for (int a = deg; a >= 0; --a) {
      const BaryPoly m = face_monomial({a, deg - a, 0});
      Eigen::VectorXd rhs(nq);
      for (int j = 0; j < nq; ++j)
        rhs(j) = integrate_reference(bF_face * sys.q_basis[j] * m);
      const Eigen::VectorXd c = guarded_solve(G, rhs, "face extension");
      BaryPoly phi = m;
      for (int j = 0; j < nq; ++j) phi -= c(j) * sys.q_basis[j];
      sys.varphi.push_back(phi);
    }
  const int nphi = static_cast<int>(sys.varphi.size());
  internal_check(nphi == 2 * ell - 3, "face_ortho_system: extension count");

  const LagrangeFamily fam = lagrange_basis(4, ell - 2);
  const BaryPoly bT = BaryPoly::variable(4, 0) * BaryPoly::variable(4, 1) *
                      BaryPoly::variable(4, 2) * BaryPoly::variable(4, 3);
  const auto vol_q = homogeneous_monomials(4, ell - 4);
  const int nvq = static_cast<int>(vol_q.size());
  Eigen::MatrixXd Gvol(nvq, nvq);
  for (int i = 0; i < nvq; ++i)
    for (int j = 0; j < nvq; ++j)
      Gvol(i, j) = integrate_reference(bT * bT * vol_q[i] * vol_q[j]);

  const double face_meas = reference_measure(2);
  for (int f = 0; f < 4; ++f) {
    std::vector<int> kept;
    for (int v = 0; v < 4; ++v)
      if (v != f) kept.push_back(v);
    // X_F: Lagrange functions whose node lies on face f
    std::vector<int> nodes;
    for (std::size_t n = 0; n < fam.node_expo.size(); ++n)
      if (fam.node_expo[n][f] == 0) nodes.push_back(static_cast<int>(n));
    const int nx = static_cast<int>(nodes.size());
    internal_check(nx == nq + nphi, "face_ortho_system: X_F dimension");
    std::vector<BaryPoly> xf_restr(nx);
    for (int n = 0; n < nx; ++n)
      xf_restr[n] = restrict_to_subentity(fam.basis[nodes[n]], kept);

    Eigen::MatrixXd A(nx, nx);
    for (int n = 0; n < nx; ++n) {
      const BaryPoly wn = bF_face * bF_face * xf_restr[n];
      for (int j = 0; j < nq; ++j)
        A(j, n) = integrate_reference(wn * sys.q_basis[j]) / face_meas;
      for (int k = 0; k < nphi; ++k)
        A(nq + k, n) = integrate_reference(wn * sys.varphi[k]) / face_meas;
    }
    BaryPoly bF_cell = BaryPoly::constant(4, 1.0);
    for (int v : kept) bF_cell = bF_cell * BaryPoly::variable(4, v);

    sys.phi_tilde[f].resize(nq);
    sys.xi[f].resize(nq);
    for (int i = 0; i < nq; ++i) {
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nx);
      rhs(i) = 1.0;
      const Eigen::VectorXd x = guarded_solve(A, rhs, "phi_tilde");
      BaryPoly pt(4);
      for (int n = 0; n < nx; ++n) pt += x(n) * fam.basis[nodes[n]];
      sys.phi_tilde[f][i] = pt;

      const BaryPoly core = bT * bF_cell * pt;
      Eigen::VectorXd vr(nvq);
      for (int j = 0; j < nvq; ++j)
        vr(j) = integrate_reference(core * vol_q[j]);
      const Eigen::VectorXd y = guarded_solve(Gvol, vr, "xi volume fix");
      BaryPoly qt(4);
      for (int j = 0; j < nvq; ++j) qt += y(j) * (bT * bT * vol_q[j]);
      sys.xi[f][i] = core - qt;
    }
  }
  return cache.emplace(ell, std::move(sys)).first->second;
}

}  // namespace mtfe
