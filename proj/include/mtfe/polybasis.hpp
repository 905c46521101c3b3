#ifndef MTFE_POLYBASIS_HPP
#define MTFE_POLYBASIS_HPP

#include "mtfe/core.hpp"
#include "mtfe/mesh.hpp"
#include "mtfe/quadrature.hpp"

#include <map>
#include <vector>

namespace mtfe {

// Polynomial in the barycentric coordinates of a simplex (nvars = dim+1
// variables). The representation is not reduced modulo sum(lambda) = 1;
// canonical() eliminates the last variable for well-defined comparisons.
template <class S>
struct PolyT {
  int nvars = 3;
  std::map<std::array<int, 4>, S> terms;

  PolyT() = default;
  explicit PolyT(int nv) : nvars(nv) {}

  static PolyT constant(int nv, const S& c) {
    PolyT p(nv);
    if (!(c == S(0))) p.terms[{0, 0, 0, 0}] = c;
    return p;
  }
  static PolyT variable(int nv, int i) {
    PolyT p(nv);
    std::array<int, 4> e{0, 0, 0, 0};
    e[i] = 1;
    p.terms[e] = S(1);
    return p;
  }

  void add_term(const std::array<int, 4>& e, const S& c) {
    auto it = terms.find(e);
    if (it == terms.end()) {
      if (!(c == S(0))) terms[e] = c;
    } else {
      it->second += c;
      if (it->second == S(0)) terms.erase(it);
    }
  }

  PolyT& operator+=(const PolyT& o) {
    for (const auto& [e, c] : o.terms) add_term(e, c);
    return *this;
  }
  PolyT& operator-=(const PolyT& o) {
    for (const auto& [e, c] : o.terms) add_term(e, S(0) - c);
    return *this;
  }
  friend PolyT operator+(PolyT a, const PolyT& b) { return a += b; }
  friend PolyT operator-(PolyT a, const PolyT& b) { return a -= b; }
  friend PolyT operator*(const PolyT& a, const PolyT& b) {
    PolyT out(a.nvars);
    for (const auto& [ea, ca] : a.terms)
      for (const auto& [eb, cb] : b.terms) {
        std::array<int, 4> e{ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2],
                             ea[3] + eb[3]};
        out.add_term(e, ca * cb);
      }
    return out;
  }
  friend PolyT operator*(const S& s, PolyT p) {
    if (s == S(0)) return PolyT(p.nvars);
    for (auto& [e, c] : p.terms) c *= s;
    return p;
  }

  PolyT derivative(int var) const {
    PolyT out(nvars);
    for (const auto& [e, c] : terms) {
      if (e[var] == 0) continue;
      std::array<int, 4> d = e;
      --d[var];
      out.add_term(d, c * S(e[var]));
    }
    return out;
  }

  int degree() const {
    int deg = 0;
    for (const auto& [e, c] : terms)
      deg = std::max(deg, e[0] + e[1] + e[2] + e[3]);
    return deg;
  }

  template <class P>
  P eval(const std::array<P, 4>& x) const {
    P sum(0);
    for (const auto& [e, c] : terms) {
      P t(c);
      for (int i = 0; i < nvars; ++i)
        for (int p = 0; p < e[i]; ++p) t *= x[i];
      sum += t;
    }
    return sum;
  }

  // Substitute lambda_{nvars-1} = 1 - sum(other vars); the result has zero
  // exponent in the last variable, making coefficients unique.
  PolyT canonical() const {
    PolyT out(nvars);
    const int last = nvars - 1;
    PolyT sub = PolyT::constant(nvars, S(1));
    for (int i = 0; i < last; ++i) sub -= PolyT::variable(nvars, i);
    for (const auto& [e, c] : terms) {
      PolyT t(nvars);
      std::array<int, 4> base = e;
      base[last] = 0;
      t.terms[base] = c;
      for (int p = 0; p < e[last]; ++p) t = t * sub;
      out += t;
    }
    return out;
  }

  S max_abs_coeff() const {
    using std::abs;
    S m(0);
    for (const auto& [e, c] : terms)
      if (abs(c) > m) m = abs(c);
    return m;
  }
};

using BaryPoly = PolyT<double>;

// --- general helpers -------------------------------------------------------

// Homogeneous barycentric monomials of total degree `degree` (they span
// P_degree on the simplex); deterministic lexicographic order.
std::vector<BaryPoly> homogeneous_monomials(int nvars, int degree);

// Exact integral over the reference simplex of dimension nvars-1.
double integrate_reference(const BaryPoly& p);

// 1D polynomial (ascending coefficients) evaluated at another polynomial.
BaryPoly eval_poly1d_at(const std::vector<double>& coeffs, const BaryPoly& x);
double eval_poly1d(const std::vector<double>& coeffs, double x);

// Keep only the variables in `kept` (ascending), substituting 0 elsewhere and
// renumbering; used to restrict cell polynomials to faces/edges.
BaryPoly restrict_to_subentity(const BaryPoly& p, const std::vector<int>& kept);

// Value, physical gradient and Hessian of a barycentric polynomial at a
// barycentric point of the given cell.
struct PolyValue {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
  Mat3 hessian = Mat3::Zero();
};
PolyValue eval_derivatives(const BaryPoly& p, const CellFrame& frame,
                           const std::array<double, 4>& bary);

// Second-derivative pair enumeration (i <= j) over nvars variables.
int n_pairs(int nvars);
std::array<int, 2> pair_vars(int nvars, int pair);
int pair_index(int nvars, int i, int j);

// Evaluations of a family of polynomials at the points of a rule.
struct PolyTables {
  Eigen::MatrixXd val;               // n_polys x n_pts
  std::vector<Eigen::MatrixXd> d1;   // one matrix per variable
  std::vector<Eigen::MatrixXd> d2;   // one matrix per (i<=j) pair
};
PolyTables tabulate(const std::vector<BaryPoly>& polys, const QuadRule& rule,
                    bool with_second);

// Lagrange basis of P_degree on the reference simplex lattice. node_expo[n]
// are the lattice exponents (node barycentric = expo/degree).
struct LagrangeFamily {
  int degree = 1;
  std::vector<std::array<int, 4>> node_expo;
  std::vector<BaryPoly> basis;
};
LagrangeFamily lagrange_basis(int nvars, int degree);

// --- constructions specific to the element families ------------------------

// Quintic vertex bubbles phi_i = 2 b_T (5(l_i - l_i^2 - 2 l_{i-1} l_{i+1}) - 1)
// on the triangle; sum(phi_i) = -6 b_T.
std::array<BaryPoly, 3> specht_bubbles();
template <class S>
std::array<PolyT<S>, 3> specht_bubbles_t() {
  std::array<PolyT<S>, 3> out;
  using P = PolyT<S>;
  P bt = P::variable(3, 0) * P::variable(3, 1) * P::variable(3, 2);
  for (int i = 0; i < 3; ++i) {
    const int im = (i + 2) % 3, ip = (i + 1) % 3;
    P li = P::variable(3, i);
    P g = S(5) * (li - li * li - S(2) * (P::variable(3, im) * P::variable(3, ip)))
          - P::constant(3, S(1));
    out[i] = S(2) * (bt * g);
  }
  return out;
}

// Monic degree-(ell-3) polynomial psi with s^2(1-s)^2 psi orthogonal to
// P_{ell-4} on [0,1]; ascending coefficients. For ell = 4 this is s - 1/2.
std::vector<double> edge_orth_psi(int ell);

// Monic degree-(ell-2) polynomial orthogonal to P_{ell-3} under weight
// s(1-s) on [0,1]; even about s = 1/2. Ascending coefficients.
std::vector<double> edge_test_phi(int ell);

// Monic degree-k orthogonal polynomial on [-1,1] for the weight 1 - x^2
// (ascending coefficients); used by the odd-degree negative control.
std::vector<double> orthopoly_weight_1mx2(int k);

// Face-orthogonal system on the reference tetrahedron for degree ell >= 5.
// q_basis spans P_{ell-4}(F) (canonical face monomials); varphi extends it to
// P_{ell-2}(F) with int_F b_F q varphi = 0; phi_tilde[f][i] in X_F are
// biorthogonal to q_basis under the weight b_F^2; xi[f][i] are the volume-
// corrected face bubbles b_T b_F phi_tilde - q_tilde.
struct FaceOrthoSystem {
  int ell = 5;
  std::vector<BaryPoly> q_basis;   // face polynomials (nvars = 3)
  std::vector<BaryPoly> varphi;    // face polynomials (nvars = 3)
  std::array<std::vector<BaryPoly>, 4> phi_tilde;  // cell polynomials
  std::array<std::vector<BaryPoly>, 4> xi;         // cell polynomials
};
const FaceOrthoSystem& face_ortho_system(int ell);

}  // namespace mtfe

#endif
