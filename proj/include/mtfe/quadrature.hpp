#ifndef MTFE_QUADRATURE_HPP
#define MTFE_QUADRATURE_HPP

#include "mtfe/core.hpp"

#include <functional>
#include <vector>

namespace mtfe {

// Quadrature rule on the reference simplex of dimension dim (1, 2 or 3).
// Points are stored in barycentric coordinates (dim+1 entries used); weights
// sum to the reference measure 1/dim!.
struct QuadRule {
  int dim = 1;
  int degree = 0;
  std::vector<std::array<double, 4>> points;
  std::vector<double> weights;
  int size() const { return static_cast<int>(points.size()); }
};

// Highest supported construction degree.
inline constexpr int kMaxQuadDegree = 40;

// Cached rule exact for polynomials up to `degree` (Duffy-collapsed
// Gauss-Legendre product rule).
const QuadRule& simplex_rule(int dim, int degree);

double reference_measure(int dim);

// Exact integral of the barycentric monomial lambda^expo over the reference
// simplex: expo!("multi-factorial") / (|expo| + dim)!.
double exact_monomial_integral(int dim, const std::array<int, 4>& expo);

// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre_01(int n, std::vector<double>& x, std::vector<double>& w);

// Exponents (over the trailing `entity_dim` barycentric coordinates) of the
// canonical monomial basis of P_k on an entity, graded by degree.
std::vector<std::array<int, 3>> monomial_exponents(int entity_dim, int k);

// Value of the canonical monomial at a barycentric point of the entity.
double eval_entity_monomial(const std::array<int, 3>& expo,
                            const std::array<double, 4>& bary);

// L2 projection onto P_k of the entity, returned as coefficients in the
// canonical monomial basis. The integrand is given in barycentric coordinates;
// quad_degree controls the rule used for its moments.
Eigen::VectorXd project_l2(
    int entity_dim, int k,
    const std::function<double(const std::array<double, 4>&)>& integrand,
    int quad_degree);

}  // namespace mtfe

#endif
