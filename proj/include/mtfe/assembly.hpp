#ifndef MTFE_ASSEMBLY_HPP
#define MTFE_ASSEMBLY_HPP

#include "mtfe/femspace.hpp"

#include <functional>
#include <vector>

namespace mtfe {

enum class ProblemKind { Nondivergence, Biharmonic };

// Returns the dim x dim coefficient block; entries outside it are ignored.
using MatrixField = std::function<Mat3(const Vec3&)>;

// Pointwise ellipticity and Cordes diagnostics of a coefficient field.
struct CordesInfo {
  double eps = 0.0;     // inf over samples of (tr A)^2/|A|^2 - (d-1)
  double delta = 0.0;   // 1 - sqrt(1 - eps), the coercivity constant
  double gamma_min = 0.0;
  double gamma_max = 0.0;
  double lambda_min = 0.0;  // eigenvalue range over the samples
  double lambda_max = 0.0;
};

// Throws CordesViolation when eps <= 0 at some sample and
// InvalidArgumentError when A is not symmetric there.
CordesInfo cordes_parameters(const MatrixField& A, int dim,
                             const std::vector<Vec3>& samples);

struct ProblemSpec {
  ProblemKind kind = ProblemKind::Nondivergence;
  int dim = 2;
  MatrixField A;  // nondivergence coefficient
  std::function<double(const Vec3&)> f;
  ScalarField exact;
  CordesInfo cordes;

  // Scaling tr A(x)/|A(x)|^2 applied to the nondivergence form.
  double gamma(const Vec3& x) const;
};

struct SparseSystem {
  Eigen::SparseMatrix<double, Eigen::RowMajor> K;  // over free dofs
  Eigen::VectorXd b;
  bool symmetric = false;
};

// Lowest admissible quadrature degree: exact for the stiffness integrand
// when the coefficient is constant on each cell.
int default_quad_degree(const ElementSpec& spec);

// K(j, i) = int gamma (A : hess phi_i) lap phi_j, b(j) = int gamma f lap
// phi_j, both reduced to the free dofs of a DirichletH10 space. Inhomogeneous
// data enters through the space's lifted boundary values.
SparseSystem assemble_nondivergence(const FeSpace& space,
                                    const ProblemSpec& problem,
                                    int quad_degree = -1);

// K(j, i) = int hess phi_i : hess phi_j, b(j) = int f phi_j on the free dofs
// of a ClampedH20 space.
SparseSystem assemble_biharmonic(const FeSpace& space,
                                 const ProblemSpec& problem,
                                 int quad_degree = -1);

struct SolveOptions {
  bool iterative = false;
  double tol = 1e-12;
  int max_iterations = 2000;
  int restart = 60;
};

struct SolveStats {
  double rel_residual = 0.0;
  int iterations = 0;  // 0 for the direct paths
};

// Direct sparse factorization by default (LDLT when the system is flagged
// symmetric, pivoted LU otherwise); restarted GMRES with an incomplete-LU
// preconditioner when iterative is requested. Throws SolverFailure.
Eigen::VectorXd solve(const SparseSystem& system, const SolveOptions& opts = {},
                      SolveStats* stats = nullptr);

struct ErrorNorms {
  double l2_rel = 0.0;
  double h2_rel = 0.0;  // broken H2 seminorm
  double l2_abs = 0.0;
  double h2_abs = 0.0;
  double u_l2 = 0.0;
  double u_h2 = 0.0;
};

// Relative errors of the coefficient vector (over all global dofs) against
// the exact solution; quadrature elevated past the shape degree.
ErrorNorms error_norms(const FeSpace& space, const Eigen::VectorXd& x_full,
                       const ScalarField& u, int quad_degree = -1);

struct EtaIndicator {
  Eigen::VectorXd per_cell;  // ||f - A : hess u_h||_{L2(T)}
  double total = 0.0;        // root sum of squares
};

EtaIndicator eta_indicator(const FeSpace& space, const Eigen::VectorXd& x_full,
                           const ProblemSpec& problem, int quad_degree = -1);

}  // namespace mtfe

#endif
