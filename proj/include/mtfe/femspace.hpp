#ifndef MTFE_FEMSPACE_HPP
#define MTFE_FEMSPACE_HPP

#include "mtfe/elements.hpp"

#include <Eigen/SparseCore>

namespace mtfe {

// none: no constraints. dirichlet_h10: zero trace (value data on the
// boundary). clamped_h20: zero trace and zero normal derivative.
enum class BcKind { None, DirichletH10, ClampedH20 };

// Relaxed mode duplicates the facet normal-moment dofs per incident cell
// (edge normal moments in 2D, face normal moments in 3D). It breaks the
// inter-element normal continuity on purpose so the integration-by-parts
// identity can be exercised with nonzero face terms.
enum class SpaceMode { Coupled, Relaxed };

struct GlobalDof {
  DofKind kind = DofKind::VertexValue;
  int entity_dim = 0;
  Index entity = 0;     // global entity index (cell index for cell dofs)
  int comp = 0;
  std::array<int, 3> expo{0, 0, 0};
  Index owner_cell = -1;  // only set for relaxed duplicates
};

// One boundary-constrained dof block: raw dofs x over [start, start+size)
// relate to rotated coordinates y via y = Q * diag(scale) * x, where the
// first n_fix rows of y are prescribed by the boundary data.
struct ConstraintBlock {
  Index start = 0;
  int size = 1;
  int n_fix = 0;
  Eigen::MatrixXd Q;
  Eigen::VectorXd scale;
};

struct FeSpace {
  ElementSpec spec;
  BcKind bc = BcKind::None;
  SpaceMode mode = SpaceMode::Coupled;
  const Mesh* mesh = nullptr;

  Index n_global = 0;
  Index n_free = 0;
  std::vector<std::vector<Index>> cell_dofs;
  std::vector<GlobalDof> dofs;
  std::vector<ConstraintBlock> blocks;

  // x_full = C * x_free + x_bc
  Eigen::SparseMatrix<double> C;
  Eigen::VectorXd x_bc;
};

// The mesh must stay alive for the lifetime of the space.
FeSpace build_space(const Mesh& mesh, const ElementSpec& spec, BcKind bc,
                    SpaceMode mode = SpaceMode::Coupled);

// Recomputes x_bc so constrained dofs carry the interpolated boundary data of
// g; with bc == none this is a no-op. Idempotent.
void set_dirichlet_data(FeSpace& space, const ScalarField& g);

Eigen::VectorXd expand(const FeSpace& space, const Eigen::VectorXd& x_free);

// Full dof vector of the elementwise interpolant of u.
Eigen::VectorXd interpolate(const FeSpace& space, const ScalarField& u);

// Pointwise evaluation of the discrete function with full dof vector x_full.
PolyValue eval_global(const FeSpace& space, const Eigen::VectorXd& x_full,
                      Index cell, const std::array<double, 4>& bary);

// Largest relative moment of the normal-derivative jump against
// P_{ell-2}(F) over all interior facets.
double check_jump_moments(const FeSpace& space, const Eigen::VectorXd& x_free);

// Quadrature of the three terms of the integration-by-parts identity
//   ||lap v||^2 = ||hess v||^2 + face_sum,
// where face_sum already carries the factor 2 and runs over all facets
// (boundary facets use the one-sided trace).
struct MtIdentity {
  double lap_sq = 0.0;
  double hess_sq = 0.0;
  double face_sum = 0.0;
};
MtIdentity check_mt_identity(const FeSpace& space,
                             const Eigen::VectorXd& x_free);

}  // namespace mtfe

#endif
