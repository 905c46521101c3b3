#ifndef MTFE_EXPERIMENTS_HPP
#define MTFE_EXPERIMENTS_HPP

#include "mtfe/assembly.hpp"
#include "mtfe/femspace.hpp"

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mtfe {

// One registered benchmark: problem data, domain box, boundary handling and
// the element family the reference study uses.
struct Experiment {
  std::string name;
  std::string description;
  ProblemSpec problem;
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
  ElementSpec element;
  BcKind bc = BcKind::DirichletH10;
  // false: constrained dofs carry boundary data interpolated from exact.
  bool homogeneous = true;
  int initial_n = 2;  // boxes per direction on the coarsest level
  double expected_h2_rate = 0.0;
};

// nondiv-2d-1, nondiv-2d-singular-10, nondiv-2d-singular-100,
// biharmonic-2d, nondiv-3d, biharmonic-3d.
const std::vector<Experiment>& experiment_registry();
const Experiment& find_experiment(const std::string& name);

struct LevelRecord {
  int level = 0;
  double h = 0.0;  // half the grid spacing; 0 on adaptive levels
  Index ndof = 0;  // free dofs after boundary reduction
  double e_l2 = 0.0;
  double rate_l2 = std::numeric_limits<double>::quiet_NaN();
  double e_h2 = 0.0;
  double rate_h2 = std::numeric_limits<double>::quiet_NaN();
  // residual indicator; NaN where undefined (biharmonic runs)
  double eta = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  double u_h2 = 0.0;  // norm behind the relative errors (not serialized)
  bool solved = false;
};

struct ConvergenceRecord {
  std::string experiment;
  std::string family;
  bool adaptive = false;
  std::vector<LevelRecord> levels;
};

struct RunOptions {
  std::optional<ElementSpec> element;  // override of the registered family
  int quad_degree = -1;                // assembly quadrature; -1: default
  SolveOptions solver;
  std::string vtk_dir;  // adaptive runs drop per-iteration snapshots here
};

// Uniform study: level k uses initial_n * 2^(k-1) boxes per direction.
ConvergenceRecord run_convergence(const Experiment& ex, int levels,
                                  const RunOptions& opts = {});

// Solve, estimate, mark (Doerfler theta), bisect; stops once the free dof
// count reaches dof_budget (the last level may exceed it).
ConvergenceRecord run_adaptive(const Experiment& ex, double theta,
                               Index dof_budget, const RunOptions& opts = {});

// rate_k = log2(e_{k-1}/e_k) on uniform records; on adaptive records the
// incremental slope of log e against log ndof. First level and degenerate
// pairs stay NaN.
void compute_rates(ConvergenceRecord& record);

// Least-squares slope of log e_h2 against log ndof over the trailing levels
// with ndof >= max ndof / span.
double tail_slope(const ConvergenceRecord& record, double span = 10.0);

// columns: level,h_or_dof,ndof,eL2,rateL2,eH2,rateH2,eta,seconds
void write_csv(const ConvergenceRecord& record, std::ostream& out);

// "specht", "tri3", "tri4", "tri6", "tet5", "tet6"
std::string family_tag(const ElementSpec& spec);
ElementSpec parse_family(const std::string& tag);

}  // namespace mtfe

#endif
