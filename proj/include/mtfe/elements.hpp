#ifndef MTFE_ELEMENTS_HPP
#define MTFE_ELEMENTS_HPP

#include "mtfe/mesh.hpp"
#include "mtfe/polybasis.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mtfe {

// Specht: cubic triangle enriched with two quintic vertex bubbles (12 dofs).
// BubbleTri: P_ell triangle plus three edge-orthogonal cell bubbles
//            (ell = 3 or even ell >= 4).
// BubbleTet: P_ell tetrahedron plus face-orthogonal bubbles (ell >= 5).
enum class Family { Specht, BubbleTri, BubbleTet };

struct ElementSpec {
  Family family = Family::Specht;
  int ell = 3;

  int dim() const { return family == Family::BubbleTet ? 3 : 2; }
  bool operator==(const ElementSpec& o) const {
    return family == o.family && ell == o.ell;
  }
};

// Throws InvalidArgumentError for unsupported (family, ell) combinations.
void validate_spec(const ElementSpec& spec);

// Accepts "specht", "triL" (L = 3 or even) and "tetL" (L >= 5).
ElementSpec parse_element(const std::string& name);
std::string element_name(const ElementSpec& spec);

enum class DofKind {
  VertexValue,
  VertexGrad,   // comp = Cartesian axis, scaled by the vertex mesh size
  VertexHess,   // comp = symmetric pair index, scaled by its square (3D)
  EdgeValue,    // mean of v times s^expo[0], s = coordinate of the higher end
  EdgeNormal,   // mean of dv/dn times s^expo[0], scaled by the edge length;
                // comp selects the edge-frame normal in 3D
  FaceValue,    // mean of v times the face monomial expo (3D)
  FaceNormal,   // mean of dv/dn times the face monomial, scaled by sqrt(2|F|)
  CellValue,    // mean of v times the cell monomial
};

struct DofDescriptor {
  DofKind kind = DofKind::VertexValue;
  int entity = 0;  // local vertex / edge / face index (0 for cell dofs)
  int comp = 0;
  std::array<int, 3> expo{0, 0, 0};
};

int n_dofs(const ElementSpec& spec);
int shape_degree(const ElementSpec& spec);

// Shape functions in barycentric coordinates; identical on every cell because
// cell vertex tuples are stored sorted (the edge orientation implied by the
// enrichment bubbles then matches the global one). Cached per spec.
const std::vector<BaryPoly>& shape_basis(const ElementSpec& spec);

// Degree-of-freedom functionals in a fixed order: vertices, then edges, then
// faces, then cell moments. Cached per spec.
const std::vector<DofDescriptor>& dof_layout(const ElementSpec& spec);

// Same edge/vertex layout rules for an arbitrary degree; supports the odd
// degrees for which no unisolvent bubble enrichment exists.
std::vector<DofDescriptor> bubble_tri_layout(int ell);

// Matrix of the functionals applied to arbitrary polynomials on one cell:
// entry (j, s) = functional_j(polys[s]).
Eigen::MatrixXd apply_dofs(const std::vector<DofDescriptor>& layout,
                           const std::vector<BaryPoly>& polys,
                           const Mesh& mesh, Index cell);

// apply_dofs on the cached shape basis (tabulated once per spec).
Eigen::MatrixXd dof_matrix(const ElementSpec& spec, const Mesh& mesh,
                           Index cell);

// Smooth field with optional derivative callbacks; gradient is required by
// the vertex-gradient and normal-moment dofs, hessian by the 3D vertex dofs.
struct ScalarField {
  std::function<double(const Vec3&)> value;
  std::function<Vec3(const Vec3&)> gradient;
  std::function<Mat3(const Vec3&)> hessian;
};

// Functionals applied to a smooth field (entity quadrature of the same order
// used for the shape tables).
Eigen::VectorXd dof_values(const ElementSpec& spec, const Mesh& mesh,
                           Index cell, const ScalarField& u);

// coeff(s, j): expansion of the j-th nodal basis function in the shape basis.
struct NodalBasis {
  Eigen::MatrixXd coeff;
  double rcond = 0.0;
};

// Inverts the dof matrix; throws UnisolvenceFailure when it is numerically
// singular.
NodalBasis nodal_basis(const ElementSpec& spec, const Mesh& mesh, Index cell);

}  // namespace mtfe

#endif
