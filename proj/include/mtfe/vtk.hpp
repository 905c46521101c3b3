#ifndef MTFE_VTK_HPP
#define MTFE_VTK_HPP

#include "mtfe/mesh.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mtfe {

// Optional data arrays attached to a mesh snapshot. A nonempty array must
// match the vertex (point) or cell count; empty arrays are omitted.
struct VtkFields {
  std::vector<double> point_scalar;
  std::string point_name = "u";
  std::vector<double> cell_scalar;
  std::string cell_name = "eta";
};

// Legacy ASCII unstructured-grid output (cell types 5 and 10).
void write_vtk(std::ostream& out, const Mesh& mesh,
               const VtkFields& fields = {});
void write_vtk(const std::string& path, const Mesh& mesh,
               const VtkFields& fields = {});

}  // namespace mtfe

#endif
