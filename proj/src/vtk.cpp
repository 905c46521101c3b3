#include "mtfe/vtk.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

namespace mtfe {

namespace {

void write_scalar_block(std::ostream& out, const std::string& name,
                        const std::vector<double>& values) {
  out << "SCALARS " << name << " double 1\n";
  out << "LOOKUP_TABLE default\n";
  char buf[40];
  for (double v : values) {
    std::snprintf(buf, sizeof(buf), "%.9g\n", v);
    out << buf;
  }
}

}  // namespace

void write_vtk(std::ostream& out, const Mesh& mesh, const VtkFields& fields) {
  const Index nv = mesh.n_vertices();
  const Index nc = mesh.n_cells();
  require(fields.point_scalar.empty() ||
              static_cast<Index>(fields.point_scalar.size()) == nv,
          "write_vtk: point array size mismatch");
  require(fields.cell_scalar.empty() ||
              static_cast<Index>(fields.cell_scalar.size()) == nc,
          "write_vtk: cell array size mismatch");

  out << "# vtk DataFile Version 2.0\n";
  out << "mtfe snapshot\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";

  out << "POINTS " << nv << " double\n";
  char buf[96];
  for (const Vec3& p : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
    out << buf;
  }

  const int k = mesh.verts_per_cell();
  out << "CELLS " << nc << ' ' << nc * (k + 1) << "\n";
  for (const auto& cell : mesh.cells) {
    out << k;
    for (int i = 0; i < k; ++i) out << ' ' << cell[i];
    out << '\n';
  }

  const int vtk_type = mesh.dim == 2 ? 5 : 10;
  out << "CELL_TYPES " << nc << "\n";
  for (Index c = 0; c < nc; ++c) out << vtk_type << '\n';

  if (!fields.point_scalar.empty()) {
    out << "POINT_DATA " << nv << "\n";
    write_scalar_block(out, fields.point_name, fields.point_scalar);
  }
  if (!fields.cell_scalar.empty()) {
    out << "CELL_DATA " << nc << "\n";
    write_scalar_block(out, fields.cell_name, fields.cell_scalar);
  }
}

void write_vtk(const std::string& path, const Mesh& mesh,
               const VtkFields& fields) {
  std::ofstream out(path);
  require(out.good(), "write_vtk: cannot open " + path);
  write_vtk(out, mesh, fields);
  out.flush();
  if (!out.good()) throw Error("write_vtk: write failed for " + path);
}

}  // namespace mtfe
