#include "hydot/vtk.hpp"

#include <fstream>
#include <stdexcept>

namespace hydot {
namespace vtk {

void write_structured_points(const std::string& path, const grid::Grid& g,
                             const std::vector<std::string>& names,
                             const std::vector<Vec>& fields) {
    if (names.size() != fields.size())
        throw std::invalid_argument("vtk: names/fields size mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("vtk: cannot open " + path);
    out << "# vtk DataFile Version 3.0\n";
    out << "hydot field dump\n";
    out << "ASCII\n";
    out << "DATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << g.nx << " " << g.ny << " " << g.nz << "\n";
    out << "ORIGIN " << -g.Lx << " " << -g.Ly << " " << 0.0 << "\n";
    out << "SPACING " << g.hx << " " << g.hy << " " << g.hz << "\n";
    out << "POINT_DATA " << g.num_vertices() << "\n";
    out.precision(12);
    for (size_t f = 0; f < fields.size(); ++f) {
        if (fields[f].size() != g.num_vertices())
            throw std::invalid_argument("vtk: field size mismatch");
        out << "SCALARS " << names[f] << " double 1\n";
        out << "LOOKUP_TABLE default\n";
        for (int n = 0; n < g.num_vertices(); ++n) out << fields[f][n] << "\n";
    }
}

}  // namespace vtk
}  // namespace hydot
