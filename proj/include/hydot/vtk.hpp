#ifndef HYDOT_VTK_HPP
#define HYDOT_VTK_HPP

#include <string>
#include <vector>

#include "hydot/grid.hpp"

namespace hydot {
namespace vtk {

/// Write one or more vertex scalar fields on a regular grid as a legacy VTK
/// structured-points ASCII file (x-fastest ordering, matching the grid).
void write_structured_points(const std::string& path, const grid::Grid& g,
                             const std::vector<std::string>& names,
                             const std::vector<Vec>& fields);

}  // namespace vtk
}  // namespace hydot

#endif
