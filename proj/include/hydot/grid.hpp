#ifndef HYDOT_GRID_HPP
#define HYDOT_GRID_HPP

#include <array>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace hydot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

namespace grid {

/// Regular hexahedral vertex grid on the slab [-Lx,Lx] x [-Ly,Ly] x [0,Lz].
/// Vertices are ordered x-fastest: n = ix + nx*(iy + ny*iz).
/// The z=0 and z=Lz faces carry Robin conditions, the four side faces
/// (x = +-Lx, y = +-Ly) carry homogeneous Dirichlet conditions.
struct Grid {
    int nx = 0, ny = 0, nz = 0;
    double Lx = 0, Ly = 0, Lz = 0;
    double hx = 0, hy = 0, hz = 0;

    int num_vertices() const { return nx * ny * nz; }
    int index(int ix, int iy, int iz) const { return ix + nx * (iy + ny * iz); }

    std::array<int, 3> coords(int n) const {
        int ix = n % nx;
        int iy = (n / nx) % ny;
        int iz = n / (nx * ny);
        return {ix, iy, iz};
    }

    Eigen::Vector3d vertex(int n) const {
        auto [ix, iy, iz] = coords(n);
        return {-Lx + ix * hx, -Ly + iy * hy, iz * hz};
    }

    bool is_dirichlet(int n) const {
        auto [ix, iy, iz] = coords(n);
        return ix == 0 || ix == nx - 1 || iy == 0 || iy == ny - 1;
    }

    bool contains(const Eigen::Vector3d& r) const {
        return r.x() >= -Lx && r.x() <= Lx && r.y() >= -Ly && r.y() <= Ly &&
               r.z() >= 0.0 && r.z() <= Lz;
    }
};

Grid build_grid(int nx, int ny, int nz, double Lx, double Ly, double Lz);

/// Trilinear-element stiffness matrix with Dirichlet rows/columns eliminated
/// symmetrically (unit diagonal on Dirichlet vertices).
SpMat assemble_stiffness(const Grid& g);

/// Mass matrix; lumped=true applies row-sum lumping (diagonal result).
SpMat assemble_mass(const Grid& g, bool lumped);

/// Boundary-mass matrix supported on the z=0 and z=Lz faces.
SpMat assemble_robin(const Grid& g);

/// Mass matrix with a per-vertex weight folded into the integrand,
/// (M_w)_jk = int w(r) u_j u_k; w given by vertex values (trilinear).
/// Lumped (row-sum) form.  Used by the full-diffusion forward model.
SpMat assemble_weighted_mass_lumped(const Grid& g, const Vec& w);

/// Nodal interpolation weights of a point source at r; entries sum to 1,
/// supported on the 8 vertices of the containing cell.
Vec point_source_vector(const Grid& g, const Eigen::Vector3d& r);

/// Trilinear interpolation of a vertex field at point r.
double interpolate(const Grid& g, const Vec& field, const Eigen::Vector3d& r);

}  // namespace grid
}  // namespace hydot

#endif
