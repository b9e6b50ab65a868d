#include "hydot/grid.hpp"

#include <cmath>
#include <vector>

namespace hydot {
namespace grid {

namespace {

// 2x2x2 Gauss rule on [-1,1]^3, exact for trilinear products.
constexpr double kGaussPt = 0.57735026918962576451;

struct ElementMatrices {
    Mat K = Mat::Zero(8, 8);
    Mat M = Mat::Zero(8, 8);
};

// Local vertex a: bit0 -> x, bit1 -> y, bit2 -> z.
double shape(int a, double xi, double eta, double zeta) {
    double sx = (a & 1) ? 1.0 : -1.0;
    double sy = (a & 2) ? 1.0 : -1.0;
    double sz = (a & 4) ? 1.0 : -1.0;
    return 0.125 * (1 + sx * xi) * (1 + sy * eta) * (1 + sz * zeta);
}

Eigen::Vector3d shape_grad_ref(int a, double xi, double eta, double zeta) {
    double sx = (a & 1) ? 1.0 : -1.0;
    double sy = (a & 2) ? 1.0 : -1.0;
    double sz = (a & 4) ? 1.0 : -1.0;
    return {0.125 * sx * (1 + sy * eta) * (1 + sz * zeta),
            0.125 * sy * (1 + sx * xi) * (1 + sz * zeta),
            0.125 * sz * (1 + sx * xi) * (1 + sy * eta)};
}

ElementMatrices element_matrices(double hx, double hy, double hz) {
    ElementMatrices e;
    const double detJ = hx * hy * hz / 8.0;
    const Eigen::Vector3d inv_h(2.0 / hx, 2.0 / hy, 2.0 / hz);
    for (int qx = 0; qx < 2; ++qx)
        for (int qy = 0; qy < 2; ++qy)
            for (int qz = 0; qz < 2; ++qz) {
                double xi = qx ? kGaussPt : -kGaussPt;
                double eta = qy ? kGaussPt : -kGaussPt;
                double zeta = qz ? kGaussPt : -kGaussPt;
                for (int a = 0; a < 8; ++a) {
                    double Na = shape(a, xi, eta, zeta);
                    Eigen::Vector3d ga =
                        shape_grad_ref(a, xi, eta, zeta).cwiseProduct(inv_h);
                    for (int b = 0; b < 8; ++b) {
                        double Nb = shape(b, xi, eta, zeta);
                        Eigen::Vector3d gb =
                            shape_grad_ref(b, xi, eta, zeta).cwiseProduct(inv_h);
                        e.K(a, b) += detJ * ga.dot(gb);
                        e.M(a, b) += detJ * Na * Nb;
                    }
                }
            }
    return e;
}

// Bilinear quad mass on an hx-by-hy face, 2x2 Gauss.
Mat face_mass(double hx, double hy) {
    Mat R = Mat::Zero(4, 4);
    const double detJ = hx * hy / 4.0;
    for (int qx = 0; qx < 2; ++qx)
        for (int qy = 0; qy < 2; ++qy) {
            double xi = qx ? kGaussPt : -kGaussPt;
            double eta = qy ? kGaussPt : -kGaussPt;
            for (int a = 0; a < 4; ++a) {
                double sxa = (a & 1) ? 1.0 : -1.0;
                double sya = (a & 2) ? 1.0 : -1.0;
                double Na = 0.25 * (1 + sxa * xi) * (1 + sya * eta);
                for (int b = 0; b < 4; ++b) {
                    double sxb = (b & 1) ? 1.0 : -1.0;
                    double syb = (b & 2) ? 1.0 : -1.0;
                    double Nb = 0.25 * (1 + sxb * xi) * (1 + syb * eta);
                    R(a, b) += detJ * Na * Nb;
                }
            }
        }
    return R;
}

std::array<int, 8> cell_vertices(const Grid& g, int cx, int cy, int cz) {
    std::array<int, 8> v;
    for (int a = 0; a < 8; ++a)
        v[a] = g.index(cx + (a & 1), cy + ((a >> 1) & 1), cz + ((a >> 2) & 1));
    return v;
}

}  // namespace

Grid build_grid(int nx, int ny, int nz, double Lx, double Ly, double Lz) {
    if (nx < 2 || ny < 2 || nz < 2)
        throw std::invalid_argument("build_grid: vertex counts must be >= 2");
    if (Lx <= 0 || Ly <= 0 || Lz <= 0)
        throw std::invalid_argument("build_grid: extents must be positive");
    Grid g;
    g.nx = nx;
    g.ny = ny;
    g.nz = nz;
    g.Lx = Lx;
    g.Ly = Ly;
    g.Lz = Lz;
    g.hx = 2 * Lx / (nx - 1);
    g.hy = 2 * Ly / (ny - 1);
    g.hz = Lz / (nz - 1);
    return g;
}

SpMat assemble_stiffness(const Grid& g) {
    const int N = g.num_vertices();
    ElementMatrices e = element_matrices(g.hx, g.hy, g.hz);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(N) * 27);
    for (int cz = 0; cz < g.nz - 1; ++cz)
        for (int cy = 0; cy < g.ny - 1; ++cy)
            for (int cx = 0; cx < g.nx - 1; ++cx) {
                auto v = cell_vertices(g, cx, cy, cz);
                for (int a = 0; a < 8; ++a) {
                    if (g.is_dirichlet(v[a])) continue;
                    for (int b = 0; b < 8; ++b) {
                        if (g.is_dirichlet(v[b])) continue;
                        trips.emplace_back(v[a], v[b], e.K(a, b));
                    }
                }
            }
    for (int n = 0; n < N; ++n)
        if (g.is_dirichlet(n)) trips.emplace_back(n, n, 1.0);
    SpMat K(N, N);
    K.setFromTriplets(trips.begin(), trips.end());
    return K;
}

SpMat assemble_mass(const Grid& g, bool lumped) {
    const int N = g.num_vertices();
    ElementMatrices e = element_matrices(g.hx, g.hy, g.hz);
    std::vector<Eigen::Triplet<double>> trips;
    for (int cz = 0; cz < g.nz - 1; ++cz)
        for (int cy = 0; cy < g.ny - 1; ++cy)
            for (int cx = 0; cx < g.nx - 1; ++cx) {
                auto v = cell_vertices(g, cx, cy, cz);
                for (int a = 0; a < 8; ++a)
                    for (int b = 0; b < 8; ++b) {
                        if (lumped)
                            trips.emplace_back(v[a], v[a], e.M(a, b));
                        else
                            trips.emplace_back(v[a], v[b], e.M(a, b));
                    }
            }
    SpMat M(N, N);
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

SpMat assemble_robin(const Grid& g) {
    const int N = g.num_vertices();
    Mat Re = face_mass(g.hx, g.hy);
    std::vector<Eigen::Triplet<double>> trips;
    for (int iz : {0, g.nz - 1})
        for (int cy = 0; cy < g.ny - 1; ++cy)
            for (int cx = 0; cx < g.nx - 1; ++cx) {
                std::array<int, 4> v;
                for (int a = 0; a < 4; ++a)
                    v[a] = g.index(cx + (a & 1), cy + ((a >> 1) & 1), iz);
                for (int a = 0; a < 4; ++a)
                    for (int b = 0; b < 4; ++b)
                        trips.emplace_back(v[a], v[b], Re(a, b));
            }
    SpMat R(N, N);
    R.setFromTriplets(trips.begin(), trips.end());
    return R;
}

SpMat assemble_weighted_mass_lumped(const Grid& g, const Vec& w) {
    const int N = g.num_vertices();
    if (w.size() != N)
        throw std::invalid_argument("weighted mass: weight size mismatch");
    const double detJ = g.hx * g.hy * g.hz / 8.0;
    Vec diag = Vec::Zero(N);
    for (int cz = 0; cz < g.nz - 1; ++cz)
        for (int cy = 0; cy < g.ny - 1; ++cy)
            for (int cx = 0; cx < g.nx - 1; ++cx) {
                auto v = cell_vertices(g, cx, cy, cz);
                for (int qx = 0; qx < 2; ++qx)
                    for (int qy = 0; qy < 2; ++qy)
                        for (int qz = 0; qz < 2; ++qz) {
                            double xi = qx ? kGaussPt : -kGaussPt;
                            double eta = qy ? kGaussPt : -kGaussPt;
                            double zeta = qz ? kGaussPt : -kGaussPt;
                            double wq = 0.0;
                            for (int b = 0; b < 8; ++b)
                                wq += w[v[b]] * shape(b, xi, eta, zeta);
                            for (int a = 0; a < 8; ++a)
                                diag[v[a]] += detJ * wq * shape(a, xi, eta, zeta);
                        }
            }
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(N);
    for (int n = 0; n < N; ++n) trips.emplace_back(n, n, diag[n]);
    SpMat M(N, N);
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

namespace {

// Locate the cell containing r and the local reference coordinates.
void locate(const Grid& g, const Eigen::Vector3d& r, int& cx, int& cy, int& cz,
            double& xi, double& eta, double& zeta) {
    auto clamp_cell = [](double t, int ncells) {
        int c = static_cast<int>(std::floor(t));
        if (c < 0) c = 0;
        if (c > ncells - 1) c = ncells - 1;
        return c;
    };
    double tx = (r.x() + g.Lx) / g.hx;
    double ty = (r.y() + g.Ly) / g.hy;
    double tz = r.z() / g.hz;
    cx = clamp_cell(tx, g.nx - 1);
    cy = clamp_cell(ty, g.ny - 1);
    cz = clamp_cell(tz, g.nz - 1);
    xi = 2 * (tx - cx) - 1;
    eta = 2 * (ty - cy) - 1;
    zeta = 2 * (tz - cz) - 1;
}

}  // namespace

Vec point_source_vector(const Grid& g, const Eigen::Vector3d& r) {
    if (!g.contains(r))
        throw std::invalid_argument("point_source_vector: point outside domain");
    int cx, cy, cz;
    double xi, eta, zeta;
    locate(g, r, cx, cy, cz, xi, eta, zeta);
    Vec b = Vec::Zero(g.num_vertices());
    auto v = cell_vertices(g, cx, cy, cz);
    for (int a = 0; a < 8; ++a) b[v[a]] = shape(a, xi, eta, zeta);
    return b;
}

double interpolate(const Grid& g, const Vec& field, const Eigen::Vector3d& r) {
    if (!g.contains(r))
        throw std::invalid_argument("interpolate: point outside domain");
    int cx, cy, cz;
    double xi, eta, zeta;
    locate(g, r, cx, cy, cz, xi, eta, zeta);
    auto v = cell_vertices(g, cx, cy, cz);
    double val = 0.0;
    for (int a = 0; a < 8; ++a) val += field[v[a]] * shape(a, xi, eta, zeta);
    return val;
}

}  // namespace grid
}  // namespace hydot
