#include <doctest.h>

#include <cmath>
#include <random>

#include "hydot/grid.hpp"

using namespace hydot;

namespace {

// Independent dense assembly oracle: 2x2x2 Gauss quadrature of the trilinear
// element integrals on every cell (exact for the polynomial integrands).
struct Oracle {
    Mat K;  // no boundary treatment
    Mat M;
    Mat Mw;  // weighted mass, trilinear weight interpolation
};

Oracle assemble_oracle(const grid::Grid& g, const Vec& w) {
    const int N = g.num_vertices();
    Oracle o{Mat::Zero(N, N), Mat::Zero(N, N), Mat::Zero(N, N)};
    const double q = 1.0 / std::sqrt(3.0);
    const double gp[2] = {-q, q};

    for (int cz = 0; cz + 1 < g.nz; ++cz)
        for (int cy = 0; cy + 1 < g.ny; ++cy)
            for (int cx = 0; cx + 1 < g.nx; ++cx) {
                int vid[8];
                for (int k = 0; k < 8; ++k)
                    vid[k] = g.index(cx + (k & 1), cy + ((k >> 1) & 1),
                                     cz + ((k >> 2) & 1));
                double J = g.hx * g.hy * g.hz / 8.0;  // |det| of the map
                for (double gx : gp)
                    for (double gy : gp)
                        for (double gz : gp) {
                            double sh[8], dx[8], dy[8], dz[8];
                            for (int k = 0; k < 8; ++k) {
                                double sx = (k & 1) ? 1.0 : -1.0;
                                double sy = ((k >> 1) & 1) ? 1.0 : -1.0;
                                double sz = ((k >> 2) & 1) ? 1.0 : -1.0;
                                double fx = (1 + sx * gx) / 2;
                                double fy = (1 + sy * gy) / 2;
                                double fz = (1 + sz * gz) / 2;
                                sh[k] = fx * fy * fz;
                                dx[k] = (sx / g.hx) * fy * fz;
                                dy[k] = fx * (sy / g.hy) * fz;
                                dz[k] = fx * fy * (sz / g.hz);
                            }
                            double wq = 0.0;
                            for (int k = 0; k < 8; ++k)
                                wq += sh[k] * w[vid[k]];
                            for (int a = 0; a < 8; ++a)
                                for (int b = 0; b < 8; ++b) {
                                    double kab = dx[a] * dx[b] +
                                                 dy[a] * dy[b] +
                                                 dz[a] * dz[b];
                                    o.K(vid[a], vid[b]) += J * kab;
                                    o.M(vid[a], vid[b]) += J * sh[a] * sh[b];
                                    o.Mw(vid[a], vid[b]) +=
                                        J * wq * sh[a] * sh[b];
                                }
                        }
            }
    return o;
}

Mat robin_oracle(const grid::Grid& g) {
    const int N = g.num_vertices();
    Mat R = Mat::Zero(N, N);
    const double q = 1.0 / std::sqrt(3.0);
    const double gp[2] = {-q, q};
    for (int iz : {0, g.nz - 1})
        for (int cy = 0; cy + 1 < g.ny; ++cy)
            for (int cx = 0; cx + 1 < g.nx; ++cx) {
                int vid[4] = {g.index(cx, cy, iz), g.index(cx + 1, cy, iz),
                              g.index(cx, cy + 1, iz),
                              g.index(cx + 1, cy + 1, iz)};
                double J = g.hx * g.hy / 4.0;
                for (double gx : gp)
                    for (double gy : gp) {
                        double sh[4];
                        for (int k = 0; k < 4; ++k) {
                            double sx = (k & 1) ? 1.0 : -1.0;
                            double sy = ((k >> 1) & 1) ? 1.0 : -1.0;
                            sh[k] = (1 + sx * gx) * (1 + sy * gy) / 4;
                        }
                        for (int a = 0; a < 4; ++a)
                            for (int b = 0; b < 4; ++b)
                                R(vid[a], vid[b]) += J * sh[a] * sh[b];
                    }
            }
    return R;
}

}  // namespace

TEST_CASE("stiffness matches quadrature oracle with boundary elimination") {
    grid::Grid g = grid::build_grid(4, 3, 3, 1.0, 0.8, 0.6);
    Oracle o = assemble_oracle(g, Vec::Ones(g.num_vertices()));
    Mat K0 = o.K;
    for (int n = 0; n < g.num_vertices(); ++n)
        if (g.is_dirichlet(n)) {
            K0.row(n).setZero();
            K0.col(n).setZero();
            K0(n, n) = 1.0;
        }
    Mat K = Mat(grid::assemble_stiffness(g));
    CHECK((K - K0).norm() <= 1e-12 * K0.norm());
    CHECK((K - K.transpose()).norm() <= 1e-12 * K.norm());
}

TEST_CASE("mass matrices match quadrature oracle") {
    grid::Grid g = grid::build_grid(3, 4, 3, 1.0, 0.8, 0.6);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(0.5, 2.0);
    Vec w(g.num_vertices());
    for (int i = 0; i < w.size(); ++i) w[i] = uni(rng);
    Oracle o = assemble_oracle(g, w);

    Mat Mc = Mat(grid::assemble_mass(g, false));
    CHECK((Mc - o.M).norm() <= 1e-12 * o.M.norm());

    Mat Ml = Mat(grid::assemble_mass(g, true));
    Vec rowsum = o.M.rowwise().sum();
    CHECK((Ml.diagonal() - rowsum).norm() <= 1e-12 * rowsum.norm());
    CHECK((Ml - Mat(rowsum.asDiagonal())).norm() <= 1e-12 * rowsum.norm());

    Mat Mw = Mat(grid::assemble_weighted_mass_lumped(g, w));
    Vec wsum = o.Mw.rowwise().sum();
    CHECK((Mw.diagonal() - wsum).norm() <= 1e-12 * wsum.norm());
}

TEST_CASE("mass total equals slab volume, robin total equals face area") {
    grid::Grid g = grid::build_grid(5, 4, 3, 3.0, 2.0, 1.5);
    double vol = (2 * g.Lx) * (2 * g.Ly) * g.Lz;
    CHECK(Mat(grid::assemble_mass(g, true)).sum() ==
          doctest::Approx(vol).epsilon(1e-12));
    CHECK(Mat(grid::assemble_mass(g, false)).sum() ==
          doctest::Approx(vol).epsilon(1e-12));

    double faces = 2.0 * (2 * g.Lx) * (2 * g.Ly);  // z = 0 and z = Lz
    CHECK(Mat(grid::assemble_robin(g)).sum() ==
          doctest::Approx(faces).epsilon(1e-12));
}

TEST_CASE("robin matrix matches face quadrature oracle") {
    grid::Grid g = grid::build_grid(4, 3, 4, 1.2, 0.9, 0.7);
    Mat R = Mat(grid::assemble_robin(g));
    CHECK((R - robin_oracle(g)).norm() <= 1e-12 * R.norm());
}

TEST_CASE("stiffness is positive semidefinite on random vectors") {
    grid::Grid g = grid::build_grid(4, 4, 4, 1.0, 1.0, 1.0);
    SpMat K = grid::assemble_stiffness(g);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nrm;
    for (int t = 0; t < 20; ++t) {
        Vec x(g.num_vertices());
        for (int i = 0; i < x.size(); ++i) x[i] = nrm(rng);
        CHECK(x.dot(K * x) >= -1e-10 * x.squaredNorm());
    }
}

TEST_CASE("point source weights sum to one and interpolation is exact for "
          "trilinear fields") {
    grid::Grid g = grid::build_grid(5, 6, 4, 2.0, 1.5, 1.0);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Vec lin(g.num_vertices());
    for (int n = 0; n < g.num_vertices(); ++n) {
        auto r = g.vertex(n);
        lin[n] = 1.5 * r.x() - 2.0 * r.y() + 0.7 * r.z() + 0.3;
    }
    for (int t = 0; t < 25; ++t) {
        Eigen::Vector3d r(-g.Lx + 2 * g.Lx * uni(rng),
                          -g.Ly + 2 * g.Ly * uni(rng), g.Lz * uni(rng));
        Vec b = grid::point_source_vector(g, r);
        CHECK(b.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK((b.array() != 0.0).count() <= 8);
        double expect = 1.5 * r.x() - 2.0 * r.y() + 0.7 * r.z() + 0.3;
        CHECK(grid::interpolate(g, lin, r) ==
              doctest::Approx(expect).epsilon(1e-12));
        // the source vector is the adjoint of interpolation
        CHECK(b.dot(lin) == doctest::Approx(expect).epsilon(1e-12));
    }
    // interpolation at a vertex reproduces the nodal value
    int n = g.index(2, 3, 1);
    CHECK(grid::interpolate(g, lin, g.vertex(n)) ==
          doctest::Approx(lin[n]).epsilon(1e-13));
}

TEST_CASE("vertex ordering is x-fastest and boundary classification is by "
          "side faces") {
    grid::Grid g = grid::build_grid(4, 3, 2, 1.0, 1.0, 1.0);
    CHECK(g.index(1, 2, 1) == 1 + 4 * (2 + 3 * 1));
    CHECK(g.vertex(0) == Eigen::Vector3d(-1.0, -1.0, 0.0));
    CHECK(g.is_dirichlet(g.index(0, 1, 1)));
    CHECK(g.is_dirichlet(g.index(1, 2, 0)));
    CHECK(!g.is_dirichlet(g.index(1, 1, 0)));  // z faces are Robin
    CHECK(!g.is_dirichlet(g.index(2, 1, 1)));
}
