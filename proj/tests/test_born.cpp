#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "hydot/born.hpp"
#include "hydot/grid.hpp"
#include "hydot/optics.hpp"

using namespace hydot;

namespace {

struct Fixture {
    grid::Grid g;
    SpMat K, M, R;
    Vec lumped_w;
    born::MeasurementSetup setup;
};

Fixture make_fixture(int n = 6, int n_lambda = 3, int n_src = 1,
                     int n_det = 2) {
    Fixture f;
    f.g = grid::build_grid(n, n, n, 3.0, 3.0, 2.0);
    f.K = grid::assemble_stiffness(f.g);
    f.M = grid::assemble_mass(f.g, true);
    f.R = grid::assemble_robin(f.g);
    f.lumped_w = f.M.diagonal();
    f.setup.table = optics::builtin_chromophore_table();
    for (int l = 0; l < n_lambda; ++l)
        f.setup.wavelengths.push_back(
            600.0 + 400.0 * l / std::max(1, n_lambda - 1));
    for (int s = 0; s < n_src; ++s) {
        Vec src(3);
        src << -0.5 + 1.0 * s, 0.2, f.g.Lz;
        f.setup.sources.push_back(src);
        f.setup.detectors.push_back(
            born::coaxial_detectors(src, n_det, 0.5));
    }
    return f;
}

Vec dirichlet_free(const grid::Grid& g, const Eigen::Vector3d& r) {
    Vec b = grid::point_source_vector(g, r);
    for (int i = 0; i < g.num_vertices(); ++i)
        if (g.is_dirichlet(i)) b[i] = 0.0;
    return b;
}

}  // namespace

TEST_CASE("coaxial detector grids are centered under the source on z = 0") {
    Vec src(3);
    src << 0.7, -0.4, 2.0;
    auto dets = born::coaxial_detectors(src, 3, 0.5);
    REQUIRE(dets.size() == 9);
    double cx = 0, cy = 0;
    for (const auto& d : dets) {
        CHECK(d[2] == doctest::Approx(0.0));
        cx += d[0];
        cy += d[1];
    }
    CHECK(cx / 9 == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(cy / 9 == doctest::Approx(-0.4).epsilon(1e-12));
    // lattice pitch
    std::vector<double> xs;
    for (const auto& d : dets) xs.push_back(d[0]);
    std::sort(xs.begin(), xs.end());
    CHECK(xs.back() - xs.front() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("measurement index is source-major, wavelength-minor") {
    Fixture f = make_fixture(5, 4, 2, 2);
    const auto& s = f.setup;
    CHECK(s.num_measurements() == 2 * 4 * 4);
    CHECK(s.measurement_index(0, 0, 0) == 0);
    CHECK(s.measurement_index(0, 0, 3) == 3);
    CHECK(s.measurement_index(0, 1, 0) == 4);
    CHECK(s.measurement_index(1, 0, 0) == 16);
}

TEST_CASE("computed fields match dense direct solves of the shifted systems") {
    Fixture f = make_fixture(6, 2, 1, 2);
    krylov::SolverConfig cfg;
    cfg.tol = 1e-10;
    auto fields = born::compute_fields(f.g, f.K, f.M, f.R, f.setup, cfg);
    REQUIRE(fields.incident.size() == 1);
    REQUIRE(fields.adjoint[0].size() == 4);
    for (int l = 0; l < f.setup.num_wavelengths(); ++l) {
        auto [sg, sp] = fields.shifts[l];
        Mat A = Mat(f.K) + sg * Mat(f.M) + sp * Mat(f.R);
        Vec bi = dirichlet_free(f.g, f.setup.sources[0]);
        Vec phi = A.partialPivLu().solve(bi) * fields.inv_D[l];
        CHECK((fields.incident[0].col(l) - phi).norm() <= 1e-7 * phi.norm());
        Vec bd = dirichlet_free(f.g, f.setup.detectors[0][1]);
        Vec psi = A.partialPivLu().solve(bd) * fields.inv_D[l];
        CHECK((fields.adjoint[0][1].col(l) - psi).norm() <=
              1e-7 * psi.norm());
        CHECK(fields.inv_D[l] ==
              doctest::Approx(1.0 / optics::diffusion_coefficient(
                                        f.setup.wavelengths[l],
                                        f.setup.params))
                  .epsilon(1e-13));
    }
}

TEST_CASE("sensitivity rows are the weighted field products") {
    Fixture f = make_fixture(5, 3, 2, 2);
    krylov::SolverConfig cfg;
    auto fields = born::compute_fields(f.g, f.K, f.M, f.R, f.setup, cfg);
    Mat H = born::assemble_H_dense(fields, f.setup, f.lumped_w);
    REQUIRE(H.rows() == f.setup.num_measurements());
    REQUIRE(H.cols() == f.g.num_vertices());
    double nu = f.setup.params.nu;
    for (int s = 0; s < 2; ++s)
        for (int d = 0; d < 4; ++d)
            for (int l = 0; l < 3; ++l) {
                Vec expect = -nu * fields.adjoint[s][d]
                                       .col(l)
                                       .cwiseProduct(
                                           fields.incident[s].col(l))
                                       .cwiseProduct(f.lumped_w);
                int m = f.setup.measurement_index(s, d, l);
                CHECK((H.row(m).transpose() - expect).norm() <=
                      1e-12 * expect.norm());
            }
    // per-source block view agrees with the stacked matrix
    Mat B1 = born::assemble_H_block(fields, f.setup, 1, f.lumped_w);
    CHECK((B1 - H.bottomRows(B1.rows())).norm() == 0.0);
}

TEST_CASE("forward measurement applies the spectral concentration scaling") {
    Fixture f = make_fixture(5, 3, 1, 2);
    krylov::SolverConfig cfg;
    auto fields = born::compute_fields(f.g, f.K, f.M, f.R, f.setup, cfg);
    Mat H = born::assemble_H_dense(fields, f.setup, f.lumped_w);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Vec mu(f.g.num_vertices());
    for (int i = 0; i < mu.size(); ++i) mu[i] = uni(rng);
    std::vector<double> c = {8.0, 8.0, 0.1, -0.1};
    auto Hmv = [&H](const Vec& x) { return Vec(H * x); };
    Vec y = born::forward_measure(Hmv, c, mu, f.setup);
    Vec Hmu = H * mu;
    for (int m = 0; m < y.size(); ++m) {
        int l = m % f.setup.num_wavelengths();
        double scale = 0.0;
        for (size_t i = 0; i < c.size(); ++i)
            scale += c[i] * f.setup.table.extinction(
                                i, f.setup.wavelengths[l]);
        CHECK(y[m] == doctest::Approx(scale * Hmu[m]).epsilon(1e-12));
    }
}

TEST_CASE("noise realizes the requested SNR exactly") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nrm;
    Vec y(300);
    for (int i = 0; i < y.size(); ++i) y[i] = nrm(rng);
    for (double snr : {10.0, 33.0, 50.0}) {
        auto nz = born::add_noise(y, snr, 77);
        CHECK(20.0 * std::log10(y.norm() / nz.eta.norm()) ==
              doctest::Approx(snr).epsilon(1e-10));
        CHECK((nz.y_noisy - y - nz.eta).norm() <= 1e-14 * y.norm());
        CHECK(nz.sigma ==
              doctest::Approx(nz.eta.norm() / std::sqrt((double)y.size()))
                  .epsilon(1e-12));
        for (int i = 0; i < y.size(); ++i)
            CHECK(nz.w_diag[i] ==
                  doctest::Approx(1.0 / nz.sigma).epsilon(1e-12));
    }
    // determinism and seed sensitivity
    auto a = born::add_noise(y, 30.0, 5);
    auto b = born::add_noise(y, 30.0, 5);
    auto c = born::add_noise(y, 30.0, 6);
    CHECK((a.eta - b.eta).norm() == 0.0);
    CHECK((a.eta - c.eta).norm() > 0.0);
    // infinite SNR: clean copy
    auto clean = born::add_noise(y, std::numeric_limits<double>::infinity(),
                                 1);
    CHECK(clean.eta.norm() == 0.0);
    CHECK((clean.y_noisy - y).norm() == 0.0);
}

TEST_CASE("block save/load round trip") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nrm;
    Mat B(7, 11);
    for (int i = 0; i < B.size(); ++i) B.data()[i] = nrm(rng);
    std::string path = "test_block_roundtrip.bin";
    born::save_block(path, B);
    Mat C = born::load_block(path);
    CHECK((B - C).norm() == 0.0);
    std::remove(path.c_str());
}
