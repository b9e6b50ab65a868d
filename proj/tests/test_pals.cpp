#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "hydot/born.hpp"
#include "hydot/grid.hpp"
#include "hydot/optics.hpp"
#include "hydot/pals.hpp"

using namespace hydot;

namespace {

pals::PaLSParams random_params(std::mt19937_64& rng, const grid::Grid& g,
                               int n_p) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    pals::PaLSParams p;
    p.nu_norm = 1e-3 * std::min({g.hx, g.hy, g.hz});
    p.alpha = Vec(n_p);
    p.beta = Vec(n_p);
    p.centers = Mat(n_p, 3);
    for (int k = 0; k < n_p; ++k) {
        p.alpha[k] = 0.5 + 0.5 * uni(rng);
        p.beta[k] = 1.0 / ((0.3 + 0.4 * uni(rng)) * g.Lz);
        p.centers(k, 0) = (2 * uni(rng) - 1) * 0.4 * g.Lx;
        p.centers(k, 1) = (2 * uni(rng) - 1) * 0.4 * g.Ly;
        p.centers(k, 2) = (0.3 + 0.4 * uni(rng)) * g.Lz;
    }
    return p;
}

}  // namespace

TEST_CASE("Wendland kernel values and derivative") {
    CHECK(pals::wendland(0.0) == doctest::Approx(1.0));
    CHECK(pals::wendland(1.0) == doctest::Approx(0.0));
    CHECK(pals::wendland(2.0) == doctest::Approx(0.0));
    CHECK(pals::wendland(0.5) ==
          doctest::Approx(std::pow(0.5, 4) * 3.0).epsilon(1e-13));
    for (double t : {0.05, 0.3, 0.77, 0.99}) {
        double h = 1e-6;
        double fd = (pals::wendland(t + h) - pals::wendland(t - h)) / (2 * h);
        CHECK(pals::wendland_deriv(t) == doctest::Approx(fd).epsilon(1e-7));
    }
    CHECK(pals::wendland_deriv(0.0) == doctest::Approx(0.0));
    CHECK(pals::wendland_deriv(1.5) == doctest::Approx(0.0));
}

TEST_CASE("smoothed Heaviside ramp and its derivative") {
    double eps = 0.05;
    CHECK(pals::smooth_heaviside(-2 * eps, eps) == doctest::Approx(0.0));
    CHECK(pals::smooth_heaviside(2 * eps, eps) == doctest::Approx(1.0));
    CHECK(pals::smooth_heaviside(0.0, eps) ==
          doctest::Approx(0.5).epsilon(1e-13));
    for (double t : {-0.04, -0.01, 0.0, 0.02, 0.045}) {
        double h = 1e-7;
        double fd = (pals::smooth_heaviside(t + h, eps) -
                     pals::smooth_heaviside(t - h, eps)) /
                    (2 * h);
        CHECK(pals::smooth_delta(t, eps) ==
              doctest::Approx(fd).epsilon(1e-5));
    }
    CHECK(pals::smooth_delta(1.5 * eps, eps) == doctest::Approx(0.0));
    // monotone ramp, values within [0, 1]
    double prev = -1.0;
    for (double t = -0.06; t <= 0.06; t += 0.004) {
        double v = pals::smooth_heaviside(t, eps);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(v >= prev - 1e-13);
        prev = v;
    }
}

TEST_CASE("level set matches the direct radial-basis sum") {
    grid::Grid g = grid::build_grid(6, 6, 5, 3.0, 3.0, 2.0);
    std::mt19937_64 rng(1);
    pals::PaLSParams p = random_params(rng, g, 3);
    Vec phi = pals::level_set(p, g);
    for (int n : {0, 17, 63, 120, g.num_vertices() - 1}) {
        Eigen::Vector3d r = g.vertex(n);
        double want = 0.0;
        for (int k = 0; k < p.np(); ++k) {
            Eigen::Vector3d d = r - p.centers.row(k).transpose();
            double dist =
                std::sqrt(d.squaredNorm() + p.nu_norm * p.nu_norm);
            want += p.alpha[k] * pals::wendland(p.beta[k] * dist);
        }
        CHECK(phi[n] == doctest::Approx(want).epsilon(1e-13));
    }
    Vec mu = pals::shape(p, g);
    for (int n = 0; n < g.num_vertices(); ++n) {
        CHECK(mu[n] >= 0.0);
        CHECK(mu[n] <= 1.0);
        CHECK(mu[n] == doctest::Approx(pals::smooth_heaviside(
                                           phi[n] - p.tau_level, p.eps_H))
                           .epsilon(1e-13));
    }
}

TEST_CASE("parameter vector round trip") {
    grid::Grid g = grid::build_grid(5, 5, 5, 3.0, 3.0, 2.0);
    std::mt19937_64 rng(2);
    pals::PaLSParams p = random_params(rng, g, 4);
    Vec v = p.to_vector();
    REQUIRE(v.size() == 20);
    pals::PaLSParams q = p.with_vector(v);
    CHECK((q.alpha - p.alpha).norm() == 0.0);
    CHECK((q.beta - p.beta).norm() == 0.0);
    CHECK((q.centers - p.centers).norm() == 0.0);
    CHECK(v[0] == p.alpha[0]);
    CHECK(v[4] == p.beta[0]);
    CHECK(v[8] == p.centers(0, 0));
}

TEST_CASE("shape Jacobian matches central differences") {
    grid::Grid g = grid::build_grid(7, 7, 6, 3.0, 3.0, 2.0);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 3; ++trial) {
        pals::PaLSParams p = random_params(rng, g, 2);
        Mat J = pals::shape_jacobian(p, g);
        REQUIRE(J.rows() == g.num_vertices());
        REQUIRE(J.cols() == p.num_params());
        Vec v = p.to_vector();
        for (int j = 0; j < p.num_params(); ++j) {
            double h = 1e-5 * std::max(1.0, std::abs(v[j]));
            Vec vp = v, vm = v;
            vp[j] += h;
            vm[j] -= h;
            Vec fd = (pals::shape(p.with_vector(vp), g) -
                      pals::shape(p.with_vector(vm), g)) /
                     (2 * h);
            double tol = std::max(1e-6, 1e-4 * J.col(j).norm());
            CHECK((J.col(j) - fd).norm() <= tol);
        }
    }
}

TEST_CASE("LM step solves the damped normal equations") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nrm;
    Mat J(30, 8);
    Vec r(30);
    for (int i = 0; i < J.size(); ++i) J.data()[i] = nrm(rng);
    for (int i = 0; i < 30; ++i) r[i] = nrm(rng);
    for (double nu : {1e-6, 1.0, 50.0}) {
        Vec dp = pals::lm_step(J, r, nu);
        Mat A = J.transpose() * J + nu * Mat::Identity(8, 8);
        Vec want = A.ldlt().solve(-J.transpose() * r);
        CHECK((dp - want).norm() <= 1e-9 * want.norm());
    }
}

TEST_CASE("concentration solve recovers the generating coefficients") {
    grid::Grid g = grid::build_grid(6, 6, 5, 3.0, 3.0, 2.0);
    born::MeasurementSetup setup;
    setup.table = optics::builtin_chromophore_table();
    for (int l = 0; l < 9; ++l)
        setup.wavelengths.push_back(600.0 + 50.0 * l);
    Vec src(3);
    src << 0.0, 0.0, g.Lz;
    setup.sources.push_back(src);
    setup.detectors.push_back(born::coaxial_detectors(src, 3, 0.5));

    std::mt19937_64 rng(5);
    std::normal_distribution<double> nrm;
    int Mrows = setup.num_measurements();
    Mat H(Mrows, g.num_vertices());
    for (int i = 0; i < H.size(); ++i) H.data()[i] = nrm(rng);
    auto Hmv = [&H](const Vec& x) { return Vec(H * x); };
    pals::PaLSParams p = random_params(rng, g, 2);
    Vec mu = pals::shape(p, g);
    REQUIRE((mu.array() > 0.5).count() > 0);
    std::vector<double> c_true = {8.0, 8.0, 0.1, -0.1};
    Vec y = born::forward_measure(Hmv, c_true, mu, setup);
    Vec w = Vec::Ones(Mrows);
    auto res = pals::solve_concentrations(Hmv, mu, w, y, setup);
    REQUIRE(res.c.size() == 4);
    CHECK(!res.flagged);
    for (int i = 0; i < 4; ++i)
        CHECK(res.c[i] == doctest::Approx(c_true[i]).epsilon(1e-8));

    // empty shape: rank-deficient system is flagged, not fatal
    Vec mu0 = Vec::Zero(g.num_vertices());
    auto bad = pals::solve_concentrations(Hmv, mu0, w, y, setup);
    CHECK(bad.flagged);
}

TEST_CASE("overlap metrics on known shapes") {
    Vec a(6), b(6);
    a << 1, 1, 0, 0, 1, 0;
    b << 1, 0, 0, 0, 1, 1;
    auto m = pals::metrics(a, b);
    CHECK(m.dice == doctest::Approx(2.0 * 2 / (3 + 3)).epsilon(1e-13));
    CHECK(m.l2_rel ==
          doctest::Approx((a - b).norm() / a.norm()).epsilon(1e-13));
    auto self = pals::metrics(a, a);
    CHECK(self.dice == doctest::Approx(1.0));
    CHECK(self.l2_rel == doctest::Approx(0.0));
    auto empty = pals::metrics(Vec::Zero(6), Vec::Zero(6));
    CHECK(empty.flagged);
}

TEST_CASE("reconstruction drives the weighted residual to the discrepancy "
          "target on a noiseless-compatible fixture") {
    grid::Grid g = grid::build_grid(7, 7, 6, 3.0, 3.0, 2.0);
    born::MeasurementSetup setup;
    setup.table = optics::builtin_chromophore_table();
    for (int l = 0; l < 7; ++l)
        setup.wavelengths.push_back(600.0 + 400.0 * l / 6.0);
    for (double sx : {-0.9, 0.9})
        for (double sy : {-0.9, 0.9}) {
            Vec src(3);
            src << sx, sy, g.Lz;
            setup.sources.push_back(src);
            setup.detectors.push_back(born::coaxial_detectors(src, 3, 0.6));
        }
    SpMat K = grid::assemble_stiffness(g);
    SpMat M = grid::assemble_mass(g, true);
    SpMat R = grid::assemble_robin(g);
    krylov::SolverConfig scfg;
    auto fields = born::compute_fields(g, K, M, R, setup, scfg);
    Mat H = born::assemble_H_dense(fields, setup, Vec(M.diagonal()));
    auto Hmv = [&H](const Vec& x) { return Vec(H * x); };

    std::mt19937_64 rng(6);
    pals::PaLSParams truth = random_params(rng, g, 1);
    truth.centers.row(0) << 0.0, 0.0, 1.0;
    truth.alpha[0] = 1.0;
    truth.beta[0] = 0.8;
    truth.eps_H = 0.3;  // wide ramp so the coarse grid sees the transition
    Vec mu_true = pals::shape(truth, g);
    REQUIRE((mu_true.array() > 0.5).count() > 0);
    std::vector<double> c_true = {8.0, 8.0, 0.1, -0.1};
    Vec y_clean = born::forward_measure(Hmv, c_true, mu_true, setup);
    auto nz = born::add_noise(y_clean, 40.0, 99);
    Vec w = nz.w_diag;
    double noise_norm = w.cwiseProduct(nz.eta).norm();

    pals::PaLSParams init = truth;
    init.alpha[0] = 0.9;
    init.beta[0] = 0.85;
    init.centers.row(0) << 0.15, -0.1, 1.05;
    REQUIRE((pals::shape(init, g).array() > 0.5).count() > 0);
    REQUIRE(pals::shape_jacobian(init, g).norm() > 0.0);
    pals::ReconConfig rc;
    rc.max_outer = 25;
    auto res = pals::reconstruct(nz.y_noisy, Hmv, setup, g, init, w,
                                 noise_norm, rc, &mu_true);
    CHECK(res.converged);
    CHECK(res.resnorm <= rc.gamma * noise_norm * (1 + 1e-9));
    auto m = pals::metrics(mu_true, pals::shape(res.p, g));
    CHECK(m.dice >= 0.6);
    REQUIRE(!res.trace.empty());
    // trace rows carry monotone outer indices and the accepted flag
    for (size_t i = 1; i < res.trace.size(); ++i)
        CHECK(res.trace[i].outer >= res.trace[i - 1].outer);

    std::string path = "test_trace.csv";
    pals::write_trace(path, res.trace);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "outer_iter,inner_iter,resnorm,nu,accepted,dice_vs_truth");
    std::remove(path.c_str());
}

TEST_CASE("perturbation bounds hold on a dense fixture") {
    grid::Grid g = grid::build_grid(6, 6, 5, 3.0, 3.0, 2.0);
    born::MeasurementSetup setup;
    setup.table = optics::builtin_chromophore_table();
    for (int l = 0; l < 5; ++l)
        setup.wavelengths.push_back(600.0 + 100.0 * l);
    Vec src(3);
    src << 0.0, 0.0, g.Lz;
    setup.sources.push_back(src);
    setup.detectors.push_back(born::coaxial_detectors(src, 3, 0.5));
    SpMat K = grid::assemble_stiffness(g);
    SpMat M = grid::assemble_mass(g, true);
    SpMat R = grid::assemble_robin(g);
    krylov::SolverConfig scfg;
    auto fields = born::compute_fields(g, K, M, R, setup, scfg);
    Mat H = born::assemble_H_dense(fields, setup, Vec(M.diagonal()));

    // compressed surrogate: spectral truncation at a modest tolerance
    Eigen::BDCSVD<Mat> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vec s = svd.singularValues();
    int r = 0;
    while (r < s.size() && s[r] > 1e-3 * s[0]) ++r;
    Mat Hhat = svd.matrixU().leftCols(r) * s.head(r).asDiagonal() *
               svd.matrixV().leftCols(r).transpose();

    std::mt19937_64 rng(7);
    std::normal_distribution<double> nrm;
    for (int trial = 0; trial < 5; ++trial) {
        pals::PaLSParams p = random_params(rng, g, 2);
        Vec mu = pals::shape(p, g);
        Mat dmudp = pals::shape_jacobian(p, g);
        Vec y(H.rows());
        for (int i = 0; i < y.size(); ++i) y[i] = nrm(rng);
        y = H * mu + 0.05 * y.norm() / std::sqrt((double)y.size()) * y;
        auto rep = pals::perturbation_bounds(H, Hhat, mu, y, dmudp, 1.0);
        CHECK(rep.all_within);
        CHECK(rep.f_gap <= rep.f_bound * (1 + 1e-9) + 1e-12);
        CHECK(rep.grad_gap <= rep.grad_bound * (1 + 1e-9) + 1e-12);
        CHECK(rep.dp_gap <= rep.dp_bound * (1 + 1e-9) + 1e-12);
        CHECK(rep.cos_theta >= rep.cos_bound - 1e-9);
    }
}
