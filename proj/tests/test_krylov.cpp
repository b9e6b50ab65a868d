#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "hydot/grid.hpp"
#include "hydot/krylov.hpp"
#include "hydot/optics.hpp"

using namespace hydot;

namespace {

struct Family {
    SpMat K, M, R;
    Vec b;
    std::vector<std::pair<double, double>> shifts;
    grid::Grid g;
};

Family small_family(int n, int n_lambda) {
    Family f;
    f.g = grid::build_grid(n, n, n, 3.0, 3.0, 2.0);
    f.K = grid::assemble_stiffness(f.g);
    f.M = grid::assemble_mass(f.g, true);
    f.R = grid::assemble_robin(f.g);
    optics::ChromophoreTable t = optics::builtin_chromophore_table();
    optics::OpticalParams p;
    for (int l = 0; l < n_lambda; ++l) {
        double lam = 600.0 + 400.0 * l / std::max(1, n_lambda - 1);
        f.shifts.push_back(optics::shifts(lam, t, p));
    }
    f.b = grid::point_source_vector(f.g, {0.2, -0.3, f.g.Lz});
    for (int i = 0; i < f.g.num_vertices(); ++i)
        if (f.g.is_dirichlet(i)) f.b[i] = 0.0;
    return f;
}

Mat dense_system(const Family& f, int j) {
    return Mat(f.K) + f.shifts[j].first * Mat(f.M) +
           f.shifts[j].second * Mat(f.R);
}

}  // namespace

TEST_CASE("multishift GMRES matches dense direct solves for every shift") {
    Family f = small_family(6, 1);
    double sbar = f.shifts[0].second;
    krylov::TransformedFamily fam =
        krylov::transform_family(f.K, f.M, f.R, sbar);
    Vec bs = fam.minv_sqrt.cwiseProduct(f.b);
    std::vector<double> sigmas = {f.shifts[0].first, 2 * f.shifts[0].first,
                                  5 * f.shifts[0].first};
    auto res = krylov::multishift_gmres(fam.Ks, bs, sigmas, 120, 1e-10);
    Mat Ks = Mat(fam.Ks);
    for (size_t j = 0; j < sigmas.size(); ++j) {
        Mat A = Ks + sigmas[j] * Mat::Identity(Ks.rows(), Ks.cols());
        Vec xd = A.partialPivLu().solve(bs);
        CHECK((res.X.col(j) - xd).norm() <= 1e-7 * xd.norm());
        CHECK(res.relres[j] <= 1e-10);
    }
}

TEST_CASE("Arnoldi factorization relation and orthonormal basis") {
    Family f = small_family(5, 1);
    krylov::TransformedFamily fam =
        krylov::transform_family(f.K, f.M, f.R, f.shifts[0].second);
    Vec bs = fam.minv_sqrt.cwiseProduct(f.b);
    auto res = krylov::multishift_gmres(fam.Ks, bs, {f.shifts[0].first}, 40,
                                        1e-14);
    const auto& a = res.arnoldi;
    int s = a.steps;
    REQUIRE(s > 0);
    Mat Vs = a.V.leftCols(s);
    Mat Vs1 = a.V.leftCols(s + 1);
    Mat Tb = a.T.topLeftCorner(s + 1, s);
    double knorm = Mat(fam.Ks).norm();
    CHECK((Mat(fam.Ks) * Vs - Vs1 * Tb).norm() <= 1e-10 * knorm);
    CHECK((Vs1.transpose() * Vs1 - Mat::Identity(s + 1, s + 1)).norm() <=
          1e-10);
    CHECK(a.beta == doctest::Approx(bs.norm()).epsilon(1e-12));
}

TEST_CASE("harmonic Ritz values agree with a dense pencil eigensolve") {
    Family f = small_family(5, 1);
    krylov::TransformedFamily fam =
        krylov::transform_family(f.K, f.M, f.R, f.shifts[0].second);
    Vec bs = fam.minv_sqrt.cwiseProduct(f.b);
    auto res = krylov::multishift_gmres(fam.Ks, bs, {f.shifts[0].first}, 40,
                                        1e-14);
    const auto& a = res.arnoldi;
    int s = a.steps;
    int k = 6;
    auto hr = krylov::harmonic_ritz(a, k);
    REQUIRE(hr.Z.cols() >= 1);
    CHECK(hr.Z.rows() == s);

    // oracle: eigenvalues of the full pencil Tbar^T Tbar z = theta T_s^T z
    Mat Tb = a.T.topLeftCorner(s + 1, s);
    Mat Ts = a.T.topLeftCorner(s, s);
    Eigen::GeneralizedEigenSolver<Mat> ges(Tb.transpose() * Tb,
                                           Ts.transpose());
    std::vector<double> mags;
    for (int i = 0; i < s; ++i) {
        std::complex<double> lam(ges.alphas()[i].real(),
                                 ges.alphas()[i].imag());
        lam /= ges.betas()[i];
        mags.push_back(std::abs(lam));
    }
    std::sort(mags.begin(), mags.end());
    REQUIRE(hr.theta.size() >= 1);
    // retained magnitudes are ascending and each matches a pencil eigenvalue
    for (int i = 0; i + 1 < hr.theta.size(); ++i)
        CHECK(hr.theta[i] <= hr.theta[i + 1] * (1 + 1e-12));
    CHECK(hr.theta[0] ==
          doctest::Approx(mags[0]).epsilon(1e-6));
    for (int i = 0; i < hr.theta.size(); ++i) {
        double best = 1e300;
        for (double m : mags)
            best = std::min(best, std::abs(m - hr.theta[i]) /
                                      std::max(1.0, m));
        CHECK(best <= 1e-6);
    }
}

TEST_CASE("deflation basis satisfies K U = C with orthonormal C") {
    Family f = small_family(6, 8);
    std::vector<double> sps;
    for (auto& s : f.shifts) sps.push_back(s.second);
    double sbar = 0.0;
    for (double v : sps) sbar += v / sps.size();
    krylov::TransformedFamily fam =
        krylov::transform_family(f.K, f.M, f.R, sbar);
    Vec bs = fam.minv_sqrt.cwiseProduct(f.b);
    std::vector<double> sigmas;
    for (auto& s : f.shifts) sigmas.push_back(s.first);
    auto res = krylov::multishift_gmres(fam.Ks, bs, sigmas, 60, 1e-8);
    auto hr = krylov::harmonic_ritz(res.arnoldi, 10);
    auto base = krylov::build_deflation_basis(fam.Ks, fam.Rs, res.arnoldi, hr);
    REQUIRE(base.k >= 1);
    CHECK((fam.Ks * base.U - base.C).norm() <= 1e-8 * base.C.norm());
    CHECK((base.C.transpose() * base.C - Mat::Identity(base.k, base.k))
              .norm() <= 1e-8);

    // shifted pair: A_j U_j = C_j, C_j^T C_j = I, Gram path == QR path
    double sg = sigmas[3], sp = f.shifts[3].second - sbar;
    krylov::ShiftedDeflation dg(base, sg, sp, false);
    krylov::ShiftedDeflation dq(base, sg, sp, true);
    Mat Cg = dg.dense_C(), Ug = dg.dense_U();
    Mat Aj = Mat(fam.Ks) + sg * Mat::Identity(Cg.rows(), Cg.rows()) +
             sp * Mat(fam.Rs);
    CHECK((Aj * Ug - Cg).norm() <= 1e-7 * Cg.norm());
    CHECK((Cg.transpose() * Cg - Mat::Identity(dg.dim(), dg.dim())).norm() <=
          1e-8);
    // both orthonormalization paths span the same space
    Mat Cq = dq.dense_C();
    CHECK((Cg * Cg.transpose() - Cq * Cq.transpose()).norm() <= 1e-7);

    // matrix-free applications agree with the dense forms
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nrm;
    Vec v(Cg.rows());
    for (int i = 0; i < v.size(); ++i) v[i] = nrm(rng);
    CHECK((dg.apply_Ct(v) - Cg.transpose() * v).norm() <=
          1e-10 * v.norm());
    Vec w(dg.dim());
    for (int i = 0; i < w.size(); ++i) w[i] = nrm(rng);
    CHECK((dg.apply_C(w) - Cg * w).norm() <= 1e-10 * w.norm());
    CHECK((dg.apply_U(w) - Ug * w).norm() <= 1e-10 * Ug.norm() * w.norm());
}

TEST_CASE("solve_family matches dense direct solves across the wavelength "
          "family") {
    Family f = small_family(6, 10);
    krylov::SolverConfig cfg;
    cfg.tol = 1e-10;
    auto res = krylov::solve_family(f.K, f.M, f.R, f.b, f.shifts, cfg);
    REQUIRE(res.X.cols() == (int)f.shifts.size());
    CHECK(res.all_converged);
    for (size_t j = 0; j < f.shifts.size(); ++j) {
        Vec xd = dense_system(f, j).partialPivLu().solve(f.b);
        CHECK((res.X.col(j) - xd).norm() <= 1e-7 * xd.norm());
        CHECK(res.stats[j].relres <= 1e-10);
    }
}

TEST_CASE("solve_family with Jacobi preconditioning still matches the "
          "direct solves") {
    Family f = small_family(6, 4);
    krylov::SolverConfig cfg;
    cfg.tol = 1e-10;
    cfg.jacobi = true;
    auto res = krylov::solve_family(f.K, f.M, f.R, f.b, f.shifts, cfg);
    CHECK(res.all_converged);
    for (size_t j = 0; j < f.shifts.size(); ++j) {
        Vec xd = dense_system(f, j).partialPivLu().solve(f.b);
        CHECK((res.X.col(j) - xd).norm() <= 1e-7 * xd.norm());
    }
}

TEST_CASE("recycling reduces total iterations versus no deflation") {
    Family f = small_family(8, 20);
    krylov::SolverConfig with, without;
    // a short first-phase basis leaves real work for the per-shift solves
    with.arnoldi_steps = without.arnoldi_steps = 25;
    with.restart = without.restart = 25;
    with.deflation_dim = 10;
    without.deflation_dim = 0;
    auto a = krylov::solve_family(f.K, f.M, f.R, f.b, f.shifts, with);
    auto b = krylov::solve_family(f.K, f.M, f.R, f.b, f.shifts, without);
    CHECK(a.all_converged);
    CHECK(b.all_converged);
    long ia = 0, ib = 0;
    for (auto& s : a.stats) ia += s.iterations;
    for (auto& s : b.stats) ib += s.iterations;
    CHECK(ia < ib);
}

TEST_CASE("solve_family is deterministic") {
    Family f = small_family(5, 6);
    krylov::SolverConfig cfg;
    auto a = krylov::solve_family(f.K, f.M, f.R, f.b, f.shifts, cfg);
    auto b = krylov::solve_family(f.K, f.M, f.R, f.b, f.shifts, cfg);
    CHECK((a.X - b.X).norm() == 0.0);
}

TEST_CASE("solve_family honors multiple threads with identical results") {
    Family f = small_family(5, 6);
    krylov::SolverConfig cfg;
    auto a = krylov::solve_family(f.K, f.M, f.R, f.b, f.shifts, cfg);
    cfg.threads = 4;
    auto b = krylov::solve_family(f.K, f.M, f.R, f.b, f.shifts, cfg);
    CHECK((a.X - b.X).norm() == 0.0);
}
