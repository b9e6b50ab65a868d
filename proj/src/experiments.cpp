#include "hydot/experiments.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>

#include <json.hpp>

#include "hydot/vtk.hpp"

namespace hydot {
namespace experiments {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

[[noreturn]] void stage_fail(const std::string& stage, const std::string& what) {
    throw std::runtime_error("stage '" + stage + "' failed: " + what);
}

optics::ChromophoreTable load_table(const config::ExperimentConfig& cfg) {
    if (cfg.table_path.empty()) return optics::builtin_chromophore_table();
    optics::ChromophoreTable t = optics::load_chromophore_table(cfg.table_path);
    optics::ChromophoreTable b = optics::builtin_chromophore_table();
    if (t.num_species() != b.num_species())
        stage_fail("setup", "chromophore table must provide " +
                                std::to_string(b.num_species()) + " species");
    t.background = b.background;
    t.anomaly = b.anomaly;
    return t;
}

born::MeasurementSetup make_setup(const config::ExperimentConfig& cfg) {
    born::MeasurementSetup setup;
    setup.table = load_table(cfg);
    setup.params = cfg.params;
    for (int l = 0; l < cfg.n_lambda; ++l) {
        double t = cfg.n_lambda == 1
                       ? 0.0
                       : static_cast<double>(l) / (cfg.n_lambda - 1);
        setup.wavelengths.push_back(cfg.lambda_min +
                                    t * (cfg.lambda_max - cfg.lambda_min));
    }
    auto frac = [&](int i, int n) {
        return n == 1 ? 0.5
                      : cfg.source_margin +
                            i * (1.0 - 2.0 * cfg.source_margin) / (n - 1);
    };
    for (int iy = 0; iy < cfg.ns_y; ++iy)
        for (int ix = 0; ix < cfg.ns_x; ++ix) {
            Vec s(3);
            s << -cfg.Lx + frac(ix, cfg.ns_x) * 2 * cfg.Lx,
                -cfg.Ly + frac(iy, cfg.ns_y) * 2 * cfg.Ly, cfg.Lz;
            setup.sources.push_back(s);
            setup.detectors.push_back(
                born::coaxial_detectors(s, cfg.n_det, cfg.det_pitch));
        }
    return setup;
}

}  // namespace

Pipeline build_pipeline(const config::ExperimentConfig& cfg) {
    Pipeline pl;
    try {
        pl.g = grid::build_grid(cfg.nx, cfg.ny, cfg.nz, cfg.Lx, cfg.Ly,
                                cfg.Lz);
        pl.K = grid::assemble_stiffness(pl.g);
        pl.M = grid::assemble_mass(pl.g, true);
        pl.R = grid::assemble_robin(pl.g);
        pl.lumped_w = pl.M.diagonal();
    } catch (const std::exception& e) {
        stage_fail("phantom", e.what());
    }
    try {
        pl.setup = make_setup(cfg);
    } catch (const std::exception& e) {
        stage_fail("setup", e.what());
    }
    try {
        pl.fields = born::compute_fields(pl.g, pl.K, pl.M, pl.R, pl.setup,
                                         cfg.solver);
    } catch (const std::exception& e) {
        stage_fail("fields", e.what());
    }
    try {
        pl.H = born::assemble_H_dense(pl.fields, pl.setup, pl.lumped_w);
    } catch (const std::exception& e) {
        stage_fail("born", e.what());
    }
    return pl;
}

namespace {

pals::PaLSParams random_params(const config::ExperimentConfig& cfg,
                               const grid::Grid& g, int n_p,
                               std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    pals::PaLSParams p;
    p.tau_level = cfg.tau_level;
    p.eps_H = cfg.eps_H;
    p.nu_norm = 1e-3 * std::min({g.hx, g.hy, g.hz});
    p.alpha = Vec(n_p);
    p.beta = Vec(n_p);
    p.centers = Mat(n_p, 3);
    for (int k = 0; k < n_p; ++k) {
        p.alpha[k] = 0.6 + 0.4 * uni(rng);
        double radius = (0.35 + 0.3 * uni(rng)) * g.Lz;  // support 1/beta
        p.beta[k] = 1.0 / radius;
        p.centers(k, 0) = (2.0 * uni(rng) - 1.0) * 0.4 * g.Lx;
        p.centers(k, 1) = (2.0 * uni(rng) - 1.0) * 0.4 * g.Ly;
        p.centers(k, 2) = (0.3 + 0.4 * uni(rng)) * g.Lz;
    }
    return p;
}

}  // namespace

pals::PaLSParams make_truth(const config::ExperimentConfig& cfg,
                            const grid::Grid& g) {
    return random_params(cfg, g, cfg.n_p_truth, cfg.seed * 2654435761ULL + 1);
}

pals::PaLSParams make_init(const config::ExperimentConfig& cfg,
                           const grid::Grid& g) {
    pals::PaLSParams p =
        random_params(cfg, g, cfg.n_p, cfg.seed * 0x9e3779b97f4a7c15ULL + 7);
    p.alpha *= 0.5;  // start from a small, smooth blob field
    return p;
}

std::vector<double> perturbation_concentrations(
    const optics::ChromophoreTable& table) {
    std::vector<double> c(table.num_species());
    for (size_t i = 0; i < c.size(); ++i)
        c[i] = table.anomaly[i] - table.background[i];
    return c;
}

FullForward full_diffusion_forward(const grid::Grid& g, const SpMat& K,
                                   const SpMat& R,
                                   const born::MeasurementSetup& setup,
                                   const Vec& mu,
                                   const std::vector<double>& c_pert) {
    const int nl = setup.num_wavelengths();
    const int M = setup.num_measurements();
    FullForward out;
    out.y_total = Vec::Zero(M);
    out.y_incident = Vec::Zero(M);

    using ColMat = Eigen::SparseMatrix<double>;
    for (int l = 0; l < nl; ++l) {
        double lam = setup.wavelengths[l];
        double D = optics::diffusion_coefficient(lam, setup.params);
        double mu_bg = optics::background_absorption(lam, setup.table);
        double dmu_scale = 0.0;
        for (size_t i = 0; i < c_pert.size(); ++i)
            dmu_scale += c_pert[i] * setup.table.extinction(i, lam);
        double sp = 1.0 / (2.0 * setup.params.robin_A * D);

        // nu*(mu_bg + dmu(r))/D as a vertex weight
        Vec w = (setup.params.nu / D) *
                (Vec::Constant(g.num_vertices(), mu_bg) + dmu_scale * mu);
        Vec w_bg = Vec::Constant(g.num_vertices(),
                                 setup.params.nu * mu_bg / D);
        SpMat A_tot = K + grid::assemble_weighted_mass_lumped(g, w) +
                      SpMat(sp * R);
        SpMat A_inc = K + grid::assemble_weighted_mass_lumped(g, w_bg) +
                      SpMat(sp * R);
        ColMat At(A_tot), Ai(A_inc);
        Eigen::SimplicialLDLT<ColMat> tot(At), inc(Ai);
        if (tot.info() != Eigen::Success || inc.info() != Eigen::Success)
            stage_fail("full-forward", "sparse factorization failed");

        for (int s = 0; s < setup.num_sources(); ++s) {
            Vec b = grid::point_source_vector(g, setup.sources[s]);
            for (int n = 0; n < g.num_vertices(); ++n)
                if (g.is_dirichlet(n)) b[n] = 0.0;
            Vec xt = tot.solve(b) / D;
            Vec xi = inc.solve(b) / D;
            for (int d = 0; d < setup.num_detectors(); ++d) {
                int m = setup.measurement_index(s, d, l);
                out.y_total[m] =
                    grid::interpolate(g, xt, setup.detectors[s][d]);
                out.y_incident[m] =
                    grid::interpolate(g, xi, setup.detectors[s][d]);
            }
        }
    }
    out.y_scattered = out.y_total - out.y_incident;
    return out;
}

namespace {

struct Compressed {
    lowrank::RecursiveResult rec;
    lowrank::ClusterTree tree;
    double build_seconds = 0.0;
};

Compressed compress_H(const Pipeline& pl, const config::ExperimentConfig& cfg,
                      double eps_d) {
    Compressed c;
    const int ns = pl.setup.num_sources();
    Mat pos(ns, 2);
    for (int s = 0; s < ns; ++s) {
        pos(s, 0) = pl.setup.sources[s][0];
        pos(s, 1) = pl.setup.sources[s][1];
    }
    Vec lo(2), hi(2);
    lo << -pl.g.Lx, -pl.g.Ly;
    hi << pl.g.Lx, pl.g.Ly;
    c.tree = lowrank::build_cluster_tree(pos, lo, hi);

    int L = c.tree.depth();
    int rows_per = pl.setup.num_detectors() * pl.setup.num_wavelengths();
    int Nr = std::min<int>(pl.H.rows(), pl.H.cols());
    double eps = lowrank::tolerance_schedule(eps_d, L, Nr);

    lowrank::BlockProvider provider;
    provider.rows_per_source = rows_per;
    provider.cols = static_cast<int>(pl.H.cols());
    provider.block = [&pl, rows_per](int s) {
        return Mat(pl.H.middleRows(s * rows_per, rows_per));
    };
    lowrank::RecursiveOptions opts;
    opts.leaf_method = cfg.method == "aca_partial"
                           ? lowrank::Method::aca_partial
                           : lowrank::Method::randsvd;
    opts.seed = cfg.seed;

    auto t0 = Clock::now();
    c.rec = lowrank::recursive_lowrank(c.tree, eps, provider, opts);
    c.rec.factor =
        lowrank::recompress(c.rec.factor, eps, -1, &c.rec.ledger);
    c.build_seconds = seconds_since(t0);
    return c;
}

std::function<Vec(const Vec&)> permuted_matvec(const Compressed& c, int M) {
    return [&c, M](const Vec& x) {
        Vec tmp = lowrank::lr_matvec(c.rec.factor, x);
        Vec out = Vec::Zero(M);
        for (int i = 0; i < tmp.size(); ++i) out[c.rec.row_perm[i]] = tmp[i];
        return out;
    };
}

void write_rank_table(const std::string& path, const Compressed& c,
                      double tol) {
    std::ofstream out(path);
    out << "tol,node,depth,rank,delta\n";
    auto ratios = lowrank::compression_ratios(c.tree, c.rec.node_rank);
    // per-node rows; delta only defined for internal nodes
    size_t ri = 0;
    std::function<void(int, int)> go = [&](int v, int depth) {
        const auto& nd = c.tree.nodes[v];
        double delta = -1.0;
        if (!nd.is_leaf() && ri < ratios.size() &&
            ratios[ri].first == depth) {
            delta = ratios[ri].second;
            ++ri;
        }
        out << tol << "," << v << "," << depth << ","
            << c.rec.node_rank[v] << "," << delta << "\n";
        if (!nd.is_leaf()) {
            go(nd.left, depth + 1);
            go(nd.right, depth + 1);
        }
    };
    go(c.tree.root, 0);
}

struct ReconOutcome {
    pals::ReconResult result;
    pals::Metrics m;
    double seconds = 0.0;
};

ReconOutcome run_reconstruction(const Pipeline& pl,
                                const config::ExperimentConfig& cfg,
                                const std::function<Vec(const Vec&)>& Hmv,
                                const Vec& y, const Vec& w_diag,
                                double noise_norm, const Vec& mu_true,
                                const std::vector<double>* fixed_c) {
    pals::ReconConfig rc;
    rc.gamma = cfg.gamma;
    rc.max_outer = cfg.max_outer;
    rc.max_inner = cfg.max_inner;
    rc.nu0 = cfg.nu0;
    if (fixed_c) rc.fixed_c = *fixed_c;
    pals::PaLSParams init = make_init(cfg, pl.g);

    ReconOutcome out;
    auto t0 = Clock::now();
    out.result = pals::reconstruct(y, Hmv, pl.setup, pl.g, init, w_diag,
                                   noise_norm, rc, &mu_true);
    out.seconds = seconds_since(t0);
    out.m = pals::metrics(mu_true, pals::shape(out.result.p, pl.g));
    return out;
}

json species_errors(const optics::ChromophoreTable& table,
                    const std::vector<double>& c_true,
                    const std::vector<double>& c_hat) {
    json arr = json::array();
    for (size_t i = 0; i < c_true.size(); ++i) {
        double denom = std::abs(c_true[i]) > 0 ? std::abs(c_true[i]) : 1.0;
        arr.push_back({{"species", table.species[i]},
                       {"true", c_true[i]},
                       {"estimate", c_hat[i]},
                       {"rel_error", std::abs(c_hat[i] - c_true[i]) / denom}});
    }
    return arr;
}

int run_exp(const config::ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.outdir);
    auto opath = [&](const std::string& f) { return cfg.outdir + "/" + f; };

    Pipeline pl = build_pipeline(cfg);
    pals::PaLSParams truth = make_truth(cfg, pl.g);
    Vec mu_true = pals::shape(truth, pl.g);
    if ((mu_true.array() > 0.5).count() == 0)
        stage_fail("truth", "empty anomaly for this seed/geometry");
    std::vector<double> c_pert = perturbation_concentrations(pl.setup.table);

    vtk::write_structured_points(opath("mu_true.vtk"), pl.g, {"mu_true"},
                                 {mu_true});
    vtk::write_structured_points(
        opath("field_s0.vtk"), pl.g, {"incident"},
        {Vec(pl.fields.incident[0].col(0))});
    {
        Vec b = grid::point_source_vector(pl.g, pl.setup.sources[0]);
        for (int n = 0; n < pl.g.num_vertices(); ++n)
            if (pl.g.is_dirichlet(n)) b[n] = 0.0;
        krylov::FamilyResult fam = krylov::solve_family(
            pl.K, pl.M, pl.R, b, pl.fields.shifts, cfg.solver);
        krylov::write_telemetry(opath("telemetry.csv"), pl.setup.wavelengths,
                                pl.fields.shifts, fam);
    }

    // clean data (Born for exp1/exp2, full diffusion for exp3)
    auto dense_mv = [&pl](const Vec& x) { return Vec(pl.H * x); };
    Vec y_clean;
    double modeling_snr_db = -1.0;
    if (cfg.kind == config::Kind::exp3) {
        FullForward ff = full_diffusion_forward(pl.g, pl.K, pl.R, pl.setup,
                                                mu_true, c_pert);
        y_clean = ff.y_scattered;
        Vec y_born = born::forward_measure(dense_mv, c_pert, mu_true,
                                           pl.setup);
        double gap = (y_clean - y_born).norm();
        if (gap > 0)
            modeling_snr_db = 20.0 * std::log10(y_born.norm() / gap);
    } else {
        y_clean = born::forward_measure(dense_mv, c_pert, mu_true, pl.setup);
    }
    born::NoiseResult noise = born::add_noise(y_clean, cfg.snr_db,
                                              cfg.seed ^ 0xD1CEu);
    Vec w = noise.sigma > 0 ? noise.w_diag : Vec::Ones(y_clean.size());
    double noise_norm = (w.cwiseProduct(noise.eta)).norm();

    json summary;
    summary["experiment"] = config::kind_name(cfg.kind);
    summary["seed"] = cfg.seed;
    summary["grid"] = {pl.g.nx, pl.g.ny, pl.g.nz};
    summary["measurements"] = pl.setup.num_measurements();
    summary["snr_db"] = cfg.snr_db;
    if (cfg.kind == config::Kind::exp3)
        summary["modeling_error_snr_db"] = modeling_snr_db;

    std::ofstream metrics(opath("metrics.csv"));
    metrics << "tol,rank,l2_rel,dice,time_s\n";
    metrics.precision(10);

    std::vector<double> tols =
        cfg.kind == config::Kind::exp1
            ? std::vector<double>{1e-3, 1e-6, 1e-9}
            : std::vector<double>{cfg.eps_d};

    bool ok = true;
    json runs = json::array();
    for (double tol : tols) {
        Compressed comp = compress_H(pl, cfg, tol);
        write_rank_table(opath("ranks_" + std::to_string(tol) + ".csv"), comp,
                         tol);
        auto Hmv = permuted_matvec(comp, pl.setup.num_measurements());

        const std::vector<double>* fixed =
            cfg.kind == config::Kind::exp1 ? &c_pert : nullptr;
        ReconOutcome rec = run_reconstruction(pl, cfg, Hmv, noise.y_noisy, w,
                                              noise_norm, mu_true, fixed);
        metrics << tol << "," << comp.rec.factor.rank() << ","
                << rec.m.l2_rel << "," << rec.m.dice << "," << rec.seconds
                << "\n";
        pals::write_trace(opath("trace_" + std::to_string(tol) + ".csv"),
                          rec.result.trace);
        vtk::write_structured_points(
            opath("mu_recon_" + std::to_string(tol) + ".vtk"), pl.g,
            {"mu_recon"}, {pals::shape(rec.result.p, pl.g)});

        json r;
        r["tol"] = tol;
        r["rank"] = comp.rec.factor.rank();
        r["compress_seconds"] = comp.build_seconds;
        r["l2_rel"] = rec.m.l2_rel;
        r["dice"] = rec.m.dice;
        r["resnorm"] = rec.result.resnorm;
        r["converged"] = rec.result.converged;
        r["flagged"] = rec.result.flagged;
        if (cfg.kind != config::Kind::exp1)
            r["concentrations"] =
                species_errors(pl.setup.table, c_pert, rec.result.c);
        runs.push_back(r);
        if (rec.result.flagged && !rec.result.converged &&
            rec.m.dice < 0.2)
            ok = false;
    }
    summary["runs"] = runs;
    std::ofstream(opath("summary.json")) << summary.dump(2) << "\n";
    return ok ? 0 : 3;
}

int run_solver_bench(const config::ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.outdir);
    auto opath = [&](const std::string& f) { return cfg.outdir + "/" + f; };

    grid::Grid g = grid::build_grid(cfg.nx, cfg.ny, cfg.nz, cfg.Lx, cfg.Ly,
                                    cfg.Lz);
    SpMat K = grid::assemble_stiffness(g);
    SpMat M = grid::assemble_mass(g, true);
    SpMat R = grid::assemble_robin(g);
    born::MeasurementSetup setup = make_setup(cfg);

    std::vector<std::pair<double, double>> shifts;
    for (double lam : setup.wavelengths)
        shifts.push_back(optics::shifts(lam, setup.table, setup.params));
    Vec b = grid::point_source_vector(g, setup.sources[0]);
    for (int n = 0; n < g.num_vertices(); ++n)
        if (g.is_dirichlet(n)) b[n] = 0.0;

    std::ofstream out(opath("metrics.csv"));
    out << "deflation_dim,total_iters,total_matvecs,time_s,all_converged\n";
    json runs = json::array();
    bool ok = true;
    for (int k : {0, 5, 10, 15}) {
        krylov::SolverConfig sc = cfg.solver;
        sc.deflation_dim = k;
        auto t0 = Clock::now();
        krylov::FamilyResult res = krylov::solve_family(K, M, R, b, shifts,
                                                        sc);
        double secs = seconds_since(t0);
        long iters = 0, mv = 0;
        for (const auto& st : res.stats) {
            iters += st.iterations;
            mv += st.matvecs;
        }
        out << k << "," << iters << "," << mv << "," << secs << ","
            << res.all_converged << "\n";
        runs.push_back({{"k", k},
                        {"iters", iters},
                        {"matvecs", mv},
                        {"seconds", secs},
                        {"all_converged", res.all_converged}});
        ok = ok && res.all_converged;
        if (k == cfg.solver.deflation_dim)
            krylov::write_telemetry(opath("telemetry.csv"), setup.wavelengths,
                                    shifts, res);
    }
    json summary;
    summary["experiment"] = "solver-bench";
    summary["wavelengths"] = setup.num_wavelengths();
    summary["runs"] = runs;
    std::ofstream(opath("summary.json")) << summary.dump(2) << "\n";
    return ok ? 0 : 3;
}

int run_compress_bench(const config::ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.outdir);
    auto opath = [&](const std::string& f) { return cfg.outdir + "/" + f; };

    std::ofstream out(opath("metrics.csv"));
    out << "ns,rank,recursive_s,direct_s,rel_err,kernel_gap\n";
    out.precision(10);
    json runs = json::array();

    std::vector<std::pair<int, int>> layouts = {{2, 2}, {4, 2}, {4, 4}};
    for (auto [nsx, nsy] : layouts) {
        config::ExperimentConfig c = cfg;
        c.ns_x = nsx;
        c.ns_y = nsy;
        Pipeline pl = build_pipeline(c);
        Compressed comp = compress_H(pl, c, c.eps_d);
        write_rank_table(
            opath("ranks_ns" + std::to_string(nsx * nsy) + ".csv"), comp,
            c.eps_d);

        auto t0 = Clock::now();
        lowrank::LowRankFactor direct = lowrank::randsvd(
            lowrank::dense_op(pl.H),
            lowrank::tolerance_schedule(c.eps_d, 0,
                                        std::min<int>(pl.H.rows(),
                                                      pl.H.cols())),
            20, 10, c.seed);
        double direct_s = seconds_since(t0);

        Mat Hhat = comp.rec.factor.dense();
        Mat P = Mat::Zero(pl.H.rows(), pl.H.rows());
        for (int i = 0; i < (int)comp.rec.row_perm.size(); ++i)
            P(comp.rec.row_perm[i], i) = 1.0;
        double rel = (pl.H - P * Hhat).norm() / pl.H.norm();
        double gap = std::abs(comp.rec.ledger.category_total() -
                              comp.rec.ledger.kernel_tally) /
                     std::max(comp.rec.ledger.kernel_tally, 1.0);

        out << nsx * nsy << "," << comp.rec.factor.rank() << ","
            << comp.build_seconds << "," << direct_s << "," << rel << ","
            << gap << "\n";
        runs.push_back({{"ns", nsx * nsy},
                        {"rank", comp.rec.factor.rank()},
                        {"direct_rank", direct.rank()},
                        {"recursive_seconds", comp.build_seconds},
                        {"direct_seconds", direct_s},
                        {"rel_err", rel},
                        {"leaf_flops", comp.rec.ledger.leaf},
                        {"agglomeration_flops",
                         comp.rec.ledger.agglomeration}});
        lowrank::save_factor(
            opath("factor_ns" + std::to_string(nsx * nsy) + ".bin"),
            comp.rec.factor, comp.rec.row_perm);
    }
    json summary;
    summary["experiment"] = "compress-bench";
    summary["runs"] = runs;
    std::ofstream(opath("summary.json")) << summary.dump(2) << "\n";
    return 0;
}

}  // namespace

int run(const config::ExperimentConfig& cfg) {
    switch (cfg.kind) {
        case config::Kind::exp1:
        case config::Kind::exp2:
        case config::Kind::exp3:
            return run_exp(cfg);
        case config::Kind::solver_bench:
            return run_solver_bench(cfg);
        case config::Kind::compress_bench:
            return run_compress_bench(cfg);
    }
    return 2;
}

}  // namespace experiments
}  // namespace hydot
