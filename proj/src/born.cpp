#include "hydot/born.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace hydot {
namespace born {

std::vector<Vec> coaxial_detectors(const Vec& source, int n, double pitch) {
    std::vector<Vec> out;
    out.reserve(n * n);
    double off = 0.5 * (n - 1) * pitch;
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
            Vec d(3);
            d << source[0] - off + ix * pitch, source[1] - off + iy * pitch,
                0.0;
            out.push_back(d);
        }
    return out;
}

namespace {

Vec source_rhs(const grid::Grid& g, const Vec& r) {
    Vec b = grid::point_source_vector(g, r);
    for (int n = 0; n < g.num_vertices(); ++n)
        if (g.is_dirichlet(n)) b[n] = 0.0;
    if (b.norm() == 0.0)
        throw std::invalid_argument(
            "source support falls entirely on the Dirichlet boundary");
    return b;
}

}  // namespace

FieldSet compute_fields(const grid::Grid& g, const SpMat& K, const SpMat& M,
                        const SpMat& R, const MeasurementSetup& setup,
                        const krylov::SolverConfig& cfg) {
    const int nl = setup.num_wavelengths();
    if (nl == 0) throw std::invalid_argument("compute_fields: no wavelengths");
    FieldSet fs;
    fs.inv_D.resize(nl);
    fs.shifts.resize(nl);
    for (int l = 0; l < nl; ++l) {
        fs.inv_D[l] = 1.0 / optics::diffusion_coefficient(setup.wavelengths[l],
                                                          setup.params);
        fs.shifts[l] = optics::shifts(setup.wavelengths[l], setup.table,
                                      setup.params);
    }

    auto solve_scaled = [&](const Vec& point, const std::string& tag) {
        Vec b = source_rhs(g, point);
        krylov::FamilyResult fam = krylov::solve_family(K, M, R, b, fs.shifts,
                                                        cfg);
        if (!fam.all_converged)
            throw std::runtime_error(
                "field solve failed at " + tag + ", wavelength " +
                std::to_string(setup.wavelengths[fam.first_failure]) + " nm");
        Mat X = fam.X;
        for (int l = 0; l < nl; ++l) X.col(l) *= fs.inv_D[l];
        return X;
    };

    fs.incident.resize(setup.num_sources());
    fs.adjoint.resize(setup.num_sources());
    for (int s = 0; s < setup.num_sources(); ++s) {
        fs.incident[s] = solve_scaled(setup.sources[s],
                                      "source " + std::to_string(s));
        fs.adjoint[s].resize(setup.detectors[s].size());
        for (size_t d = 0; d < setup.detectors[s].size(); ++d)
            fs.adjoint[s][d] = solve_scaled(
                setup.detectors[s][d],
                "detector " + std::to_string(d) + " of source " +
                    std::to_string(s));
    }
    return fs;
}

Mat assemble_H_block(const FieldSet& fields, const MeasurementSetup& setup,
                     int s, const Vec& lumped_w) {
    const int nd = setup.num_detectors();
    const int nl = setup.num_wavelengths();
    const int N = static_cast<int>(lumped_w.size());
    const double nu = setup.params.nu;
    Mat block(nd * nl, N);
    for (int d = 0; d < nd; ++d)
        for (int l = 0; l < nl; ++l)
            block.row(d * nl + l) =
                (-nu) * fields.adjoint[s][d]
                            .col(l)
                            .cwiseProduct(fields.incident[s].col(l))
                            .cwiseProduct(lumped_w)
                            .transpose();
    return block;
}

Mat assemble_H_dense(const FieldSet& fields, const MeasurementSetup& setup,
                     const Vec& lumped_w) {
    const int rows = setup.num_detectors() * setup.num_wavelengths();
    Mat H(setup.num_sources() * rows, lumped_w.size());
    for (int s = 0; s < setup.num_sources(); ++s)
        H.middleRows(s * rows, rows) =
            assemble_H_block(fields, setup, s, lumped_w);
    return H;
}

Vec forward_measure(const std::function<Vec(const Vec&)>& Hmv,
                    const std::vector<double>& c, const Vec& mu,
                    const MeasurementSetup& setup) {
    if (c.size() != setup.table.num_species())
        throw std::invalid_argument("forward_measure: concentration length");
    Vec hm = Hmv(mu);
    if (hm.size() != setup.num_measurements())
        throw std::invalid_argument("forward_measure: operator row count");
    const int nl = setup.num_wavelengths();
    Vec scale(nl);
    for (int l = 0; l < nl; ++l) {
        double e = 0.0;
        for (size_t i = 0; i < c.size(); ++i)
            e += c[i] * setup.table.extinction(i, setup.wavelengths[l]);
        scale[l] = e;
    }
    Vec y(hm.size());
    for (int m = 0; m < hm.size(); ++m) y[m] = scale[m % nl] * hm[m];
    return y;
}

NoiseResult add_noise(const Vec& y, double snr_db, std::uint64_t seed) {
    const double ynorm = y.norm();
    if (ynorm == 0.0)
        throw std::invalid_argument("add_noise: y must be nonzero");
    NoiseResult out;
    if (std::isinf(snr_db)) {
        out.eta = Vec::Zero(y.size());
        out.y_noisy = y;
        out.sigma = 0.0;
        out.w_diag = Vec::Ones(y.size());
        return out;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec eta(y.size());
    for (int i = 0; i < y.size(); ++i) eta[i] = gauss(rng);
    double target = ynorm * std::pow(10.0, -snr_db / 20.0);
    eta *= target / eta.norm();  // realized SNR is exact by construction
    out.eta = eta;
    out.y_noisy = y + eta;
    out.sigma = target / std::sqrt(static_cast<double>(y.size()));
    out.w_diag = Vec::Constant(y.size(), 1.0 / out.sigma);
    return out;
}

void save_block(const std::string& path, const Mat& block) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write block: " + path);
    double hdr[2] = {static_cast<double>(block.rows()),
                     static_cast<double>(block.cols())};
    out.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
    for (int i = 0; i < block.rows(); ++i)
        for (int j = 0; j < block.cols(); ++j) {
            double v = block(i, j);
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
}

Mat load_block(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read block: " + path);
    double hdr[2];
    in.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
    if (!in || hdr[0] < 0 || hdr[1] < 0)
        throw std::runtime_error("corrupt block file: " + path);
    Mat block(static_cast<int>(hdr[0]), static_cast<int>(hdr[1]));
    for (int i = 0; i < block.rows(); ++i)
        for (int j = 0; j < block.cols(); ++j) {
            double v;
            in.read(reinterpret_cast<char*>(&v), sizeof(v));
            block(i, j) = v;
        }
    if (!in) throw std::runtime_error("truncated block file: " + path);
    return block;
}

}  // namespace born
}  // namespace hydot
