#ifndef HYDOT_BORN_HPP
#define HYDOT_BORN_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hydot/grid.hpp"
#include "hydot/krylov.hpp"
#include "hydot/optics.hpp"

namespace hydot {
namespace born {

/// Sources on the z=Lz plane, per-source co-axial detectors on z=0, and the
/// wavelength list.  Measurement index ordering is source-major, detector
/// middle, wavelength minor.
struct MeasurementSetup {
    std::vector<Vec> sources;                 // 3D points, z = Lz
    std::vector<std::vector<Vec>> detectors;  // per source, 3D points, z = 0
    std::vector<double> wavelengths;          // nm
    optics::ChromophoreTable table;
    optics::OpticalParams params;
    double noise_std = 0.0;

    int num_sources() const { return static_cast<int>(sources.size()); }
    int num_detectors() const {
        return sources.empty() ? 0 : static_cast<int>(detectors[0].size());
    }
    int num_wavelengths() const { return static_cast<int>(wavelengths.size()); }
    int num_measurements() const {
        return num_sources() * num_detectors() * num_wavelengths();
    }
    int measurement_index(int s, int d, int l) const {
        return (s * num_detectors() + d) * num_wavelengths() + l;
    }
};

/// Square n x n detector grid on z=0 centered under the source.
std::vector<Vec> coaxial_detectors(const Vec& source, int n, double pitch);

/// Incident and adjoint fields per wavelength, with the 1/D(lambda) source
/// scaling already applied.
struct FieldSet {
    std::vector<Mat> incident;              // per source: N x N_lambda
    std::vector<std::vector<Mat>> adjoint;  // per source, detector: N x N_l
    std::vector<double> inv_D;              // 1/D(lambda)
    std::vector<std::pair<double, double>> shifts;  // (sigma, sigma') per l
};

/// Solve every incident and adjoint system across all wavelengths with the
/// recycled family solver.
FieldSet compute_fields(const grid::Grid& g, const SpMat& K, const SpMat& M,
                        const SpMat& R, const MeasurementSetup& setup,
                        const krylov::SolverConfig& cfg);

/// Dense sensitivity rows of source s: entry for (d, lambda) at vertex n is
/// -nu * phi_d,n * phi_i,n * w_n with w the lumped-mass diagonal.  Rows are
/// ordered detector-major, wavelength-minor.
Mat assemble_H_block(const FieldSet& fields, const MeasurementSetup& setup,
                     int s, const Vec& lumped_w);

/// All blocks stacked in source order (fixture-scale only).
Mat assemble_H_dense(const FieldSet& fields, const MeasurementSetup& setup,
                     const Vec& lumped_w);

/// y = sum_i c_i E_i H mu with E_i the per-measurement extinction scaling.
Vec forward_measure(const std::function<Vec(const Vec&)>& Hmv,
                    const std::vector<double>& c, const Vec& mu,
                    const MeasurementSetup& setup);

struct NoiseResult {
    Vec y_noisy;
    Vec eta;
    Vec w_diag;    // data-weighting diagonal 1/sigma_m
    double sigma;  // per-measurement noise std
};

/// Gaussian noise rescaled after sampling so the realized SNR in dB is exact;
/// pass +infinity for a noise-free copy.
NoiseResult add_noise(const Vec& y, double snr_db, std::uint64_t seed);

/// Per-source block dump: little-endian f64 header {rows, cols}, row-major.
void save_block(const std::string& path, const Mat& block);
Mat load_block(const std::string& path);

}  // namespace born
}  // namespace hydot

#endif
