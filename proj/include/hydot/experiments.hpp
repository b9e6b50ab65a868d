#ifndef HYDOT_EXPERIMENTS_HPP
#define HYDOT_EXPERIMENTS_HPP

#include <string>
#include <vector>

#include "hydot/born.hpp"
#include "hydot/config.hpp"
#include "hydot/grid.hpp"
#include "hydot/lowrank.hpp"
#include "hydot/pals.hpp"

namespace hydot {
namespace experiments {

/// Shared pipeline state: phantom grid, discrete operators, measurement
/// layout, solved fields and the stacked dense sensitivity matrix.
struct Pipeline {
    grid::Grid g;
    SpMat K, M, R;
    Vec lumped_w;
    born::MeasurementSetup setup;
    born::FieldSet fields;
    Mat H;  // M x N, fixture scale
};

Pipeline build_pipeline(const config::ExperimentConfig& cfg);

/// Deterministic pseudo-random anomaly truth / reconstruction initialization.
pals::PaLSParams make_truth(const config::ExperimentConfig& cfg,
                            const grid::Grid& g);
pals::PaLSParams make_init(const config::ExperimentConfig& cfg,
                           const grid::Grid& g);

/// Perturbation concentrations (anomaly minus background) per species.
std::vector<double> perturbation_concentrations(
    const optics::ChromophoreTable& table);

struct FullForward {
    Vec y_total;      // detector fluence with the anomaly present
    Vec y_incident;   // detector fluence of the unperturbed medium
    Vec y_scattered;  // difference data used for reconstruction
};

/// Unlinearized forward model: per-wavelength sparse direct solves with the
/// spatially varying absorption folded into a weighted lumped mass matrix.
FullForward full_diffusion_forward(const grid::Grid& g, const SpMat& K,
                                   const SpMat& R,
                                   const born::MeasurementSetup& setup,
                                   const Vec& mu,
                                   const std::vector<double>& c_pert);

/// Execute the configured experiment; returns the process exit code
/// (0 success, 3 numerical non-convergence).  Output files land in
/// cfg.outdir.
int run(const config::ExperimentConfig& cfg);

}  // namespace experiments
}  // namespace hydot

#endif
