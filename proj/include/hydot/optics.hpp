#ifndef HYDOT_OPTICS_HPP
#define HYDOT_OPTICS_HPP

#include <string>
#include <utility>
#include <vector>

#include "hydot/grid.hpp"

namespace hydot {
namespace optics {

/// Extinction curves for the absorbing species, sampled on an increasing
/// wavelength list.  Curves are pre-scaled so that eps_l(lambda) * c_l has
/// units of cm^-1.
struct ChromophoreTable {
    std::vector<std::string> species;          // e.g. HbO2, HbR, H2O, lipid
    std::vector<double> wavelengths;           // nm, strictly increasing
    std::vector<std::vector<double>> curves;   // curves[l][i] >= 0
    std::vector<double> background;            // c_l, background medium
    std::vector<double> anomaly;               // c_l inside the anomaly

    size_t num_species() const { return species.size(); }

    /// Linear interpolation of curve l; throws outside the table support.
    double extinction(size_t l, double lambda_nm) const;
};

/// Parse the plain-text table format: one header row (wavelength column plus
/// species names), then one whitespace-separated row per wavelength sample.
ChromophoreTable load_chromophore_table(const std::string& path);

/// Table with smooth synthetic curves over [600,1000] nm and the standard
/// background/anomaly concentrations; used by fixtures and shipped as data.
ChromophoreTable builtin_chromophore_table();

void save_chromophore_table(const ChromophoreTable& t, const std::string& path);

struct OpticalParams {
    double psi = 9.4;        // scattering prefactor, cm^-1
    double b = 1.4;          // scattering exponent
    double lambda0 = 600.0;  // reference wavelength, nm
    double nu = 2.14e10;     // propagation velocity, cm/s (config value)
    double robin_A = 1.0;    // refractive-index coefficient (config value)
};

/// Mie-model diffusion coefficient D(lambda) = (nu*psi/3) (lambda/lambda0)^b.
double diffusion_coefficient(double lambda_nm, const OpticalParams& p);

/// Background absorption mu_a(lambda) = sum_l eps_l(lambda) c_l^{background}.
double background_absorption(double lambda_nm, const ChromophoreTable& t);

/// The per-wavelength shifts (sigma, sigma') of the discrete system
/// (K + sigma M + sigma' R) x = b.
std::pair<double, double> shifts(double lambda_nm, const ChromophoreTable& t,
                                 const OpticalParams& p);

/// Mean-centering of the Robin shifts: returns (mean, recentered values).
std::pair<double, std::vector<double>> center_shift_transform(
    const std::vector<double>& sigma_primes);

}  // namespace optics
}  // namespace hydot

#endif
