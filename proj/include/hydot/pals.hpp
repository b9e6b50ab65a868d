#ifndef HYDOT_PALS_HPP
#define HYDOT_PALS_HPP

#include <functional>
#include <string>
#include <vector>

#include "hydot/born.hpp"
#include "hydot/grid.hpp"

namespace hydot {
namespace pals {

/// Parametric level set: weights, widths and centers of n_p compactly
/// supported radial basis functions, plus the smoothing constants.
struct PaLSParams {
    Vec alpha;    // n_p
    Vec beta;     // n_p, > 0
    Mat centers;  // n_p x 3, cm
    double tau_level = 0.1;
    double eps_H = 0.05;
    double nu_norm = 1e-3;  // smoothed-norm parameter, > 0

    int np() const { return static_cast<int>(alpha.size()); }
    int num_params() const { return 5 * np(); }  // (d+2) n_p with d = 3

    /// Stacked parameter vector [alpha; beta; cx; cy; cz].
    Vec to_vector() const;
    PaLSParams with_vector(const Vec& v) const;
};

/// Wendland C2 radial basis function and its derivative.
double wendland(double t);
double wendland_deriv(double t);

/// Sine-ramp smoothed Heaviside and its derivative.
double smooth_heaviside(double t, double eps);
double smooth_delta(double t, double eps);

/// phi(r) = sum_k alpha_k psi(beta_k ||r - chi_k||_*) at every grid vertex.
Vec level_set(const PaLSParams& p, const grid::Grid& g);

/// mu_n = H_eps(phi_n - tau), values in [0, 1].
Vec shape(const PaLSParams& p, const grid::Grid& g);

/// Analytic N x N_p Jacobian, columns [d/dalpha | d/dbeta | d/dcx | d/dcy |
/// d/dcz].
Mat shape_jacobian(const PaLSParams& p, const grid::Grid& g);

struct ConcentrationResult {
    std::vector<double> c;
    bool flagged = false;  // rank-deficient system (empty anomaly)
};

/// c = (W D(p))^+ (W y) with D(p) columns E_i H mu; one compressed matvec.
ConcentrationResult solve_concentrations(
    const std::function<Vec(const Vec&)>& Hmv, const Vec& mu,
    const Vec& w_diag, const Vec& y, const born::MeasurementSetup& setup);

/// Damped Gauss-Newton step (J^T J + nu I) dp = -J^T eps via the stacked
/// [J; sqrt(nu) I] least-squares system.
Vec lm_step(const Mat& J, const Vec& eps_residual, double nu_damp);

struct ReconConfig {
    int max_outer = 30;
    int max_inner = 5;
    int max_retries = 8;
    double gamma = 1.2;       // discrepancy factor, > 1
    double nu0 = 1.0;         // initial LM damping
    double stagnation_tol = 1e-6;
    std::vector<double> fixed_c;  // when nonempty, skip the c solve
};

struct TraceRow {
    int outer = 0;
    int inner = 0;
    double resnorm = 0.0;
    double nu = 0.0;
    bool accepted = false;
    double dice = -1.0;  // vs supplied truth; -1 when unavailable
};

struct ReconResult {
    PaLSParams p;
    std::vector<double> c;
    std::vector<TraceRow> trace;
    double resnorm = 0.0;
    bool converged = false;  // stopped by the discrepancy principle
    bool flagged = false;    // no descent direction within the retry budget
};

/// Alternating concentration/shape reconstruction with Levenberg-Marquardt
/// shape updates; noise_norm is ||W eta|| for the discrepancy stop.
ReconResult reconstruct(const Vec& y,
                        const std::function<Vec(const Vec&)>& Hmv,
                        const born::MeasurementSetup& setup, const grid::Grid& g,
                        const PaLSParams& init, const Vec& w_diag,
                        double noise_norm, const ReconConfig& cfg,
                        const Vec* mu_truth = nullptr);

void write_trace(const std::string& path, const std::vector<TraceRow>& trace);

struct Metrics {
    double l2_rel = 0.0;
    double dice = 0.0;
    bool flagged = false;  // both shapes empty after binarization
};

Metrics metrics(const Vec& mu_true, const Vec& mu_hat, double threshold = 0.5);

/// Diagnostic comparison of exact vs compressed objective, gradient and
/// search direction against the corresponding analytic bounds.
struct BoundReport {
    double eps_bar = 0.0;  // relative spectral truncation error
    double f_gap = 0.0, f_bound = 0.0;
    double grad_gap = 0.0, grad_bound = 0.0;
    double dp_gap = 0.0, dp_bound = 0.0;
    double tau_g = 0.0;
    double cos_theta = 1.0, cos_bound = 0.0;
    bool all_within = false;
};

BoundReport perturbation_bounds(const Mat& H, const Mat& Hhat, const Vec& mu,
                                const Vec& y, const Mat& dmudp,
                                double nu_damp);

}  // namespace pals
}  // namespace hydot

#endif
