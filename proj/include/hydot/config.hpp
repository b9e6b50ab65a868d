#ifndef HYDOT_CONFIG_HPP
#define HYDOT_CONFIG_HPP

#include <string>
#include <vector>

#include "hydot/krylov.hpp"
#include "hydot/optics.hpp"

namespace hydot {
namespace config {

enum class Kind { exp1, exp2, exp3, solver_bench, compress_bench };

std::string kind_name(Kind k);

struct ExperimentConfig {
    // [experiment]
    Kind kind = Kind::exp1;
    std::string outdir = "out";
    std::uint64_t seed = 20240811;

    // [grid]
    int nx = 10, ny = 10, nz = 10;
    double Lx = 3.0, Ly = 3.0, Lz = 2.0;

    // [optics]
    optics::OpticalParams params;
    std::string table_path;  // empty -> builtin synthetic table

    // [setup]
    int ns_x = 2, ns_y = 2;          // source lattice on the top plate
    int n_det = 3;                   // n_det x n_det co-axial detector grid
    double det_pitch = 0.5;          // cm
    double source_margin = 0.35;     // lattice inset as a fraction of L
    double lambda_min = 600.0, lambda_max = 1000.0;
    int n_lambda = 25;
    double snr_db = 33.0;

    // [solver]
    krylov::SolverConfig solver;

    // [compression]
    double eps_d = 1e-6;
    std::string method = "randsvd";  // randsvd | aca_partial

    // [reconstruction]
    int n_p_truth = 3;
    int n_p = 5;
    double gamma = 1.2;
    double tau_level = 0.1;
    double eps_H = 0.05;
    int max_outer = 30;
    int max_inner = 5;
    double nu0 = 1.0;
};

/// Parse the flat key = value format with [section] headers; unknown keys and
/// malformed lines are reported as errors.
ExperimentConfig parse_config(const std::string& path,
                              std::vector<std::string>& errors);

/// Semantic checks beyond parsing (ranges, geometry fits, method names).
std::vector<std::string> validate(const ExperimentConfig& cfg);

/// The full default configuration in parseable form.
std::string defaults_text();

/// Apply HYDOT_THREADS / HYDOT_OUTDIR environment overrides.
void apply_env_overrides(ExperimentConfig& cfg);

}  // namespace config
}  // namespace hydot

#endif
