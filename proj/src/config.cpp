#include "hydot/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "hydot/util.hpp"

namespace hydot {
namespace config {

std::string kind_name(Kind k) {
    switch (k) {
        case Kind::exp1: return "exp1";
        case Kind::exp2: return "exp2";
        case Kind::exp3: return "exp3";
        case Kind::solver_bench: return "solver-bench";
        case Kind::compress_bench: return "compress-bench";
    }
    return "?";
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

struct Setter {
    ExperimentConfig* cfg;
    std::vector<std::string>* errors;

    bool num(const std::string& v, double& out) {
        try {
            size_t pos;
            out = std::stod(v, &pos);
            return pos == v.size();
        } catch (...) {
            return false;
        }
    }

    void set(const std::string& sec, const std::string& key,
             const std::string& val) {
        auto bad = [&](const std::string& why) {
            errors->push_back("[" + sec + "] " + key + " = " + val + ": " +
                              why);
        };
        double d;
        auto want_num = [&]() {
            if (!num(val, d)) {
                bad("not a number");
                return false;
            }
            return true;
        };
        std::string k = sec + "." + key;
        if (k == "experiment.kind") {
            if (val == "exp1") cfg->kind = Kind::exp1;
            else if (val == "exp2") cfg->kind = Kind::exp2;
            else if (val == "exp3") cfg->kind = Kind::exp3;
            else if (val == "solver-bench") cfg->kind = Kind::solver_bench;
            else if (val == "compress-bench") cfg->kind = Kind::compress_bench;
            else bad("unknown experiment kind");
        } else if (k == "experiment.outdir") {
            cfg->outdir = val;
        } else if (k == "experiment.seed") {
            if (want_num()) cfg->seed = static_cast<std::uint64_t>(d);
        } else if (k == "grid.nx") { if (want_num()) cfg->nx = (int)d; }
        else if (k == "grid.ny") { if (want_num()) cfg->ny = (int)d; }
        else if (k == "grid.nz") { if (want_num()) cfg->nz = (int)d; }
        else if (k == "grid.Lx") { if (want_num()) cfg->Lx = d; }
        else if (k == "grid.Ly") { if (want_num()) cfg->Ly = d; }
        else if (k == "grid.Lz") { if (want_num()) cfg->Lz = d; }
        else if (k == "optics.psi") { if (want_num()) cfg->params.psi = d; }
        else if (k == "optics.b") { if (want_num()) cfg->params.b = d; }
        else if (k == "optics.lambda0") {
            if (want_num()) cfg->params.lambda0 = d;
        } else if (k == "optics.nu") { if (want_num()) cfg->params.nu = d; }
        else if (k == "optics.robin_A") {
            if (want_num()) cfg->params.robin_A = d;
        } else if (k == "optics.table") {
            cfg->table_path = val == "builtin" ? "" : val;
        } else if (k == "setup.ns_x") { if (want_num()) cfg->ns_x = (int)d; }
        else if (k == "setup.ns_y") { if (want_num()) cfg->ns_y = (int)d; }
        else if (k == "setup.n_det") { if (want_num()) cfg->n_det = (int)d; }
        else if (k == "setup.det_pitch") { if (want_num()) cfg->det_pitch = d; }
        else if (k == "setup.source_margin") {
            if (want_num()) cfg->source_margin = d;
        } else if (k == "setup.lambda_min") {
            if (want_num()) cfg->lambda_min = d;
        } else if (k == "setup.lambda_max") {
            if (want_num()) cfg->lambda_max = d;
        } else if (k == "setup.n_lambda") {
            if (want_num()) cfg->n_lambda = (int)d;
        } else if (k == "setup.snr_db") {
            if (val == "inf") cfg->snr_db = INFINITY;
            else if (want_num()) cfg->snr_db = d;
        } else if (k == "solver.arnoldi_steps") {
            if (want_num()) cfg->solver.arnoldi_steps = (int)d;
        } else if (k == "solver.deflation_dim") {
            if (want_num()) cfg->solver.deflation_dim = (int)d;
        } else if (k == "solver.restart") {
            if (want_num()) cfg->solver.restart = (int)d;
        } else if (k == "solver.tol") { if (want_num()) cfg->solver.tol = d; }
        else if (k == "solver.max_restarts") {
            if (want_num()) cfg->solver.max_restarts = (int)d;
        } else if (k == "solver.center_shifts") {
            if (want_num()) cfg->solver.center_shifts = d != 0;
        } else if (k == "solver.jacobi") {
            if (want_num()) cfg->solver.jacobi = d != 0;
        } else if (k == "solver.threads") {
            if (want_num()) cfg->solver.threads = (int)d;
        } else if (k == "compression.eps_d") { if (want_num()) cfg->eps_d = d; }
        else if (k == "compression.method") {
            cfg->method = val;
        } else if (k == "reconstruction.n_p_truth") {
            if (want_num()) cfg->n_p_truth = (int)d;
        } else if (k == "reconstruction.n_p") {
            if (want_num()) cfg->n_p = (int)d;
        } else if (k == "reconstruction.gamma") {
            if (want_num()) cfg->gamma = d;
        } else if (k == "reconstruction.tau_level") {
            if (want_num()) cfg->tau_level = d;
        } else if (k == "reconstruction.eps_H") {
            if (want_num()) cfg->eps_H = d;
        } else if (k == "reconstruction.max_outer") {
            if (want_num()) cfg->max_outer = (int)d;
        } else if (k == "reconstruction.max_inner") {
            if (want_num()) cfg->max_inner = (int)d;
        } else if (k == "reconstruction.nu0") { if (want_num()) cfg->nu0 = d; }
        else {
            bad("unknown key");
        }
    }
};

}  // namespace

ExperimentConfig parse_config(const std::string& path,
                              std::vector<std::string>& errors) {
    ExperimentConfig cfg;
    std::ifstream in(path);
    if (!in) {
        errors.push_back("cannot open config file: " + path);
        return cfg;
    }
    Setter setter{&cfg, &errors};
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[' && s.back() == ']') {
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(lineno) +
                             ": expected key = value");
            continue;
        }
        setter.set(section, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    return cfg;
}

std::vector<std::string> validate(const ExperimentConfig& cfg) {
    std::vector<std::string> errs;
    auto req = [&](bool ok, const std::string& msg) {
        if (!ok) errs.push_back(msg);
    };
    req(cfg.nx >= 2 && cfg.ny >= 2 && cfg.nz >= 2,
        "grid: vertex counts must be at least 2 in every direction");
    req(cfg.Lx > 0 && cfg.Ly > 0 && cfg.Lz > 0,
        "grid: extents must be positive");
    req(cfg.params.psi > 0 && cfg.params.nu > 0 && cfg.params.lambda0 > 0,
        "optics: psi, nu and lambda0 must be positive");
    req(cfg.params.robin_A > 0, "optics: robin_A must be positive");
    req(cfg.ns_x >= 1 && cfg.ns_y >= 1, "setup: need at least one source");
    req(cfg.n_det >= 1, "setup: need at least one detector per side");
    req(cfg.det_pitch > 0, "setup: detector pitch must be positive");
    req(cfg.source_margin > 0 && cfg.source_margin < 0.5,
        "setup: source_margin must be in (0, 0.5)");
    req(cfg.n_lambda >= 1, "setup: need at least one wavelength");
    req(cfg.lambda_min <= cfg.lambda_max,
        "setup: wavelength range must be increasing");
    req(cfg.snr_db > 0, "setup: snr_db must be positive");
    // detector pads must stay inside the slab footprint
    double reach_x = (0.5 - cfg.source_margin) * 2 * cfg.Lx +
                     0.5 * (cfg.n_det - 1) * cfg.det_pitch;
    double reach_y = (0.5 - cfg.source_margin) * 2 * cfg.Ly +
                     0.5 * (cfg.n_det - 1) * cfg.det_pitch;
    req(reach_x <= cfg.Lx && reach_y <= cfg.Ly,
        "setup: detector grid extends beyond the slab footprint");
    req(cfg.solver.arnoldi_steps >= 1, "solver: arnoldi_steps must be >= 1");
    req(cfg.solver.deflation_dim >= 0, "solver: deflation_dim must be >= 0");
    req(cfg.solver.restart > cfg.solver.deflation_dim,
        "solver: restart must exceed deflation_dim");
    req(cfg.solver.tol > 0, "solver: tol must be positive");
    req(cfg.solver.max_restarts >= 0, "solver: max_restarts must be >= 0");
    req(cfg.solver.threads >= 1, "solver: threads must be >= 1");
    req(cfg.eps_d > 0, "compression: eps_d must be positive");
    req(cfg.method == "randsvd" || cfg.method == "aca_partial",
        "compression: method must be randsvd or aca_partial");
    req(cfg.n_p_truth >= 1 && cfg.n_p >= 1,
        "reconstruction: basis counts must be >= 1");
    req(cfg.gamma > 1, "reconstruction: gamma must exceed 1");
    req(cfg.tau_level > 0 && cfg.tau_level < 1,
        "reconstruction: tau_level must be in (0, 1)");
    req(cfg.eps_H > 0, "reconstruction: eps_H must be positive");
    req(cfg.max_outer >= 1 && cfg.max_inner >= 1,
        "reconstruction: iteration limits must be >= 1");
    req(cfg.nu0 > 0, "reconstruction: nu0 must be positive");
    if (!cfg.table_path.empty()) {
        std::ifstream in(cfg.table_path);
        req(static_cast<bool>(in),
            "optics: cannot open table file " + cfg.table_path);
    }
    return errs;
}

std::string defaults_text() {
    ExperimentConfig c;
    std::ostringstream os;
    os.precision(12);
    os << "[experiment]\n"
       << "kind = " << kind_name(c.kind) << "\n"
       << "outdir = " << c.outdir << "\n"
       << "seed = " << c.seed << "\n\n"
       << "[grid]\n"
       << "nx = " << c.nx << "\nny = " << c.ny << "\nnz = " << c.nz << "\n"
       << "Lx = " << c.Lx << "\nLy = " << c.Ly << "\nLz = " << c.Lz << "\n\n"
       << "[optics]\n"
       << "psi = " << c.params.psi << "\n"
       << "b = " << c.params.b << "\n"
       << "lambda0 = " << c.params.lambda0 << "\n"
       << "nu = " << c.params.nu << "\n"
       << "robin_A = " << c.params.robin_A << "\n"
       << "table = builtin\n\n"
       << "[setup]\n"
       << "ns_x = " << c.ns_x << "\nns_y = " << c.ns_y << "\n"
       << "n_det = " << c.n_det << "\n"
       << "det_pitch = " << c.det_pitch << "\n"
       << "source_margin = " << c.source_margin << "\n"
       << "lambda_min = " << c.lambda_min << "\n"
       << "lambda_max = " << c.lambda_max << "\n"
       << "n_lambda = " << c.n_lambda << "\n"
       << "snr_db = " << c.snr_db << "\n\n"
       << "[solver]\n"
       << "arnoldi_steps = " << c.solver.arnoldi_steps << "\n"
       << "deflation_dim = " << c.solver.deflation_dim << "\n"
       << "restart = " << c.solver.restart << "\n"
       << "tol = " << c.solver.tol << "\n"
       << "max_restarts = " << c.solver.max_restarts << "\n"
       << "center_shifts = " << (c.solver.center_shifts ? 1 : 0) << "\n"
       << "jacobi = " << (c.solver.jacobi ? 1 : 0) << "\n"
       << "threads = " << c.solver.threads << "\n\n"
       << "[compression]\n"
       << "eps_d = " << c.eps_d << "\n"
       << "method = " << c.method << "\n\n"
       << "[reconstruction]\n"
       << "n_p_truth = " << c.n_p_truth << "\n"
       << "n_p = " << c.n_p << "\n"
       << "gamma = " << c.gamma << "\n"
       << "tau_level = " << c.tau_level << "\n"
       << "eps_H = " << c.eps_H << "\n"
       << "max_outer = " << c.max_outer << "\n"
       << "max_inner = " << c.max_inner << "\n"
       << "nu0 = " << c.nu0 << "\n";
    return os.str();
}

void apply_env_overrides(ExperimentConfig& cfg) {
    cfg.solver.threads = util::env_threads(cfg.solver.threads);
    if (const char* o = std::getenv("HYDOT_OUTDIR"))
        if (*o) cfg.outdir = o;
}

}  // namespace config
}  // namespace hydot
