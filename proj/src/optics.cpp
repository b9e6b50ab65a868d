#include "hydot/optics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hydot {
namespace optics {

double ChromophoreTable::extinction(size_t l, double lambda_nm) const {
    if (l >= curves.size()) throw std::out_of_range("extinction: bad species");
    const auto& w = wavelengths;
    if (w.empty() || lambda_nm < w.front() || lambda_nm > w.back())
        throw std::out_of_range("extinction: wavelength outside table support");
    auto it = std::upper_bound(w.begin(), w.end(), lambda_nm);
    if (it == w.end()) return curves[l].back();
    size_t hi = static_cast<size_t>(it - w.begin());
    if (hi == 0) return curves[l].front();
    size_t lo = hi - 1;
    double t = (lambda_nm - w[lo]) / (w[hi] - w[lo]);
    return (1 - t) * curves[l][lo] + t * curves[l][hi];
}

ChromophoreTable load_chromophore_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open chromophore table: " + path);
    ChromophoreTable t;
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("chromophore table: empty file");
    {
        std::istringstream hs(line);
        std::string tok;
        hs >> tok;  // wavelength column label
        while (hs >> tok) t.species.push_back(tok);
    }
    if (t.species.empty())
        throw std::runtime_error("chromophore table: no species in header");
    t.curves.resize(t.species.size());
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        double lam;
        if (!(ls >> lam)) continue;
        t.wavelengths.push_back(lam);
        for (size_t l = 0; l < t.species.size(); ++l) {
            double v;
            if (!(ls >> v))
                throw std::runtime_error("chromophore table: short row");
            if (v < 0)
                throw std::runtime_error("chromophore table: negative value");
            t.curves[l].push_back(v);
        }
    }
    for (size_t i = 1; i < t.wavelengths.size(); ++i)
        if (t.wavelengths[i] <= t.wavelengths[i - 1])
            throw std::runtime_error(
                "chromophore table: wavelengths not increasing");
    t.background.assign(t.species.size(), 0.0);
    t.anomaly.assign(t.species.size(), 0.0);
    return t;
}

void save_chromophore_table(const ChromophoreTable& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write chromophore table: " + path);
    out << "lambda_nm";
    for (const auto& s : t.species) out << " " << s;
    out << "\n";
    out.precision(10);
    for (size_t i = 0; i < t.wavelengths.size(); ++i) {
        out << t.wavelengths[i];
        for (size_t l = 0; l < t.species.size(); ++l) out << " " << t.curves[l][i];
        out << "\n";
    }
}

ChromophoreTable builtin_chromophore_table() {
    // Smooth synthetic extinction curves on [600,1000] nm, shaped after the
    // literature tabulations: HbR falls off with lambda, HbO2 rises, water
    // and lipid have long-wavelength peaks near 970 and 930 nm.  Curves are
    // scaled so that eps * c is in cm^-1 with the concentrations below
    // (HbO2/HbR in uM, water/lipid in %).
    ChromophoreTable t;
    t.species = {"HbO2", "HbR", "H2O", "lipid"};
    for (int lam = 600; lam <= 1000; lam += 10)
        t.wavelengths.push_back(static_cast<double>(lam));
    t.curves.resize(4);
    auto bump = [](double lam, double c, double w) {
        double d = (lam - c) / w;
        return std::exp(-0.5 * d * d);
    };
    for (double lam : t.wavelengths) {
        double s = (lam - 600.0) / 400.0;  // in [0,1]
        t.curves[0].push_back(1.0e-3 * (0.7 + 1.1 * s * s));
        t.curves[1].push_back(1.0e-3 * (3.2 - 2.4 * s + 0.5 * s * s));
        t.curves[2].push_back(2.0e-2 * (0.05 + 0.3 * s + 1.2 * bump(lam, 970, 45)));
        t.curves[3].push_back(1.0e-2 * (0.4 + 0.2 * s + 1.0 * bump(lam, 930, 35)));
    }
    t.background = {17.0, 7.0, 0.15, 0.6};
    t.anomaly = {25.0, 15.0, 0.25, 0.5};
    return t;
}

double diffusion_coefficient(double lambda_nm, const OpticalParams& p) {
    if (lambda_nm <= 0)
        throw std::invalid_argument("diffusion_coefficient: lambda <= 0");
    return p.nu * p.psi / 3.0 * std::pow(lambda_nm / p.lambda0, p.b);
}

double background_absorption(double lambda_nm, const ChromophoreTable& t) {
    double mu = 0.0;
    for (size_t l = 0; l < t.num_species(); ++l)
        mu += t.extinction(l, lambda_nm) * t.background[l];
    return mu;
}

std::pair<double, double> shifts(double lambda_nm, const ChromophoreTable& t,
                                 const OpticalParams& p) {
    double D = diffusion_coefficient(lambda_nm, p);
    double sigma = p.nu * background_absorption(lambda_nm, t) / D;
    double sigma_prime = 1.0 / (2.0 * p.robin_A * D);
    return {sigma, sigma_prime};
}

std::pair<double, std::vector<double>> center_shift_transform(
    const std::vector<double>& sigma_primes) {
    if (sigma_primes.empty())
        throw std::invalid_argument("center_shift_transform: empty list");
    double mean = std::accumulate(sigma_primes.begin(), sigma_primes.end(), 0.0) /
                  static_cast<double>(sigma_primes.size());
    std::vector<double> recentered(sigma_primes.size());
    for (size_t i = 0; i < sigma_primes.size(); ++i)
        recentered[i] = sigma_primes[i] - mean;
    return {mean, recentered};
}

}  // namespace optics
}  // namespace hydot
