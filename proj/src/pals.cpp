#include "hydot/pals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace hydot {
namespace pals {

Vec PaLSParams::to_vector() const {
    Vec v(num_params());
    int n = np();
    v.segment(0, n) = alpha;
    v.segment(n, n) = beta;
    v.segment(2 * n, n) = centers.col(0);
    v.segment(3 * n, n) = centers.col(1);
    v.segment(4 * n, n) = centers.col(2);
    return v;
}

PaLSParams PaLSParams::with_vector(const Vec& v) const {
    PaLSParams out = *this;
    int n = np();
    if (v.size() != 5 * n)
        throw std::invalid_argument("PaLSParams: parameter vector length");
    out.alpha = v.segment(0, n);
    out.beta = v.segment(n, n).cwiseMax(1e-8);  // widths stay positive
    out.centers.col(0) = v.segment(2 * n, n);
    out.centers.col(1) = v.segment(3 * n, n);
    out.centers.col(2) = v.segment(4 * n, n);
    return out;
}

double wendland(double t) {
    if (t >= 1.0) return 0.0;
    double s = 1.0 - t;
    double s2 = s * s;
    return s2 * s2 * (4.0 * t + 1.0);
}

double wendland_deriv(double t) {
    if (t >= 1.0) return 0.0;
    double s = 1.0 - t;
    return -20.0 * t * s * s * s;
}

double smooth_heaviside(double t, double eps) {
    if (t < -eps) return 0.0;
    if (t > eps) return 1.0;
    return 0.5 * (1.0 + t / eps + std::sin(M_PI * t / eps) / M_PI);
}

double smooth_delta(double t, double eps) {
    if (t < -eps || t > eps) return 0.0;
    return 0.5 / eps * (1.0 + std::cos(M_PI * t / eps));
}

namespace {

// smoothed distance ||r - chi||_* = sqrt(||r - chi||^2 + nu^2)
double star_norm(const Vec& r, const Mat& centers, int k, double nu) {
    double dx = r[0] - centers(k, 0);
    double dy = r[1] - centers(k, 1);
    double dz = r[2] - centers(k, 2);
    return std::sqrt(dx * dx + dy * dy + dz * dz + nu * nu);
}

}  // namespace

Vec level_set(const PaLSParams& p, const grid::Grid& g) {
    const int N = g.num_vertices();
    Vec phi = Vec::Zero(N);
    for (int n = 0; n < N; ++n) {
        Vec r = g.vertex(n);
        double v = 0.0;
        for (int k = 0; k < p.np(); ++k)
            v += p.alpha[k] * wendland(p.beta[k] *
                                       star_norm(r, p.centers, k, p.nu_norm));
        phi[n] = v;
    }
    return phi;
}

Vec shape(const PaLSParams& p, const grid::Grid& g) {
    Vec phi = level_set(p, g);
    Vec mu(phi.size());
    for (int n = 0; n < phi.size(); ++n)
        mu[n] = smooth_heaviside(phi[n] - p.tau_level, p.eps_H);
    return mu;
}

Mat shape_jacobian(const PaLSParams& p, const grid::Grid& g) {
    const int N = g.num_vertices();
    const int n_p = p.np();
    Mat J = Mat::Zero(N, 5 * n_p);
    Vec phi = level_set(p, g);
    for (int n = 0; n < N; ++n) {
        double d = smooth_delta(phi[n] - p.tau_level, p.eps_H);
        if (d == 0.0) continue;
        Vec r = g.vertex(n);
        for (int k = 0; k < n_p; ++k) {
            double nr = star_norm(r, p.centers, k, p.nu_norm);
            double t = p.beta[k] * nr;
            double psi = wendland(t);
            double dpsi = wendland_deriv(t);
            J(n, k) = d * psi;
            J(n, n_p + k) = d * p.alpha[k] * dpsi * nr;
            double fac = -d * p.alpha[k] * p.beta[k] * dpsi / nr;
            J(n, 2 * n_p + k) = fac * (r[0] - p.centers(k, 0));
            J(n, 3 * n_p + k) = fac * (r[1] - p.centers(k, 1));
            J(n, 4 * n_p + k) = fac * (r[2] - p.centers(k, 2));
        }
    }
    return J;
}

namespace {

// D(p) columns E_i H mu: per-measurement extinction scaling of one matvec.
Mat assemble_D(const Vec& hmu, const born::MeasurementSetup& setup) {
    const int nsp = static_cast<int>(setup.table.num_species());
    const int nl = setup.num_wavelengths();
    Mat D(hmu.size(), nsp);
    for (int i = 0; i < nsp; ++i) {
        Vec e(nl);
        for (int l = 0; l < nl; ++l)
            e[l] = setup.table.extinction(i, setup.wavelengths[l]);
        for (int m = 0; m < hmu.size(); ++m) D(m, i) = e[m % nl] * hmu[m];
    }
    return D;
}

}  // namespace

ConcentrationResult solve_concentrations(
    const std::function<Vec(const Vec&)>& Hmv, const Vec& mu,
    const Vec& w_diag, const Vec& y, const born::MeasurementSetup& setup) {
    const int nsp = static_cast<int>(setup.table.num_species());
    ConcentrationResult res;
    res.c.assign(nsp, 0.0);
    Vec hmu = Hmv(mu);
    Mat WD = w_diag.asDiagonal() * assemble_D(hmu, setup);
    Eigen::ColPivHouseholderQR<Mat> qr(WD);
    qr.setThreshold(1e-12);
    if (qr.rank() < nsp) {
        res.flagged = true;
        if (qr.rank() == 0) return res;  // empty anomaly: c = 0
    }
    Vec c = qr.solve(w_diag.cwiseProduct(y));
    for (int i = 0; i < nsp; ++i) res.c[i] = c[i];
    return res;
}

Vec lm_step(const Mat& J, const Vec& eps_residual, double nu_damp) {
    if (nu_damp < 0)
        throw std::invalid_argument("lm_step: damping must be nonnegative");
    const int M = static_cast<int>(J.rows());
    const int n = static_cast<int>(J.cols());
    Mat A(M + n, n);
    A.topRows(M) = J;
    A.bottomRows(n) = std::sqrt(nu_damp) * Mat::Identity(n, n);
    Vec rhs = Vec::Zero(M + n);
    rhs.head(M) = -eps_residual;
    return A.colPivHouseholderQr().solve(rhs);
}

namespace {

struct Objective {
    const Vec* y;
    const std::function<Vec(const Vec&)>* Hmv;
    const born::MeasurementSetup* setup;
    const grid::Grid* g;
    const Vec* w;

    Vec residual(const PaLSParams& p, const std::vector<double>& c,
                 Vec* hmu_out = nullptr) const {
        Vec mu = shape(p, *g);
        Vec hmu = (*Hmv)(mu);
        if (hmu_out) *hmu_out = hmu;
        Mat D = assemble_D(hmu, *setup);
        Vec cv = Eigen::Map<const Vec>(c.data(), c.size());
        return w->cwiseProduct(*y - D * cv);
    }
};

}  // namespace

ReconResult reconstruct(const Vec& y,
                        const std::function<Vec(const Vec&)>& Hmv,
                        const born::MeasurementSetup& setup, const grid::Grid& g,
                        const PaLSParams& init, const Vec& w_diag,
                        double noise_norm, const ReconConfig& cfg,
                        const Vec* mu_truth) {
    if (cfg.gamma <= 1.0)
        throw std::invalid_argument("reconstruct: gamma must exceed 1");
    ReconResult res;
    res.p = init;
    Objective obj{&y, &Hmv, &setup, &g, &w_diag};

    const int nl = setup.num_wavelengths();
    const double target = cfg.gamma * noise_norm;
    double nu = cfg.nu0;
    std::vector<double> outer_norms;

    auto dice_now = [&](const PaLSParams& p) {
        if (!mu_truth) return -1.0;
        return metrics(*mu_truth, shape(p, g)).dice;
    };

    for (int outer = 0; outer < cfg.max_outer; ++outer) {
        if (cfg.fixed_c.empty()) {
            ConcentrationResult conc =
                solve_concentrations(Hmv, shape(res.p, g), w_diag, y, setup);
            res.c = conc.c;
        } else {
            res.c = cfg.fixed_c;
        }
        Vec eps = obj.residual(res.p, res.c);
        res.resnorm = eps.norm();
        res.trace.push_back({outer, -1, res.resnorm, nu, true,
                             dice_now(res.p)});
        if (res.resnorm <= target) {
            res.converged = true;
            break;
        }
        outer_norms.push_back(res.resnorm);
        if (outer_norms.size() >= 4) {
            double past = outer_norms[outer_norms.size() - 4];
            if (std::abs(past - res.resnorm) <=
                cfg.stagnation_tol * std::max(past, 1e-300))
                break;
        }

        // per-measurement extinction mix Ebar(lambda_m)
        Vec ebar(nl);
        for (int l = 0; l < nl; ++l) {
            double e = 0.0;
            for (size_t i = 0; i < res.c.size(); ++i)
                e += res.c[i] * setup.table.extinction(i, setup.wavelengths[l]);
            ebar[l] = e;
        }

        bool stalled = false;
        for (int inner = 0; inner < cfg.max_inner; ++inner) {
            Mat dmudp = shape_jacobian(res.p, g);
            Mat J(y.size(), dmudp.cols());
            for (int j = 0; j < dmudp.cols(); ++j) {
                Vec hj = Hmv(dmudp.col(j));
                for (int m = 0; m < hj.size(); ++m)
                    J(m, j) = -w_diag[m] * ebar[m % nl] * hj[m];
            }

            bool accepted = false;
            double nu_try = nu;
            for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
                Vec dp = lm_step(J, eps, nu_try);
                PaLSParams p_try = res.p.with_vector(res.p.to_vector() + dp);
                Vec eps_try = obj.residual(p_try, res.c);
                double rn = eps_try.norm();
                res.trace.push_back({outer, inner, rn, nu_try,
                                     rn < res.resnorm, dice_now(p_try)});
                if (rn < res.resnorm) {
                    res.p = p_try;
                    eps = eps_try;
                    res.resnorm = rn;
                    nu = std::max(nu_try / 10.0, 1e-12);
                    accepted = true;
                    break;
                }
                nu_try *= 10.0;
            }
            if (!accepted) {
                stalled = true;
                break;
            }
            if (res.resnorm <= target) break;
        }
        if (res.resnorm <= target) {
            res.converged = true;
            res.trace.push_back({cfg.max_outer, -1, res.resnorm, nu, true,
                                 dice_now(res.p)});
            break;
        }
        if (stalled) {
            res.flagged = true;
            break;
        }
    }
    return res;
}

void write_trace(const std::string& path, const std::vector<TraceRow>& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace: " + path);
    out << "outer_iter,inner_iter,resnorm,nu,accepted,dice_vs_truth\n";
    out.precision(12);
    for (const auto& r : trace)
        out << r.outer << "," << r.inner << "," << r.resnorm << "," << r.nu
            << "," << (r.accepted ? 1 : 0) << "," << r.dice << "\n";
}

Metrics metrics(const Vec& mu_true, const Vec& mu_hat, double threshold) {
    if (mu_true.size() != mu_hat.size())
        throw std::invalid_argument("metrics: length mismatch");
    Metrics m;
    double tn = mu_true.norm();
    m.l2_rel = tn > 0 ? (mu_true - mu_hat).norm() / tn
                      : (mu_hat.norm() > 0 ? 1.0 : 0.0);
    long a = 0, b = 0, inter = 0;
    for (int i = 0; i < mu_true.size(); ++i) {
        bool ta = mu_true[i] > threshold;
        bool tb = mu_hat[i] > threshold;
        a += ta;
        b += tb;
        inter += ta && tb;
    }
    if (a + b == 0) {
        m.dice = 1.0;
        m.flagged = true;
    } else {
        m.dice = 2.0 * inter / static_cast<double>(a + b);
    }
    return m;
}

BoundReport perturbation_bounds(const Mat& H, const Mat& Hhat, const Vec& mu,
                                const Vec& y, const Mat& dmudp,
                                double nu_damp) {
    BoundReport r;
    auto norm2 = [](const Mat& A) {
        if (A.size() == 0) return 0.0;
        return Eigen::BDCSVD<Mat>(A).singularValues()(0);
    };
    Mat EH = H - Hhat;
    double Hn = norm2(H);
    r.eps_bar = Hn > 0 ? norm2(EH) / Hn : 0.0;

    Vec res_exact = y - H * mu;
    Vec res_hat = y - Hhat * mu;
    double f = res_exact.squaredNorm();
    double fhat = res_hat.squaredNorm();
    r.f_gap = std::abs(f - fhat);
    double first = 2.0 * r.eps_bar * res_hat.norm() * Hn * mu.norm();
    double second = r.eps_bar * Hn * mu.norm();
    r.f_bound = first + second * second;

    Vec grad = -dmudp.transpose() * (H.transpose() * res_exact);
    Vec grad_hat = -dmudp.transpose() * (Hhat.transpose() * res_hat);
    r.grad_gap = (grad - grad_hat).norm();
    r.grad_bound = r.eps_bar * norm2(dmudp) * Hn *
                   (mu.norm() * Hn + res_hat.norm());

    Mat J = -H * dmudp;
    Mat Jb = -Hhat * dmudp;
    Mat EJ = EH * dmudp;
    Vec dp = lm_step(J, res_exact, nu_damp);
    Vec dpb = lm_step(Jb, res_hat, nu_damp);
    r.dp_gap = (dp - dpb).norm();
    Vec sv = Eigen::BDCSVD<Mat>(J).singularValues();
    double s1 = sv(0);
    double sNp = sv(sv.size() - 1);
    double sstar = std::clamp(std::sqrt(std::max(nu_damp, 0.0)), sNp, s1);
    double eta = sstar / (nu_damp + sstar * sstar);
    r.dp_bound = (eta * dpb.norm() +
                  res_exact.norm() / (nu_damp + sNp * sNp)) *
                 norm2(EJ);

    double gn = grad.norm(), ghn = grad_hat.norm();
    r.cos_theta = (gn > 0 && ghn > 0) ? grad.dot(grad_hat) / (gn * ghn) : 1.0;
    r.tau_g = ghn > 0 ? r.grad_gap / ghn : 0.0;
    r.cos_bound = (1.0 - r.tau_g * r.tau_g) /
                  std::sqrt(1.0 + r.tau_g * r.tau_g);
    r.all_within = r.f_gap <= r.f_bound + 1e-12 &&
                   r.grad_gap <= r.grad_bound + 1e-12 &&
                   r.dp_gap <= r.dp_bound + 1e-12 &&
                   (r.tau_g >= 1.0 || r.cos_theta >= r.cos_bound - 1e-12);
    return r;
}

}  // namespace pals
}  // namespace hydot
