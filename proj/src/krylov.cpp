#include "hydot/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "hydot/util.hpp"

namespace hydot {
namespace krylov {

namespace {

// Modified Gram-Schmidt step with one refinement pass.
void orthogonalize(const Mat& V, int ncols, Vec& w, Vec& h) {
    h = Vec::Zero(ncols);
    for (int pass = 0; pass < 2; ++pass)
        for (int j = 0; j < ncols; ++j) {
            double c = V.col(j).dot(w);
            w -= c * V.col(j);
            h[j] += c;
        }
}

// Least-squares residual and solution of min ||beta e1 - Tbar y||,
// Tbar of size (s+1) x s.
Vec hessenberg_ls(const Mat& Tbar, int s, double beta, double& resnorm) {
    Vec rhs = Vec::Zero(s + 1);
    rhs[0] = beta;
    Eigen::HouseholderQR<Mat> qr(Tbar.topLeftCorner(s + 1, s));
    Vec y = qr.solve(rhs);
    resnorm = (rhs - Tbar.topLeftCorner(s + 1, s) * y).norm();
    return y;
}

}  // namespace

MultishiftResult multishift_gmres(const SpMat& Ks, const Vec& b,
                                  const std::vector<double>& sigmas, int n,
                                  double tol) {
    const int N = static_cast<int>(b.size());
    const double bnorm = b.norm();
    if (bnorm == 0.0)
        throw std::invalid_argument("multishift_gmres: b must be nonzero");
    n = std::min(n, N);

    ArnoldiData a;
    a.V = Mat::Zero(N, n + 1);
    a.T = Mat::Zero(n + 1, n);
    a.beta = bnorm;
    a.V.col(0) = b / bnorm;

    const int nshift = static_cast<int>(sigmas.size());
    auto all_converged = [&](int s) {
        for (double sigma : sigmas) {
            Mat Ts = a.T.topLeftCorner(s + 1, s);
            for (int i = 0; i < s; ++i) Ts(i, i) += sigma;
            double resnorm;
            hessenberg_ls(Ts, s, bnorm, resnorm);
            if (resnorm / bnorm > tol) return false;
        }
        return true;
    };

    int steps = 0;
    for (int i = 0; i < n; ++i) {
        Vec w = Ks * a.V.col(i);
        Vec h;
        orthogonalize(a.V, i + 1, w, h);
        a.T.col(i).head(i + 1) = h;
        double hnext = w.norm();
        a.T(i + 1, i) = hnext;
        steps = i + 1;
        if (hnext <= 1e-14 * bnorm) {
            a.breakdown = true;  // invariant subspace; solutions are exact
            break;
        }
        a.V.col(i + 1) = w / hnext;
        if ((i + 1) % 10 == 0 && all_converged(i + 1)) break;
    }
    a.steps = steps;
    a.V.conservativeResize(N, steps + 1);
    a.T.conservativeResize(steps + 1, steps);

    MultishiftResult res;
    res.X = Mat::Zero(N, nshift);
    res.relres.resize(nshift);
    for (int j = 0; j < nshift; ++j) {
        Mat Ts = a.T;
        for (int i = 0; i < steps; ++i) Ts(i, i) += sigmas[j];
        double resnorm;
        Vec y = hessenberg_ls(Ts, steps, bnorm, resnorm);
        res.X.col(j) = a.V.leftCols(steps) * y;
        res.relres[j] = resnorm / bnorm;
    }
    res.arnoldi = std::move(a);
    return res;
}

HarmonicRitz harmonic_ritz(const ArnoldiData& a, int k) {
    const int n = a.steps;
    if (k > n) throw std::invalid_argument("harmonic_ritz: k > Arnoldi steps");
    Mat Tbar = a.T;                    // (n+1) x n
    Mat Tn = Tbar.topRows(n);          // n x n
    Mat A = Tbar.transpose() * Tbar;   // n x n
    Mat B = Tn.transpose();

    HarmonicRitz hr;
    Eigen::FullPivLU<Mat> lu(B);
    if (lu.rank() < n) {
        double shift = std::numeric_limits<double>::epsilon() * Tn.norm();
        B += shift * Mat::Identity(n, n);
        hr.pencil_shifted = true;
    }

    Eigen::GeneralizedEigenSolver<Mat> ges(A, B, true);
    Eigen::VectorXcd theta = ges.eigenvalues().cast<std::complex<double>>();
    Eigen::MatrixXcd Z = ges.eigenvectors();

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        return std::abs(theta[i]) < std::abs(theta[j]);
    });

    hr.Z = Mat::Zero(n, k);
    hr.theta = Vec::Zero(k);
    std::vector<bool> used(n, false);
    int col = 0;
    for (int idx : order) {
        if (col >= k) break;
        if (used[idx]) continue;
        used[idx] = true;
        Eigen::VectorXcd z = Z.col(idx);
        double imnorm = z.imag().norm();
        if (imnorm > 1e-12 * z.real().norm()) {
            // complex pair: keep real and imaginary parts, mark the conjugate
            hr.Z.col(col) = z.real();
            hr.theta[col] = std::abs(theta[idx]);
            ++col;
            for (int other : order)
                if (!used[other] &&
                    std::abs(theta[other] - std::conj(theta[idx])) <=
                        1e-10 * (1.0 + std::abs(theta[idx]))) {
                    used[other] = true;
                    break;
                }
            if (col < k) {
                hr.Z.col(col) = z.imag();
                hr.theta[col] = std::abs(theta[idx]);
                ++col;
            }
        } else {
            hr.Z.col(col) = z.real();
            hr.theta[col] = std::abs(theta[idx]);
            ++col;
        }
    }
    for (int c = 0; c < k; ++c) {
        double nrm = hr.Z.col(c).norm();
        if (nrm > 0) hr.Z.col(c) /= nrm;
    }
    return hr;
}

DeflationBasis build_deflation_basis(const SpMat& Ks, const SpMat& Rs,
                                     const ArnoldiData& a,
                                     const HarmonicRitz& hr) {
    const int n = a.steps;
    int k = static_cast<int>(hr.Z.cols());
    DeflationBasis basis;

    Mat Z = hr.Z;
    while (k > 0) {
        Mat Utilde = a.V.leftCols(n) * Z.leftCols(k);
        Mat Cp = a.V * (a.T * Z.leftCols(k));  // = Ks * Utilde exactly
        Eigen::HouseholderQR<Mat> qr(Cp);
        Mat Y = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
        double dmax = Y.diagonal().cwiseAbs().maxCoeff();
        bool ok = true;
        for (int i = 0; i < k; ++i)
            if (std::abs(Y(i, i)) < 1e-12 * dmax) ok = false;
        if (!ok) {
            --k;  // drop the worst-conditioned trailing direction
            basis.rank_reduced = true;
            continue;
        }
        Mat Q = qr.householderQ() * Mat::Identity(Utilde.rows(), k);
        basis.C = Q;
        basis.U = Y.transpose()
                      .triangularView<Eigen::Lower>()
                      .solve(Utilde.transpose())
                      .transpose();
        break;
    }
    basis.k = k;
    if (k == 0) return basis;

    basis.RU = Rs * basis.U;
    basis.UtC = basis.U.transpose() * basis.C;
    basis.CtRU = basis.C.transpose() * basis.RU;
    basis.RUtU = basis.RU.transpose() * basis.U;
    basis.UtU = basis.U.transpose() * basis.U;
    basis.RUtRU = basis.RU.transpose() * basis.RU;
    (void)Ks;
    return basis;
}

ShiftedDeflation::ShiftedDeflation(const DeflationBasis& base, double sigma,
                                   double sigma_prime, bool force_qr)
    : base_(&base), sigma_(sigma), sigma_prime_(sigma_prime) {
    const int k = base.k;
    if (k == 0) {
        base_ = nullptr;
        return;
    }
    if (!force_qr) {
        Mat gram = Mat::Identity(k, k);
        gram += sigma_ * (base.UtC + base.UtC.transpose());
        gram += sigma_prime_ * (base.CtRU + base.CtRU.transpose());
        gram += sigma_ * sigma_prime_ * (base.RUtU + base.RUtU.transpose());
        gram += sigma_ * sigma_ * base.UtU;
        gram += sigma_prime_ * sigma_prime_ * base.RUtRU;
        Eigen::LLT<Mat> llt(gram);
        if (llt.info() == Eigen::Success) {
            F_ = llt.matrixU();
            return;
        }
        cholesky_failed_ = true;
    }
    // explicit thin QR of C'_j
    explicit_ = true;
    Mat Cp = base.C + sigma_ * base.U + sigma_prime_ * base.RU;
    Eigen::HouseholderQR<Mat> qr(Cp);
    Mat Y = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    C_explicit_ = qr.householderQ() * Mat::Identity(Cp.rows(), k);
    Uj_explicit_ = Y.transpose()
                       .triangularView<Eigen::Lower>()
                       .solve(base.U.transpose())
                       .transpose();
}

Vec ShiftedDeflation::apply_Ct(const Vec& v) const {
    if (!base_) return Vec();
    if (explicit_) return C_explicit_.transpose() * v;
    Vec t = base_->C.transpose() * v + sigma_ * (base_->U.transpose() * v) +
            sigma_prime_ * (base_->RU.transpose() * v);
    return F_.transpose().triangularView<Eigen::Lower>().solve(t);
}

Vec ShiftedDeflation::apply_C(const Vec& w) const {
    if (!base_) return Vec();
    if (explicit_) return C_explicit_ * w;
    Vec s = F_.triangularView<Eigen::Upper>().solve(w);
    return base_->C * s + sigma_ * (base_->U * s) +
           sigma_prime_ * (base_->RU * s);
}

Vec ShiftedDeflation::apply_U(const Vec& w) const {
    if (!base_) return Vec();
    if (explicit_) return Uj_explicit_ * w;
    Vec s = F_.triangularView<Eigen::Upper>().solve(w);
    return base_->U * s;
}

Mat ShiftedDeflation::dense_C() const {
    int k = dim();
    Mat out(base_ ? base_->C.rows() : 0, k);
    for (int i = 0; i < k; ++i) out.col(i) = apply_C(Vec::Unit(k, i));
    return out;
}

Mat ShiftedDeflation::dense_U() const {
    int k = dim();
    Mat out(base_ ? base_->U.rows() : 0, k);
    for (int i = 0; i < k; ++i) out.col(i) = apply_U(Vec::Unit(k, i));
    return out;
}

TransformedFamily transform_family(const SpMat& K, const SpMat& M,
                                   const SpMat& R, double sigma_bar_prime) {
    const int N = static_cast<int>(K.rows());
    Vec d = M.diagonal();
    for (int i = 0; i < N; ++i)
        if (d[i] <= 0)
            throw std::invalid_argument(
                "transform_family: lumped mass diagonal must be positive");
    TransformedFamily fam;
    fam.minv_sqrt = d.cwiseSqrt().cwiseInverse();
    SpMat D(N, N);
    {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(N);
        for (int i = 0; i < N; ++i) trips.emplace_back(i, i, fam.minv_sqrt[i]);
        D.setFromTriplets(trips.begin(), trips.end());
    }
    SpMat Kc = K;
    if (sigma_bar_prime != 0.0) Kc = Kc + SpMat(sigma_bar_prime * R);
    fam.Ks = D * Kc * D;
    fam.Rs = D * R * D;
    fam.sigma_bar_prime = sigma_bar_prime;
    return fam;
}

Vec augmented_gmres(const TransformedFamily& fam, double sigma,
                    double sigma_prime, const Vec& b,
                    const ShiftedDeflation& defl, const Vec& x0, int m,
                    double tol, int max_restarts, IterationStats& stats,
                    const Vec* precond_diag) {
    const int N = static_cast<int>(b.size());
    const int k = defl.dim();
    const int inner = std::max(1, m - k);
    const double bnorm = b.norm();
    if (bnorm == 0.0)
        throw std::invalid_argument("augmented_gmres: b must be nonzero");

    Vec pinv;
    if (precond_diag) pinv = precond_diag->cwiseInverse();
    auto applyA = [&](const Vec& v) {
        ++stats.matvecs;
        return fam.apply(sigma, sigma_prime, v);
    };
    auto applyB = [&](const Vec& v) {
        return precond_diag ? applyA(pinv.cwiseProduct(v)) : applyA(v);
    };

    Vec x = x0;
    Vec r = b - applyA(x);
    // initial deflation x_{-1} = x0 + U_j C_j^T r; leaves r = (I - C C^T) r
    auto deflate = [&](Vec& xi, Vec& ri) {
        if (k == 0) return;
        Vec z = defl.apply_Ct(ri);
        xi += defl.apply_U(z);
        ri -= defl.apply_C(z);
    };
    deflate(x, r);
    stats.relres = r.norm() / bnorm;

    for (int cycle = 0; cycle <= max_restarts; ++cycle) {
        if (stats.relres <= tol) {
            stats.converged = true;
            break;
        }
        double beta = r.norm();
        Mat V = Mat::Zero(N, inner + 1);
        Mat Tbar = Mat::Zero(inner + 1, inner);
        Mat Fk = Mat::Zero(k, inner);
        V.col(0) = r / beta;

        int steps = 0;
        bool lucky = false;
        double lsres = beta;
        for (int i = 0; i < inner; ++i) {
            Vec w = applyB(V.col(i));
            if (k > 0) {
                Vec c = defl.apply_Ct(w);
                Fk.col(i) = c;
                w -= defl.apply_C(c);
            }
            Vec h;
            orthogonalize(V, i + 1, w, h);
            Tbar.col(i).head(i + 1) = h;
            double hnext = w.norm();
            Tbar(i + 1, i) = hnext;
            steps = i + 1;
            hessenberg_ls(Tbar, steps, beta, lsres);
            if (hnext <= 1e-14 * beta) {
                lucky = true;
                break;
            }
            V.col(i + 1) = w / hnext;
            if (lsres / bnorm <= tol) break;
        }
        stats.iterations += steps;

        double resnorm;
        Vec y2 = hessenberg_ls(Tbar, steps, beta, resnorm);
        Vec dx = V.leftCols(steps) * y2;
        if (precond_diag) dx = pinv.cwiseProduct(dx);
        if (k > 0) x += defl.apply_U(-(Fk.leftCols(steps) * y2));
        x += dx;

        r = b - applyA(x);
        stats.relres = r.norm() / bnorm;
        if (stats.relres <= tol || lucky) {
            stats.converged = stats.relres <= tol;
            break;
        }
        deflate(x, r);  // re-deflate before the next cycle
    }
    return x;
}

FamilyResult solve_family(const SpMat& K, const SpMat& M, const SpMat& R,
                          const Vec& b,
                          const std::vector<std::pair<double, double>>& shifts,
                          const SolverConfig& cfg) {
    const int nshift = static_cast<int>(shifts.size());
    if (nshift == 0) throw std::invalid_argument("solve_family: no shifts");

    std::vector<double> sigmas(nshift), sigma_primes(nshift);
    for (int j = 0; j < nshift; ++j) {
        sigmas[j] = shifts[j].first;
        sigma_primes[j] = shifts[j].second;
    }
    double sbar = 0.0;
    if (cfg.center_shifts) {
        sbar = std::accumulate(sigma_primes.begin(), sigma_primes.end(), 0.0) /
               nshift;
    }
    TransformedFamily fam = transform_family(K, M, R, sbar);
    Vec bs = fam.minv_sqrt.cwiseProduct(b);

    MultishiftResult phase1 =
        multishift_gmres(fam.Ks, bs, sigmas, cfg.arnoldi_steps, cfg.tol);

    DeflationBasis basis;
    if (cfg.deflation_dim > 0) {
        int k = std::min(cfg.deflation_dim, phase1.arnoldi.steps);
        HarmonicRitz hr = harmonic_ritz(phase1.arnoldi, k);
        basis = build_deflation_basis(fam.Ks, fam.Rs, phase1.arnoldi, hr);
    }

    Vec jacobi_diag;
    if (cfg.jacobi) {
        double ms = std::accumulate(sigmas.begin(), sigmas.end(), 0.0) / nshift;
        double msp = std::accumulate(sigma_primes.begin(), sigma_primes.end(),
                                     0.0) / nshift - sbar;
        jacobi_diag = Vec(fam.Ks.diagonal()) + ms * Vec::Ones(K.rows()) +
                      msp * Vec(fam.Rs.diagonal());
        jacobi_diag = jacobi_diag.cwiseAbs().cwiseMax(1e-300);
    }

    FamilyResult result;
    result.X = Mat::Zero(K.rows(), nshift);
    result.stats.resize(nshift);
    result.phase1_matvecs = phase1.arnoldi.steps;

    util::parallel_for(nshift, cfg.threads, [&](int j) {
        double sp = sigma_primes[j] - sbar;
        ShiftedDeflation defl;
        if (basis.k > 0)
            defl = ShiftedDeflation(basis, sigmas[j], sp, cfg.explicit_qr_update);
        Vec xs = augmented_gmres(fam, sigmas[j], sp, bs, defl,
                                 phase1.X.col(j), cfg.restart, cfg.tol,
                                 cfg.max_restarts, result.stats[j],
                                 cfg.jacobi ? &jacobi_diag : nullptr);
        result.X.col(j) = fam.minv_sqrt.cwiseProduct(xs);
    });

    for (int j = 0; j < nshift; ++j)
        if (!result.stats[j].converged) {
            result.all_converged = false;
            if (result.first_failure < 0) result.first_failure = j;
        }
    return result;
}

void write_telemetry(const std::string& path,
                     const std::vector<double>& wavelengths,
                     const std::vector<std::pair<double, double>>& shifts,
                     const FamilyResult& result) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write telemetry: " + path);
    out << "wavelength_nm,sigma,sigma_prime,iters,matvecs,final_relres\n";
    out.precision(12);
    for (size_t j = 0; j < shifts.size(); ++j) {
        double lam = j < wavelengths.size() ? wavelengths[j] : 0.0;
        IterationStats st =
            j < result.stats.size() ? result.stats[j] : IterationStats{};
        out << lam << "," << shifts[j].first << "," << shifts[j].second << ","
            << st.iterations << "," << st.matvecs << "," << st.relres << "\n";
    }
}

}  // namespace krylov
}  // namespace hydot
