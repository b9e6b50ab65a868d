#ifndef HYDOT_KRYLOV_HPP
#define HYDOT_KRYLOV_HPP

#include <string>
#include <utility>
#include <vector>

#include "hydot/grid.hpp"

namespace hydot {
namespace krylov {

struct SolverConfig {
    int arnoldi_steps = 80;   // phase-1 basis size n
    int deflation_dim = 10;   // k harmonic Ritz vectors
    int restart = 50;         // m, augmented GMRES cycle length
    double tol = 1e-8;        // relative residual target
    int max_restarts = 40;
    bool center_shifts = true;
    bool jacobi = false;      // optional fixed diagonal right preconditioner
    bool explicit_qr_update = false;  // bypass the Gram/Cholesky basis update
    int threads = 1;
};

/// Arnoldi factorization K V_n = V_{n+1} Tbar_n with re-orthogonalized basis.
struct ArnoldiData {
    Mat V;         // N x (steps+1)
    Mat T;         // (steps+1) x steps, upper Hessenberg
    double beta = 0.0;
    int steps = 0;
    bool breakdown = false;  // exact invariant subspace found early
};

struct MultishiftResult {
    Mat X;                       // N x nshifts, initial solutions
    std::vector<double> relres;  // Arnoldi least-squares residuals
    ArnoldiData arnoldi;
};

/// Phase 1: one shift-invariant Arnoldi basis for Ks, per-shift least squares.
MultishiftResult multishift_gmres(const SpMat& Ks, const Vec& b,
                                  const std::vector<double>& sigmas, int n,
                                  double tol);

struct HarmonicRitz {
    Mat Z;        // n x k, eigenvector columns (real basis; complex pairs split)
    Vec theta;    // |theta| of the retained pairs, ascending
    bool pencil_shifted = false;  // singular T_n pencil fallback applied
};

/// Smallest harmonic Ritz pairs of the Arnoldi factorization:
/// Tbar^T Tbar z = theta T_n^T z.
HarmonicRitz harmonic_ritz(const ArnoldiData& a, int k);

/// Shift-invariant deflation pair K U = C, C^T C = I, plus the shift-
/// independent caches used by the per-shift Gram/Cholesky update.
struct DeflationBasis {
    Mat U, C;         // N x k
    Mat RU;           // R*U
    Mat UtC, CtRU, RUtU, UtU, RUtRU;  // k x k Gram blocks
    int k = 0;
    bool rank_reduced = false;  // trailing columns dropped from a singular Y

    int dim() const { return k; }
};

DeflationBasis build_deflation_basis(const SpMat& Ks, const SpMat& Rs,
                                     const ArnoldiData& a,
                                     const HarmonicRitz& hr);

/// Per-shift pair A_j U_j = C_j held implicitly: C_j = C'_j F^{-1} with
/// C'_j = C + sigma U + sigma' RU and F the Cholesky factor of C'_j^T C'_j.
class ShiftedDeflation {
  public:
    ShiftedDeflation() = default;  // empty (k = 0)
    ShiftedDeflation(const DeflationBasis& base, double sigma,
                     double sigma_prime, bool force_qr = false);

    int dim() const { return base_ ? base_->k : 0; }
    bool cholesky_failed() const { return cholesky_failed_; }

    Vec apply_Ct(const Vec& v) const;  // C_j^T v
    Vec apply_C(const Vec& w) const;   // C_j w
    Vec apply_U(const Vec& w) const;   // U_j w

    /// Dense C_j and U_j, for tests and diagnostics.
    Mat dense_C() const;
    Mat dense_U() const;

  private:
    const DeflationBasis* base_ = nullptr;
    double sigma_ = 0, sigma_prime_ = 0;
    Mat F_;           // k x k, C'^T C' = F^T F (upper triangular)
    Mat C_explicit_;  // QR fallback path
    Mat Uj_explicit_;
    bool explicit_ = false;
    bool cholesky_failed_ = false;
};

struct IterationStats {
    int iterations = 0;  // inner Arnoldi steps
    int matvecs = 0;
    double relres = 0.0;
    bool converged = false;
};

/// Shift-family operator bundle in lumped-mass-transformed variables.
struct TransformedFamily {
    SpMat Ks;  // M^{-1/2}(K + sbar' R)M^{-1/2}
    SpMat Rs;  // M^{-1/2} R M^{-1/2}
    Vec minv_sqrt;
    double sigma_bar_prime = 0.0;

    Vec apply(double sigma, double sigma_prime, const Vec& x) const {
        return Ks * x + sigma * x + sigma_prime * (Rs * x);
    }
};

TransformedFamily transform_family(const SpMat& K, const SpMat& M,
                                   const SpMat& R, double sigma_bar_prime);

/// Deflated, augmented GMRES for one shifted system (transformed space).
/// precond_diag, when given, right-preconditions every A_j by the same fixed
/// diagonal (Jacobi); the deflation relation is adjusted accordingly.
Vec augmented_gmres(const TransformedFamily& fam, double sigma,
                    double sigma_prime, const Vec& b,
                    const ShiftedDeflation& defl, const Vec& x0, int m,
                    double tol, int max_restarts, IterationStats& stats,
                    const Vec* precond_diag = nullptr);

struct FamilyResult {
    Mat X;  // N x nshifts, original variables
    std::vector<IterationStats> stats;
    int phase1_matvecs = 0;
    bool all_converged = true;
    int first_failure = -1;  // shift index of the first non-converged system
};

/// Full pipeline of the recycled solver for (K + sigma_j M + sigma'_j R) x = b.
FamilyResult solve_family(const SpMat& K, const SpMat& M, const SpMat& R,
                          const Vec& b,
                          const std::vector<std::pair<double, double>>& shifts,
                          const SolverConfig& cfg);

/// Telemetry CSV: wavelength_nm, sigma, sigma_prime, iters, matvecs,
/// final_relres (one row per system).
void write_telemetry(const std::string& path,
                     const std::vector<double>& wavelengths,
                     const std::vector<std::pair<double, double>>& shifts,
                     const FamilyResult& result);

}  // namespace krylov
}  // namespace hydot

#endif
