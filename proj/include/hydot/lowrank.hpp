#ifndef HYDOT_LOWRANK_HPP
#define HYDOT_LOWRANK_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hydot/grid.hpp"

namespace hydot {
namespace lowrank {

enum class Method : std::int32_t {
    none = 0,
    randsvd = 1,
    aca_full = 2,
    aca_partial = 3,
    agglomerate = 4,
    recursive = 5,
    recompress = 6,
};

/// Rank-r factorization A ~= U V^T with the singular values folded into V.
struct LowRankFactor {
    Mat U;  // rows x r
    Mat V;  // cols x r
    double tol = 0.0;
    Method method = Method::none;
    bool flagged = false;  // adaptive loop hit full rank / pivots exhausted

    int rank() const { return static_cast<int>(U.cols()); }
    int rows() const { return static_cast<int>(U.rows()); }
    int cols() const { return static_cast<int>(V.rows()); }
    Mat dense() const { return U * V.transpose(); }
};

/// Flop accounting split by pipeline stage, plus an independent tally
/// accumulated inside the dense kernels themselves.
struct FlopLedger {
    double leaf = 0.0;
    double agglomeration = 0.0;
    double recompress = 0.0;
    double other = 0.0;
    double kernel_tally = 0.0;  // incremented per gemm/qr/svd call

    double category_total() const {
        return leaf + agglomeration + recompress + other;
    }
};

enum class FlopCategory { leaf, agglomeration, recompress, other };

/// Matrix-free operator: forward and adjoint matvec, plus optional blocked
/// variants used when many columns are applied at once.
struct LinOp {
    int rows = 0;
    int cols = 0;
    std::function<Vec(const Vec&)> mv;   // A x
    std::function<Vec(const Vec&)> rmv;  // A^T y
    std::function<Mat(const Mat&)> mm;   // A X (optional fast path)
    std::function<Mat(const Mat&)> rmm;  // A^T Y (optional fast path)
};

LinOp dense_op(const Mat& A);

/// Adaptive randomized SVD: range sampling with oversampling p, Gaussian
/// probe of k columns, candidate rank doubled until the probe accepts.
/// r0 warm-starts the candidate rank when a lower bound is known.
LowRankFactor randsvd(const LinOp& A, double eps, int p = 20, int kprobe = 10,
                      std::uint64_t seed = 0, FlopLedger* ledger = nullptr,
                      FlopCategory cat = FlopCategory::other, int r0 = 1);

/// Cross approximation with full pivoting.  rank >= 0 forces a fixed number
/// of steps; otherwise stops at ||R||_F <= eps ||A||_F (or at an exactly
/// reproduced block).
LowRankFactor aca_full(const Mat& A, double eps, int rank = -1);

/// Row/column accessor for partially pivoted cross approximation.
struct CrossAccessor {
    int rows = 0;
    int cols = 0;
    std::function<Vec(int)> row;  // A(i, :) as a column vector
    std::function<Vec(int)> col;  // A(:, j)
};

CrossAccessor dense_accessor(const Mat& A);

/// Partially pivoted cross approximation with the running Frobenius stopping
/// heuristic ||u_k|| ||v_k|| <= eps ||S_k||_F.
LowRankFactor aca_partial(const CrossAccessor& A, double eps,
                          FlopLedger* ledger = nullptr,
                          FlopCategory cat = FlopCategory::other);

/// Combine factors of two stacked row blocks: recompress [V1^T; V2^T] with
/// randsvd at eps, then fold the block-diagonal left factors in.  rank_hint
/// warm-starts the adaptive range finder (e.g. with a sibling's rank).
LowRankFactor agglomerate(const LowRankFactor& f1, const LowRankFactor& f2,
                          double eps, std::uint64_t seed = 0,
                          FlopLedger* ledger = nullptr, int rank_hint = -1);

/// Binary spatial partition of source indices by geometric bisection.
struct ClusterTree {
    struct Node {
        std::vector<int> idx;  // source indices in this cluster
        int left = -1, right = -1;
        Vec lo, hi;  // bounding box of the node
        bool is_leaf() const { return left < 0; }
    };
    std::vector<Node> nodes;
    int root = 0;

    int depth() const;                    // edges on the longest root-leaf path
    std::vector<int> leaf_order() const;  // source indices, left-to-right
};

/// positions: N_s x d matrix of source coordinates; lo/hi: initial box.
ClusterTree build_cluster_tree(const Mat& positions, const Vec& lo,
                               const Vec& hi);

/// Supplies the dense measurement rows of one source on demand.
struct BlockProvider {
    int rows_per_source = 0;
    int cols = 0;
    std::function<Mat(int)> block;  // rows_per_source x cols for source s
};

struct RecursiveOptions {
    Method leaf_method = Method::randsvd;  // randsvd or aca_partial
    std::uint64_t seed = 0;
};

struct RecursiveResult {
    LowRankFactor factor;       // rows ordered by the tree's leaf traversal
    std::vector<int> source_order;  // leaf traversal of source indices
    std::vector<int> row_perm;  // factor row i corresponds to H row row_perm[i]
    std::vector<int> node_rank;     // per tree node, -1 where unvisited
    std::vector<int> node_depth;    // per tree node
    FlopLedger ledger;
};

RecursiveResult recursive_lowrank(const ClusterTree& tree, double eps,
                                  const BlockProvider& provider,
                                  const RecursiveOptions& opts = {});

/// Per-node compression ratios delta = r_parent / (r_left + r_right) for all
/// internal nodes with both children compressed; paired with the node depth.
std::vector<std::pair<int, double>> compression_ratios(
    const ClusterTree& tree, const std::vector<int>& node_rank);

/// Leaf/agglomeration tolerance achieving a final relative error eps_d over a
/// depth-L tree: eps = eps_d / (2^{L/2} (L+1) sqrt(N_r)).
double tolerance_schedule(double eps_d, int L, int N_r);

/// Thin QR of both factors, SVD of the small core, truncation by rank (if
/// rank >= 0) or by the relative tail threshold eps.
LowRankFactor recompress(const LowRankFactor& f, double eps, int rank = -1,
                         FlopLedger* ledger = nullptr);

Vec lr_matvec(const LowRankFactor& f, const Vec& x);   // U (V^T x)
Vec lr_rmatvec(const LowRankFactor& f, const Vec& y);  // V (U^T y)

/// Binary persistence: header {M, N, r, eps_d, method, perm length} as
/// little-endian doubles/ints, then permutation, U row-major, V row-major.
void save_factor(const std::string& path, const LowRankFactor& f,
                 const std::vector<int>& row_perm);
LowRankFactor load_factor(const std::string& path, std::vector<int>* row_perm);

}  // namespace lowrank
}  // namespace hydot

#endif
