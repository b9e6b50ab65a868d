#include "hydot/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace hydot {
namespace lowrank {

namespace {

void charge(FlopLedger* ledger, FlopCategory cat, double flops) {
    if (!ledger) return;
    switch (cat) {
        case FlopCategory::leaf: ledger->leaf += flops; break;
        case FlopCategory::agglomeration: ledger->agglomeration += flops; break;
        case FlopCategory::recompress: ledger->recompress += flops; break;
        case FlopCategory::other: ledger->other += flops; break;
    }
}

// Dense kernels; each call also feeds the independent kernel tally.
Mat gemm(const Mat& A, const Mat& B, FlopLedger* ledger, FlopCategory cat) {
    double f = 2.0 * A.rows() * B.cols() * A.cols();
    if (ledger) ledger->kernel_tally += f;
    charge(ledger, cat, f);
    return A * B;
}

double svd_flops(int m, int n) {
    double mn = std::min(m, n), mx = std::max(m, n);
    return 14.0 * mx * mn * mn;
}

Eigen::BDCSVD<Mat> thin_svd(const Mat& A, FlopLedger* ledger,
                            FlopCategory cat) {
    double f = svd_flops(static_cast<int>(A.rows()), static_cast<int>(A.cols()));
    if (ledger) ledger->kernel_tally += f;
    charge(ledger, cat, f);
    return Eigen::BDCSVD<Mat>(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

double qr_flops(int m, int n) { return 2.0 * m * n * n; }

struct ThinSVD {
    Mat U;
    Vec s;
    Mat V;
};

// Thin SVD that routes strongly rectangular inputs through a QR of the long
// dimension first, so the bidiagonalization only ever sees a small square
// core.  Mathematically equivalent to a direct thin SVD.
ThinSVD fast_thin_svd(const Mat& A, FlopLedger* ledger, FlopCategory cat) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    ThinSVD out;
    if (n >= 2 * m && m > 0) {
        ThinSVD t = fast_thin_svd(A.transpose(), ledger, cat);
        out.U = std::move(t.V);
        out.s = std::move(t.s);
        out.V = std::move(t.U);
        return out;
    }
    if (m >= 2 * n && n > 0) {
        double f = 2.0 * qr_flops(m, n) + svd_flops(n, n);
        if (ledger) ledger->kernel_tally += f;
        charge(ledger, cat, f);
        Eigen::HouseholderQR<Mat> qr(A);
        Mat R = Mat(qr.matrixQR().topRows(n).triangularView<Eigen::Upper>());
        Eigen::BDCSVD<Mat> svd(R, Eigen::ComputeThinU | Eigen::ComputeThinV);
        Mat U = Mat::Zero(m, n);
        U.topRows(n) = svd.matrixU();
        U.applyOnTheLeft(qr.householderQ());
        out.U = std::move(U);
        out.s = svd.singularValues();
        out.V = svd.matrixV();
        return out;
    }
    Eigen::BDCSVD<Mat> svd = thin_svd(A, ledger, cat);
    out.U = svd.matrixU();
    out.s = svd.singularValues();
    out.V = svd.matrixV();
    return out;
}

Mat apply_mm(const LinOp& A, const Mat& X, bool adjoint, FlopLedger* ledger,
             FlopCategory cat) {
    double f = 2.0 * A.rows * A.cols * X.cols();
    if (ledger) ledger->kernel_tally += f;
    charge(ledger, cat, f);
    if (adjoint && A.rmm) return A.rmm(X);
    if (!adjoint && A.mm) return A.mm(X);
    int out = adjoint ? A.cols : A.rows;
    Mat Y(out, X.cols());
    for (int j = 0; j < X.cols(); ++j)
        Y.col(j) = adjoint ? A.rmv(X.col(j)) : A.mv(X.col(j));
    return Y;
}

}  // namespace

LinOp dense_op(const Mat& A) {
    LinOp op;
    op.rows = static_cast<int>(A.rows());
    op.cols = static_cast<int>(A.cols());
    op.mv = [&A](const Vec& x) { return Vec(A * x); };
    op.rmv = [&A](const Vec& y) { return Vec(A.transpose() * y); };
    op.mm = [&A](const Mat& X) { return Mat(A * X); };
    op.rmm = [&A](const Mat& Y) { return Mat(A.transpose() * Y); };
    return op;
}

CrossAccessor dense_accessor(const Mat& A) {
    CrossAccessor acc;
    acc.rows = static_cast<int>(A.rows());
    acc.cols = static_cast<int>(A.cols());
    acc.row = [&A](int i) { return Vec(A.row(i).transpose()); };
    acc.col = [&A](int j) { return Vec(A.col(j)); };
    return acc;
}

LowRankFactor randsvd(const LinOp& A, double eps, int p, int kprobe,
                      std::uint64_t seed, FlopLedger* ledger,
                      FlopCategory cat, int r0) {
    const int m = A.rows, n = A.cols;
    const int nmax = std::min(m, n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto gaussian = [&](int rows, int cols) {
        Mat G(rows, cols);
        for (int j = 0; j < cols; ++j)
            for (int i = 0; i < rows; ++i) G(i, j) = gauss(rng);
        return G;
    };

    LowRankFactor f;
    f.tol = eps;
    f.method = Method::randsvd;
    if (m == 0 || n == 0) {
        f.U = Mat::Zero(m, 0);
        f.V = Mat::Zero(n, 0);
        return f;
    }

    int r = std::clamp(r0, 1, nmax);
    Mat Q;
    double sigma_top = 0.0;
    while (true) {
        int rs = std::min(r + p, nmax);
        if (rs >= nmax && m <= n) {
            // the sample would span the entire row space, so sampling buys
            // nothing: take the canonical basis and truncate in the core SVD
            Q = Mat::Identity(m, m);
            break;
        }
        Mat Omega1 = gaussian(n, rs);
        Mat Y = apply_mm(A, Omega1, false, ledger, cat);
        ThinSVD svdY = fast_thin_svd(Y, ledger, cat);
        int qcols = std::min(r, static_cast<int>(svdY.U.cols()));
        Q = svdY.U.leftCols(qcols);
        sigma_top = svdY.s(0);

        Mat Omega2 = gaussian(n, kprobe);
        Mat P = apply_mm(A, Omega2, false, ledger, cat);
        Mat QtP = gemm(Q.transpose(), P, ledger, cat);
        double er = (P - gemm(Q, QtP, ledger, cat)).norm();
        if (er <= eps * sigma_top) break;
        if (r >= nmax) {
            f.flagged = true;  // never accepted; fall through at full rank
            break;
        }
        r = std::min(2 * r, nmax);
    }

    Mat B = apply_mm(A, Q, true, ledger, cat).transpose();  // Q^T A, r x n
    ThinSVD svdB = fast_thin_svd(B, ledger, cat);
    const Vec& s = svdB.s;
    double s1 = s.size() ? s(0) : 0.0;
    int keep = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s(i) > eps * s1 && s(i) > 0) keep = i + 1;
    f.U = gemm(Q, svdB.U.leftCols(keep), ledger, cat);
    f.V = svdB.V.leftCols(keep) * s.head(keep).asDiagonal();
    if (ledger) {
        double fl = 1.0 * n * keep;
        ledger->kernel_tally += fl;
        charge(ledger, cat, fl);
    }
    return f;
}

LowRankFactor aca_full(const Mat& A, double eps, int rank) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    const double anorm = A.norm();
    const int rmax = rank >= 0 ? std::min(rank, std::min(m, n))
                               : std::min(m, n);

    LowRankFactor f;
    f.tol = eps;
    f.method = Method::aca_full;
    Mat R = A;
    std::vector<Vec> us, vs;
    for (int k = 0; k < rmax; ++k) {
        if (rank < 0 && R.norm() <= eps * anorm) break;
        int istar = 0, jstar = 0;
        double piv = R.cwiseAbs().maxCoeff(&istar, &jstar);
        // an exactly reproduced block leaves only roundoff in the residual
        if (piv <= 50.0 * std::numeric_limits<double>::epsilon() * anorm) break;
        Vec u = R.col(jstar) / R(istar, jstar);
        Vec v = R.row(istar).transpose();
        R.noalias() -= u * v.transpose();
        us.push_back(u);
        vs.push_back(v);
    }
    int r = static_cast<int>(us.size());
    f.U = Mat(m, r);
    f.V = Mat(n, r);
    for (int k = 0; k < r; ++k) {
        f.U.col(k) = us[k];
        f.V.col(k) = vs[k];
    }
    return f;
}

LowRankFactor aca_partial(const CrossAccessor& A, double eps,
                          FlopLedger* ledger, FlopCategory cat) {
    const int m = A.rows, n = A.cols;
    LowRankFactor f;
    f.tol = eps;
    f.method = Method::aca_partial;

    std::vector<Vec> us, vs;
    std::vector<bool> row_used(m, false), col_used(n, false);
    double normS2 = 0.0;
    int i = 0;
    int rmax = std::min(m, n);
    const double tiny = 1e-300;

    while (static_cast<int>(us.size()) < rmax) {
        // residual row i
        Vec vt = A.row(i);
        for (size_t l = 0; l < us.size(); ++l) vt -= us[l](i) * vs[l];
        if (ledger) {
            double fl = 2.0 * n * static_cast<double>(us.size());
            ledger->kernel_tally += fl;
            charge(ledger, cat, fl);
        }
        int jstar = -1;
        double best = 0.0;
        for (int j = 0; j < n; ++j)
            if (!col_used[j] && std::abs(vt(j)) > best) {
                best = std::abs(vt(j));
                jstar = j;
            }
        row_used[i] = true;
        if (jstar < 0 || best <= tiny) {
            // zero residual row: move on; bail out once every row was tried
            int next = -1;
            for (int ii = 0; ii < m; ++ii)
                if (!row_used[ii]) { next = ii; break; }
            if (next < 0) {
                f.flagged = true;
                break;
            }
            i = next;
            continue;
        }
        double delta = vt(jstar);
        Vec u = A.col(jstar);
        for (size_t l = 0; l < us.size(); ++l) u -= vs[l](jstar) * us[l];
        u /= delta;
        if (ledger) {
            double fl = 2.0 * m * static_cast<double>(us.size());
            ledger->kernel_tally += fl;
            charge(ledger, cat, fl);
        }
        col_used[jstar] = true;

        double cross = 0.0;
        for (size_t l = 0; l < us.size(); ++l)
            cross += us[l].dot(u) * vs[l].dot(vt);
        normS2 += u.squaredNorm() * vt.squaredNorm() + 2.0 * cross;
        normS2 = std::max(normS2, 0.0);
        us.push_back(u);
        vs.push_back(vt);

        if (u.norm() * vt.norm() <= eps * std::sqrt(normS2)) break;

        // descend to the row of largest residual column magnitude
        int next = -1;
        best = -1.0;
        for (int ii = 0; ii < m; ++ii)
            if (!row_used[ii] && std::abs(u(ii)) > best) {
                best = std::abs(u(ii));
                next = ii;
            }
        if (next < 0) break;
        i = next;
    }

    int r = static_cast<int>(us.size());
    f.U = Mat(m, r);
    f.V = Mat(n, r);
    for (int k = 0; k < r; ++k) {
        f.U.col(k) = us[k];
        f.V.col(k) = vs[k];
    }
    return f;
}

LowRankFactor agglomerate(const LowRankFactor& f1, const LowRankFactor& f2,
                          double eps, std::uint64_t seed, FlopLedger* ledger,
                          int rank_hint) {
    if (f1.cols() != f2.cols())
        throw std::invalid_argument("agglomerate: column dimension mismatch");
    const int n = f1.cols();
    const int r1 = f1.rank(), r2 = f2.rank();
    const int m1 = f1.rows(), m2 = f2.rows();

    LowRankFactor out;
    out.tol = eps;
    out.method = Method::agglomerate;
    if (r1 + r2 == 0) {
        out.U = Mat::Zero(m1 + m2, 0);
        out.V = Mat::Zero(n, 0);
        return out;
    }

    Mat W(r1 + r2, n);  // stacked [V1^T; V2^T]
    W.topRows(r1) = f1.V.transpose();
    W.bottomRows(r2) = f2.V.transpose();
    // the combined numeric rank is at least roughly the larger child rank,
    // so warm-start the adaptive range finder there (or at the caller's hint)
    LowRankFactor inner = randsvd(dense_op(W), eps, 20, 10, seed, ledger,
                                  FlopCategory::agglomeration,
                                  std::max({r1, r2, rank_hint}));
    int rp = inner.rank();

    out.U = Mat::Zero(m1 + m2, rp);
    out.V = inner.V;
    if (rp > 0) {
        out.U.topRows(m1) =
            gemm(f1.U, inner.U.topRows(r1), ledger, FlopCategory::agglomeration);
        out.U.bottomRows(m2) = gemm(f2.U, inner.U.bottomRows(r2), ledger,
                                    FlopCategory::agglomeration);
    }
    out.flagged = f1.flagged || f2.flagged || inner.flagged;
    return out;
}

int ClusterTree::depth() const {
    std::function<int(int)> go = [&](int v) -> int {
        const Node& nd = nodes[v];
        if (nd.is_leaf()) return 0;
        return 1 + std::max(go(nd.left), go(nd.right));
    };
    return nodes.empty() ? 0 : go(root);
}

std::vector<int> ClusterTree::leaf_order() const {
    std::vector<int> order;
    std::function<void(int)> go = [&](int v) {
        const Node& nd = nodes[v];
        if (nd.is_leaf()) {
            order.insert(order.end(), nd.idx.begin(), nd.idx.end());
            return;
        }
        go(nd.left);
        go(nd.right);
    };
    if (!nodes.empty()) go(root);
    return order;
}

ClusterTree build_cluster_tree(const Mat& positions, const Vec& lo,
                               const Vec& hi) {
    const int d = static_cast<int>(positions.cols());
    if (positions.rows() < 1)
        throw std::invalid_argument("build_cluster_tree: no sources");
    if (lo.size() != d || hi.size() != d)
        throw std::invalid_argument("build_cluster_tree: box dimension");

    ClusterTree tree;
    std::function<int(std::vector<int>, Vec, Vec)> split =
        [&](std::vector<int> idx, Vec a, Vec b) -> int {
        int me = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[me].idx = idx;
        tree.nodes[me].lo = a;
        tree.nodes[me].hi = b;
        if (static_cast<int>(idx.size()) <= 2) return me;

        int jmax = 0;
        for (int j = 1; j < d; ++j)
            if (b[j] - a[j] > b[jmax] - a[jmax]) jmax = j;
        double gamma = 0.5 * (a[jmax] + b[jmax]);
        std::vector<int> t1, t2;
        for (int i : idx)
            (positions(i, jmax) <= gamma ? t1 : t2).push_back(i);
        Vec b1 = b, a2 = a;
        b1[jmax] = gamma;
        a2[jmax] = gamma;
        if (t1.empty() || t2.empty()) {
            // coincident or one-sided points: fall back to a median split so
            // the recursion always makes progress
            std::vector<int> sorted = idx;
            std::stable_sort(sorted.begin(), sorted.end(), [&](int x, int y) {
                return positions(x, jmax) < positions(y, jmax);
            });
            size_t half = sorted.size() / 2;
            t1.assign(sorted.begin(), sorted.begin() + half);
            t2.assign(sorted.begin() + half, sorted.end());
            b1 = b;
            a2 = a;
        }
        int l = split(std::move(t1), a, b1);
        int r = split(std::move(t2), a2, b);
        tree.nodes[me].left = l;
        tree.nodes[me].right = r;
        return me;
    };
    tree.root = split([&] {
        std::vector<int> all(positions.rows());
        for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        return all;
    }(), lo, hi);
    return tree;
}

namespace {

LowRankFactor leaf_compress(const Mat& block, double eps,
                            const RecursiveOptions& opts, std::uint64_t seed,
                            FlopLedger* ledger, int rank_hint) {
    if (opts.leaf_method == Method::aca_partial)
        return aca_partial(dense_accessor(block), eps, ledger,
                           FlopCategory::leaf);
    return randsvd(dense_op(block), eps, 20, 10, seed, ledger,
                   FlopCategory::leaf, std::max(1, rank_hint));
}

int node_hint(const std::map<int, int>& depth_hint, int depth) {
    auto it = depth_hint.find(depth);
    return it == depth_hint.end() ? -1 : it->second + 2;
}

}  // namespace

RecursiveResult recursive_lowrank(const ClusterTree& tree, double eps,
                                  const BlockProvider& provider,
                                  const RecursiveOptions& opts) {
    RecursiveResult res;
    res.node_rank.assign(tree.nodes.size(), -1);
    res.node_depth.assign(tree.nodes.size(), 0);

    // ranks are nearly uniform across siblings, so each leaf / node reuses
    // the rank of the previously finished one at the same depth as a warm
    // start for the adaptive range finder (traversal order is fixed, so
    // results stay deterministic)
    int leaf_hint = -1;
    std::map<int, int> depth_hint;

    std::function<LowRankFactor(int, int)> go = [&](int v,
                                                    int depth) -> LowRankFactor {
        const ClusterTree::Node& nd = tree.nodes[v];
        res.node_depth[v] = depth;
        LowRankFactor f;
        try {
            if (nd.is_leaf()) {
                std::vector<LowRankFactor> parts;
                for (int s : nd.idx) {
                    Mat blk = provider.block(s);
                    parts.push_back(leaf_compress(
                        blk, eps, opts,
                        opts.seed + 0x9e3779b97f4a7c15ULL * (s + 1),
                        &res.ledger, leaf_hint + 2));
                    leaf_hint = parts.back().rank();
                }
                if (parts.empty())
                    throw std::runtime_error("empty leaf cluster");
                f = parts[0];
                for (size_t i = 1; i < parts.size(); ++i)
                    f = agglomerate(f, parts[i], eps,
                                    opts.seed + 0x517cc1b727220a95ULL * (v + 1),
                                    &res.ledger, node_hint(depth_hint, depth));
            } else {
                LowRankFactor fl = go(nd.left, depth + 1);
                LowRankFactor fr = go(nd.right, depth + 1);
                f = agglomerate(fl, fr, eps,
                                opts.seed + 0x2545f4914f6cdd1dULL * (v + 1),
                                &res.ledger, node_hint(depth_hint, depth));
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("recursive_lowrank at node " +
                                     std::to_string(v) + ": " + e.what());
        }
        res.node_rank[v] = f.rank();
        depth_hint[depth] = f.rank();
        return f;
    };

    res.factor = go(tree.root, 0);
    res.factor.method = Method::recursive;
    res.factor.tol = eps;
    res.source_order = tree.leaf_order();
    res.row_perm.clear();
    for (int s : res.source_order)
        for (int q = 0; q < provider.rows_per_source; ++q)
            res.row_perm.push_back(s * provider.rows_per_source + q);
    return res;
}

std::vector<std::pair<int, double>> compression_ratios(
    const ClusterTree& tree, const std::vector<int>& node_rank) {
    std::vector<std::pair<int, double>> out;
    std::function<void(int, int)> go = [&](int v, int depth) {
        const ClusterTree::Node& nd = tree.nodes[v];
        if (nd.is_leaf()) return;
        int rl = node_rank[nd.left], rr = node_rank[nd.right];
        int rp = node_rank[v];
        if (rl >= 0 && rr >= 0 && rp >= 0 && rl + rr > 0)
            out.emplace_back(depth, static_cast<double>(rp) / (rl + rr));
        go(nd.left, depth + 1);
        go(nd.right, depth + 1);
    };
    if (!tree.nodes.empty()) go(tree.root, 0);
    return out;
}

double tolerance_schedule(double eps_d, int L, int N_r) {
    if (eps_d <= 0 || L < 0 || N_r < 1)
        throw std::invalid_argument("tolerance_schedule: bad arguments");
    return eps_d / (std::pow(2.0, 0.5 * L) * (L + 1) * std::sqrt(
                        static_cast<double>(N_r)));
}

LowRankFactor recompress(const LowRankFactor& f, double eps, int rank,
                         FlopLedger* ledger) {
    const int r = f.rank();
    LowRankFactor out;
    out.tol = eps;
    out.method = Method::recompress;
    out.flagged = f.flagged;
    if (r == 0) {
        out.U = Mat::Zero(f.rows(), 0);
        out.V = Mat::Zero(f.cols(), 0);
        return out;
    }
    if (ledger) {
        double fl = qr_flops(f.rows(), r) + qr_flops(f.cols(), r);
        ledger->kernel_tally += fl;
        charge(ledger, FlopCategory::recompress, fl);
    }
    Eigen::HouseholderQR<Mat> qru(f.U), qrv(f.V);
    Mat Ru = qru.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    Mat Rv = qrv.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    Mat core = gemm(Ru, Rv.transpose(), ledger, FlopCategory::recompress);
    Eigen::BDCSVD<Mat> svd = thin_svd(core, ledger, FlopCategory::recompress);
    const Vec& s = svd.singularValues();
    double s1 = s.size() ? s(0) : 0.0;
    int keep;
    if (rank >= 0) {
        keep = std::min(rank, static_cast<int>(s.size()));
    } else {
        keep = 0;
        for (int i = 0; i < s.size(); ++i)
            if (s(i) > eps * s1 && s(i) > 0) keep = i + 1;
    }
    Mat Qu = qru.householderQ() * Mat::Identity(f.rows(), r);
    Mat Qv = qrv.householderQ() * Mat::Identity(f.cols(), r);
    out.U = gemm(Qu, svd.matrixU().leftCols(keep), ledger,
                 FlopCategory::recompress);
    out.V = gemm(Qv,
                 Mat(svd.matrixV().leftCols(keep) * s.head(keep).asDiagonal()),
                 ledger, FlopCategory::recompress);
    return out;
}

Vec lr_matvec(const LowRankFactor& f, const Vec& x) {
    if (x.size() != f.cols())
        throw std::invalid_argument("lr_matvec: dimension mismatch");
    return f.U * (f.V.transpose() * x);
}

Vec lr_rmatvec(const LowRankFactor& f, const Vec& y) {
    if (y.size() != f.rows())
        throw std::invalid_argument("lr_rmatvec: dimension mismatch");
    return f.V * (f.U.transpose() * y);
}

void save_factor(const std::string& path, const LowRankFactor& f,
                 const std::vector<int>& row_perm) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write factor: " + path);
    auto wi64 = [&](std::int64_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    auto wf64 = [&](double v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    wi64(f.rows());
    wi64(f.cols());
    wi64(f.rank());
    wf64(f.tol);
    wi64(static_cast<std::int64_t>(f.method));
    wi64(static_cast<std::int64_t>(row_perm.size()));
    for (int p : row_perm) wi64(p);
    for (int i = 0; i < f.rows(); ++i)
        for (int j = 0; j < f.rank(); ++j) wf64(f.U(i, j));
    for (int i = 0; i < f.cols(); ++i)
        for (int j = 0; j < f.rank(); ++j) wf64(f.V(i, j));
}

LowRankFactor load_factor(const std::string& path, std::vector<int>* row_perm) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read factor: " + path);
    auto ri64 = [&]() {
        std::int64_t v;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        return v;
    };
    auto rf64 = [&]() {
        double v;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        return v;
    };
    LowRankFactor f;
    std::int64_t m = ri64(), n = ri64(), r = ri64();
    f.tol = rf64();
    f.method = static_cast<Method>(ri64());
    std::int64_t plen = ri64();
    if (!in || m < 0 || n < 0 || r < 0 || r > std::min(m, n) || plen < 0)
        throw std::runtime_error("corrupt factor file: " + path);
    std::vector<int> perm(plen);
    for (auto& p : perm) p = static_cast<int>(ri64());
    f.U = Mat(m, r);
    f.V = Mat(n, r);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < r; ++j) f.U(i, j) = rf64();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < r; ++j) f.V(i, j) = rf64();
    if (!in) throw std::runtime_error("truncated factor file: " + path);
    if (row_perm) *row_perm = std::move(perm);
    return f;
}

}  // namespace lowrank
}  // namespace hydot
