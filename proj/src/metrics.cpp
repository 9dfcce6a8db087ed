#include "polcm/metrics.h"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "polcm/simulator.h"

namespace polcm {

namespace {

void check_pair(const WeightMatrix &a, const WeightMatrix &b) {
    if (a.size() != b.size() || a.num_latent() != b.num_latent()) {
        throw std::invalid_argument("coefficient matrices have different dimensions");
    }
}

double edge_count(const WeightMatrix &f) {
    if (f.num_edges() == 0) throw std::invalid_argument("graph has no edges");
    return static_cast<double>(f.num_edges());
}

// Sum of squared differences of magnitudes and its gradient w.r.t. the
// rotation block.
struct Problem {
    Eigen::MatrixXd abs_true;
    Eigen::MatrixXd hat;
    int m = 0;
    bool full = false;

    int qdim() const { return full ? static_cast<int>(hat.rows()) : m; }

    Eigen::MatrixXd apply(const Eigen::MatrixXd &q) const {
        if (full) return q * hat;
        Eigen::MatrixXd u = Eigen::MatrixXd::Identity(hat.rows(), hat.cols());
        u.topLeftCorner(m, m) = q;
        return u * hat * u.transpose();
    }

    double value(const Eigen::MatrixXd &q) const { return (abs_true - apply(q).cwiseAbs()).squaredNorm(); }

    Eigen::MatrixXd grad(const Eigen::MatrixXd &q) const {
        const Eigen::MatrixXd r = apply(q);
        const Eigen::MatrixXd sign = r.unaryExpr([](double v) { return double((v > 0) - (v < 0)); });
        const Eigen::MatrixXd h = -2.0 * (abs_true - r.cwiseAbs()).cwiseProduct(sign);
        if (full) return h * hat.transpose();
        Eigen::MatrixXd u = Eigen::MatrixXd::Identity(hat.rows(), hat.cols());
        u.topLeftCorner(m, m) = q;
        const Eigen::MatrixXd gu = h * u * hat.transpose() + h.transpose() * u * hat;
        return gu.topLeftCorner(m, m);
    }
};

Eigen::MatrixXd procrustes(const Eigen::MatrixXd &target_times_sourceT) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(target_times_sourceT, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

Eigen::MatrixXd nearest_orthogonal(const Eigen::MatrixXd &q) { return procrustes(q); }

Eigen::MatrixXd haar(int k, std::mt19937_64 &rng) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a(k, k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) a(i, j) = nd(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR();
    for (int j = 0; j < k; ++j) {
        if (r(j, j) < 0) q.col(j) *= -1.0;
    }
    return q;
}

// Riemannian descent with backtracking; never increases the objective.
std::pair<Eigen::MatrixXd, double> descend(const Problem &p, Eigen::MatrixXd q, int max_iters, int &iters) {
    double fq = p.value(q);
    double eta = 1.0;
    for (int it = 0; it < max_iters; ++it) {
        ++iters;
        const Eigen::MatrixXd a = q.transpose() * p.grad(q);
        const Eigen::MatrixXd skew = 0.5 * (a - a.transpose());
        if (skew.cwiseAbs().maxCoeff() < 1e-14) break;
        bool accepted = false;
        while (eta > 1e-16) {
            Eigen::MatrixXd cand = q * Eigen::MatrixXd(-eta * skew).exp();
            const double fc = p.value(cand);
            if (fc < fq) {
                const double gain = fq - fc;
                q = cand;
                fq = fc;
                accepted = true;
                eta *= 2.0;
                if (gain < 1e-15 * (1.0 + fq)) it = max_iters;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) break;
        if (it % 50 == 49) {
            const Eigen::MatrixXd cleaned = nearest_orthogonal(q);
            const double fc = p.value(cleaned);
            if (fc <= fq) {
                q = cleaned;
                fq = fc;
            }
        }
    }
    return {q, fq};
}

}  // namespace

double mse_group_sign(const WeightMatrix &f_true, const WeightMatrix &f_hat) {
    check_pair(f_true, f_hat);
    if (!f_true.same_support(f_hat)) throw std::invalid_argument("coefficient supports differ");
    return (f_true.matrix().cwiseAbs() - f_hat.matrix().cwiseAbs()).squaredNorm() / edge_count(f_true);
}

MetricResult mse_orthogonal(const WeightMatrix &f_true, const WeightMatrix &f_hat, const OrthogonalOptions &opts) {
    check_pair(f_true, f_hat);
    const double count = edge_count(f_true);
    Problem p;
    p.abs_true = f_true.matrix().cwiseAbs();
    p.hat = f_hat.matrix();
    p.m = f_true.num_latent();
    p.full = opts.full_q;
    const int k = p.qdim();
    MetricResult out;
    if (k == 0) {
        out.mse = p.value(Eigen::MatrixXd()) / count;
        return out;
    }

    std::vector<Eigen::MatrixXd> starts;
    starts.push_back(Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd t = f_true.matrix(), h = f_hat.matrix();
    for (bool absolute : {false, true}) {
        const Eigen::MatrixXd tt = absolute ? Eigen::MatrixXd(t.cwiseAbs()) : t;
        const Eigen::MatrixXd hh = absolute ? Eigen::MatrixXd(h.cwiseAbs()) : h;
        if (opts.full_q) {
            starts.push_back(procrustes(tt * hh.transpose()));
        } else {
            const int m = p.m, n = f_true.num_observed();
            // Latent rows rotate as Q * B_hat, latent columns as C_hat * Q^T.
            const Eigen::MatrixXd bt = tt.topRightCorner(m, n), bh = hh.topRightCorner(m, n);
            const Eigen::MatrixXd ct = tt.bottomLeftCorner(n, m), ch = hh.bottomLeftCorner(n, m);
            starts.push_back(procrustes(bt * bh.transpose() + ct.transpose() * ch));
        }
    }
    std::mt19937_64 rng(derive_seed(opts.seed, 0x0e7));
    for (int r = 0; r < opts.random_starts; ++r) starts.push_back(haar(k, rng));

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < starts.size(); ++r) {
        auto [q, val] = descend(p, starts[r], opts.max_iters, out.iterations);
        if (val < best) {
            best = val;
            out.q_star = q;
            out.best_restart = static_cast<int>(r);
        }
    }
    out.restarts = static_cast<int>(starts.size());
    out.mse = best / count;
    return out;
}

}  // namespace polcm
