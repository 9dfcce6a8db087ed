#include "polcm/estimator.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <thread>

#include "polcm/simulator.h"

namespace polcm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kRestartStream = 0x5000;

// Unit-variance covariance over all nodes by recursion in topological order.
// The implied noise variances are returned as-is; a non-positive entry does not
// by itself make the observed covariance unusable.
void unit_sigma(const Graph &g, const Eigen::MatrixXd &f, Eigen::MatrixXd &sigma, Eigen::VectorXd &omega) {
    const int d = g.size();
    sigma.setZero(d, d);
    omega.resize(d);
    const auto &order = g.topological_order();
    for (int a = 0; a < d; ++a) {
        const NodeId v = order[a];
        const NodeSet &pa = g.parents(v);
        for (int b = 0; b < a; ++b) {
            const NodeId u = order[b];
            double s = 0.0;
            for (NodeId p : pa) s += f(p, v) * sigma(p, u);
            sigma(v, u) = sigma(u, v) = s;
        }
        double explained = 0.0;
        for (NodeId p : pa) {
            for (NodeId q : pa) explained += f(p, v) * sigma(p, q) * f(q, v);
        }
        omega(v) = 1.0 - explained;
        sigma(v, v) = 1.0;
    }
}

struct NllParts {
    double value;
    Eigen::MatrixXd grad;  // dL/dSigma_x
};

std::optional<NllParts> nll_with_grad(const Eigen::MatrixXd &s, const Eigen::MatrixXd &sh, double k, bool want_grad) {
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Eigen::MatrixXd l = llt.matrixL();
    double logdet = 0.0;
    for (int i = 0; i < l.rows(); ++i) {
        if (!(l(i, i) > 0.0)) return std::nullopt;
        logdet += 2.0 * std::log(l(i, i));
    }
    const Eigen::MatrixXd sinv_sh = llt.solve(sh);
    NllParts out{0.5 * k * (sinv_sh.trace() + logdet), {}};
    if (!std::isfinite(out.value)) return std::nullopt;
    if (want_grad) {
        const Eigen::MatrixXd sinv = llt.solve(Eigen::MatrixXd::Identity(s.rows(), s.cols()));
        Eigen::MatrixXd grad = 0.5 * k * (sinv - sinv_sh * sinv);
        out.grad = 0.5 * (grad + grad.transpose());
    }
    return out;
}

Eigen::MatrixXd inverse_i_minus(const Eigen::MatrixXd &f) {
    const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(f.rows(), f.cols());
    return (ident - f).partialPivLu().solve(ident);
}

}  // namespace

void EstimatorConfig::validate() const {
    if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (max_iters < 0) throw std::invalid_argument("max_iters must be non-negative");
    if (!(init_scale > 0.0)) throw std::invalid_argument("init_scale must be positive");
    if (lm_penalty_weight && !(*lm_penalty_weight > 0.0)) throw std::invalid_argument("lm_penalty_weight must be positive");
}

double nll(const Eigen::MatrixXd &sigma_model, const Eigen::MatrixXd &sigma_hat, double k) {
    if (sigma_model.rows() != sigma_hat.rows() || sigma_model.cols() != sigma_hat.cols()) {
        throw std::invalid_argument("nll: dimension mismatch");
    }
    const auto parts = nll_with_grad(sigma_model, sigma_hat, k, false);
    if (!parts) throw InvalidIterate("model covariance is not positive definite");
    return parts->value;
}

Objective::Objective(const Graph &g, Eigen::MatrixXd sigma_hat, double k, const EstimatorConfig &cfg)
    : g_(g), sigma_hat_(std::move(sigma_hat)), k_(k), method_(cfg.method), backend_(cfg.cov_backend),
      penalty_(cfg.lm_penalty_weight.value_or(100.0 * k)), num_edges_(g.num_edges()) {
    cfg.validate();
    const int n = g.num_observed();
    if (sigma_hat_.rows() != n || sigma_hat_.cols() != n) {
        throw std::invalid_argument("sample covariance must be n x n over observed nodes");
    }
    if (!(k > 0.0)) throw std::invalid_argument("sample count must be positive");
    dim_ = num_edges_ + (method_ == Method::LM ? g.size() : 0);
    if (method_ == Method::TR && backend_ == CovBackend::Trek) {
        std::vector<std::vector<int>> edge_id(g.size(), std::vector<int>(g.size(), -1));
        for (int e = 0; e < num_edges_; ++e) edge_id[g.edges()[e].first][g.edges()[e].second] = e;
        const int m = g.num_latent();
        monomials_.resize(static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                auto &list = monomials_[static_cast<std::size_t>(i) * n + j];
                for (const Trek &t : enumerate_simple_treks(g, m + i, m + j)) {
                    Monomial mono;
                    for (std::size_t a = 1; a < t.left.size(); ++a) mono.edges.push_back(edge_id[t.left[a - 1]][t.left[a]]);
                    for (std::size_t a = 1; a < t.right.size(); ++a) mono.edges.push_back(edge_id[t.right[a - 1]][t.right[a]]);
                    list.push_back(std::move(mono));
                }
            }
        }
    }
}

WeightMatrix Objective::weights(const Eigen::VectorXd &params) const {
    WeightMatrix w(g_);
    w.set_edge_values(params.head(num_edges_));
    return w;
}

NoiseSpec Objective::noise(const Eigen::VectorXd &params) const {
    NoiseSpec out;
    out.num_latent = g_.num_latent();
    if (method_ == Method::LM) {
        out.omega = params.tail(g_.size());
    } else {
        Eigen::MatrixXd sigma;
        unit_sigma(g_, weights(params).matrix(), sigma, out.omega);
    }
    return out;
}

Eigen::MatrixXd Objective::trek_sigma(const Eigen::VectorXd &coef) const {
    const int n = g_.num_observed();
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double total = 0.0;
            for (const auto &mono : monomials_[static_cast<std::size_t>(i) * n + j]) {
                double term = 1.0;
                for (int e : mono.edges) term *= coef(e);
                total += term;
            }
            s(i, j) = s(j, i) = total;
        }
    }
    return s;
}

std::optional<Eigen::MatrixXd> Objective::sigma_x(const Eigen::VectorXd &params) const {
    const int m = g_.num_latent(), n = g_.num_observed();
    const Eigen::MatrixXd f = weights(params).matrix();
    if (method_ == Method::LM) {
        const Eigen::VectorXd w = params.tail(g_.size());
        const Eigen::MatrixXd wi = inverse_i_minus(f);
        const Eigen::MatrixXd s = wi.transpose() * w.asDiagonal() * wi;
        return Eigen::MatrixXd(s.bottomRightCorner(n, n));
    }
    if (backend_ == CovBackend::Trek) return trek_sigma(params.head(num_edges_));
    Eigen::MatrixXd sigma;
    Eigen::VectorXd omega;
    unit_sigma(g_, f, sigma, omega);
    if (!sigma.allFinite()) return std::nullopt;
    (void)m;
    return Eigen::MatrixXd(sigma.bottomRightCorner(n, n));
}

double Objective::value(const Eigen::VectorXd &params) const {
    if (params.size() != dim_) throw std::invalid_argument("parameter dimension mismatch");
    if (!params.allFinite()) return kInf;
    const int m = g_.num_latent(), n = g_.num_observed();
    if (method_ == Method::LM) {
        const Eigen::MatrixXd f = weights(params).matrix();
        const Eigen::VectorXd w = params.tail(g_.size());
        if (!(w.array() > 0.0).all()) return kInf;
        const Eigen::MatrixXd wi = inverse_i_minus(f);
        const Eigen::MatrixXd s = wi.transpose() * w.asDiagonal() * wi;
        const auto parts = nll_with_grad(s.bottomRightCorner(n, n), sigma_hat_, k_, false);
        if (!parts) return kInf;
        double pen = 0.0;
        for (int i = 0; i < m; ++i) pen += (s(i, i) - 1.0) * (s(i, i) - 1.0);
        return parts->value + penalty_ * pen;
    }
    const auto sx = sigma_x(params);
    if (!sx) return kInf;
    const auto parts = nll_with_grad(*sx, sigma_hat_, k_, false);
    return parts ? parts->value : kInf;
}

Eigen::VectorXd Objective::analytic_matrix_tr(const Eigen::VectorXd &params) const {
    const int m = g_.num_latent(), n = g_.num_observed(), d = g_.size();
    const Eigen::MatrixXd f = weights(params).matrix();
    Eigen::MatrixXd sigma;
    Eigen::VectorXd omega;
    unit_sigma(g_, f, sigma, omega);
    const auto parts = nll_with_grad(sigma.bottomRightCorner(n, n), sigma_hat_, k_, true);
    if (!parts) throw InvalidIterate("model covariance is not positive definite");
    Eigen::MatrixXd gfull = Eigen::MatrixXd::Zero(d, d);
    gfull.bottomRightCorner(n, n) = parts->grad;
    const Eigen::MatrixXd w = inverse_i_minus(f);
    const Eigen::VectorXd g_omega = (w * gfull * w.transpose()).diagonal();
    // Multipliers for the unit-variance constraints.
    const Eigen::MatrixXd w2 = w.cwiseProduct(w);
    const Eigen::VectorXd lambda = w2.partialPivLu().solve(g_omega);
    const Eigen::MatrixXd gf = 2.0 * sigma * (gfull - Eigen::MatrixXd(lambda.asDiagonal())) * w.transpose();
    Eigen::VectorXd out(num_edges_);
    for (int e = 0; e < num_edges_; ++e) out(e) = gf(g_.edges()[e].first, g_.edges()[e].second);
    (void)m;
    return out;
}

Eigen::VectorXd Objective::analytic_trek_tr(const Eigen::VectorXd &params) const {
    const int n = g_.num_observed();
    const auto sx = sigma_x(params);
    if (!sx) throw InvalidIterate("infeasible unit-variance iterate");
    const auto parts = nll_with_grad(*sx, sigma_hat_, k_, true);
    if (!parts) throw InvalidIterate("model covariance is not positive definite");
    const Eigen::VectorXd coef = params.head(num_edges_);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(num_edges_);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double gij = 2.0 * parts->grad(i, j);
            if (gij == 0.0) continue;
            for (const auto &mono : monomials_[static_cast<std::size_t>(i) * n + j]) {
                for (std::size_t a = 0; a < mono.edges.size(); ++a) {
                    double rest = 1.0;
                    for (std::size_t b = 0; b < mono.edges.size(); ++b) {
                        if (b != a) rest *= coef(mono.edges[b]);
                    }
                    out(mono.edges[a]) += gij * rest;
                }
            }
        }
    }
    return out;
}

Eigen::VectorXd Objective::analytic_lm(const Eigen::VectorXd &params) const {
    const int m = g_.num_latent(), n = g_.num_observed(), d = g_.size();
    const Eigen::MatrixXd f = weights(params).matrix();
    const Eigen::VectorXd omega = params.tail(d);
    const Eigen::MatrixXd w = inverse_i_minus(f);
    const Eigen::MatrixXd s = w.transpose() * omega.asDiagonal() * w;
    const auto parts = nll_with_grad(s.bottomRightCorner(n, n), sigma_hat_, k_, true);
    if (!parts) throw InvalidIterate("model covariance is not positive definite");
    Eigen::MatrixXd gfull = Eigen::MatrixXd::Zero(d, d);
    gfull.bottomRightCorner(n, n) = parts->grad;
    for (int i = 0; i < m; ++i) gfull(i, i) += 2.0 * penalty_ * (s(i, i) - 1.0);
    const Eigen::MatrixXd gf = 2.0 * s * gfull * w.transpose();
    const Eigen::VectorXd gw = (w * gfull * w.transpose()).diagonal();
    Eigen::VectorXd out(dim_);
    for (int e = 0; e < num_edges_; ++e) out(e) = gf(g_.edges()[e].first, g_.edges()[e].second);
    out.tail(d) = gw;
    return out;
}

Eigen::VectorXd Objective::gradient(const Eigen::VectorXd &params, GradientBackend backend) const {
    if (params.size() != dim_) throw std::invalid_argument("parameter dimension mismatch");
    if (!std::isfinite(value(params))) throw InvalidIterate("objective is infinite at this point");
    if (backend == GradientBackend::FiniteDifference) {
        return finite_difference_gradient([this](const Eigen::VectorXd &p) { return value(p); }, params);
    }
    if (method_ == Method::LM) return analytic_lm(params);
    return backend_ == CovBackend::Trek ? analytic_trek_tr(params) : analytic_matrix_tr(params);
}

Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd &)> &fn,
                                           const Eigen::VectorXd &params) {
    Eigen::VectorXd out(params.size());
    Eigen::VectorXd p = params;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(params(i)));
        p(i) = params(i) + h;
        const double up = fn(p);
        p(i) = params(i) - h;
        const double down = fn(p);
        p(i) = params(i);
        if (!std::isfinite(up) || !std::isfinite(down)) throw InvalidIterate("finite difference left the feasible region");
        out(i) = (up - down) / (2.0 * h);
    }
    return out;
}

std::vector<Eigen::VectorXd> restart_schedule(const Graph &g, const EstimatorConfig &cfg) {
    cfg.validate();
    std::vector<Eigen::VectorXd> out;
    out.reserve(cfg.restarts);
    for (int r = 0; r < cfg.restarts; ++r) {
        std::mt19937_64 rng(derive_seed(cfg.seed, kRestartStream + static_cast<std::uint64_t>(r)));
        std::uniform_real_distribution<double> u(-cfg.init_scale, cfg.init_scale);
        Eigen::VectorXd x(g.num_edges());
        for (int e = 0; e < g.num_edges(); ++e) x(e) = u(rng);
        out.push_back(std::move(x));
    }
    return out;
}

int default_thread_count() {
    if (const char *env = std::getenv("POLCM_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct RunOutcome {
    Eigen::VectorXd x;
    double objective = kInf;
    int iterations = 0;
    bool converged = false;
    std::string message;
};

RunOutcome run_adam(const Objective &obj, Eigen::VectorXd x0, const EstimatorConfig &cfg, double k) {
    RunOutcome out;
    const int ne = obj.graph().num_edges();
    Eigen::VectorXd x(obj.dim());
    x.head(ne) = x0;
    if (obj.method() == Method::LM) x.tail(obj.dim() - ne).setOnes();
    double fx = obj.value(x);
    for (int shrink = 0; shrink < 60 && !std::isfinite(fx); ++shrink) {
        x.head(ne) *= 0.5;
        fx = obj.value(x);
    }
    if (!std::isfinite(fx)) {
        out.message = "no feasible starting point";
        return out;
    }
    fx /= k;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    Eigen::VectorXd mom = Eigen::VectorXd::Zero(x.size()), vel = Eigen::VectorXd::Zero(x.size());
    double eta = cfg.learning_rate;
    double window_start = fx;
    const int window = 200;
    int t = 0;  // Adam step count since the last moment reset
    int it = 0;
    for (; it < cfg.max_iters; ++it) {
        Eigen::VectorXd grad = obj.gradient(x, cfg.gradient) / k;
        if (grad.cwiseAbs().maxCoeff() < cfg.grad_tol) {
            out.converged = true;
            break;
        }
        ++t;
        mom = b1 * mom + (1.0 - b1) * grad;
        vel = b2 * vel + (1.0 - b2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
        const Eigen::VectorXd step = (mom / c1).array() / ((vel / c2).array().sqrt() + eps);
        bool accepted = false;
        for (int tries = 0; tries < 40; ++tries) {
            const Eigen::VectorXd xn = x - eta * step;
            const double fn = obj.value(xn) / k;
            if (std::isfinite(fn) && fn < fx) {
                x = xn;
                fx = fn;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        eta = std::min(cfg.learning_rate, eta * 1.1);
        if (!accepted) {
            // Stale momentum can point into the feasibility boundary. A fresh
            // start steps along the gradient signs, which always descends.
            if (t == 1) {
                out.converged = true;
                out.message = "no descent step";
                ++it;
                break;
            }
            mom.setZero();
            vel.setZero();
            t = 0;
            eta = cfg.learning_rate;
        }
        if ((it + 1) % window == 0) {
            if (window_start - fx <= 1e-12 * (1.0 + std::abs(fx))) {
                out.converged = true;
                out.message = "stalled";
                ++it;
                break;
            }
            window_start = fx;
        }
    }
    out.x = x;
    out.objective = fx * k;
    out.iterations = it;
    return out;
}

}  // namespace

EstimateResult estimate(const Graph &g, const Eigen::MatrixXd &sigma_hat, double k, const EstimatorConfig &cfg,
                        const std::vector<int> &order) {
    cfg.validate();
    const Objective obj(g, sigma_hat, k, cfg);
    const auto inits = restart_schedule(g, cfg);
    std::vector<int> run = order;
    if (run.empty()) {
        for (int r = 0; r < cfg.restarts; ++r) run.push_back(r);
    }
    for (int r : run) {
        if (r < 0 || r >= cfg.restarts) throw std::invalid_argument("restart index out of range");
    }
    std::vector<RunOutcome> outcomes(cfg.restarts);
    std::vector<char> ran(cfg.restarts, 0);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < run.size(); i = next++) {
            const int r = run[i];
            try {
                outcomes[r] = run_adam(obj, inits[r], cfg, k);
            } catch (const std::exception &e) {
                outcomes[r] = RunOutcome{};
                outcomes[r].message = e.what();
            }
            ran[r] = 1;
        }
    };
    const int threads = std::max(1, std::min<int>(cfg.threads > 0 ? cfg.threads : default_thread_count(),
                                                  static_cast<int>(run.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto &t : pool) t.join();
    }

    EstimateResult res;
    std::vector<RestartDiagnostics> diags;
    int best = -1;
    for (int r = 0; r < cfg.restarts; ++r) {
        if (!ran[r]) continue;
        const auto &o = outcomes[r];
        RestartDiagnostics d;
        d.restart_index = r;
        d.objective = o.objective;
        d.iterations = o.iterations;
        d.converged = o.converged;
        d.failed = !std::isfinite(o.objective);
        d.message = o.message;
        if (!d.failed) {
            const auto sx = obj.sigma_x(o.x);
            d.nll = sx ? nll(*sx, sigma_hat, k) : kInf;
            if (best < 0 || o.objective < outcomes[best].objective) best = r;
        } else {
            d.nll = kInf;
        }
        diags.push_back(d);
    }
    if (best < 0) throw EstimationFailed("every restart failed", diags);
    const auto &o = outcomes[best];
    res.f_hat = obj.weights(o.x);
    res.omega_hat = obj.noise(o.x);
    res.omega_valid = (res.omega_hat.omega.array() > 0.0).all();
    res.objective = o.objective;
    res.nll = nll(*obj.sigma_x(o.x), sigma_hat, k);
    res.restart_index = best;
    res.converged = o.converged;
    res.iterations = o.iterations;
    res.restarts = std::move(diags);
    return res;
}

}  // namespace polcm
