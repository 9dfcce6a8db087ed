#include "polcm/covariance.h"

#include <cmath>
#include <iostream>
#include <string>

namespace polcm {

WeightMatrix::WeightMatrix(const Graph &g)
    : m_(g.num_latent()), f_(Eigen::MatrixXd::Zero(g.size(), g.size())),
      support_(Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic>::Zero(g.size(), g.size())),
      edges_(g.edges()) {
    for (const auto &[p, c] : edges_) support_(p, c) = 1;
}

WeightMatrix::WeightMatrix(const Graph &g, const Eigen::MatrixXd &values) : WeightMatrix(g) {
    if (values.rows() != g.size() || values.cols() != g.size()) {
        throw SupportError("coefficient matrix has wrong dimensions");
    }
    for (int j = 0; j < size(); ++j) {
        for (int i = 0; i < size(); ++i) {
            if (values(j, i) != 0.0) set(j, i, values(j, i));
        }
    }
}

void WeightMatrix::set(NodeId parent, NodeId child, double value) {
    if (parent < 0 || child < 0 || parent >= size() || child >= size()) {
        throw SupportError("coefficient index out of range");
    }
    if (!support_(parent, child) && value != 0.0) {
        throw SupportError("no edge " + std::to_string(parent) + " -> " + std::to_string(child));
    }
    f_(parent, child) = value;
}

Eigen::VectorXd WeightMatrix::edge_values() const {
    Eigen::VectorXd v(num_edges());
    for (int k = 0; k < num_edges(); ++k) v(k) = f_(edges_[k].first, edges_[k].second);
    return v;
}

void WeightMatrix::set_edge_values(const Eigen::VectorXd &values) {
    if (values.size() != num_edges()) throw SupportError("edge value count mismatch");
    for (int k = 0; k < num_edges(); ++k) f_(edges_[k].first, edges_[k].second) = values(k);
}

bool WeightMatrix::same_support(const WeightMatrix &other) const {
    return m_ == other.m_ && edges_ == other.edges_;
}

NoiseSpec::NoiseSpec(Eigen::VectorXd w, int m) : omega(std::move(w)), num_latent(m) {
    if (m < 0 || m > omega.size()) throw std::invalid_argument("bad latent count for noise");
    for (int i = 0; i < omega.size(); ++i) {
        if (!(omega(i) > 0.0)) throw std::invalid_argument("noise variances must be positive");
    }
}

namespace {

CovModel split(Eigen::MatrixXd sigma, int m) {
    CovModel out;
    const int n = static_cast<int>(sigma.rows()) - m;
    out.sigma_l = sigma.topLeftCorner(m, m);
    out.sigma_x = sigma.bottomRightCorner(n, n);
    out.sigma_full = std::move(sigma);
    return out;
}

}  // namespace

CovModel covariance_full(const WeightMatrix &f, const NoiseSpec &omega) {
    const int d = f.size();
    if (omega.omega.size() != d) throw std::invalid_argument("noise dimension mismatch");
    const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd w = (ident - f.matrix()).partialPivLu().solve(ident);
    Eigen::MatrixXd sigma = w.transpose() * omega.omega.asDiagonal() * w;
    sigma = 0.5 * (sigma + sigma.transpose());
    return split(std::move(sigma), f.num_latent());
}

CovModel covariance_blocks_prop1(const WeightMatrix &f, const NoiseSpec &omega) {
    const int m = f.num_latent(), n = f.num_observed();
    if (m != n) {
        throw UnsupportedShape("block formula needs a square observed-to-latent block; use covariance_full");
    }
    const Eigen::MatrixXd a = f.A(), b = f.B(), c = f.C(), dd = f.D();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
    const auto &sv = svd.singularValues();
    const double cond = sv.size() ? sv(0) / sv(sv.size() - 1) : 0.0;
    if (sv.size() == 0 || !(sv(sv.size() - 1) > 0.0) || !std::isfinite(cond) || cond > 1e12) {
        throw UnsupportedShape("observed-to-latent block is singular; use covariance_full");
    }
    if (cond > 1e10) std::cerr << "warning: ill-conditioned block (cond " << cond << ")\n";
    const Eigen::MatrixXd il = Eigen::MatrixXd::Identity(m, m), ix = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd id_inv = (ix - dd).partialPivLu().solve(ix);
    const Eigen::MatrixXd mm = (il - a - b * id_inv * c).partialPivLu().solve(il);
    const Eigen::MatrixXd c_inv = c.partialPivLu().solve(ix);
    const Eigen::MatrixXd nn = ((il - a) * c_inv * (ix - dd) - b).partialPivLu().solve(il);
    const Eigen::MatrixXd ol = omega.omega_l().asDiagonal();
    const Eigen::MatrixXd ox = omega.omega_x().asDiagonal();

    CovModel out;
    out.sigma_l = mm.transpose() * ol * mm + nn.transpose() * ox * nn;
    const Eigen::MatrixXd inner = ox + b.transpose() * out.sigma_l * b + ox * nn * b + b.transpose() * nn.transpose() * ox;
    out.sigma_x = id_inv.transpose() * inner * id_inv;
    out.sigma_l = 0.5 * (out.sigma_l + out.sigma_l.transpose());
    out.sigma_x = 0.5 * (out.sigma_x + out.sigma_x.transpose());
    out.sigma_full.resize(0, 0);
    return out;
}

double trek_rule_sigma(const Graph &g, const WeightMatrix &f, const Eigen::VectorXd &node_variances, NodeId i,
                       NodeId j) {
    double total = 0.0;
    for (const Trek &t : enumerate_simple_treks(g, i, j)) {
        double term = node_variances(t.top);
        for (std::size_t k = 1; k < t.left.size(); ++k) term *= f(t.left[k - 1], t.left[k]);
        for (std::size_t k = 1; k < t.right.size(); ++k) term *= f(t.right[k - 1], t.right[k]);
        total += term;
    }
    return total;
}

std::optional<NoiseSpec> unit_variance_noise_solve(const Graph &g, const WeightMatrix &f) {
    const int d = g.size();
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd w(d);
    std::vector<NodeId> done;
    for (NodeId v : g.topological_order()) {
        const NodeSet &pa = g.parents(v);
        for (NodeId k : done) {
            double s = 0.0;
            for (NodeId p : pa) s += f(p, v) * sigma(p, k);
            sigma(v, k) = sigma(k, v) = s;
        }
        double explained = 0.0;
        for (NodeId p : pa) {
            for (NodeId q : pa) explained += f(p, v) * sigma(p, q) * f(q, v);
        }
        w(v) = 1.0 - explained;
        if (!(w(v) > 0.0)) return std::nullopt;
        sigma(v, v) = 1.0;
        done.push_back(v);
    }
    return NoiseSpec(w, g.num_latent());
}

std::pair<WeightMatrix, NoiseSpec> rescale_latents(const WeightMatrix &f, const NoiseSpec &omega,
                                                   const Eigen::VectorXd &lambda) {
    const int m = f.num_latent();
    if (lambda.size() != m) throw std::invalid_argument("lambda must have one entry per latent");
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(f.size());
    for (int i = 0; i < m; ++i) {
        if (lambda(i) == 0.0) throw std::invalid_argument("lambda entries must be nonzero");
        scale(i) = lambda(i);
    }
    WeightMatrix out = f;
    const Eigen::MatrixXd scaled = scale.cwiseInverse().asDiagonal() * f.matrix() * scale.asDiagonal();
    for (const auto &[p, c] : f.edges()) out.set(p, c, scaled(p, c));
    Eigen::VectorXd w = omega.omega;
    for (int i = 0; i < m; ++i) w(i) *= lambda(i) * lambda(i);
    return {out, NoiseSpec(w, omega.num_latent)};
}

std::pair<WeightMatrix, NoiseSpec> orthogonal_transform(const WeightMatrix &f, const NoiseSpec &omega,
                                                        const Eigen::MatrixXd &q) {
    const int m = f.num_latent(), d = f.size();
    if (q.rows() != m || q.cols() != m) throw std::invalid_argument("q must be m x m");
    if ((q.transpose() * q - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() > 1e-10) {
        throw std::invalid_argument("q is not orthogonal");
    }
    const Eigen::MatrixXd ol = omega.omega_l().asDiagonal();
    if (m > 0 && (q.transpose() * ol * q - ol).cwiseAbs().maxCoeff() > 1e-10) {
        throw std::invalid_argument("latent noise is not invariant under q");
    }
    Eigen::MatrixXd u = Eigen::MatrixXd::Identity(d, d);
    u.topLeftCorner(m, m) = q;
    const Eigen::MatrixXd t = u.transpose() * f.matrix() * u;
    WeightMatrix out = f;
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < d; ++i) {
            if (f.in_support(j, i)) {
                out.set(j, i, t(j, i));
            } else if (std::abs(t(j, i)) > 1e-12) {
                throw SupportError("rotation moves mass off the graph support");
            }
        }
    }
    return {out, omega};
}

WeightMatrix group_sign_flip(const WeightMatrix &f, const NodeSet &latents) {
    Eigen::VectorXd s = Eigen::VectorXd::Ones(f.size());
    for (NodeId v : latents) {
        if (v < 0 || v >= f.num_latent()) throw std::invalid_argument("sign flip applies to latent nodes only");
        s(v) = -1.0;
    }
    WeightMatrix out = f;
    for (const auto &[p, c] : f.edges()) out.set(p, c, s(p) * f(p, c) * s(c));
    return out;
}

WeightMatrix rescale_nodes(const WeightMatrix &f, const Eigen::VectorXd &sd) {
    WeightMatrix out = f;
    for (const auto &[p, c] : f.edges()) out.set(p, c, f(p, c) * sd(p) / sd(c));
    return out;
}

std::pair<WeightMatrix, NoiseSpec> standardize_model(const WeightMatrix &f, const NoiseSpec &omega) {
    const CovModel cov = covariance_full(f, omega);
    const Eigen::VectorXd var = cov.sigma_full.diagonal();
    const Eigen::VectorXd sd = var.cwiseSqrt();
    return {rescale_nodes(f, sd), NoiseSpec(omega.omega.cwiseQuotient(var), omega.num_latent)};
}

}  // namespace polcm
