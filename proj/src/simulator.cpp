#include "polcm/simulator.h"

#include <cmath>
#include <random>

namespace polcm {

namespace {

constexpr std::uint64_t kCoeffStream = 1;
constexpr std::uint64_t kNoiseVarStream = 2;
constexpr std::uint64_t kReferenceStream = 3;
constexpr std::uint64_t kNodeStreamBase = 0x1000;

}  // namespace

void SimConfig::validate() const {
    if (!(coeff_lo <= coeff_hi)) throw std::invalid_argument("coefficient range is empty");
    if (!(noise_lo <= noise_hi) || !(noise_lo > 0.0)) throw std::invalid_argument("noise variance range invalid");
    if (lrelu_alpha && !(*lrelu_alpha > 0.0 && *lrelu_alpha <= 1.0)) {
        throw std::invalid_argument("leaky-ReLU alpha must lie in (0, 1]");
    }
    if (k < 2) throw std::invalid_argument("sample size must be at least 2");
    if (min_abs_coeff < 0.0 || min_abs_coeff > std::max(std::abs(coeff_lo), std::abs(coeff_hi))) {
        throw std::invalid_argument("min_abs_coeff outside coefficient range");
    }
}

std::uint64_t splitmix64(std::uint64_t &state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (stream * 0xd1b54a32d192ed03ULL);
    splitmix64(s);
    return splitmix64(s);
}

std::pair<WeightMatrix, NoiseSpec> random_polcm(const Graph &g, const SimConfig &cfg) {
    cfg.validate();
    std::mt19937_64 coeff_rng(derive_seed(cfg.seed, kCoeffStream));
    std::uniform_real_distribution<double> coeff(cfg.coeff_lo, cfg.coeff_hi);
    WeightMatrix f(g);
    for (const auto &[p, c] : g.edges()) {
        double v = cfg.coeff_lo == cfg.coeff_hi ? cfg.coeff_lo : coeff(coeff_rng);
        while (std::abs(v) < cfg.min_abs_coeff) v = coeff(coeff_rng);
        f.set(p, c, v);
    }
    std::mt19937_64 noise_rng(derive_seed(cfg.seed, kNoiseVarStream));
    std::uniform_real_distribution<double> noise(cfg.noise_lo, cfg.noise_hi);
    Eigen::VectorXd w(g.size());
    for (int v = 0; v < g.size(); ++v) w(v) = cfg.noise_lo == cfg.noise_hi ? cfg.noise_lo : noise(noise_rng);
    return {f, NoiseSpec(w, g.num_latent())};
}

Eigen::MatrixXd simulate_all(const Graph &g, const WeightMatrix &f, const NoiseSpec &omega, const SimConfig &cfg) {
    cfg.validate();
    const int k = cfg.k;
    Eigen::MatrixXd x(k, g.size());
    for (NodeId v : g.topological_order()) {
        std::mt19937_64 rng(derive_seed(cfg.seed, kNodeStreamBase + static_cast<std::uint64_t>(v)));
        const double var = omega.omega(v);
        Eigen::VectorXd col(k);
        if (cfg.noise == NoiseKind::Gaussian) {
            std::normal_distribution<double> nd(0.0, std::sqrt(var));
            for (int r = 0; r < k; ++r) col(r) = nd(rng);
        } else {
            const double half = std::sqrt(3.0 * var);
            std::uniform_real_distribution<double> ud(-half, half);
            for (int r = 0; r < k; ++r) col(r) = ud(rng);
        }
        for (NodeId p : g.parents(v)) col += f(p, v) * x.col(p);
        if (cfg.lrelu_alpha) {
            const double a = *cfg.lrelu_alpha;
            col = col.unaryExpr([a](double t) { return std::max(a * t, t); });
        }
        x.col(v) = col;
    }
    return x;
}

Dataset simulate(const Graph &g, const WeightMatrix &f, const NoiseSpec &omega, const SimConfig &cfg) {
    const Eigen::MatrixXd all = simulate_all(g, f, omega, cfg);
    Dataset d;
    d.samples = all.rightCols(g.num_observed());
    d.names.assign(g.names().begin() + g.num_latent(), g.names().end());
    return d;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd &samples) {
    const auto k = samples.rows();
    if (k < 2) throw std::invalid_argument("need at least two samples");
    const Eigen::MatrixXd centered = samples.rowwise() - samples.colwise().mean();
    Eigen::MatrixXd s = (centered.transpose() * centered) / static_cast<double>(k);
    return 0.5 * (s + s.transpose());
}

Eigen::MatrixXd sample_covariance(const Dataset &d) { return sample_covariance(d.samples); }

Dataset standardize(const Dataset &d) {
    Dataset out = d;
    const auto k = d.samples.rows();
    if (k < 2) throw std::invalid_argument("need at least two samples");
    for (Eigen::Index j = 0; j < d.samples.cols(); ++j) {
        Eigen::VectorXd col = d.samples.col(j);
        col.array() -= col.mean();
        const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(k));
        if (!(sd > 1e-12 * (1.0 + d.samples.col(j).cwiseAbs().maxCoeff()))) {
            const std::string name = j < static_cast<Eigen::Index>(d.names.size()) ? d.names[j] : std::to_string(j);
            throw DegenerateColumn("column '" + name + "' is constant");
        }
        out.samples.col(j) = col / sd;
    }
    out.standardized = true;
    return out;
}

ReferenceStats reference_statistics(const Graph &g, const WeightMatrix &f, const NoiseSpec &omega,
                                    const SimConfig &cfg, int reference_k) {
    ReferenceStats out;
    if (!cfg.lrelu_alpha || *cfg.lrelu_alpha == 1.0) {
        out.sd = covariance_full(f, omega).sigma_full.diagonal().cwiseSqrt();
        out.mean_slope = Eigen::VectorXd::Ones(g.size());
        out.projection = rescale_nodes(f, out.sd);
        return out;
    }
    SimConfig ref = cfg;
    ref.k = reference_k;
    ref.seed = derive_seed(cfg.seed, kReferenceStream);
    const Eigen::MatrixXd all = simulate_all(g, f, omega, ref);
    out.sd = sample_covariance(all).diagonal().cwiseSqrt();
    // For alpha > 0 the output is positive exactly when the pre-activation is.
    const double a = *cfg.lrelu_alpha;
    out.mean_slope.resize(g.size());
    for (int v = 0; v < g.size(); ++v) {
        const double pos = (all.col(v).array() > 0.0).cast<double>().mean();
        out.mean_slope(v) = pos + a * (1.0 - pos);
    }
    const Eigen::MatrixXd s = sample_covariance(all);
    const Eigen::MatrixXd corr = out.sd.cwiseInverse().asDiagonal() * s * out.sd.cwiseInverse().asDiagonal();
    out.projection = WeightMatrix(g);
    for (NodeId c = 0; c < g.size(); ++c) {
        const NodeSet &pa = g.parents(c);
        if (pa.empty()) continue;
        const int k = static_cast<int>(pa.size());
        Eigen::MatrixXd spp(k, k);
        Eigen::VectorXd spc(k);
        for (int i = 0; i < k; ++i) {
            spc(i) = corr(pa[i], c);
            for (int j = 0; j < k; ++j) spp(i, j) = corr(pa[i], pa[j]);
        }
        const Eigen::VectorXd beta = spp.ldlt().solve(spc);
        for (int i = 0; i < k; ++i) out.projection.set(pa[i], c, beta(i));
    }
    return out;
}

Eigen::VectorXd node_standard_deviations(const Graph &g, const WeightMatrix &f, const NoiseSpec &omega,
                                         const SimConfig &cfg, int reference_k) {
    return reference_statistics(g, f, omega, cfg, reference_k).sd;
}

WeightMatrix effective_coefficients(const WeightMatrix &, const ReferenceStats &stats) { return stats.projection; }

}  // namespace polcm
