#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "test_util.h"

using namespace polcm;
using polcm::testing::load_fixture;
using polcm::testing::random_dag;

namespace {

double max_abs(const Eigen::MatrixXd &a) { return a.cwiseAbs().maxCoeff(); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Kolmogorov-Smirnov distance of a sample against N(0, var).
double ks_normal(Eigen::VectorXd x, double var) {
    std::sort(x.data(), x.data() + x.size());
    const double n = static_cast<double>(x.size()), sd = std::sqrt(var);
    double d = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double c = normal_cdf(x(i) / sd);
        d = std::max({d, (i + 1) / n - c, c - i / n});
    }
    return d;
}

}  // namespace

TEST(RandomPolcm, Deterministic) {
    const Graph g = load_fixture("gs/gs1.json");
    SimConfig cfg;
    cfg.seed = 99;
    const auto [f1, w1] = random_polcm(g, cfg);
    const auto [f2, w2] = random_polcm(g, cfg);
    EXPECT_EQ(f1.matrix(), f2.matrix());
    EXPECT_EQ(w1.omega, w2.omega);
    cfg.seed = 100;
    EXPECT_NE(random_polcm(g, cfg).first.matrix(), f1.matrix());
}

TEST(RandomPolcm, RangesAndSupport) {
    const Graph g = load_fixture("gs/gs2.json");
    SimConfig cfg;
    cfg.seed = 1;
    const auto [f, w] = random_polcm(g, cfg);
    for (int j = 0; j < g.size(); ++j) {
        for (int i = 0; i < g.size(); ++i) {
            if (g.has_edge(j, i)) {
                EXPECT_GE(f(j, i), -2.0);
                EXPECT_LE(f(j, i), 2.0);
            } else {
                EXPECT_EQ(f(j, i), 0.0);
            }
        }
    }
    EXPECT_GE(w.omega.minCoeff(), 1.0);
    EXPECT_LE(w.omega.maxCoeff(), 5.0);

    cfg.coeff_lo = cfg.coeff_hi = 1.0;
    const auto [f1, w1] = random_polcm(g, cfg);
    for (const auto &[p, c] : g.edges()) EXPECT_EQ(f1(p, c), 1.0);

    cfg.coeff_lo = -2.0;
    cfg.coeff_hi = 2.0;
    cfg.min_abs_coeff = 0.5;
    const auto [f2, w2] = random_polcm(g, cfg);
    for (const auto &[p, c] : g.edges()) EXPECT_GE(std::abs(f2(p, c)), 0.5);
}

TEST(RandomPolcm, CoefficientDistribution) {
    const Graph g(0, 2, {{0, 1}});
    SimConfig cfg;
    const int draws = 100000;
    double sum = 0.0, sq = 0.0, lo = 0.0, hi = 0.0;
    for (int s = 0; s < draws; ++s) {
        cfg.seed = static_cast<std::uint64_t>(s);
        const double v = random_polcm(g, cfg).first(0, 1);
        sum += v;
        sq += v * v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    // Uniform[-2, 2]: mean 0, variance 4/3.
    const double se = std::sqrt(4.0 / 3.0 / draws);
    EXPECT_LT(std::abs(sum / draws), 4.0 * se);
    EXPECT_NEAR(sq / draws, 4.0 / 3.0, 0.02);
    EXPECT_GE(lo, -2.0);
    EXPECT_LE(hi, 2.0);
    EXPECT_LT(lo, -1.99);
    EXPECT_GT(hi, 1.99);
}

TEST(SimConfigTest, Validation) {
    SimConfig cfg;
    cfg.lrelu_alpha = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.lrelu_alpha = 1.5;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.lrelu_alpha = 1.0;
    EXPECT_NO_THROW(cfg.validate());
    cfg.k = 1;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = SimConfig{};
    cfg.coeff_lo = 3.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = SimConfig{};
    cfg.noise_lo = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Simulate, AlphaOneMatchesLinear) {
    const Graph g = load_fixture("gs/gs1.json");
    SimConfig cfg;
    cfg.seed = 5;
    cfg.k = 2000;
    const auto [f, w] = random_polcm(g, cfg);
    const Dataset lin = simulate(g, f, w, cfg);
    cfg.lrelu_alpha = 1.0;
    const Dataset one = simulate(g, f, w, cfg);
    EXPECT_EQ(lin.samples, one.samples);
    EXPECT_EQ(lin.names.front(), "X4");
    EXPECT_EQ(static_cast<int>(lin.samples.cols()), g.num_observed());
}

TEST(Simulate, IndependentGaussianColumns) {
    const Graph g(0, 3, {});
    const NoiseSpec w(Eigen::Vector3d(1.0, 2.5, 4.0), 0);
    SimConfig cfg;
    cfg.k = 100000;
    cfg.seed = 8;
    const Dataset d = simulate(g, WeightMatrix(g), w, cfg);
    const Eigen::MatrixXd s = sample_covariance(d);
    const double crit = 1.36 / std::sqrt(static_cast<double>(cfg.k));
    for (int j = 0; j < 3; ++j) {
        const double var = w.omega(j);
        EXPECT_NEAR(s(j, j), var, 4.0 * var * std::sqrt(2.0 / cfg.k));
        EXPECT_LT(ks_normal(d.samples.col(j), var), crit);
        for (int i = j + 1; i < 3; ++i) {
            EXPECT_LT(std::abs(s(i, j)), 4.0 * std::sqrt(w.omega(i) * var / cfg.k));
        }
    }
}

TEST(Simulate, UniformNoiseVariance) {
    const Graph g(0, 1, {});
    const NoiseSpec w(Eigen::VectorXd::Constant(1, 3.0), 0);
    SimConfig cfg;
    cfg.noise = NoiseKind::Uniform;
    double prev = 1e9;
    for (int k : {1000, 100000, 1000000}) {
        cfg.k = k;
        cfg.seed = 4;
        const Dataset d = simulate(g, WeightMatrix(g), w, cfg);
        const double err = std::abs(sample_covariance(d)(0, 0) - 3.0);
        EXPECT_LE(d.samples.cwiseAbs().maxCoeff(), 3.0);
        // Uniform variance of the sample variance: 0.8 v^2 / K.
        EXPECT_LT(err, 4.0 * std::sqrt(0.8 * 9.0 / k));
        if (k == 1000000) EXPECT_LT(err, prev);
        prev = err;
    }
}

TEST(Simulate, LeakyReluIsPiecewiseLinear) {
    const Graph g(0, 2, {{0, 1}});
    WeightMatrix f(g);
    f.set(0, 1, 1.0);
    SimConfig cfg;
    cfg.k = 5000;
    cfg.lrelu_alpha = 0.3;
    const Dataset d = simulate(g, f, NoiseSpec(Eigen::Vector2d(1, 1), 0), cfg);
    // Root column is leaky-ReLU of a Gaussian: negative part shrunk.
    const Eigen::VectorXd x = d.samples.col(0);
    const double neg = (x.array() < 0).cast<double>().mean();
    EXPECT_NEAR(neg, 0.5, 0.03);
    EXPECT_GT(x.maxCoeff(), -x.minCoeff());
}

TEST(SampleCovariance, Examples) {
    Eigen::MatrixXd x(4, 2);
    x << 1, 1, 2, 2, 3, 3, 6, 6;
    const Eigen::MatrixXd s = sample_covariance(x);
    EXPECT_DOUBLE_EQ(s(0, 1), s(0, 0));
    EXPECT_THROW(sample_covariance(Eigen::MatrixXd(1, 2)), std::invalid_argument);
    Dataset d;
    d.samples = x;
    d.samples.col(1) = Eigen::Vector4d(0.5, -1, 2, 0.1);
    d.names = {"a", "b"};
    const Eigen::MatrixXd ss = sample_covariance(standardize(d));
    EXPECT_NEAR(ss(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(ss(1, 1), 1.0, 1e-12);
}

TEST(SampleCovariance, ConvergesAtRootKRate) {
    const Graph g = load_fixture("gs/gs1.json");
    SimConfig cfg;
    cfg.seed = 12;
    const auto [f, w] = random_polcm(g, cfg);
    const Eigen::MatrixXd pop = covariance_full(f, w).sigma_x;
    const Eigen::VectorXd var = pop.diagonal();
    std::vector<double> scaled;
    for (int k : {1000, 10000, 100000, 1000000}) {
        cfg.k = k;
        const Eigen::MatrixXd emp = sample_covariance(simulate(g, f, w, cfg));
        double worst = 0.0;
        for (int i = 0; i < pop.rows(); ++i) {
            for (int j = i; j < pop.cols(); ++j) {
                const double se = std::sqrt((var(i) * var(j) + pop(i, j) * pop(i, j)) / k);
                worst = std::max(worst, std::abs(emp(i, j) - pop(i, j)) / se);
                if (k == 1000000) EXPECT_LE(std::abs(emp(i, j) - pop(i, j)), 3.0 * se);
            }
        }
        scaled.push_back(worst);
    }
    // Errors in standard-error units stay bounded as K grows 1000-fold.
    for (double s : scaled) EXPECT_LT(s, 5.0);
}

TEST(Standardize, Examples) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(2.0, 3.0);
    Dataset d;
    d.samples.resize(500, 3);
    for (Eigen::Index i = 0; i < d.samples.size(); ++i) d.samples.data()[i] = nd(rng);
    d.names = {"a", "b", "c"};
    const Dataset s = standardize(d);
    EXPECT_TRUE(s.standardized);
    for (int j = 0; j < 3; ++j) {
        EXPECT_LT(std::abs(s.samples.col(j).mean()), 1e-8);
        EXPECT_NEAR(s.samples.col(j).squaredNorm() / 500.0, 1.0, 1e-6);
    }
    EXPECT_LT(max_abs(standardize(s).samples - s.samples), 1e-12);
    Dataset scaled = d;
    scaled.samples.col(1) *= 10.0;
    EXPECT_LT(max_abs(standardize(scaled).samples - s.samples), 1e-12);
    Dataset constant = d;
    constant.samples.col(2).setConstant(4.0);
    try {
        standardize(constant);
        FAIL() << "expected DegenerateColumn";
    } catch (const DegenerateColumn &e) {
        EXPECT_NE(std::string(e.what()).find("'c'"), std::string::npos);
    }
}

TEST(SimulatorProperty, NodeStreamsAreIndependentOfGraphSize) {
    // Adding a downstream node does not change the draws of existing nodes.
    const Graph small(1, 2, {{0, 1}, {0, 2}});
    const Graph big(1, 3, {{0, 1}, {0, 2}, {2, 3}});
    WeightMatrix fs(small), fb(big);
    for (const auto &[p, c] : small.edges()) {
        fs.set(p, c, 0.7);
        fb.set(p, c, 0.7);
    }
    fb.set(2, 3, -0.4);
    SimConfig cfg;
    cfg.k = 100;
    cfg.seed = 17;
    const Eigen::MatrixXd a = simulate_all(small, fs, NoiseSpec(Eigen::Vector3d(1, 2, 3), 1), cfg);
    const Eigen::MatrixXd b = simulate_all(big, fb, NoiseSpec(Eigen::Vector4d(1, 2, 3, 1), 1), cfg);
    EXPECT_EQ(a, b.leftCols(3));
}

TEST(SimulatorProperty, StandardizeIsIdempotentOnSimulatedData) {
    std::mt19937_64 rng(18);
    for (int trial = 0; trial < 20; ++trial) {
        const Graph g = random_dag(rng, 2, 6, 0.4);
        SimConfig cfg;
        cfg.k = 300;
        cfg.seed = trial;
        if (trial % 2) cfg.lrelu_alpha = 0.5;
        const auto [f, w] = random_polcm(g, cfg);
        const Dataset s = standardize(simulate(g, f, w, cfg));
        EXPECT_LT(max_abs(standardize(s).samples - s.samples), 1e-10);
    }
}

TEST(ReferenceStatistics, LinearIsExactAndSlopesAreOne) {
    const Graph g = load_fixture("gs/gs1.json");
    SimConfig cfg;
    cfg.seed = 2;
    const auto [f, w] = random_polcm(g, cfg);
    const ReferenceStats r = reference_statistics(g, f, w, cfg);
    EXPECT_LT(max_abs(r.sd - covariance_full(f, w).sigma_full.diagonal().cwiseSqrt()), 1e-12);
    EXPECT_EQ(r.mean_slope, Eigen::VectorXd::Ones(g.size()));
    // Linear effective coefficients equal the standardized model's.
    EXPECT_LT(max_abs(effective_coefficients(f, r).matrix() - standardize_model(f, w).first.matrix()), 1e-12);
}

TEST(ReferenceStatistics, LeakyReluTargetIsRegression) {
    // One edge X1 -> X2: the effective coefficient is the population
    // least-squares slope of standardized X2 on standardized X1, checked
    // against an independent draw.
    const Graph g(0, 2, {{0, 1}});
    WeightMatrix f(g);
    f.set(0, 1, 1.5);
    const NoiseSpec w(Eigen::Vector2d(2.0, 1.0), 0);
    SimConfig cfg;
    cfg.lrelu_alpha = 0.3;
    cfg.seed = 9;
    const ReferenceStats r = reference_statistics(g, f, w, cfg, 400000);
    EXPECT_GT(r.mean_slope(1), 0.3);
    EXPECT_LT(r.mean_slope(1), 1.0);
    cfg.k = 400000;
    cfg.seed = 10;
    const Eigen::MatrixXd c = sample_covariance(standardize(simulate(g, f, w, cfg)));
    EXPECT_NEAR(effective_coefficients(f, r)(0, 1), c(0, 1), 0.01);
    EXPECT_TRUE(effective_coefficients(f, r).same_support(f));
}
