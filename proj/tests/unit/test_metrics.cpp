#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "polcm/metrics.h"
#include "test_util.h"

using namespace polcm;
using polcm::testing::load_fixture;
using polcm::testing::random_dag;
using polcm::testing::random_noise;
using polcm::testing::random_orthogonal;
using polcm::testing::random_weights;

namespace {

// Direct evaluation of the squared error of absolute values for a given
// change of latent coordinates (rows and columns of the latent block).
double oracle_loss(const WeightMatrix &t, const WeightMatrix &h, const Eigen::MatrixXd &q) {
    const int m = t.num_latent();
    Eigen::MatrixXd u = Eigen::MatrixXd::Identity(t.size(), t.size());
    u.topLeftCorner(m, m) = q;
    const Eigen::MatrixXd r = (u * h.matrix() * u.transpose()).cwiseAbs() - t.matrix().cwiseAbs();
    return r.squaredNorm() / t.num_edges();
}

}  // namespace

TEST(MseGroupSign, Examples) {
    const Graph e(0, 2, {{0, 1}});
    WeightMatrix a(e), b(e);
    a.set(0, 1, 0.5);
    b.set(0, 1, 0.4);
    EXPECT_NEAR(mse_group_sign(a, b), 0.01, 1e-15);
    EXPECT_EQ(mse_group_sign(a, a), 0.0);

    const Graph g = load_fixture("gs/gs1.json");
    std::mt19937_64 rng(61);
    const WeightMatrix f = random_weights(rng, g);
    EXPECT_EQ(mse_group_sign(f, group_sign_flip(f, {0, 2})), 0.0);
}

TEST(MseGroupSign, Errors) {
    const Graph a(0, 3, {{0, 1}});
    const Graph b(0, 3, {{1, 2}});
    EXPECT_THROW(mse_group_sign(WeightMatrix(a), WeightMatrix(b)), std::invalid_argument);
    const Graph c(0, 4, {{0, 1}});
    EXPECT_THROW(mse_group_sign(WeightMatrix(a), WeightMatrix(c)), std::invalid_argument);
}

TEST(MseGroupSign, CountsStructuralNonzeros) {
    const Graph g(0, 3, {{0, 1}, {1, 2}});
    WeightMatrix t(g), h(g);
    t.set(0, 1, 0.5);  // t(1, 2) stays exactly zero but still counts
    h.set(0, 1, 0.3);
    h.set(1, 2, 0.2);
    EXPECT_NEAR(mse_group_sign(t, h), (0.04 + 0.04) / 2.0, 1e-15);
}

TEST(MseGroupSignProperty, ExactFlipInvariance) {
    std::mt19937_64 rng(62);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 100; ++trial) {
        const Graph g = random_dag(rng, 3, 6, 0.4);
        if (g.num_edges() == 0) continue;
        const WeightMatrix t = random_weights(rng, g), h = random_weights(rng, g);
        NodeSet s1, s2;
        for (int l = 0; l < 3; ++l) {
            if (coin(rng)) s1.push_back(l);
            if (coin(rng)) s2.push_back(l);
        }
        const double base = mse_group_sign(t, h);
        ASSERT_EQ(mse_group_sign(group_sign_flip(t, s1), h), base);
        ASSERT_EQ(mse_group_sign(t, group_sign_flip(h, s2)), base);
    }
}

TEST(MseOrthogonal, IdentityIsZero) {
    const Graph g = load_fixture("ot/ot1.json");
    std::mt19937_64 rng(63);
    const WeightMatrix f = random_weights(rng, g);
    const MetricResult r = mse_orthogonal(f, f);
    EXPECT_LT(r.mse, 1e-15);
    ASSERT_TRUE(r.q_star.has_value());
    EXPECT_LT(oracle_loss(f, f, *r.q_star), 1e-15);
    EXPECT_GE(r.restarts, 8);
}

TEST(MseOrthogonal, RecoversConstructedRotation) {
    for (const char *name : {"ot/ot1.json", "ot/ot3.json", "misc/shared_pair.json"}) {
        const Graph g = load_fixture(name);
        std::mt19937_64 rng(64);
        const int m = g.num_latent();
        for (int trial = 0; trial < 5; ++trial) {
            const WeightMatrix f = random_weights(rng, g);
            NoiseSpec w = random_noise(rng, g);
            w.omega.head(m).setOnes();
            Eigen::MatrixXd q = Eigen::MatrixXd::Identity(m, m);
            q.topLeftCorner(2, 2) = random_orthogonal(rng, 2);
            const WeightMatrix fq = orthogonal_transform(f, w, q).first;
            const MetricResult r = mse_orthogonal(f, fq);
            EXPECT_LE(r.mse, 1e-6) << name;
            EXPECT_NEAR(oracle_loss(f, fq, *r.q_star), r.mse, 1e-12) << name;
        }
    }
}

TEST(MseOrthogonal, DimensionMismatch) {
    const Graph a(1, 2, {{0, 1}, {0, 2}});
    const Graph b(1, 3, {{0, 1}, {0, 2}});
    EXPECT_THROW(mse_orthogonal(WeightMatrix(a), WeightMatrix(b)), std::invalid_argument);
}

TEST(MseOrthogonalProperty, BoundedByGroupSignAndOrthogonalMinimizer) {
    std::mt19937_64 rng(65);
    for (int trial = 0; trial < 30; ++trial) {
        const Graph g = random_dag(rng, 2 + trial % 2, 6, 0.4);
        if (g.num_edges() == 0) continue;
        const WeightMatrix t = random_weights(rng, g), h = random_weights(rng, g);
        OrthogonalOptions o;
        o.seed = trial;
        o.full_q = trial % 3 == 0;
        const MetricResult r = mse_orthogonal(t, h, o);
        ASSERT_LE(r.mse, mse_group_sign(t, h) + 1e-12);
        ASSERT_TRUE(r.q_star.has_value());
        const Eigen::MatrixXd &q = *r.q_star;
        ASSERT_LE((q.transpose() * q - Eigen::MatrixXd::Identity(q.rows(), q.cols())).cwiseAbs().maxCoeff(), 1e-8);
        if (!o.full_q) {
            ASSERT_EQ(q.rows(), g.num_latent());
            ASSERT_NEAR(oracle_loss(t, h, q), r.mse, 1e-12);
        } else {
            ASSERT_EQ(q.rows(), g.size());
        }
    }
}

TEST(MseOrthogonal, FullQIsNoWorseThanLatentBlock) {
    // No edges point into latents here, so a latent-block change of
    // coordinates acts on rows only and is one of the full search's candidates.
    const Graph g = load_fixture("ot/ot3.json");
    std::mt19937_64 rng(66);
    const WeightMatrix t = random_weights(rng, g), h = random_weights(rng, g);
    OrthogonalOptions block, full;
    full.full_q = true;
    const double rb = mse_orthogonal(t, h, block).mse;
    const double rf = mse_orthogonal(t, h, full).mse;
    EXPECT_LE(rf, rb + 1e-3);
}

TEST(MseOrthogonal, OrthogonalCaseFixtureAtTenThousand) {
    Fixture fx{"ot1", load_fixture("ot/ot1.json"), false};
    BenchSpec spec;
    spec.fixtures = {fx};
    spec.estimator.threads = 1;
    const CellResult c = run_cell(fx, Method::TR, 10000, 1, spec);
    ASSERT_FALSE(c.failed) << c.error;
    ASSERT_TRUE(c.mse_ot.has_value());
    EXPECT_LE(*c.mse_ot, 0.05);
    EXPECT_LE(*c.mse_ot, c.mse_gs + 1e-12);
}
