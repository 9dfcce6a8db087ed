#pragma once

#include <random>
#include <string>

#include "polcm/bench.h"
#include "polcm/io.h"

namespace polcm::testing {

inline Graph load_fixture(const std::string &rel) {
    return read_graph_json(std::string(POLCM_FIXTURE_DIR) + "/" + rel).graph;
}

// Random DAG over d nodes with m latents. Edges follow a random permutation so
// latents can sit anywhere in the causal order.
inline Graph random_dag(std::mt19937_64 &rng, int m, int n, double p) {
    const int d = m + n;
    std::vector<int> order(d);
    for (int i = 0; i < d; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::bernoulli_distribution coin(p);
    std::vector<Edge> edges;
    for (int a = 0; a < d; ++a) {
        for (int b = a + 1; b < d; ++b) {
            if (coin(rng)) edges.emplace_back(order[a], order[b]);
        }
    }
    return Graph(m, n, edges);
}

inline WeightMatrix random_weights(std::mt19937_64 &rng, const Graph &g, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    WeightMatrix f(g);
    for (const auto &[p, c] : g.edges()) f.set(p, c, u(rng));
    return f;
}

inline NoiseSpec random_noise(std::mt19937_64 &rng, const Graph &g, double lo = 0.5, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd w(g.size());
    for (int i = 0; i < g.size(); ++i) w(i) = u(rng);
    return NoiseSpec(w, g.num_latent());
}

// Haar-distributed orthogonal matrix via QR with sign correction.
inline Eigen::MatrixXd random_orthogonal(std::mt19937_64 &rng, int k) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a(k, k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) a(i, j) = nd(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < k; ++i) {
        if (r(i, i) < 0) q.col(i) *= -1.0;
    }
    return q;
}

// Unit-variance model on g with random coefficients small enough that the
// noise solve succeeds; retries with shrinking coefficients.
inline WeightMatrix random_unit_model(std::mt19937_64 &rng, const Graph &g, double scale = 0.9) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        WeightMatrix f = random_weights(rng, g, -scale, scale);
        if (unit_variance_noise_solve(g, f)) return f;
        scale *= 0.9;
    }
    throw std::runtime_error("could not draw a unit-variance model");
}

}  // namespace polcm::testing
