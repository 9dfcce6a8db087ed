#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "polcm/covariance.h"
#include "polcm/estimator.h"
#include "polcm/graph.h"
#include "polcm/simulator.h"

namespace polcm {

// Ground truth of one simulated model. `standardized` holds the effective
// coefficients in unit-variance coordinates, the scale the estimator recovers.
struct Truth {
    WeightMatrix raw;
    NoiseSpec omega;
    WeightMatrix standardized;
    Eigen::VectorXd node_sd;
    Eigen::VectorXd mean_slope;
    SimConfig cfg;
};

// Fills node_sd, mean_slope and standardized from raw and omega.
void complete_truth(const Graph &g, Truth &t);

Truth make_truth(const Graph &g, const SimConfig &cfg);

struct Fixture {
    std::string name;
    Graph graph;
    bool generated = false;
};

// Random DAG with 12-18 nodes of which 2-4 are latent. Every latent gets at
// least three observed children so it is not trivially unrecoverable.
Fixture generate_fixture(std::uint64_t seed, const std::string &name);

struct BenchSpec {
    std::vector<Fixture> fixtures;
    std::vector<int> sample_sizes{2000, 5000, 10000};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<Method> methods{Method::TR};
    NoiseKind noise = NoiseKind::Gaussian;
    std::optional<double> lrelu_alpha;
    EstimatorConfig estimator;  // method and seed are overridden per cell
    bool full_q = false;
    int threads = 0;

    void validate() const;
};

struct CellResult {
    std::string fixture;
    Method method = Method::TR;
    int k = 0;
    std::uint64_t seed = 0;
    std::uint64_t model_seed = 0;
    std::uint64_t data_seed = 0;
    std::uint64_t estimator_seed = 0;
    double mse_gs = 0.0;
    std::optional<double> mse_ot;
    double nll = 0.0;
    double wall_ms = 0.0;
    bool failed = false;
    std::string error;
};

// One cell: simulate, standardize, estimate, score.
CellResult run_cell(const Fixture &fx, Method method, int k, std::uint64_t seed, const BenchSpec &spec);

std::vector<CellResult> run_bench(const BenchSpec &spec);

std::string method_name(Method m);

// Rows of (fixture, method, K, seed, metric, value, wall_ms).
void write_bench_csv(const std::string &path, const std::vector<CellResult> &cells);
nlohmann::json bench_manifest(const BenchSpec &spec, const std::vector<CellResult> &cells);

}  // namespace polcm
