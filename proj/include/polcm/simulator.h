#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "polcm/covariance.h"
#include "polcm/graph.h"

namespace polcm {

enum class NoiseKind { Gaussian, Uniform };

struct SimConfig {
    double coeff_lo = -2.0;
    double coeff_hi = 2.0;
    double noise_lo = 1.0;
    double noise_hi = 5.0;
    NoiseKind noise = NoiseKind::Gaussian;
    std::optional<double> lrelu_alpha;  // unset means linear
    int k = 10000;
    std::uint64_t seed = 0;
    double min_abs_coeff = 0.0;  // resample coefficients below this magnitude

    void validate() const;
};

struct Dataset {
    Eigen::MatrixXd samples;  // K x n
    std::vector<std::string> names;
    bool standardized = false;
};

class DegenerateColumn : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// One step of the splitmix64 generator; advances state.
std::uint64_t splitmix64(std::uint64_t &state);

// Independent seed for a numbered stream under a master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

std::pair<WeightMatrix, NoiseSpec> random_polcm(const Graph &g, const SimConfig &cfg);

// Ancestral sampling of all nodes; returns K x (m+n).
Eigen::MatrixXd simulate_all(const Graph &g, const WeightMatrix &f, const NoiseSpec &omega, const SimConfig &cfg);

// Observed columns only.
Dataset simulate(const Graph &g, const WeightMatrix &f, const NoiseSpec &omega, const SimConfig &cfg);

// Centered covariance with divisor K.
Eigen::MatrixXd sample_covariance(const Dataset &d);
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd &samples);

Dataset standardize(const Dataset &d);

struct ReferenceStats {
    Eigen::VectorXd sd;          // per-node standard deviation
    Eigen::VectorXd mean_slope;  // E[g'(z)] of each node's activation; 1 if linear
    WeightMatrix projection;     // population least-squares fit of each standardized node on its parents
};

// Exact for linear models; estimated from a large auxiliary draw under
// leaky-ReLU.
ReferenceStats reference_statistics(const Graph &g, const WeightMatrix &f, const NoiseSpec &omega,
                                    const SimConfig &cfg, int reference_k = 200000);
Eigen::VectorXd node_standard_deviations(const Graph &g, const WeightMatrix &f, const NoiseSpec &omega,
                                         const SimConfig &cfg, int reference_k = 200000);

// Coefficients in unit-variance coordinates: the population least-squares
// fit of each standardized node on its standardized parents, i.e. the target a
// linear model recovers. Equals plain standardization for linear models.
WeightMatrix effective_coefficients(const WeightMatrix &f, const ReferenceStats &stats);

}  // namespace polcm
