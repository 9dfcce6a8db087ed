#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

#include "polcm/covariance.h"

namespace polcm {

struct MetricResult {
    double mse = 0.0;
    std::optional<Eigen::MatrixXd> q_star;
    int restarts = 0;
    int best_restart = 0;
    int iterations = 0;  // total over restarts
};

struct OrthogonalOptions {
    bool full_q = false;   // rotate all rows instead of the latent block only
    int random_starts = 5; // Haar starts on top of identity and two warm starts
    int max_iters = 2000;
    std::uint64_t seed = 0;
};

// Squared error of absolute coefficients over the number of graph edges.
double mse_group_sign(const WeightMatrix &f_true, const WeightMatrix &f_hat);

// Same error after the best orthogonal change of latent coordinates of f_hat.
MetricResult mse_orthogonal(const WeightMatrix &f_true, const WeightMatrix &f_hat,
                            const OrthogonalOptions &opts = {});

}  // namespace polcm
