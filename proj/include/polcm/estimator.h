#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polcm/covariance.h"
#include "polcm/graph.h"

namespace polcm {

enum class Method { TR, LM };
enum class GradientBackend { FiniteDifference, AnalyticReverse };
// How the unit-variance model covariance is built for TR.
enum class CovBackend { Matrix, Trek };

struct EstimatorConfig {
    Method method = Method::TR;
    int restarts = 30;
    double learning_rate = 0.02;
    int max_iters = 5000;
    double grad_tol = 1e-7;
    double init_scale = 1.0;
    std::optional<double> lm_penalty_weight;  // defaults to 100 * K
    GradientBackend gradient = GradientBackend::AnalyticReverse;
    CovBackend cov_backend = CovBackend::Matrix;
    std::uint64_t seed = 0;
    int threads = 0;  // 0: POLCM_THREADS or hardware concurrency

    void validate() const;
};

class InvalidIterate : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RestartDiagnostics {
    int restart_index = 0;
    double objective = 0.0;
    double nll = 0.0;
    int iterations = 0;
    bool converged = false;
    bool failed = false;
    std::string message;
};

class EstimationFailed : public std::runtime_error {
  public:
    EstimationFailed(const std::string &what, std::vector<RestartDiagnostics> d)
        : std::runtime_error(what), diagnostics(std::move(d)) {}
    std::vector<RestartDiagnostics> diagnostics;
};

struct EstimateResult {
    WeightMatrix f_hat;
    NoiseSpec omega_hat;
    // False when some implied TR noise variance is not positive, i.e. the
    // fitted covariance has no exact linear-model realization.
    bool omega_valid = true;
    double nll = 0.0;
    double objective = 0.0;
    int restart_index = 0;
    bool converged = false;
    int iterations = 0;
    std::vector<RestartDiagnostics> restarts;
};

// (K/2) (tr(S^{-1} S_hat) + log det S). Throws InvalidIterate if S is not PD.
double nll(const Eigen::MatrixXd &sigma_model, const Eigen::MatrixXd &sigma_hat, double k);

// Objective over a flat parameter vector: supported coefficients in graph
// edge order, followed for LM by the noise variances of every node. LM
// iterates with a non-positive noise variance are infeasible.
class Objective {
  public:
    Objective(const Graph &g, Eigen::MatrixXd sigma_hat, double k, const EstimatorConfig &cfg);

    int dim() const { return dim_; }
    const Graph &graph() const { return g_; }
    Method method() const { return method_; }

    // +infinity when the model covariance over observed nodes is not PD.
    double value(const Eigen::VectorXd &params) const;
    // Throws InvalidIterate when value(params) is infinite.
    Eigen::VectorXd gradient(const Eigen::VectorXd &params, GradientBackend backend) const;

    WeightMatrix weights(const Eigen::VectorXd &params) const;
    // TR: noise variances implied by unit variances, unchecked for sign;
    // LM: the noise parameters.
    NoiseSpec noise(const Eigen::VectorXd &params) const;
    // Model covariance over observed nodes, or nullopt if not finite.
    std::optional<Eigen::MatrixXd> sigma_x(const Eigen::VectorXd &params) const;

  private:
    struct Monomial {
        std::vector<int> edges;
    };
    double trek_value(const Eigen::VectorXd &params, Eigen::MatrixXd *sigma) const;
    Eigen::VectorXd analytic_matrix_tr(const Eigen::VectorXd &params) const;
    Eigen::VectorXd analytic_trek_tr(const Eigen::VectorXd &params) const;
    Eigen::VectorXd analytic_lm(const Eigen::VectorXd &params) const;
    Eigen::MatrixXd trek_sigma(const Eigen::VectorXd &coef) const;

    Graph g_;
    Eigen::MatrixXd sigma_hat_;
    double k_;
    Method method_;
    CovBackend backend_;
    double penalty_;
    int num_edges_;
    int dim_;
    // For the trek backend: monomials per observed pair (i < j).
    std::vector<std::vector<Monomial>> monomials_;
};

// Central differences with step 1e-6 * max(1, |p|).
Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd &)> &fn,
                                           const Eigen::VectorXd &params);

// Initial coefficient vectors, one per restart, in restart order.
std::vector<Eigen::VectorXd> restart_schedule(const Graph &g, const EstimatorConfig &cfg);

// Runs restarts in the given order (all of them by default) and merges by
// minimum objective with restart index as tiebreak.
EstimateResult estimate(const Graph &g, const Eigen::MatrixXd &sigma_hat, double k, const EstimatorConfig &cfg,
                        const std::vector<int> &order = {});

// Worker count from POLCM_THREADS or the hardware, at least 1.
int default_thread_count();

}  // namespace polcm
