#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "polcm/graph.h"

namespace polcm {

class SupportError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class UnsupportedShape : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Dense (m+n) x (m+n) coefficient matrix; entry (j, i) is the effect of
// node j on node i. Nonzeros are confined to the edges of the source graph.
class WeightMatrix {
  public:
    WeightMatrix() = default;
    explicit WeightMatrix(const Graph &g);
    WeightMatrix(const Graph &g, const Eigen::MatrixXd &values);

    int size() const { return static_cast<int>(f_.rows()); }
    int num_latent() const { return m_; }
    int num_observed() const { return size() - m_; }

    double operator()(NodeId parent, NodeId child) const { return f_(parent, child); }
    void set(NodeId parent, NodeId child, double value);
    bool in_support(NodeId parent, NodeId child) const { return support_(parent, child) != 0; }

    const Eigen::MatrixXd &matrix() const { return f_; }
    const std::vector<Edge> &edges() const { return edges_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }

    // Coefficients in edges() order.
    Eigen::VectorXd edge_values() const;
    void set_edge_values(const Eigen::VectorXd &values);

    Eigen::MatrixXd A() const { return f_.topLeftCorner(m_, m_); }
    Eigen::MatrixXd B() const { return f_.topRightCorner(m_, num_observed()); }
    Eigen::MatrixXd C() const { return f_.bottomLeftCorner(num_observed(), m_); }
    Eigen::MatrixXd D() const { return f_.bottomRightCorner(num_observed(), num_observed()); }

    bool same_support(const WeightMatrix &other) const;

  private:
    int m_ = 0;
    Eigen::MatrixXd f_;
    Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic> support_;
    std::vector<Edge> edges_;
};

// Diagonal of the noise covariance.
struct NoiseSpec {
    Eigen::VectorXd omega;
    int num_latent = 0;

    NoiseSpec() = default;
    NoiseSpec(Eigen::VectorXd w, int m);

    Eigen::VectorXd omega_l() const { return omega.head(num_latent); }
    Eigen::VectorXd omega_x() const { return omega.tail(omega.size() - num_latent); }
};

struct CovModel {
    Eigen::MatrixXd sigma_full;
    Eigen::MatrixXd sigma_x;
    Eigen::MatrixXd sigma_l;
};

// Sigma = (I - F)^{-T} Omega (I - F)^{-1}.
CovModel covariance_full(const WeightMatrix &f, const NoiseSpec &omega);

// Block formulas in terms of A, B, C, D. Requires the observed-to-latent
// block C to be square and invertible; throws UnsupportedShape otherwise.
CovModel covariance_blocks_prop1(const WeightMatrix &f, const NoiseSpec &omega);

// Sum over simple treks of top variance times both path monomials.
double trek_rule_sigma(const Graph &g, const WeightMatrix &f, const Eigen::VectorXd &node_variances,
                       NodeId i, NodeId j);

// Noise variances giving every variable unit variance, or nullopt when some
// required variance is not positive.
std::optional<NoiseSpec> unit_variance_noise_solve(const Graph &g, const WeightMatrix &f);

// Lambda-scaling of the latent coordinates.
std::pair<WeightMatrix, NoiseSpec> rescale_latents(const WeightMatrix &f, const NoiseSpec &omega,
                                                   const Eigen::VectorXd &lambda);

// Rotation of the latent coordinates by an m x m orthogonal q. The latent
// noise must be invariant under q (e.g. identity on the rotated block).
std::pair<WeightMatrix, NoiseSpec> orthogonal_transform(const WeightMatrix &f, const NoiseSpec &omega,
                                                        const Eigen::MatrixXd &q);

// Negates the rows and columns of the given latent nodes.
WeightMatrix group_sign_flip(const WeightMatrix &f, const NodeSet &latents);

// Rescales every variable to unit population variance. Coefficients become
// f_ji * sd_j / sd_i.
std::pair<WeightMatrix, NoiseSpec> standardize_model(const WeightMatrix &f, const NoiseSpec &omega);

// Same rescaling given arbitrary per-node standard deviations.
WeightMatrix rescale_nodes(const WeightMatrix &f, const Eigen::VectorXd &sd);

}  // namespace polcm
