#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "polcm/graph.h"

namespace polcm {

struct SearchLimits {
    int max_cover_size = 4;
    int max_sep_size = 5;
};

// An atomic cover together with the witnesses that make it one.
struct CoverCertificate {
    NodeSet cover;
    int latent_count = 0;
    std::vector<NodeSet> witness_children;
    std::vector<NodeSet> witness_neighbours;
};

// Fixed-point search for atomic covers of size <= max_cover_size.
// Results are sorted by (size, members).
std::vector<CoverCertificate> find_atomic_covers(const Graph &g, int max_cover_size = 4);

// Independent structural re-check of one certificate against a cover list.
bool verify_certificate(const Graph &g, const CoverCertificate &cert,
                        const std::vector<CoverCertificate> &covers);

struct BasicConditionResult {
    bool pass = true;
    NodeSet uncovered_latents;
    // First violation of the child/neighbour adjacency clause, if any.
    std::optional<NodeSet> offending_cover;
    std::optional<Edge> offending_pair;  // (child, neighbour)
};

BasicConditionResult check_condition_basic(const Graph &g,
                                           const std::vector<CoverCertificate> &covers);

struct ColliderInstance {
    NodeSet v;   // colliders
    NodeSet v1;
    NodeSet v2;
    NodeSet t;   // minimal separator
};

struct ColliderConditionResult {
    bool pass = true;
    bool complete = true;  // false when a pair was beyond the separator cap
    std::optional<ColliderInstance> failing;
    std::vector<ColliderInstance> checked;
};

ColliderConditionResult check_condition_colliders(const Graph &g,
                                                  const std::vector<CoverCertificate> &covers,
                                                  int max_sep_size = 5);

// All inclusion-minimal sets T, disjoint from a and b, with |T| <= cap that
// d-separate a from b. Ordered by (size, members).
std::vector<NodeSet> minimal_separators(const Graph &g, const NodeSet &a, const NodeSet &b,
                                        int cap);

struct Theorem3Result {
    bool i_pass = true;
    std::optional<NodeSet> i_offending;
    bool ii_pass = true;
    std::optional<NodeSet> ii_offending;
    bool complete = true;
    // For each mixed cover: the cover and the observed separator found.
    std::vector<std::pair<NodeSet, NodeSet>> separators;
};

Theorem3Result check_theorem3(const Graph &g, const std::vector<CoverCertificate> &covers,
                              int max_sep_size = 5);

// Maximal groups of >= 2 latents with identical parents and identical children.
std::vector<NodeSet> detect_orthogonal_indeterminacy(const Graph &g);

enum class Verdict { FullyIdentifiable, IdentifiableUpToOrthogonal, NotStructureIdentifiable, Unknown };

std::string to_string(Verdict v);

struct IdentReport {
    SearchLimits limits;
    std::vector<CoverCertificate> atomic_covers;
    BasicConditionResult cond_basic;
    ColliderConditionResult cond_colliders;
    Theorem3Result thm3;
    bool pairwise_distinct = true;
    std::optional<Edge> indistinct_pair;
    std::vector<NodeSet> orth_indeterminacy;
    Verdict verdict = Verdict::Unknown;
};

IdentReport check_identifiability(const Graph &g, const SearchLimits &limits = {});

// Adds an edge from every latent member of every atomic cover to each child
// whose parents lie inside the cover, where not already adjacent.
Graph apply_skeleton_operator(const Graph &g, int max_cover_size = 4);

// Repeatedly merges an all-latent cover into the latent cover whose exact
// pure children it is, until no eligible pair remains. Node names survive.
Graph apply_minimal_graph_operator(const Graph &g, int max_cover_size = 4);

class DegeneracyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct AlgebraicResult {
    // (parent, child, coefficient), sorted by (parent, child).
    std::vector<std::tuple<NodeId, NodeId, double>> solved;
    std::vector<Edge> unsolved;
    NodeSet pseudo_observed;  // latents whose covariances were recovered
};

// Closed-form recovery of edge coefficients from the observed covariance of a
// unit-variance model. Handles latents with two or more known children whose
// only parent is that latent, and plain regression on fully known parent sets. Latent signs are
// fixed by taking the first pure child coefficient positive.
AlgebraicResult algebraic_identify(const Graph &g, const Eigen::MatrixXd &sigma_x, double tol = 1e-10);

}  // namespace polcm
