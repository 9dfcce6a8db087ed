#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace polcm {

// Nodes are positional: indices [0, m) are latent, [m, m+n) are observed.
using NodeId = int;

// Sorted, duplicate-free list of node indices.
using NodeSet = std::vector<NodeId>;

NodeSet make_node_set(std::vector<NodeId> nodes);
NodeSet set_union(const NodeSet &a, const NodeSet &b);
NodeSet set_intersection(const NodeSet &a, const NodeSet &b);
NodeSet set_difference(const NodeSet &a, const NodeSet &b);
bool set_contains(const NodeSet &s, NodeId v);
bool set_is_subset(const NodeSet &sub, const NodeSet &super);

class GraphError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using Edge = std::pair<NodeId, NodeId>;

class Graph {
  public:
    Graph() = default;
    Graph(int num_latent, int num_observed, std::vector<Edge> edges,
          std::vector<std::string> names = {});

    int num_latent() const { return num_latent_; }
    int num_observed() const { return num_observed_; }
    int size() const { return num_latent_ + num_observed_; }

    bool is_latent(NodeId v) const { return v < num_latent_; }
    bool is_valid(NodeId v) const { return v >= 0 && v < size(); }
    void check_node(NodeId v) const;

    const std::string &name(NodeId v) const { return names_.at(v); }
    const std::vector<std::string> &names() const { return names_; }
    NodeId find(const std::string &name) const;

    // Sorted by (parent, child).
    const std::vector<Edge> &edges() const { return edges_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }

    const NodeSet &parents(NodeId v) const;
    const NodeSet &children(NodeId v) const;
    bool has_edge(NodeId parent, NodeId child) const;
    bool adjacent(NodeId a, NodeId b) const;

    NodeSet latents() const;
    NodeSet observed() const;
    NodeSet descendants(NodeId v) const;  // excludes v
    NodeSet ancestors(NodeId v) const;    // excludes v

    // Parents precede children; ties broken by smallest index (Kahn).
    const std::vector<NodeId> &topological_order() const { return topo_; }

    // Position of each node in topological_order().
    const std::vector<int> &topological_rank() const { return rank_; }

  private:
    int num_latent_ = 0;
    int num_observed_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::string> names_;
    std::vector<NodeSet> parents_;
    std::vector<NodeSet> children_;
    std::vector<NodeId> topo_;
    std::vector<int> rank_;
};

std::vector<std::string> default_names(int num_latent, int num_observed);

// Exact parent set of v.
NodeSet parents(const Graph &g, NodeId v);

// Nodes outside `cover` whose parent set equals `cover` exactly.
NodeSet pure_children(const Graph &g, const NodeSet &cover);

// Nodes outside `cover` with a nonempty parent set contained in `cover`.
// This is the set-level reading used by the skeleton operator, where a child
// may be missing an edge from some member of the cover.
NodeSet pure_children_subset(const Graph &g, const NodeSet &cover);

// Nodes adjacent (parent or child) to some member of `cover`, minus `cover`.
NodeSet neighbours(const Graph &g, const NodeSet &cover);

// Union of children of the members of `cover`, minus `cover`.
NodeSet children_of(const Graph &g, const NodeSet &cover);

// True iff every path between a and b is blocked given z.
// a, b and z must be pairwise disjoint; throws std::invalid_argument otherwise.
bool d_separated(const Graph &g, const NodeSet &a, const NodeSet &b, const NodeSet &z);

// An ordered pair of directed paths sharing their source `top`.
// `left` runs top -> i and `right` runs top -> j, both starting with `top`.
struct Trek {
    NodeId top = -1;
    std::vector<NodeId> left;
    std::vector<NodeId> right;

    bool operator==(const Trek &) const = default;
};

// All simple treks between i and j, ordered lexicographically by
// (left, right). For i == j the only simple trek is the trivial one.
std::vector<Trek> enumerate_simple_treks(const Graph &g, NodeId i, NodeId j);

// Every directed path from `from` to `to` (inclusive endpoints).
std::vector<std::vector<NodeId>> directed_paths(const Graph &g, NodeId from, NodeId to);

}  // namespace polcm
