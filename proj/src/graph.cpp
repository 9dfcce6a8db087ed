#include "polcm/graph.h"

#include <algorithm>
#include <array>
#include <deque>
#include <functional>
#include <queue>
#include <set>

namespace polcm {

NodeSet make_node_set(std::vector<NodeId> nodes) {
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    return nodes;
}

NodeSet set_union(const NodeSet &a, const NodeSet &b) {
    NodeSet out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

NodeSet set_intersection(const NodeSet &a, const NodeSet &b) {
    NodeSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

NodeSet set_difference(const NodeSet &a, const NodeSet &b) {
    NodeSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool set_contains(const NodeSet &s, NodeId v) { return std::binary_search(s.begin(), s.end(), v); }

bool set_is_subset(const NodeSet &sub, const NodeSet &super) {
    return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

std::vector<std::string> default_names(int num_latent, int num_observed) {
    std::vector<std::string> names;
    names.reserve(num_latent + num_observed);
    for (int i = 0; i < num_latent + num_observed; ++i) {
        names.push_back((i < num_latent ? "L" : "X") + std::to_string(i + 1));
    }
    return names;
}

Graph::Graph(int num_latent, int num_observed, std::vector<Edge> edges,
             std::vector<std::string> names)
    : num_latent_(num_latent), num_observed_(num_observed), edges_(std::move(edges)),
      names_(std::move(names)) {
    if (num_latent < 0 || num_observed < 0) {
        throw GraphError("node counts must be non-negative");
    }
    const int d = size();
    if (names_.empty()) {
        names_ = default_names(num_latent, num_observed);
    } else if (static_cast<int>(names_.size()) != d) {
        throw GraphError("expected " + std::to_string(d) + " names, got " +
                         std::to_string(names_.size()));
    }
    parents_.assign(d, {});
    children_.assign(d, {});
    std::sort(edges_.begin(), edges_.end());
    for (std::size_t k = 0; k < edges_.size(); ++k) {
        const auto [p, c] = edges_[k];
        if (p < 0 || p >= d || c < 0 || c >= d) {
            throw GraphError("edge (" + std::to_string(p) + ", " + std::to_string(c) +
                             ") references an invalid node");
        }
        if (p == c) {
            throw GraphError("self-loop on node " + std::to_string(p));
        }
        if (k > 0 && edges_[k - 1] == edges_[k]) {
            throw GraphError("duplicate edge (" + std::to_string(p) + ", " + std::to_string(c) + ")");
        }
        parents_[c].push_back(p);
        children_[p].push_back(c);
    }
    for (auto &s : parents_) std::sort(s.begin(), s.end());
    for (auto &s : children_) std::sort(s.begin(), s.end());

    std::vector<int> indegree(d);
    for (int v = 0; v < d; ++v) indegree[v] = static_cast<int>(parents_[v].size());
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (int v = 0; v < d; ++v) {
        if (indegree[v] == 0) ready.push(v);
    }
    while (!ready.empty()) {
        const int v = ready.top();
        ready.pop();
        topo_.push_back(v);
        for (int c : children_[v]) {
            if (--indegree[c] == 0) ready.push(c);
        }
    }
    if (static_cast<int>(topo_.size()) != d) {
        throw GraphError("edge relation contains a directed cycle");
    }
    rank_.assign(d, 0);
    for (int k = 0; k < d; ++k) rank_[topo_[k]] = k;
}

void Graph::check_node(NodeId v) const {
    if (!is_valid(v)) {
        throw GraphError("invalid node id " + std::to_string(v));
    }
}

NodeId Graph::find(const std::string &name) const {
    for (int v = 0; v < size(); ++v) {
        if (names_[v] == name) return v;
    }
    throw GraphError("no node named '" + name + "'");
}

const NodeSet &Graph::parents(NodeId v) const {
    check_node(v);
    return parents_[v];
}

const NodeSet &Graph::children(NodeId v) const {
    check_node(v);
    return children_[v];
}

bool Graph::has_edge(NodeId parent, NodeId child) const {
    return set_contains(children(parent), child);
}

bool Graph::adjacent(NodeId a, NodeId b) const { return has_edge(a, b) || has_edge(b, a); }

NodeSet Graph::latents() const {
    NodeSet s(num_latent_);
    for (int v = 0; v < num_latent_; ++v) s[v] = v;
    return s;
}

NodeSet Graph::observed() const {
    NodeSet s(num_observed_);
    for (int k = 0; k < num_observed_; ++k) s[k] = num_latent_ + k;
    return s;
}

namespace {

NodeSet reach(const std::vector<NodeSet> &adj, NodeId start) {
    std::vector<char> seen(adj.size(), 0);
    std::vector<NodeId> stack{start};
    NodeSet out;
    while (!stack.empty()) {
        const NodeId v = stack.back();
        stack.pop_back();
        for (NodeId w : adj[v]) {
            if (!seen[w]) {
                seen[w] = 1;
                out.push_back(w);
                stack.push_back(w);
            }
        }
    }
    return make_node_set(std::move(out));
}

}  // namespace

NodeSet Graph::descendants(NodeId v) const {
    check_node(v);
    return reach(children_, v);
}

NodeSet Graph::ancestors(NodeId v) const {
    check_node(v);
    return reach(parents_, v);
}

NodeSet parents(const Graph &g, NodeId v) { return g.parents(v); }

NodeSet pure_children(const Graph &g, const NodeSet &cover_in) {
    const NodeSet cover = make_node_set(cover_in);
    for (NodeId v : cover) g.check_node(v);
    NodeSet out;
    if (cover.empty()) return out;
    for (NodeId y : children_of(g, cover)) {
        if (g.parents(y) == cover) out.push_back(y);
    }
    return out;
}

NodeSet pure_children_subset(const Graph &g, const NodeSet &cover_in) {
    const NodeSet cover = make_node_set(cover_in);
    for (NodeId v : cover) g.check_node(v);
    NodeSet out;
    for (NodeId y : children_of(g, cover)) {
        if (set_is_subset(g.parents(y), cover)) out.push_back(y);
    }
    return out;
}

NodeSet children_of(const Graph &g, const NodeSet &cover) {
    NodeSet out;
    for (NodeId v : cover) {
        const auto &ch = g.children(v);
        out.insert(out.end(), ch.begin(), ch.end());
    }
    return set_difference(make_node_set(std::move(out)), make_node_set(cover));
}

NodeSet neighbours(const Graph &g, const NodeSet &cover) {
    NodeSet out;
    for (NodeId v : cover) {
        const auto &ch = g.children(v);
        const auto &pa = g.parents(v);
        out.insert(out.end(), ch.begin(), ch.end());
        out.insert(out.end(), pa.begin(), pa.end());
    }
    return set_difference(make_node_set(std::move(out)), make_node_set(cover));
}

bool d_separated(const Graph &g, const NodeSet &a, const NodeSet &b, const NodeSet &z) {
    for (const NodeSet *s : {&a, &b, &z}) {
        for (NodeId v : *s) g.check_node(v);
    }
    const NodeSet sa = make_node_set(a), sb = make_node_set(b), sz = make_node_set(z);
    if (!set_intersection(sa, sb).empty() || !set_intersection(sa, sz).empty() ||
        !set_intersection(sb, sz).empty()) {
        throw std::invalid_argument("d_separated: node sets must be pairwise disjoint");
    }
    const int d = g.size();
    std::vector<char> in_z(d, 0), anc_z(d, 0), in_b(d, 0);
    for (NodeId v : sz) in_z[v] = 1;
    for (NodeId v : sb) in_b[v] = 1;
    // Ancestors of z, z included: colliders there are open.
    std::vector<NodeId> stack(sz.begin(), sz.end());
    for (NodeId v : sz) anc_z[v] = 1;
    while (!stack.empty()) {
        const NodeId v = stack.back();
        stack.pop_back();
        for (NodeId p : g.parents(v)) {
            if (!anc_z[p]) {
                anc_z[p] = 1;
                stack.push_back(p);
            }
        }
    }
    // Reachability over (node, direction); up = entered from a child.
    enum Dir { kUp = 0, kDown = 1 };
    std::vector<std::array<char, 2>> visited(d, {0, 0});
    std::deque<std::pair<NodeId, Dir>> queue;
    for (NodeId v : sa) queue.emplace_back(v, kUp);
    while (!queue.empty()) {
        const auto [v, dir] = queue.front();
        queue.pop_front();
        if (visited[v][dir]) continue;
        visited[v][dir] = 1;
        if (!in_z[v] && in_b[v]) return false;
        if (dir == kUp && !in_z[v]) {
            for (NodeId p : g.parents(v)) queue.emplace_back(p, kUp);
            for (NodeId c : g.children(v)) queue.emplace_back(c, kDown);
        } else if (dir == kDown) {
            if (!in_z[v]) {
                for (NodeId c : g.children(v)) queue.emplace_back(c, kDown);
            }
            if (anc_z[v]) {
                for (NodeId p : g.parents(v)) queue.emplace_back(p, kUp);
            }
        }
    }
    return true;
}

std::vector<std::vector<NodeId>> directed_paths(const Graph &g, NodeId from, NodeId to) {
    g.check_node(from);
    g.check_node(to);
    std::vector<std::vector<NodeId>> out;
    std::vector<NodeId> path{from};
    std::function<void(NodeId)> dfs = [&](NodeId v) {
        if (v == to) {
            out.push_back(path);
            return;
        }
        for (NodeId c : g.children(v)) {
            // Only descend into nodes that can still reach `to`.
            if (c != to && g.topological_rank()[c] >= g.topological_rank()[to]) continue;
            path.push_back(c);
            dfs(c);
            path.pop_back();
        }
    };
    dfs(from);
    return out;
}

std::vector<Trek> enumerate_simple_treks(const Graph &g, NodeId i, NodeId j) {
    g.check_node(i);
    g.check_node(j);
    std::vector<Trek> out;
    if (i == j) {
        out.push_back({i, {i}, {i}});
        return out;
    }
    NodeSet tops_i = g.ancestors(i);
    tops_i.push_back(i);
    NodeSet tops_j = g.ancestors(j);
    tops_j.push_back(j);
    const NodeSet tops = set_intersection(make_node_set(tops_i), make_node_set(tops_j));
    for (NodeId t : tops) {
        const auto left_paths = directed_paths(g, t, i);
        const auto right_paths = directed_paths(g, t, j);
        for (const auto &l : left_paths) {
            NodeSet left_nodes = make_node_set({l.begin() + 1, l.end()});
            for (const auto &r : right_paths) {
                bool simple = true;
                for (std::size_t k = 1; k < r.size() && simple; ++k) {
                    simple = !set_contains(left_nodes, r[k]);
                }
                if (simple) out.push_back({t, l, r});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Trek &x, const Trek &y) {
        return std::tie(x.left, x.right) < std::tie(y.left, y.right);
    });
    return out;
}

}  // namespace polcm
