#include "polcm/identifiability.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

namespace polcm {

namespace {

int count_latent(const Graph &g, const NodeSet &s) {
    return static_cast<int>(std::count_if(s.begin(), s.end(), [&](NodeId v) { return g.is_latent(v); }));
}

bool by_size_then_members(const NodeSet &a, const NodeSet &b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

// Calls fn(subset) for every k-subset of pool in lexicographic order; stops
// early when fn returns false.
bool for_each_subset(const NodeSet &pool, int k, const std::function<bool(const NodeSet &)> &fn) {
    const int n = static_cast<int>(pool.size());
    if (k > n) return true;
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    NodeSet subset(k);
    while (true) {
        for (int i = 0; i < k; ++i) subset[i] = pool[idx[i]];
        if (!fn(subset)) return false;
        int i = k - 1;
        while (i >= 0 && idx[i] == n - k + i) --i;
        if (i < 0) return true;
        ++idx[i];
        for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

using CoverSet = std::set<NodeSet>;

bool partitionable(const NodeSet &v, const CoverSet &current) {
    const int n = static_cast<int>(v.size());
    if (n < 2) return false;
    // Masks containing the first member enumerate each split once.
    for (unsigned mask = 1; mask < (1u << n) - 1; mask += 2) {
        NodeSet a, b;
        for (int i = 0; i < n; ++i) ((mask >> i) & 1u ? a : b).push_back(v[i]);
        if (current.count(a) && current.count(b)) return true;
    }
    return false;
}

NodeSet union_of(const std::vector<NodeSet> &sets) {
    NodeSet out;
    for (const auto &s : sets) out = set_union(out, s);
    return out;
}

std::optional<CoverCertificate> try_certify(const Graph &g, const NodeSet &v, const CoverSet &current) {
    CoverCertificate cert;
    cert.cover = v;
    cert.latent_count = count_latent(g, v);
    const int l = cert.latent_count;
    if (v.size() == 1 && l == 0) return cert;
    if (l == 0) return std::nullopt;
    if (partitionable(v, current)) return std::nullopt;

    const NodeSet pch = pure_children(g, v);
    if (pch.empty()) return std::nullopt;
    std::vector<NodeSet> contained;
    for (const auto &c : current) {
        if (set_is_subset(c, pch)) contained.push_back(c);
    }
    std::sort(contained.begin(), contained.end(), by_size_then_members);
    if (contained.size() > 16) contained.resize(16);

    // Smallest-union selection of child covers reaching l + 1 members.
    std::optional<std::vector<NodeSet>> best;
    std::size_t best_size = 0;
    const int nc = static_cast<int>(contained.size());
    for (unsigned mask = 1; mask < (1u << nc); ++mask) {
        std::vector<NodeSet> pick;
        for (int i = 0; i < nc; ++i) {
            if ((mask >> i) & 1u) pick.push_back(contained[i]);
        }
        const std::size_t u = union_of(pick).size();
        if (u < static_cast<std::size_t>(l + 1)) continue;
        if (!best || u < best_size || (u == best_size && pick < *best)) {
            best = pick;
            best_size = u;
        }
    }
    if (!best) return std::nullopt;
    cert.witness_children = *best;
    const NodeSet used = union_of(*best);

    NodeSet ordered;
    for (NodeId c : children_of(g, v)) {
        if (!set_contains(used, c)) ordered.push_back(c);
    }
    NodeSet pa;
    for (NodeId m : v) pa = set_union(pa, g.parents(m));
    for (NodeId p : set_difference(pa, v)) {
        if (!set_contains(used, p) && std::find(ordered.begin(), ordered.end(), p) == ordered.end()) {
            ordered.push_back(p);
        }
    }
    if (static_cast<int>(ordered.size()) < l + 1) return std::nullopt;
    for (int i = 0; i < l + 1; ++i) cert.witness_neighbours.push_back({ordered[i]});
    return cert;
}

}  // namespace

std::vector<CoverCertificate> find_atomic_covers(const Graph &g, int max_cover_size) {
    if (max_cover_size < 1) throw std::invalid_argument("max_cover_size must be >= 1");
    std::set<NodeSet> cand_set;
    for (NodeId y = 0; y < g.size(); ++y) {
        const NodeSet &pa = g.parents(y);
        if (!pa.empty() && static_cast<int>(pa.size()) <= max_cover_size && count_latent(g, pa) > 0) {
            cand_set.insert(pa);
        }
    }
    std::vector<NodeSet> candidates(cand_set.begin(), cand_set.end());
    std::sort(candidates.begin(), candidates.end(), by_size_then_members);

    CoverSet current;
    std::map<NodeSet, CoverCertificate> certs;
    for (NodeId x : g.observed()) {
        current.insert({x});
        certs[{x}] = CoverCertificate{{x}, 0, {}, {}};
    }
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto &c : candidates) {
            if (current.count(c)) continue;
            if (auto cert = try_certify(g, c, current)) {
                current.insert(c);
                certs[c] = *cert;
                changed = true;
            }
        }
    }
    // Drop covers that a later addition made splittable, then re-certify the
    // rest against the shrunken set until stable.
    changed = true;
    while (changed) {
        changed = false;
        for (auto it = current.begin(); it != current.end();) {
            if (it->size() == 1 && !g.is_latent((*it)[0])) {
                ++it;
                continue;
            }
            CoverSet others = current;
            others.erase(*it);
            auto cert = try_certify(g, *it, others);
            if (!cert) {
                certs.erase(*it);
                it = current.erase(it);
                changed = true;
            } else {
                certs[*it] = *cert;
                ++it;
            }
        }
    }
    std::vector<CoverCertificate> out;
    for (const auto &c : current) out.push_back(certs.at(c));
    std::sort(out.begin(), out.end(), [](const CoverCertificate &a, const CoverCertificate &b) {
        return by_size_then_members(a.cover, b.cover);
    });
    return out;
}

bool verify_certificate(const Graph &g, const CoverCertificate &cert,
                        const std::vector<CoverCertificate> &covers) {
    const NodeSet &v = cert.cover;
    if (v.empty() || make_node_set(v) != v) return false;
    for (NodeId x : v) {
        if (!g.is_valid(x)) return false;
    }
    const int l = count_latent(g, v);
    if (l != cert.latent_count) return false;
    if (v.size() == 1 && l == 0) return true;
    if (l == 0) return false;
    std::set<NodeSet> known;
    for (const auto &c : covers) known.insert(c.cover);

    NodeSet pch;
    for (NodeId y = 0; y < g.size(); ++y) {
        if (!set_contains(v, y) && g.parents(y) == v) pch.push_back(y);
    }
    NodeSet cu;
    for (const auto &c : cert.witness_children) {
        if (!known.count(c) || !set_is_subset(c, pch)) return false;
        cu = set_union(cu, c);
    }
    if (static_cast<int>(cu.size()) < l + 1) return false;

    NodeSet adj;
    for (NodeId y = 0; y < g.size(); ++y) {
        if (set_contains(v, y)) continue;
        for (NodeId x : v) {
            if (g.adjacent(x, y)) {
                adj.push_back(y);
                break;
            }
        }
    }
    NodeSet nu;
    for (const auto &n : cert.witness_neighbours) nu = set_union(nu, n);
    if (static_cast<int>(nu.size()) < l + 1) return false;
    if (!set_is_subset(nu, adj) || !set_intersection(nu, cu).empty()) return false;

    const int n = static_cast<int>(v.size());
    for (unsigned mask = 1; mask < (1u << n) - 1; ++mask) {
        NodeSet a, b;
        for (int i = 0; i < n; ++i) ((mask >> i) & 1u ? a : b).push_back(v[i]);
        if (known.count(a) && known.count(b)) return false;
    }
    return true;
}

BasicConditionResult check_condition_basic(const Graph &g, const std::vector<CoverCertificate> &covers) {
    BasicConditionResult r;
    NodeSet covered;
    for (const auto &c : covers) covered = set_union(covered, c.cover);
    for (NodeId l : g.latents()) {
        if (!set_contains(covered, l)) r.uncovered_latents.push_back(l);
    }
    if (!r.uncovered_latents.empty()) r.pass = false;
    for (const auto &c : covers) {
        if (c.latent_count == 0 || r.offending_cover) continue;
        const NodeSet ch = children_of(g, c.cover);
        const NodeSet nb = neighbours(g, c.cover);
        for (NodeId x : ch) {
            for (NodeId y : nb) {
                if (x != y && g.adjacent(x, y)) {
                    r.pass = false;
                    r.offending_cover = c.cover;
                    r.offending_pair = Edge{x, y};
                    break;
                }
            }
            if (r.offending_cover) break;
        }
    }
    return r;
}

std::vector<NodeSet> minimal_separators(const Graph &g, const NodeSet &a, const NodeSet &b, int cap) {
    NodeSet all(g.size());
    for (int i = 0; i < g.size(); ++i) all[i] = i;
    const NodeSet rest = set_difference(set_difference(all, a), b);
    std::vector<NodeSet> found;
    for (int k = 0; k <= std::min<int>(cap, static_cast<int>(rest.size())); ++k) {
        for_each_subset(rest, k, [&](const NodeSet &t) {
            for (const auto &f : found) {
                if (set_is_subset(f, t)) return true;
            }
            if (d_separated(g, a, b, t)) found.push_back(t);
            return true;
        });
    }
    return found;
}

ColliderConditionResult check_condition_colliders(const Graph &g,
                                                  const std::vector<CoverCertificate> &covers,
                                                  int max_sep_size) {
    ColliderConditionResult r;
    for (std::size_t i = 0; i < covers.size(); ++i) {
        for (std::size_t j = i + 1; j < covers.size(); ++j) {
            const NodeSet &v1 = covers[i].cover;
            const NodeSet &v2 = covers[j].cover;
            if (!set_intersection(v1, v2).empty()) continue;
            const NodeSet both = set_union(v1, v2);
            const NodeSet colliders = set_difference(set_intersection(children_of(g, v1), children_of(g, v2)), both);
            if (colliders.empty()) continue;
            bool adjacent = false;
            for (NodeId x : v1) {
                for (NodeId y : v2) adjacent = adjacent || g.adjacent(x, y);
            }
            if (adjacent) continue;  // no separator exists

            // A single collider is the smallest admissible V; prefer a latent one.
            NodeId pick = colliders.front();
            for (NodeId c : colliders) {
                if (g.is_latent(c)) {
                    pick = c;
                    break;
                }
            }
            const bool latent_in_frame = count_latent(g, both) > 0 || g.is_latent(pick);
            const int need = static_cast<int>(v1.size() + v2.size());
            if (max_sep_size + 2 < need) r.complete = false;
            for (const auto &t : minimal_separators(g, v1, v2, max_sep_size)) {
                if (!latent_in_frame && count_latent(g, t) == 0) continue;
                ColliderInstance inst{{pick}, v1, v2, t};
                r.checked.push_back(inst);
                if (1 + static_cast<int>(t.size()) < need && !r.failing) {
                    r.pass = false;
                    r.failing = inst;
                }
            }
        }
    }
    return r;
}

Theorem3Result check_theorem3(const Graph &g, const std::vector<CoverCertificate> &covers, int max_sep_size) {
    Theorem3Result r;
    for (const auto &c : covers) {
        if (c.latent_count > 1 && r.i_pass) {
            r.i_pass = false;
            r.i_offending = c.cover;
        }
    }
    for (const auto &c : covers) {
        if (c.latent_count != 1 || c.cover.size() < 2) continue;
        NodeSet lat, obs;
        for (NodeId v : c.cover) (g.is_latent(v) ? lat : obs).push_back(v);
        const NodeSet pool = set_difference(g.observed(), c.cover);
        bool adjacent = false;
        for (NodeId x : obs) adjacent = adjacent || g.adjacent(x, lat[0]);
        std::optional<NodeSet> sep;
        if (!adjacent) {
            for (int k = 0; k <= std::min<int>(max_sep_size, static_cast<int>(pool.size())) && !sep; ++k) {
                for_each_subset(pool, k, [&](const NodeSet &t) {
                    if (d_separated(g, obs, lat, t)) {
                        sep = t;
                        return false;
                    }
                    return true;
                });
            }
        }
        if (sep) {
            r.separators.emplace_back(c.cover, *sep);
        } else {
            if (!adjacent && static_cast<int>(pool.size()) > max_sep_size) r.complete = false;
            if (r.ii_pass) {
                r.ii_pass = false;
                r.ii_offending = c.cover;
            }
        }
    }
    return r;
}

std::vector<NodeSet> detect_orthogonal_indeterminacy(const Graph &g) {
    std::map<std::pair<NodeSet, NodeSet>, NodeSet> groups;
    for (NodeId l : g.latents()) groups[{g.parents(l), g.children(l)}].push_back(l);
    std::vector<NodeSet> out;
    for (const auto &[key, members] : groups) {
        if (members.size() >= 2) out.push_back(members);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::FullyIdentifiable: return "FullyIdentifiable";
    case Verdict::IdentifiableUpToOrthogonal: return "IdentifiableUpToOrthogonal";
    case Verdict::NotStructureIdentifiable: return "NotStructureIdentifiable";
    case Verdict::Unknown: return "Unknown";
    }
    return "Unknown";
}

IdentReport check_identifiability(const Graph &g, const SearchLimits &limits) {
    IdentReport r;
    r.limits = limits;
    r.atomic_covers = find_atomic_covers(g, limits.max_cover_size);
    r.cond_basic = check_condition_basic(g, r.atomic_covers);
    r.cond_colliders = check_condition_colliders(g, r.atomic_covers, limits.max_sep_size);
    r.thm3 = check_theorem3(g, r.atomic_covers, limits.max_sep_size);
    r.orth_indeterminacy = detect_orthogonal_indeterminacy(g);
    const NodeSet lat = g.latents();
    for (std::size_t i = 0; i < lat.size() && r.pairwise_distinct; ++i) {
        for (std::size_t j = i + 1; j < lat.size(); ++j) {
            if (g.parents(lat[i]) == g.parents(lat[j]) && g.children(lat[i]) == g.children(lat[j])) {
                r.pairwise_distinct = false;
                r.indistinct_pair = Edge{lat[i], lat[j]};
                break;
            }
        }
    }

    if (!r.cond_basic.pass || !r.cond_colliders.pass) {
        r.verdict = Verdict::NotStructureIdentifiable;
    } else if (!r.cond_colliders.complete) {
        r.verdict = Verdict::Unknown;
    } else if (r.thm3.i_pass && r.thm3.ii_pass && r.orth_indeterminacy.empty()) {
        r.verdict = Verdict::FullyIdentifiable;
    } else if (!r.thm3.i_pass && !r.orth_indeterminacy.empty()) {
        r.verdict = Verdict::IdentifiableUpToOrthogonal;
    } else {
        r.verdict = Verdict::Unknown;
    }
    return r;
}

Graph apply_skeleton_operator(const Graph &g, int max_cover_size) {
    Graph cur = g;
    while (true) {
        std::vector<Edge> edges = cur.edges();
        std::set<Edge> have(edges.begin(), edges.end());
        bool added = false;
        for (const auto &c : find_atomic_covers(cur, max_cover_size)) {
            if (c.latent_count == 0) continue;
            const NodeSet pch = pure_children_subset(cur, c.cover);
            for (NodeId v : c.cover) {
                if (!cur.is_latent(v)) continue;
                for (NodeId ch : pch) {
                    if (cur.adjacent(v, ch) || have.count({v, ch})) continue;
                    if (set_contains(cur.descendants(ch), v)) continue;
                    have.insert({v, ch});
                    added = true;
                }
            }
        }
        if (!added) return cur;
        cur = Graph(cur.num_latent(), cur.num_observed(), std::vector<Edge>(have.begin(), have.end()),
                    cur.names());
    }
}

namespace {

Graph merge_into(const Graph &g, const NodeSet &l, const NodeSet &p) {
    std::set<Edge> edges;
    for (const auto &[a, b] : g.edges()) {
        if (set_contains(l, a)) {
            for (NodeId q : p) edges.insert({q, b});
        } else if (!set_contains(l, b)) {
            edges.insert({a, b});
        }
    }
    std::vector<int> remap(g.size(), -1);
    std::vector<std::string> names;
    int next = 0;
    for (NodeId v = 0; v < g.size(); ++v) {
        if (set_contains(l, v)) continue;
        remap[v] = next++;
        names.push_back(g.name(v));
    }
    std::vector<Edge> out;
    for (const auto &[a, b] : edges) out.emplace_back(remap[a], remap[b]);
    return Graph(g.num_latent() - static_cast<int>(l.size()), g.num_observed(), std::move(out),
                 std::move(names));
}

}  // namespace

Graph apply_minimal_graph_operator(const Graph &g, int max_cover_size) {
    Graph cur = g;
    while (true) {
        const auto covers = find_atomic_covers(cur, max_cover_size);
        std::set<NodeSet> atomic;
        for (const auto &c : covers) atomic.insert(c.cover);
        std::set<NodeSet> parent_sets;
        for (NodeId y = 0; y < cur.size(); ++y) {
            const NodeSet &pa = cur.parents(y);
            if (!pa.empty() && count_latent(cur, pa) == static_cast<int>(pa.size())) parent_sets.insert(pa);
        }
        bool merged = false;
        for (const auto &p : parent_sets) {
            const NodeSet l = pure_children(cur, p);
            if (l.size() != p.size() || count_latent(cur, l) != static_cast<int>(l.size())) continue;
            if (!atomic.count(l)) continue;
            const NodeSet grand = pure_children(cur, l);
            const NodeSet siblings = set_difference(children_of(cur, p), l);
            if (!atomic.count(grand) && !atomic.count(siblings)) continue;
            cur = merge_into(cur, l, p);
            merged = true;
            break;
        }
        if (!merged) return cur;
    }
}

AlgebraicResult algebraic_identify(const Graph &g, const Eigen::MatrixXd &sigma_x, double tol) {
    const int d = g.size(), m = g.num_latent();
    if (sigma_x.rows() != g.num_observed() || sigma_x.cols() != g.num_observed()) {
        throw std::invalid_argument("algebraic_identify: covariance must be n x n over observed nodes");
    }
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
    std::vector<std::vector<char>> known(d, std::vector<char>(d, 0));
    std::vector<char> node_known(d, 0);
    for (NodeId i = m; i < d; ++i) {
        node_known[i] = 1;
        for (NodeId j = m; j < d; ++j) {
            s(i, j) = sigma_x(i - m, j - m);
            known[i][j] = 1;
        }
    }
    std::vector<NodeSet> desc(d);
    for (NodeId v = 0; v < d; ++v) desc[v] = g.descendants(v);

    std::vector<NodeId> order(g.topological_order().rbegin(), g.topological_order().rend());

    AlgebraicResult res;
    bool progress = true;
    while (progress) {
        progress = false;
        for (NodeId lat : order) {
            if (!g.is_latent(lat) || node_known[lat]) continue;
            NodeSet kids;
            for (NodeId c : pure_children(g, {lat})) {
                if (node_known[c]) kids.push_back(c);
            }
            std::stable_partition(kids.begin(), kids.end(), [&](NodeId c) { return !g.is_latent(c); });
            if (kids.size() < 2) continue;

            NodeId c1 = kids[0], c2 = kids[1];
            if (!known[c1][c2]) continue;
            NodeId best = -1;
            for (NodeId a = 0; a < d; ++a) {
                if (!node_known[a] || a == c1 || a == c2 || a == lat) continue;
                if (set_contains(desc[c1], a) || set_contains(desc[c2], a)) continue;
                if (!known[c1][a] || !known[c2][a]) continue;
                if (best < 0 || std::abs(s(c2, a)) > std::abs(s(c2, best))) best = a;
            }
            if (best < 0) continue;
            const double s12 = s(c1, c2), s1n = s(c1, best), s2n = s(c2, best);
            const double ratio = std::abs(s2n) < tol ? 0.0 : s12 * s1n / s2n;
            if (std::abs(s2n) < tol || std::abs(s12) < tol || ratio < tol * tol) {
                throw DegeneracyError("near-zero covariance in triple (" + g.name(c1) + ", " + g.name(c2) +
                                      ", " + g.name(best) + ")");
            }
            const double f1 = std::sqrt(ratio);
            std::map<NodeId, double> f;
            f[c1] = f1;
            for (NodeId c : kids) {
                if (c != c1 && known[c1][c]) f[c] = s(c1, c) / f1;
            }
            // Covariances of the latent with every known node.
            for (NodeId a = 0; a < d; ++a) {
                if (!node_known[a]) continue;
                double val = 0.0;
                bool ok = false;
                if (f.count(a)) {
                    val = f[a];
                    ok = true;
                } else {
                    for (const auto &[c, fc] : f) {
                        if (set_contains(desc[c], a) || !known[a][c]) continue;
                        val = s(a, c) / fc;
                        ok = true;
                        break;
                    }
                }
                if (ok) {
                    s(lat, a) = s(a, lat) = val;
                    known[lat][a] = known[a][lat] = 1;
                }
            }
            s(lat, lat) = 1.0;
            known[lat][lat] = 1;
            node_known[lat] = 1;
            res.pseudo_observed.push_back(lat);
            progress = true;
            break;
        }
    }
    std::sort(res.pseudo_observed.begin(), res.pseudo_observed.end());

    for (NodeId v : g.topological_order()) {
        const NodeSet &pa = g.parents(v);
        if (pa.empty()) continue;
        bool ok = node_known[v];
        for (NodeId p : pa) {
            ok = ok && node_known[p] && known[p][v];
            for (NodeId q : pa) ok = ok && known[p][q];
        }
        if (!ok) {
            for (NodeId p : pa) res.unsolved.emplace_back(p, v);
            continue;
        }
        const int k = static_cast<int>(pa.size());
        Eigen::MatrixXd spp(k, k);
        Eigen::VectorXd spv(k);
        for (int a = 0; a < k; ++a) {
            spv(a) = s(pa[a], v);
            for (int b = 0; b < k; ++b) spp(a, b) = s(pa[a], pa[b]);
        }
        const Eigen::VectorXd coef = spp.colPivHouseholderQr().solve(spv);
        for (int a = 0; a < k; ++a) res.solved.emplace_back(pa[a], v, coef(a));
    }
    std::sort(res.solved.begin(), res.solved.end());
    std::sort(res.unsolved.begin(), res.unsolved.end());
    return res;
}

}  // namespace polcm
