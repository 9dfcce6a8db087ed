#include "polcm/io.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace polcm {

using nlohmann::json;

GraphFile parse_graph_json(const json &j) {
    try {
        if (!j.is_object()) throw ParseError("graph file must be a JSON object");
        const int m = j.at("num_latent").get<int>();
        const int n = j.at("num_observed").get<int>();
        std::vector<std::string> names;
        if (j.contains("names")) names = j.at("names").get<std::vector<std::string>>();
        std::vector<Edge> edges;
        for (const auto &e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw ParseError("each edge must be [parent, child]");
            edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        GraphFile out{Graph(m, n, std::move(edges), std::move(names)), std::nullopt};
        if (j.contains("coefficients") && !j.at("coefficients").is_null()) {
            out.coefficients = coefficients_from_json(out.graph, j.at("coefficients"));
        }
        return out;
    } catch (const json::exception &e) {
        throw ParseError(std::string("malformed graph JSON: ") + e.what());
    } catch (const GraphError &e) {
        throw ParseError(std::string("invalid graph: ") + e.what());
    } catch (const SupportError &e) {
        throw ParseError(std::string("invalid coefficients: ") + e.what());
    }
}

json read_json_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error &e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_json_file(const std::string &path, const json &j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

GraphFile read_graph_json(const std::string &path) { return parse_graph_json(read_json_file(path)); }

json graph_to_json(const Graph &g) {
    json edges = json::array();
    for (const auto &[p, c] : g.edges()) edges.push_back({p, c});
    return {{"num_latent", g.num_latent()}, {"num_observed", g.num_observed()}, {"names", g.names()}, {"edges", edges}};
}

json coefficients_to_json(const WeightMatrix &f) {
    json out = json::array();
    for (const auto &[p, c] : f.edges()) out.push_back({p, c, f(p, c)});
    return out;
}

WeightMatrix coefficients_from_json(const Graph &g, const json &triples) {
    WeightMatrix f(g);
    for (const auto &t : triples) {
        if (!t.is_array() || t.size() != 3) throw ParseError("each coefficient must be [parent, child, value]");
        const int p = t[0].get<int>(), c = t[1].get<int>();
        if (!g.is_valid(p) || !g.is_valid(c) || !g.has_edge(p, c)) {
            throw ParseError("coefficient on missing edge (" + std::to_string(p) + ", " + std::to_string(c) + ")");
        }
        f.set(p, c, t[2].get<double>());
    }
    return f;
}

namespace {

std::vector<std::string> split_row(const std::string &line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r\"");
        const auto e = cell.find_last_not_of(" \t\r\"");
        cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

CsvTable read_csv(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    t.header = split_row(line);
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_row(line);
        if (cells.size() != t.header.size()) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                             " fields");
        }
        std::vector<double> row;
        for (const auto &c : cells) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(c, &used));
                if (used != c.size()) throw std::invalid_argument(c);
            } catch (const std::exception &) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) t.values(r, c) = rows[r][c];
    }
    return t;
}

void write_csv(const std::string &path, const std::vector<std::string> &header, const Eigen::MatrixXd &values) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    out.precision(std::numeric_limits<double>::max_digits10);
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) out << (c ? "," : "") << values(r, c);
        out << '\n';
    }
}

namespace {

json names_of(const Graph &g, const NodeSet &s) {
    json out = json::array();
    for (NodeId v : s) out.push_back(g.name(v));
    return out;
}

json sets_of(const Graph &g, const std::vector<NodeSet> &sets) {
    json out = json::array();
    for (const auto &s : sets) out.push_back(names_of(g, s));
    return out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json report_to_json(const IdentReport &r, const Graph &g) {
    json covers = json::array();
    for (const auto &c : r.atomic_covers) {
        covers.push_back({{"cover", names_of(g, c.cover)},
                          {"latent_count", c.latent_count},
                          {"witness_children", sets_of(g, c.witness_children)},
                          {"witness_neighbours", sets_of(g, c.witness_neighbours)}});
    }
    json basic = {{"pass", r.cond_basic.pass}, {"uncovered_latents", names_of(g, r.cond_basic.uncovered_latents)}};
    if (r.cond_basic.offending_cover) {
        basic["offending_cover"] = names_of(g, *r.cond_basic.offending_cover);
        basic["offending_pair"] = {g.name(r.cond_basic.offending_pair->first), g.name(r.cond_basic.offending_pair->second)};
    }
    auto instance = [&](const ColliderInstance &c) {
        return json{{"V", names_of(g, c.v)}, {"V1", names_of(g, c.v1)}, {"V2", names_of(g, c.v2)}, {"T", names_of(g, c.t)}};
    };
    json colliders = {{"pass", r.cond_colliders.pass}, {"complete", r.cond_colliders.complete}};
    json checked = json::array();
    for (const auto &c : r.cond_colliders.checked) checked.push_back(instance(c));
    colliders["checked"] = checked;
    colliders["failing"] = r.cond_colliders.failing ? instance(*r.cond_colliders.failing) : json(nullptr);

    json seps = json::array();
    for (const auto &[cover, sep] : r.thm3.separators) {
        seps.push_back({{"cover", names_of(g, cover)}, {"separator", names_of(g, sep)}});
    }
    json thm3 = {{"i_pass", r.thm3.i_pass},
                 {"i_offending", r.thm3.i_offending ? names_of(g, *r.thm3.i_offending) : json(nullptr)},
                 {"ii_pass", r.thm3.ii_pass},
                 {"ii_offending", r.thm3.ii_offending ? names_of(g, *r.thm3.ii_offending) : json(nullptr)},
                 {"complete", r.thm3.complete},
                 {"separators", seps}};
    json distinct = {{"pass", r.pairwise_distinct}};
    if (r.indistinct_pair) distinct["pair"] = {g.name(r.indistinct_pair->first), g.name(r.indistinct_pair->second)};
    return {{"verdict", to_string(r.verdict)},
            {"limits", {{"max_cover_size", r.limits.max_cover_size}, {"max_sep_size", r.limits.max_sep_size}}},
            {"atomic_covers", covers},
            {"cond_basic", basic},
            {"cond_colliders", colliders},
            {"thm3", thm3},
            {"pairwise_distinct", distinct},
            {"orth_indeterminacy", sets_of(g, r.orth_indeterminacy)}};
}

json estimate_to_json(const EstimateResult &r, const Graph &g, const EstimatorConfig &cfg) {
    json restarts = json::array();
    for (const auto &d : r.restarts) {
        restarts.push_back({{"restart_index", d.restart_index},
                            {"objective", finite_or_null(d.objective)},
                            {"nll", finite_or_null(d.nll)},
                            {"iterations", d.iterations},
                            {"converged", d.converged},
                            {"failed", d.failed},
                            {"message", d.message}});
    }
    std::vector<double> omega(r.omega_hat.omega.data(), r.omega_hat.omega.data() + r.omega_hat.omega.size());
    return {{"graph", graph_to_json(g)},
            {"method", cfg.method == Method::TR ? "tr" : "lm"},
            {"f_hat", coefficients_to_json(r.f_hat)},
            {"omega_hat", omega},
            {"omega_valid", r.omega_valid},
            {"nll", r.nll},
            {"objective", r.objective},
            {"restart_index", r.restart_index},
            {"converged", r.converged},
            {"iterations", r.iterations},
            {"config",
             {{"restarts", cfg.restarts},
              {"learning_rate", cfg.learning_rate},
              {"max_iters", cfg.max_iters},
              {"grad_tol", cfg.grad_tol},
              {"init_scale", cfg.init_scale},
              {"seed", cfg.seed}}},
            {"restarts", restarts}};
}

json sim_config_to_json(const SimConfig &cfg) {
    return {{"coeff_range", {cfg.coeff_lo, cfg.coeff_hi}},
            {"noise_var_range", {cfg.noise_lo, cfg.noise_hi}},
            {"noise", cfg.noise == NoiseKind::Gaussian ? "gaussian" : "uniform"},
            {"lrelu_alpha", cfg.lrelu_alpha ? json(*cfg.lrelu_alpha) : json(nullptr)},
            {"k", cfg.k},
            {"seed", cfg.seed},
            {"min_abs_coeff", cfg.min_abs_coeff}};
}

SimConfig sim_config_from_json(const json &j) {
    SimConfig cfg;
    try {
        cfg.coeff_lo = j.at("coeff_range")[0].get<double>();
        cfg.coeff_hi = j.at("coeff_range")[1].get<double>();
        cfg.noise_lo = j.at("noise_var_range")[0].get<double>();
        cfg.noise_hi = j.at("noise_var_range")[1].get<double>();
        cfg.noise = j.at("noise").get<std::string>() == "uniform" ? NoiseKind::Uniform : NoiseKind::Gaussian;
        if (!j.at("lrelu_alpha").is_null()) cfg.lrelu_alpha = j.at("lrelu_alpha").get<double>();
        cfg.k = j.at("k").get<int>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.min_abs_coeff = j.value("min_abs_coeff", 0.0);
    } catch (const json::exception &e) {
        throw ParseError(std::string("malformed simulation config: ") + e.what());
    }
    return cfg;
}

}  // namespace polcm
