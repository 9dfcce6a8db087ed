// polcm: identifiability checks, simulation, estimation and scoring for
// partially observed linear causal models.

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>

#include <CLI11.hpp>

#include "polcm/bench.h"
#include "polcm/io.h"

using namespace polcm;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotIdentifiable = 2;

struct Common {
    bool quiet = false;
};

void say(const Common &c, const std::string &msg) {
    if (!c.quiet) std::cout << msg << '\n';
}

NoiseKind parse_noise(const std::string &s) {
    if (s == "gaussian") return NoiseKind::Gaussian;
    if (s == "uniform") return NoiseKind::Uniform;
    throw std::invalid_argument("unknown noise kind '" + s + "'");
}

Method parse_method(const std::string &s) {
    if (s == "tr") return Method::TR;
    if (s == "lm") return Method::LM;
    throw std::invalid_argument("unknown method '" + s + "'");
}

// Source column for each observed node: by header name when every name is
// present, positional otherwise.
std::vector<int> column_sources(const Graph &g, const CsvTable &t) {
    const int m = g.num_latent(), n = g.num_observed();
    if (static_cast<int>(t.header.size()) != n) {
        throw ParseError("expected " + std::to_string(n) + " columns, found " + std::to_string(t.header.size()));
    }
    std::vector<int> src(n);
    bool by_name = true;
    for (int i = 0; i < n && by_name; ++i) {
        auto it = std::find(t.header.begin(), t.header.end(), g.name(m + i));
        if (it == t.header.end()) by_name = false;
        else src[i] = static_cast<int>(it - t.header.begin());
    }
    if (!by_name) std::iota(src.begin(), src.end(), 0);
    return src;
}

Eigen::MatrixXd align_columns(const Graph &g, const CsvTable &t) {
    const std::vector<int> src = column_sources(g, t);
    Eigen::MatrixXd out(t.values.rows(), g.num_observed());
    for (int i = 0; i < g.num_observed(); ++i) out.col(i) = t.values.col(src[i]);
    return out;
}

// Covariance rows follow the header order too, so both axes are permuted.
Eigen::MatrixXd align_covariance(const Graph &g, const CsvTable &t) {
    const int n = g.num_observed();
    if (t.values.rows() != t.values.cols()) throw ParseError("covariance CSV must be square");
    const std::vector<int> src = column_sources(g, t);
    Eigen::MatrixXd out(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) out(i, j) = t.values(src[i], src[j]);
    }
    return out;
}

int cmd_check(const std::string &graph_path, int max_cover, int max_sep, const std::string &out, const Common &c) {
    GraphFile gf;
    try {
        gf = read_graph_json(graph_path);
    } catch (const ParseError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    SearchLimits lim{max_cover, max_sep};
    const IdentReport r = check_identifiability(gf.graph, lim);
    const json j = report_to_json(r, gf.graph);
    if (!out.empty()) write_json_file(out, j);
    if (!c.quiet) {
        std::cout << "verdict: " << to_string(r.verdict) << '\n';
        std::cout << "atomic covers:";
        for (const auto &cv : j["atomic_covers"]) {
            if (cv["latent_count"].get<int>() > 0) std::cout << ' ' << cv["cover"].dump();
        }
        std::cout << "\ncondition 1: " << (r.cond_basic.pass ? "pass" : "fail")
                  << "\ncondition 2: " << (r.cond_colliders.pass ? "pass" : "fail")
                  << (r.cond_colliders.complete ? "" : " (search capped)") << "\nthm3 (i): " << (r.thm3.i_pass ? "pass" : "fail")
                  << "\nthm3 (ii): " << (r.thm3.ii_pass ? "pass" : "fail") << '\n';
        if (!r.orth_indeterminacy.empty()) std::cout << "orthogonal indeterminacy: " << j["orth_indeterminacy"].dump() << '\n';
    }
    return r.verdict == Verdict::FullyIdentifiable ? kExitOk : kExitNotIdentifiable;
}

int cmd_simulate(const std::string &graph_path, SimConfig cfg, const std::string &noise, std::optional<double> alpha,
                 const std::string &out, const std::string &truth_path, const Common &c) {
    const GraphFile gf = read_graph_json(graph_path);
    cfg.noise = parse_noise(noise);
    cfg.lrelu_alpha = alpha;
    Truth truth = make_truth(gf.graph, cfg);
    if (gf.coefficients) {
        truth.raw = *gf.coefficients;
        complete_truth(gf.graph, truth);
    }
    const Dataset d = simulate(gf.graph, truth.raw, truth.omega, cfg);
    write_csv(out, d.names, d.samples);
    if (!truth_path.empty()) {
        std::vector<double> w(truth.omega.omega.data(), truth.omega.omega.data() + truth.omega.omega.size());
        std::vector<double> sd(truth.node_sd.data(), truth.node_sd.data() + truth.node_sd.size());
        std::vector<double> slope(truth.mean_slope.data(), truth.mean_slope.data() + truth.mean_slope.size());
        write_json_file(truth_path, {{"graph", graph_to_json(gf.graph)},
                                     {"coefficients", coefficients_to_json(truth.raw)},
                                     {"standardized_coefficients", coefficients_to_json(truth.standardized)},
                                     {"omega", w},
                                     {"node_sd", sd},
                                     {"mean_slope", slope},
                                     {"config", sim_config_to_json(cfg)}});
    }
    say(c, "wrote " + std::to_string(d.samples.rows()) + " samples to " + out);
    return kExitOk;
}

int cmd_estimate(const std::string &graph_path, const std::string &data_path, const std::string &cov_path, double k,
                 EstimatorConfig cfg, const std::string &method, const std::string &gradient,
                 const std::string &backend, const std::string &out, const Common &c) {
    const GraphFile gf = read_graph_json(graph_path);
    cfg.method = parse_method(method);
    cfg.gradient = gradient == "fd" ? GradientBackend::FiniteDifference : GradientBackend::AnalyticReverse;
    cfg.cov_backend = backend == "trek" ? CovBackend::Trek : CovBackend::Matrix;
    if (data_path.empty() == cov_path.empty()) throw std::invalid_argument("give exactly one of --data or --cov");
    Eigen::MatrixXd sigma_hat;
    if (!data_path.empty()) {
        Dataset d;
        d.samples = align_columns(gf.graph, read_csv(data_path));
        d.names.assign(gf.graph.names().begin() + gf.graph.num_latent(), gf.graph.names().end());
        sigma_hat = sample_covariance(standardize(d));
        if (k <= 0) k = static_cast<double>(d.samples.rows());
    } else {
        sigma_hat = align_covariance(gf.graph, read_csv(cov_path));
        if (k <= 0) throw std::invalid_argument("--k is required with --cov");
    }
    const EstimateResult r = estimate(gf.graph, sigma_hat, k, cfg);
    const json j = estimate_to_json(r, gf.graph, cfg);
    if (!out.empty()) write_json_file(out, j);
    if (!c.quiet) {
        std::cout << "nll " << r.nll << " (restart " << r.restart_index << ", " << r.iterations << " iterations)\n";
        for (const auto &t : j["f_hat"]) {
            std::cout << "  " << gf.graph.name(t[0]) << " -> " << gf.graph.name(t[1]) << ": " << t[2].get<double>()
                      << '\n';
        }
    }
    return kExitOk;
}

int cmd_eval(const std::string &truth_path, const std::string &est_path, const std::string &metric, bool full_q,
             const std::string &out, const Common &c) {
    const json tj = read_json_file(truth_path);
    const json ej = read_json_file(est_path);
    const Graph gt = parse_graph_json(tj.at("graph")).graph;
    const Graph ge = parse_graph_json(ej.at("graph")).graph;
    if (gt.num_latent() != ge.num_latent() || gt.num_observed() != ge.num_observed() || gt.edges() != ge.edges()) {
        throw ParseError("truth and estimate refer to different graphs");
    }
    const auto &key = tj.contains("standardized_coefficients") ? "standardized_coefficients" : "coefficients";
    const WeightMatrix ft = coefficients_from_json(gt, tj.at(key));
    const WeightMatrix fh = coefficients_from_json(gt, ej.at("f_hat"));
    json result = {{"metric", metric}};
    if (metric == "gs") {
        result["mse"] = mse_group_sign(ft, fh);
    } else if (metric == "ot") {
        OrthogonalOptions oo;
        oo.full_q = full_q;
        const MetricResult mr = mse_orthogonal(ft, fh, oo);
        result["mse"] = mr.mse;
        result["full_q"] = full_q;
        if (mr.q_star) {
            json q = json::array();
            for (int i = 0; i < mr.q_star->rows(); ++i) {
                json row = json::array();
                for (int j = 0; j < mr.q_star->cols(); ++j) row.push_back((*mr.q_star)(i, j));
                q.push_back(row);
            }
            result["q_star"] = q;
        }
        result["restarts"] = mr.restarts;
        result["iterations"] = mr.iterations;
    } else {
        throw std::invalid_argument("unknown metric '" + metric + "'");
    }
    if (!out.empty()) write_json_file(out, result);
    say(c, metric + " mse " + std::to_string(result["mse"].get<double>()));
    return kExitOk;
}

std::vector<Fixture> load_fixtures(const std::vector<std::string> &paths) {
    std::vector<Fixture> out;
    for (const auto &p : paths) {
        std::vector<std::filesystem::path> files;
        if (std::filesystem::is_directory(p)) {
            for (const auto &e : std::filesystem::directory_iterator(p)) {
                if (e.path().extension() == ".json") files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
        } else {
            files.emplace_back(p);
        }
        for (const auto &f : files) out.push_back({f.stem().string(), read_graph_json(f.string()).graph, false});
    }
    return out;
}

int cmd_bench(BenchSpec spec, const std::vector<std::string> &fixture_paths, int generated, std::uint64_t gen_seed,
              const std::vector<std::string> &methods, const std::string &noise, std::optional<double> alpha,
              const std::string &out, const std::string &manifest, const Common &c) {
    spec.fixtures = load_fixtures(fixture_paths);
    for (int i = 0; i < generated; ++i) {
        spec.fixtures.push_back(generate_fixture(derive_seed(gen_seed, static_cast<std::uint64_t>(i)),
                                                 "generated" + std::to_string(i + 1)));
    }
    spec.methods.clear();
    for (const auto &m : methods) spec.methods.push_back(parse_method(m));
    spec.noise = parse_noise(noise);
    spec.lrelu_alpha = alpha;
    const auto cells = run_bench(spec);
    if (!out.empty()) write_bench_csv(out, cells);
    if (!manifest.empty()) write_json_file(manifest, bench_manifest(spec, cells));
    if (!c.quiet) {
        // mean (std) of the group-sign and orthogonal metrics per method and K
        std::map<std::pair<std::string, int>, std::vector<const CellResult *>> groups;
        for (const auto &cell : cells) groups[{method_name(cell.method), cell.k}].push_back(&cell);
        std::cout << std::left << std::setw(8) << "method" << std::setw(8) << "K" << std::setw(22) << "mse_gs"
                  << std::setw(22) << "mse_ot" << "failed\n";
        for (const auto &[key, list] : groups) {
            std::vector<double> gs, ot;
            int failed = 0;
            for (const auto *cell : list) {
                if (cell->failed) {
                    ++failed;
                    continue;
                }
                gs.push_back(cell->mse_gs);
                if (cell->mse_ot) ot.push_back(*cell->mse_ot);
            }
            auto fmt = [](const std::vector<double> &v) {
                if (v.empty()) return std::string("-");
                const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
                double var = 0.0;
                for (double x : v) var += (x - mean) * (x - mean);
                std::ostringstream os;
                os << std::fixed << std::setprecision(4) << mean << " (" << std::sqrt(var / v.size()) << ")";
                return os.str();
            };
            std::cout << std::left << std::setw(8) << key.first << std::setw(8) << key.second << std::setw(22)
                      << fmt(gs) << std::setw(22) << fmt(ot) << failed << '\n';
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Identifiability checks and estimation for partially observed linear causal models"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_flag("--quiet,-q", common.quiet, "Suppress console output");

    std::string graph_path, out;
    int max_cover = 4, max_sep = 5;
    auto *check = app.add_subcommand("check", "Evaluate the graphical identifiability conditions");
    check->add_option("graph", graph_path, "Graph JSON")->required();
    check->add_option("--max-cover-size", max_cover, "Largest atomic cover searched")->check(CLI::PositiveNumber);
    check->add_option("--max-sep-size", max_sep, "Largest separator searched")->check(CLI::NonNegativeNumber);
    check->add_option("--out", out, "Report JSON");

    SimConfig sim;
    std::string noise = "gaussian", truth_path;
    std::optional<double> alpha;
    auto *simulate_cmd = app.add_subcommand("simulate", "Draw a random model and samples from it");
    simulate_cmd->add_option("graph", graph_path, "Graph JSON")->required();
    simulate_cmd->add_option("--k", sim.k, "Sample size");
    simulate_cmd->add_option("--seed", sim.seed, "Random seed");
    simulate_cmd->add_option("--noise", noise, "gaussian or uniform");
    simulate_cmd->add_option("--lrelu-alpha", alpha, "Leaky-ReLU slope for the misspecified regime");
    simulate_cmd->add_option("--coeff-lo", sim.coeff_lo);
    simulate_cmd->add_option("--coeff-hi", sim.coeff_hi);
    simulate_cmd->add_option("--noise-lo", sim.noise_lo);
    simulate_cmd->add_option("--noise-hi", sim.noise_hi);
    simulate_cmd->add_option("--min-abs-coeff", sim.min_abs_coeff);
    simulate_cmd->add_option("--out", out, "Dataset CSV")->required();
    simulate_cmd->add_option("--truth", truth_path, "Ground-truth JSON");

    EstimatorConfig est;
    std::string data_path, cov_path, method = "tr", gradient = "analytic", backend = "matrix";
    double k = 0;
    auto *estimate_cmd = app.add_subcommand("estimate", "Maximum-likelihood estimation of edge coefficients");
    estimate_cmd->add_option("graph", graph_path, "Graph JSON")->required();
    estimate_cmd->add_option("--data", data_path, "Dataset CSV (standardized before fitting)");
    estimate_cmd->add_option("--cov", cov_path, "Covariance CSV");
    estimate_cmd->add_option("--k", k, "Sample count (required with --cov)");
    estimate_cmd->add_option("--method", method, "tr or lm");
    estimate_cmd->add_option("--restarts", est.restarts);
    estimate_cmd->add_option("--lr", est.learning_rate);
    estimate_cmd->add_option("--max-iters", est.max_iters);
    estimate_cmd->add_option("--seed", est.seed);
    estimate_cmd->add_option("--gradient", gradient, "analytic or fd");
    estimate_cmd->add_option("--backend", backend, "matrix or trek");
    estimate_cmd->add_option("--out", out, "Estimate JSON");

    std::string est_path, metric = "gs";
    bool full_q = false;
    auto *eval_cmd = app.add_subcommand("eval", "Score an estimate against ground truth");
    eval_cmd->add_option("--truth", truth_path, "Ground-truth JSON")->required();
    eval_cmd->add_option("--estimate", est_path, "Estimate JSON")->required();
    eval_cmd->add_option("--metric", metric, "gs or ot");
    eval_cmd->add_flag("--full-q", full_q, "Rotate all rows, not only the latent block");
    eval_cmd->add_option("--out", out, "Metrics JSON");

    BenchSpec bench;
    std::vector<std::string> fixture_paths, methods{"tr"};
    std::string manifest;
    int generated = 0;
    std::uint64_t gen_seed = 0;
    auto *bench_cmd = app.add_subcommand("bench", "Run the simulation benchmark");
    bench_cmd->add_option("--fixtures", fixture_paths, "Graph files or directories")->required();
    bench_cmd->add_option("--generated", generated, "Additional random fixtures");
    bench_cmd->add_option("--generated-seed", gen_seed);
    bench_cmd->add_option("--sizes", bench.sample_sizes);
    bench_cmd->add_option("--seeds", bench.seeds);
    bench_cmd->add_option("--methods", methods);
    bench_cmd->add_option("--noise", noise);
    bench_cmd->add_option("--lrelu-alpha", alpha);
    bench_cmd->add_option("--restarts", bench.estimator.restarts);
    bench_cmd->add_option("--max-iters", bench.estimator.max_iters);
    bench_cmd->add_flag("--full-q", bench.full_q);
    bench_cmd->add_option("--out", out, "Results CSV");
    bench_cmd->add_option("--manifest", manifest, "Manifest JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? kExitOk : kExitError;
    }

    try {
        if (check->parsed()) return cmd_check(graph_path, max_cover, max_sep, out, common);
        if (simulate_cmd->parsed()) return cmd_simulate(graph_path, sim, noise, alpha, out, truth_path, common);
        if (estimate_cmd->parsed()) {
            return cmd_estimate(graph_path, data_path, cov_path, k, est, method, gradient, backend, out, common);
        }
        if (eval_cmd->parsed()) return cmd_eval(truth_path, est_path, metric, full_q, out, common);
        if (bench_cmd->parsed()) {
            return cmd_bench(bench, fixture_paths, generated, gen_seed, methods, noise, alpha, out, manifest, common);
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
