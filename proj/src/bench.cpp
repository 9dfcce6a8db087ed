#include "polcm/bench.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "polcm/io.h"
#include "polcm/metrics.h"

namespace polcm {

namespace {

std::uint64_t name_hash(const std::string &s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

std::string method_name(Method m) { return m == Method::TR ? "tr" : "lm"; }

void complete_truth(const Graph &g, Truth &t) {
    const ReferenceStats stats = reference_statistics(g, t.raw, t.omega, t.cfg);
    t.node_sd = stats.sd;
    t.mean_slope = stats.mean_slope;
    t.standardized = effective_coefficients(t.raw, stats);
}

Truth make_truth(const Graph &g, const SimConfig &cfg) {
    auto [f, w] = random_polcm(g, cfg);
    Truth t{f, w, f, {}, {}, cfg};
    complete_truth(g, t);
    return t;
}

Fixture generate_fixture(std::uint64_t seed, const std::string &name) {
    std::mt19937_64 rng(derive_seed(seed, 0xf1));
    std::uniform_int_distribution<int> size_d(12, 18), lat_d(2, 4);
    const int d = size_d(rng), m = lat_d(rng), n = d - m;
    // Random order over all nodes; edges only go forward in it.
    std::vector<int> order(d);
    for (int i = 0; i < d; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> pos(d);
    auto reindex = [&]() {
        for (int i = 0; i < d; ++i) pos[order[i]] = i;
    };
    reindex();
    std::set<Edge> edges;
    for (int l = 0; l < m; ++l) {
        std::vector<int> later;
        for (int x = m; x < d; ++x) {
            if (pos[x] > pos[l]) later.push_back(x);
        }
        if (later.size() < 3) {
            order.erase(order.begin() + pos[l]);
            order.insert(order.begin(), l);
            reindex();
            later.clear();
            for (int x = m; x < d; ++x) later.push_back(x);
        }
        std::shuffle(later.begin(), later.end(), rng);
        for (int c = 0; c < 3; ++c) edges.insert({l, later[c]});
    }
    std::bernoulli_distribution extra(0.12);
    for (int a = 0; a < d; ++a) {
        for (int b = a + 1; b < d; ++b) {
            if (extra(rng)) edges.insert({order[a], order[b]});
        }
    }
    std::vector<Edge> list(edges.begin(), edges.end());
    return Fixture{name, Graph(m, n, list), true};
}

void BenchSpec::validate() const {
    if (fixtures.empty()) throw std::invalid_argument("bench needs at least one fixture");
    if (sample_sizes.empty()) throw std::invalid_argument("bench needs at least one sample size");
    if (seeds.empty()) throw std::invalid_argument("bench needs at least one seed");
    if (methods.empty()) throw std::invalid_argument("bench needs at least one method");
    estimator.validate();
}

CellResult run_cell(const Fixture &fx, Method method, int k, std::uint64_t seed, const BenchSpec &spec) {
    CellResult cell;
    cell.fixture = fx.name;
    cell.method = method;
    cell.k = k;
    cell.seed = seed;
    cell.model_seed = derive_seed(seed, name_hash(fx.name));
    cell.data_seed = derive_seed(cell.model_seed, static_cast<std::uint64_t>(k));
    cell.estimator_seed = derive_seed(cell.data_seed, 7);
    const auto start = std::chrono::steady_clock::now();
    try {
        SimConfig sim;
        sim.seed = cell.model_seed;
        sim.noise = spec.noise;
        sim.lrelu_alpha = spec.lrelu_alpha;
        const Truth truth = make_truth(fx.graph, sim);
        SimConfig draw = sim;
        draw.k = k;
        draw.seed = cell.data_seed;
        const Dataset data = standardize(simulate(fx.graph, truth.raw, truth.omega, draw));
        EstimatorConfig ec = spec.estimator;
        ec.method = method;
        ec.seed = cell.estimator_seed;
        const EstimateResult est = estimate(fx.graph, sample_covariance(data), k, ec);
        cell.nll = est.nll;
        cell.mse_gs = mse_group_sign(truth.standardized, est.f_hat);
        if (fx.graph.num_latent() > 0) {
            OrthogonalOptions oo;
            oo.full_q = spec.full_q;
            oo.seed = cell.estimator_seed;
            cell.mse_ot = mse_orthogonal(truth.standardized, est.f_hat, oo).mse;
        }
    } catch (const std::exception &e) {
        cell.failed = true;
        cell.error = e.what();
    }
    cell.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return cell;
}

std::vector<CellResult> run_bench(const BenchSpec &spec) {
    spec.validate();
    struct Task {
        const Fixture *fx;
        Method method;
        int k;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const auto &fx : spec.fixtures) {
        for (Method m : spec.methods) {
            for (int k : spec.sample_sizes) {
                for (auto s : spec.seeds) tasks.push_back({&fx, m, k, s});
            }
        }
    }
    std::vector<CellResult> out(tasks.size());
    const int threads = std::max(1, std::min<int>(spec.threads > 0 ? spec.threads : default_thread_count(),
                                                  static_cast<int>(tasks.size())));
    BenchSpec inner = spec;
    if (threads > 1) inner.estimator.threads = 1;
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            out[i] = run_cell(*tasks[i].fx, tasks[i].method, tasks[i].k, tasks[i].seed, inner);
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto &t : pool) t.join();
    }
    return out;
}

void write_bench_csv(const std::string &path, const std::vector<CellResult> &cells) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "fixture,method,K,seed,metric,value,wall_ms\n";
    out.precision(10);
    for (const auto &c : cells) {
        auto row = [&](const std::string &metric, const std::string &value) {
            out << c.fixture << ',' << method_name(c.method) << ',' << c.k << ',' << c.seed << ',' << metric << ','
                << value << ',' << c.wall_ms << '\n';
        };
        if (c.failed) {
            row("error", "nan");
            continue;
        }
        auto num = [](double v) {
            std::ostringstream os;
            os.precision(10);
            os << v;
            return os.str();
        };
        row("mse_gs", num(c.mse_gs));
        if (c.mse_ot) row("mse_ot", num(*c.mse_ot));
        row("nll", num(c.nll));
    }
}

nlohmann::json bench_manifest(const BenchSpec &spec, const std::vector<CellResult> &cells) {
    using nlohmann::json;
    json fixtures = json::array();
    for (const auto &fx : spec.fixtures) {
        fixtures.push_back({{"name", fx.name}, {"generated", fx.generated}, {"graph", graph_to_json(fx.graph)}});
    }
    json rows = json::array();
    for (const auto &c : cells) {
        rows.push_back({{"fixture", c.fixture},
                        {"method", method_name(c.method)},
                        {"K", c.k},
                        {"seed", c.seed},
                        {"model_seed", c.model_seed},
                        {"data_seed", c.data_seed},
                        {"estimator_seed", c.estimator_seed},
                        {"mse_gs", c.failed ? json(nullptr) : json(c.mse_gs)},
                        {"mse_ot", c.mse_ot && !c.failed ? json(*c.mse_ot) : json(nullptr)},
                        {"wall_ms", c.wall_ms},
                        {"failed", c.failed},
                        {"error", c.error}});
    }
    SimConfig sim;
    sim.noise = spec.noise;
    sim.lrelu_alpha = spec.lrelu_alpha;
    return {{"fixtures", fixtures},
            {"simulation", sim_config_to_json(sim)},
            {"estimator",
             {{"restarts", spec.estimator.restarts},
              {"learning_rate", spec.estimator.learning_rate},
              {"max_iters", spec.estimator.max_iters},
              {"grad_tol", spec.estimator.grad_tol},
              {"init_scale", spec.estimator.init_scale}}},
            {"full_q", spec.full_q},
            {"seed_derivation",
             "model_seed = derive(seed, fnv1a(fixture)); data_seed = derive(model_seed, K); "
             "estimator_seed = derive(data_seed, 7)"},
            {"cells", rows}};
}

}  // namespace polcm
