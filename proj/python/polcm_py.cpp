// Python bindings. Graphs, reports and estimates cross the boundary as JSON
// text; matrices as NumPy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "polcm/bench.h"
#include "polcm/io.h"

namespace py = pybind11;
using json = nlohmann::json;

namespace {

polcm::Graph graph_of(const std::string &text) { return polcm::parse_graph_json(json::parse(text)).graph; }

polcm::Method method_of(const std::string &name) {
    if (name == "tr") return polcm::Method::TR;
    if (name == "lm") return polcm::Method::LM;
    throw std::invalid_argument("method must be 'tr' or 'lm'");
}

}  // namespace

PYBIND11_MODULE(_polcm, m) {
    m.doc() = "Partially observed linear causal models";

    py::register_exception<polcm::ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<polcm::EstimationFailed>(m, "EstimationFailed", PyExc_RuntimeError);

    m.def(
        "check",
        [](const std::string &graph) {
            const polcm::Graph g = graph_of(graph);
            return polcm::report_to_json(polcm::check_identifiability(g), g).dump();
        },
        py::arg("graph"), "Identifiability report for a graph given as JSON text.");

    m.def(
        "covariance",
        [](const std::string &graph, const Eigen::MatrixXd &f, const Eigen::VectorXd &omega) {
            const polcm::Graph g = graph_of(graph);
            return polcm::covariance_full(polcm::WeightMatrix(g, f), polcm::NoiseSpec(omega, g.num_latent()))
                .sigma_full;
        },
        py::arg("graph"), py::arg("f"), py::arg("omega"), "Full model covariance.");

    m.def(
        "simulate",
        [](const std::string &graph, const std::string &config) {
            const polcm::Graph g = graph_of(graph);
            const polcm::SimConfig cfg = polcm::sim_config_from_json(json::parse(config));
            const polcm::Truth t = polcm::make_truth(g, cfg);
            const polcm::Dataset d = polcm::simulate(g, t.raw, t.omega, cfg);
            return py::make_tuple(d.samples, d.names, t.standardized.matrix());
        },
        py::arg("graph"), py::arg("config"),
        "Draws observed samples; returns (samples, names, standardized coefficients).");

    m.def(
        "estimate",
        [](const std::string &graph, const Eigen::MatrixXd &sigma_hat, double k, const std::string &method,
           int restarts, std::uint64_t seed, int threads) {
            const polcm::Graph g = graph_of(graph);
            polcm::EstimatorConfig cfg;
            cfg.method = method_of(method);
            cfg.restarts = restarts;
            cfg.seed = seed;
            cfg.threads = threads;
            cfg.validate();
            polcm::EstimateResult r;
            {
                py::gil_scoped_release release;
                r = polcm::estimate(g, sigma_hat, k, cfg);
            }
            return polcm::estimate_to_json(r, g, cfg).dump();
        },
        py::arg("graph"), py::arg("sigma_hat"), py::arg("k"), py::arg("method") = "tr", py::arg("restarts") = 30,
        py::arg("seed") = 0, py::arg("threads") = 0, "Maximum-likelihood fit; returns the estimate as JSON text.");

    m.def(
        "mse_group_sign",
        [](const std::string &graph, const Eigen::MatrixXd &f_true, const Eigen::MatrixXd &f_hat) {
            const polcm::Graph g = graph_of(graph);
            return polcm::mse_group_sign(polcm::WeightMatrix(g, f_true), polcm::WeightMatrix(g, f_hat));
        },
        py::arg("graph"), py::arg("f_true"), py::arg("f_hat"));

    m.def(
        "mse_orthogonal",
        [](const std::string &graph, const Eigen::MatrixXd &f_true, const Eigen::MatrixXd &f_hat, bool full_q) {
            const polcm::Graph g = graph_of(graph);
            polcm::OrthogonalOptions o;
            o.full_q = full_q;
            return polcm::mse_orthogonal(polcm::WeightMatrix(g, f_true), polcm::WeightMatrix(g, f_hat), o).mse;
        },
        py::arg("graph"), py::arg("f_true"), py::arg("f_hat"), py::arg("full_q") = false);
}
