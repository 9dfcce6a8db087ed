#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "polcm/covariance.h"
#include "polcm/estimator.h"
#include "polcm/graph.h"
#include "polcm/identifiability.h"
#include "polcm/metrics.h"
#include "polcm/simulator.h"

namespace polcm {

class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct GraphFile {
    Graph graph;
    std::optional<WeightMatrix> coefficients;
};

GraphFile parse_graph_json(const nlohmann::json &j);
GraphFile read_graph_json(const std::string &path);
nlohmann::json graph_to_json(const Graph &g);

// [[parent, child, value], ...] in edge order.
nlohmann::json coefficients_to_json(const WeightMatrix &f);
WeightMatrix coefficients_from_json(const Graph &g, const nlohmann::json &triples);

struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

CsvTable read_csv(const std::string &path);
void write_csv(const std::string &path, const std::vector<std::string> &header, const Eigen::MatrixXd &values);

nlohmann::json read_json_file(const std::string &path);
void write_json_file(const std::string &path, const nlohmann::json &j);

nlohmann::json report_to_json(const IdentReport &r, const Graph &g);
nlohmann::json estimate_to_json(const EstimateResult &r, const Graph &g, const EstimatorConfig &cfg);
nlohmann::json sim_config_to_json(const SimConfig &cfg);
SimConfig sim_config_from_json(const nlohmann::json &j);

}  // namespace polcm
