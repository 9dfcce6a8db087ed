#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "test_util.h"

using namespace polcm;
using polcm::testing::load_fixture;
using polcm::testing::random_dag;
using polcm::testing::random_weights;
using json = nlohmann::json;

namespace {

std::string temp_path(const std::string &name) {
    const auto dir = std::filesystem::temp_directory_path() / "polcm_io_test";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

void write_text(const std::string &path, const std::string &text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST(GraphJson, ParsesFixtureWithNames) {
    const GraphFile f = read_graph_json(std::string(POLCM_FIXTURE_DIR) + "/gs/gs1.json");
    EXPECT_EQ(f.graph.num_latent(), 3);
    EXPECT_EQ(f.graph.name(0), "L1");
    EXPECT_FALSE(f.coefficients.has_value());
}

TEST(GraphJson, DefaultNamesAndCoefficients) {
    const json j = {{"num_latent", 1},
                    {"num_observed", 2},
                    {"edges", {{0, 1}, {0, 2}}},
                    {"coefficients", {{0, 1, 0.5}, {0, 2, -0.25}}}};
    const GraphFile f = parse_graph_json(j);
    EXPECT_EQ(f.graph.name(0), "L1");
    EXPECT_EQ(f.graph.name(2), "X3");
    ASSERT_TRUE(f.coefficients.has_value());
    EXPECT_EQ((*f.coefficients)(0, 2), -0.25);
}

TEST(GraphJson, RejectsMalformedInput) {
    EXPECT_THROW(parse_graph_json(json::array()), ParseError);
    EXPECT_THROW(parse_graph_json(json{{"num_latent", 1}}), ParseError);
    EXPECT_THROW(parse_graph_json(json{{"num_latent", 0}, {"num_observed", 2}, {"edges", {{0, 1, 2}}}}), ParseError);
    // Cycle.
    EXPECT_THROW(parse_graph_json(json{{"num_latent", 0}, {"num_observed", 2}, {"edges", {{0, 1}, {1, 0}}}}),
                 ParseError);
    // Coefficient on a non-edge.
    EXPECT_THROW(parse_graph_json(json{{"num_latent", 0},
                                       {"num_observed", 3},
                                       {"edges", {{0, 1}}},
                                       {"coefficients", {{1, 2, 0.3}}}}),
                 ParseError);
    const std::string p = temp_path("broken.json");
    write_text(p, "{\"num_latent\": 1, ");
    EXPECT_THROW(read_graph_json(p), ParseError);
    EXPECT_THROW(read_graph_json(temp_path("does_not_exist.json")), ParseError);
}

TEST(GraphJsonProperty, RoundTrip) {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 50; ++trial) {
        const Graph g = random_dag(rng, trial % 4, 6, 0.3);
        const WeightMatrix f = random_weights(rng, g);
        json j = graph_to_json(g);
        j["coefficients"] = coefficients_to_json(f);
        const GraphFile back = parse_graph_json(json::parse(j.dump()));
        ASSERT_EQ(back.graph.edges(), g.edges());
        ASSERT_EQ(back.graph.names(), g.names());
        ASSERT_EQ(back.coefficients->matrix(), f.matrix());
    }
}

TEST(Csv, RoundTripIsExact) {
    std::mt19937_64 rng(72);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd v(25, 4);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = nd(rng) * 1e3;
    const std::string p = temp_path("table.csv");
    write_csv(p, {"a", "b", "c", "d"}, v);
    const CsvTable t = read_csv(p);
    EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b", "c", "d"}));
    EXPECT_EQ(t.values, v);
}

TEST(Csv, Diagnostics) {
    const std::string ragged = temp_path("ragged.csv");
    write_text(ragged, "a,b\n1,2\n3\n");
    try {
        read_csv(ragged);
        FAIL() << "expected ParseError";
    } catch (const ParseError &e) {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    }
    const std::string text = temp_path("text.csv");
    write_text(text, "a,b\n1,x\n");
    EXPECT_THROW(read_csv(text), ParseError);
    const std::string empty = temp_path("empty.csv");
    write_text(empty, "");
    EXPECT_THROW(read_csv(empty), ParseError);
}

TEST(SimConfigJson, RoundTrip) {
    SimConfig c;
    c.coeff_lo = -1.5;
    c.noise = NoiseKind::Uniform;
    c.lrelu_alpha = 0.3;
    c.k = 1234;
    c.seed = 0xfedcba9876543210ULL;
    const SimConfig b = sim_config_from_json(json::parse(sim_config_to_json(c).dump()));
    EXPECT_EQ(b.coeff_lo, -1.5);
    EXPECT_EQ(b.noise, NoiseKind::Uniform);
    EXPECT_EQ(*b.lrelu_alpha, 0.3);
    EXPECT_EQ(b.k, 1234);
    EXPECT_EQ(b.seed, c.seed);
    EXPECT_THROW(sim_config_from_json(json{{"k", 3}}), ParseError);
}

TEST(ReportJson, CarriesVerdictAndDiagnostics) {
    const Graph g = load_fixture("ot/ot1.json");
    const json j = report_to_json(check_identifiability(g), g);
    EXPECT_EQ(j.at("verdict"), "IdentifiableUpToOrthogonal");
    EXPECT_EQ(j.at("orth_indeterminacy"), json::parse(R"([["L1","L2"]])"));
    EXPECT_FALSE(j.at("thm3").at("i_pass").get<bool>());
    EXPECT_EQ(j.at("thm3").at("i_offending"), json::parse(R"(["L1","L2"])"));
    EXPECT_TRUE(j.at("atomic_covers").is_array());
}

TEST(EstimateJson, Fields) {
    const Graph g = load_fixture("misc/factor_three.json");
    Eigen::MatrixXd s(3, 3);
    s << 1, 0.30, 0.35, 0.30, 1, 0.42, 0.35, 0.42, 1;
    EstimatorConfig c;
    c.restarts = 2;
    c.threads = 1;
    const EstimateResult r = estimate(g, s, 100.0, c);
    const json j = estimate_to_json(r, g, c);
    EXPECT_EQ(j.at("method"), "tr");
    EXPECT_EQ(j.at("f_hat").size(), 3u);
    EXPECT_EQ(j.at("omega_hat").size(), 4u);
    EXPECT_EQ(j.at("restarts").size(), 2u);
    EXPECT_TRUE(j.at("omega_valid").get<bool>());
    EXPECT_DOUBLE_EQ(j.at("nll").get<double>(), r.nll);
    const WeightMatrix back = coefficients_from_json(g, j.at("f_hat"));
    EXPECT_EQ(back.matrix(), r.f_hat.matrix());
}
