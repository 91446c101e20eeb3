#include <gtest/gtest.h>

#include <map>

#include "fixtures.hpp"

using namespace mupmu;

namespace {

nlohmann::json chain3_doc()
{
    return nlohmann::json::parse(R"({
        "buses": [{"id": 0, "zero_injection": false}, {"id": 1, "zero_injection": false},
                  {"id": 2, "zero_injection": false}],
        "lines": [{"id": 0, "from": 0, "to": 1, "r": 0.02, "x": 0.04},
                  {"id": 1, "from": 1, "to": 2, "r": 0.025, "x": 0.045}],
        "slack": 0})");
}

std::string load_error(const nlohmann::json& doc)
{
    try {
        load_grid(doc);
    } catch (const SchemaError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(LoadGrid, ChainDocument)
{
    const auto g = load_grid(chain3_doc());
    EXPECT_EQ(g.num_buses(), 3);
    EXPECT_EQ(g.num_lines(), 2);
    EXPECT_EQ(g.slack_bus(), 0);
    EXPECT_DOUBLE_EQ(g.base_voltage(), 1.0);
    EXPECT_EQ(g.degree(1), 2);
}

TEST(LoadGrid, RejectsSelfLoop)
{
    auto doc = chain3_doc();
    doc["lines"][0]["to"] = 0;
    EXPECT_NE(load_error(doc).find("self-loop on line 0"), std::string::npos);
}

TEST(LoadGrid, RejectsDuplicateLine)
{
    auto doc = chain3_doc();
    doc["lines"][1]["from"] = 1;
    doc["lines"][1]["to"] = 0;
    EXPECT_NE(load_error(doc).find("duplicate line 1"), std::string::npos);
}

TEST(LoadGrid, RejectsZeroImpedance)
{
    auto doc = chain3_doc();
    doc["lines"][1]["r"] = 0.0;
    doc["lines"][1]["x"] = 0.0;
    EXPECT_NE(load_error(doc).find("zero impedance on line 1"), std::string::npos);
}

TEST(LoadGrid, RejectsNegativeResistance)
{
    auto doc = chain3_doc();
    doc["lines"][0]["r"] = -0.1;
    EXPECT_NE(load_error(doc).find("line 0"), std::string::npos);
}

TEST(LoadGrid, RejectsDisconnectedGraph)
{
    auto doc = chain3_doc();
    doc["buses"].push_back({{"id", 3}, {"zero_injection", false}});
    EXPECT_NE(load_error(doc).find("disconnected"), std::string::npos);
    EXPECT_NE(load_error(doc).find("bus 3"), std::string::npos);
}

TEST(LoadGrid, RejectsUnknownKeysAndGaps)
{
    auto doc = chain3_doc();
    doc["extra"] = 1;
    EXPECT_NE(load_error(doc).find("unknown key 'extra'"), std::string::npos);
    doc = chain3_doc();
    doc["buses"][2]["id"] = 5;
    EXPECT_FALSE(load_error(doc).empty());
    doc = chain3_doc();
    doc["buses"][0].erase("zero_injection");
    EXPECT_NE(load_error(doc).find("zero_injection"), std::string::npos);
}

TEST(LoadGrid, RejectsZeroInjectionSlack)
{
    auto doc = chain3_doc();
    doc["buses"][0]["zero_injection"] = true;
    EXPECT_FALSE(load_error(doc).empty());
}

TEST(LoadGrid, ShippedFeederIsRadial)
{
    const auto g = fixtures::load("ieee37");
    EXPECT_EQ(g.num_buses(), 37);
    EXPECT_EQ(g.num_lines(), 36);
    EXPECT_EQ(g.bus(g.slack_bus()).name, "799");
}

TEST(LoadGrid, RoundTripsThroughJson)
{
    const auto g = fixtures::load("feeder10");
    const auto again = load_grid(to_json(g));
    EXPECT_EQ(to_json(again).dump(), to_json(g).dump());
}

TEST(Connectivity, ChainAndSingleLine)
{
    Eigen::MatrixXi expected(3, 3);
    expected << 1, 1, 0, 1, 1, 1, 0, 1, 1;
    EXPECT_EQ(build_connectivity(load_grid(chain3_doc())), expected);
    EXPECT_EQ(build_connectivity(fixtures::two_bus(0.0, 0.1)), Eigen::MatrixXi::Ones(2, 2));
}

TEST(Connectivity, RowSumsMatchRecountedDegrees)
{
    const auto g = fixtures::load("ieee37");
    const auto doc = read_json_file(fixtures::data("ieee37.json"));
    std::map<int, int> deg;
    for (const auto& l : doc["lines"]) {
        ++deg[l["from"].get<int>()];
        ++deg[l["to"].get<int>()];
    }
    const auto a = build_connectivity(g);
    EXPECT_EQ(a, a.transpose());
    for (int i = 0; i < g.num_buses(); ++i) {
        EXPECT_EQ(a.row(i).sum(), deg[i] + 1) << "bus " << i;
        EXPECT_EQ(a(i, i), 1);
    }
}

TEST(Contingencies, ChainExamples)
{
    const auto g = load_grid(chain3_doc());
    const auto set = build_contingencies(g, build_connectivity(g));
    ASSERT_EQ(set.pmu_loss.size(), 3u);
    ASSERT_EQ(set.line_outage.size(), 2u);
    Eigen::MatrixXi loss1(3, 3);
    loss1 << 1, 0, 0, 1, 0, 1, 0, 0, 1;
    EXPECT_EQ(set.pmu_loss[1], loss1);
    Eigen::MatrixXi out0(3, 3);
    out0 << 1, 0, 0, 0, 1, 1, 0, 1, 1;
    EXPECT_EQ(set.line_outage[0], out0);
}

TEST(Contingencies, OutagesMatchRebuiltGrids)
{
    const auto g = fixtures::load("ieee37");
    const auto a = build_connectivity(g);
    const auto set = build_contingencies(g, a);
    for (int l = 0; l < g.num_lines(); ++l) {
        const auto& m = set.line_outage[static_cast<std::size_t>(l)];
        EXPECT_EQ((m.array() != a.array()).count(), 2) << "line " << l;
        EXPECT_EQ(m, m.transpose());
        // rebuild from the line list without line l
        Eigen::MatrixXi rebuilt = Eigen::MatrixXi::Identity(g.num_buses(), g.num_buses());
        for (const auto& ln : g.lines()) {
            if (ln.id != l) {
                rebuilt(ln.from, ln.to) = rebuilt(ln.to, ln.from) = 1;
            }
        }
        EXPECT_EQ(m, rebuilt);
    }
    for (int b = 0; b < g.num_buses(); ++b) {
        const auto& m = set.pmu_loss[static_cast<std::size_t>(b)];
        EXPECT_TRUE((m.array() <= a.array()).all());
        EXPECT_EQ(m.col(b).sum(), 0);
    }
}

TEST(Admittance, PureReactanceAndResistance)
{
    const auto y1 = build_admittance(fixtures::two_bus(0.0, 0.1));
    EXPECT_NEAR(y1.G(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(y1.B(0, 1), 10.0, 1e-12);
    EXPECT_NEAR(y1.B(0, 0), -10.0, 1e-12);
    const auto y2 = build_admittance(fixtures::two_bus(0.1, 0.0));
    EXPECT_NEAR(y2.G(0, 1), -10.0, 1e-12);
    EXPECT_NEAR(y2.G(0, 0), 10.0, 1e-12);
    EXPECT_NEAR(y2.B.cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(Admittance, ZeroRowSumsAndSymmetry)
{
    for (const char* name : {"chain5", "feeder10", "star6", "ieee37"}) {
        const auto y = build_admittance(fixtures::load(name));
        const double scale = y.G.cwiseAbs().maxCoeff() + y.B.cwiseAbs().maxCoeff();
        EXPECT_LE(y.G.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12 * scale) << name;
        EXPECT_LE(y.B.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12 * scale) << name;
        EXPECT_LE((y.G - y.G.transpose()).cwiseAbs().maxCoeff(), 1e-12 * scale) << name;
        EXPECT_LE((y.B - y.B.transpose()).cwiseAbs().maxCoeff(), 1e-12 * scale) << name;
    }
}
