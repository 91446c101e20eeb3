#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace mupmu;

namespace {

Placement from_code(unsigned code, int n)
{
    Placement x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        x.set(static_cast<std::size_t>(i), (code >> i) & 1u);
    }
    return x;
}

Eigen::VectorXi vec(const Placement& p)
{
    Eigen::VectorXi v(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = p[i];
    }
    return v;
}

struct Bench {
    GridModel grid;
    ConnectivityMatrix a;
    ContingencySet cont;
    ChannelConfig cfg;
    ZinVector u;

    Bench(GridModel g, CaseMode mode, bool contingency)
        : grid(std::move(g)), a(build_connectivity(grid)), cont(build_contingencies(grid, a)),
          cfg(make_channel_config(grid, a, mode, contingency)), u(zin_vector(grid))
    {
    }

    ConstraintReport check(const Placement& x, const ZinVector& zin) const
    {
        return check_constraints(grid, x, zin, cfg, assign_channels(grid, x, cfg), a, cont);
    }
};

} // namespace

TEST(PlacementType, BasicsAndUnknownBus)
{
    auto p = Placement::from_buses(5, {0, 3});
    EXPECT_EQ(p.count(), 2);
    EXPECT_EQ(p.str(), "10010");
    EXPECT_EQ(p.buses(), (std::vector<int>{0, 3}));
    p.flip(1);
    EXPECT_TRUE(p[1]);
    EXPECT_THROW(Placement::from_buses(5, {5}), SchemaError);
    EXPECT_THROW(Placement::from_buses(5, {-1}), SchemaError);
}

TEST(ZinVectorTest, MirrorsBusFlags)
{
    const auto g = fixtures::load("ieee37");
    const auto u = zin_vector(g);
    EXPECT_EQ(u.count(), 11);
    EXPECT_FALSE(u[static_cast<std::size_t>(g.slack_bus())]);
    for (const auto& b : g.buses()) {
        EXPECT_EQ(u[static_cast<std::size_t>(b.id)], b.zero_injection);
    }
}

TEST(ChannelConfigTest, CaseCaps)
{
    const auto g = fixtures::load("feeder10");
    const auto a = build_connectivity(g);
    const auto ca = make_channel_config(g, a, CaseMode::A, false);
    EXPECT_EQ(ca.gamma, Eigen::MatrixXi::Identity(10, 10));
    for (int c : ca.n_c) {
        EXPECT_EQ(c, 2);
    }
    const auto cb = make_channel_config(g, a, CaseMode::B, false);
    EXPECT_EQ(cb.gamma, a);
    for (int i = 0; i < g.num_buses(); ++i) {
        EXPECT_EQ(cb.n_c[static_cast<std::size_t>(i)], g.degree(i) + 2);
    }
}

TEST(AssignChannels, CaseBMonitorsAllIncidentLines)
{
    const auto asg = fixtures::assign(fixtures::chain(3), {1}, CaseMode::B);
    const auto& b = asg.buses[1];
    EXPECT_TRUE(b.instrumented);
    EXPECT_TRUE(b.voltage_channel);
    EXPECT_EQ(b.monitored_lines, (std::vector<int>{0, 1}));
    EXPECT_EQ(b.channels_used, 3);
    EXPECT_FALSE(asg.buses[0].instrumented);
    EXPECT_EQ(asg.buses[0].channels_used, 0);
}

TEST(AssignChannels, CaseATakesOneLineByRule)
{
    // both far ends have degree 1; the lower index wins
    const auto asg = fixtures::assign(fixtures::chain(3), {1}, CaseMode::A);
    EXPECT_EQ(asg.buses[1].monitored_lines, (std::vector<int>{0}));
    EXPECT_EQ(asg.buses[1].channels_used, 2);
}

TEST(AssignChannels, CaseAStarCenter)
{
    const auto g = fixtures::load("star6");
    const auto asg = fixtures::assign(g, {0}, CaseMode::A);
    EXPECT_EQ(asg.buses[0].channels_used, 2);
    // all leaves have degree 1, so leaf 1 (lowest index) is the monitored far end
    ASSERT_EQ(asg.buses[0].monitored_lines.size(), 1u);
    EXPECT_EQ(g.line(asg.buses[0].monitored_lines[0]).other(0), 1);
}

TEST(AssignChannels, CaseAPrefersLowDegreeFarEnd)
{
    // bus 1 touches bus 0 (degree 1) and bus 2 (degree 2, continues to 3)
    const auto g = fixtures::chain(4);
    const auto asg = fixtures::assign(g, {2}, CaseMode::A);
    ASSERT_EQ(asg.buses[2].monitored_lines.size(), 1u);
    EXPECT_EQ(g.line(asg.buses[2].monitored_lines[0]).other(2), 3);
}

TEST(AssignChannels, InvariantsAndDeterminism)
{
    const auto g = fixtures::load("ieee37");
    const auto a = build_connectivity(g);
    std::mt19937_64 rng(7);
    for (auto mode : {CaseMode::A, CaseMode::B}) {
        const auto cfg = make_channel_config(g, a, mode, false);
        for (int t = 0; t < 50; ++t) {
            Placement x(37);
            for (std::size_t i = 0; i < 37; ++i) {
                x.set(i, rng() & 1u);
            }
            const auto asg = assign_channels(g, x, cfg);
            const auto again = assign_channels(g, x, cfg);
            EXPECT_TRUE(channels_within_caps(asg, cfg));
            for (int i = 0; i < 37; ++i) {
                const auto& b = asg.buses[static_cast<std::size_t>(i)];
                const auto& b2 = again.buses[static_cast<std::size_t>(i)];
                EXPECT_EQ(b.monitored_lines, b2.monitored_lines);
                if (!x[static_cast<std::size_t>(i)]) {
                    continue;
                }
                EXPECT_EQ(b.channels_used, 1 + static_cast<int>(b.monitored_lines.size()));
                for (int l : b.monitored_lines) {
                    EXPECT_TRUE(g.line(l).touches(i));
                }
                if (mode == CaseMode::B) {
                    EXPECT_EQ(b.monitored_lines, g.incident_lines(i));
                }
            }
        }
    }
}

TEST(EffectiveObservation, ChainExamples)
{
    const auto g = fixtures::chain(3);
    const auto asg = fixtures::assign(g, {1}, CaseMode::B);
    EXPECT_EQ(effective_observation(g, Placement::from_buses(3, {1}), fixtures::no_zin(g), asg),
              (std::vector<int>{1, 1, 1}));
    const auto empty = fixtures::assign(g, {}, CaseMode::B);
    EXPECT_EQ(effective_observation(g, Placement(3), Placement::from_buses(3, {1}), empty),
              (std::vector<int>{1, 1, 1}));
}

TEST(EffectiveObservation, FullFeederAllOnes)
{
    const auto g = fixtures::load("ieee37");
    const auto a = build_connectivity(g);
    const Placement x(37, true);
    const auto u = zin_vector(g);
    const auto asg = fixtures::assign(g, x.buses(), CaseMode::B);
    const auto obs = effective_observation(g, x, u, asg);
    const Eigen::VectorXi direct = a * (vec(x) + vec(u));
    for (int i = 0; i < 37; ++i) {
        EXPECT_GE(obs[static_cast<std::size_t>(i)], 2);
        EXPECT_EQ(obs[static_cast<std::size_t>(i)], direct(i));
    }
}

TEST(EffectiveObservation, CaseBEqualsMatrixProductExhaustively)
{
    for (const auto& g : {fixtures::load("chain5"), fixtures::load("star6"), fixtures::chain(8, {2, 5})}) {
        const int n = g.num_buses();
        const auto a = build_connectivity(g);
        const auto u = zin_vector(g);
        for (unsigned code = 0; code < (1u << n); ++code) {
            const auto x = from_code(code, n);
            const auto asg = fixtures::assign(g, x.buses(), CaseMode::B);
            const auto obs = effective_observation(g, x, u, asg);
            const Eigen::VectorXi direct = a * (vec(x) + vec(u));
            for (int i = 0; i < n; ++i) {
                ASSERT_EQ(obs[static_cast<std::size_t>(i)], direct(i)) << "code " << code;
            }
        }
    }
}

TEST(EffectiveObservation, FullRowSwitchUsesPlainConnectivity)
{
    const auto g = fixtures::load("star6");
    const auto x = Placement::from_buses(6, {0});
    const auto asg = fixtures::assign(g, {0}, CaseMode::A);
    const auto limited = effective_observation(g, x, fixtures::no_zin(g), asg, Observability::ChannelLimited);
    const auto full = effective_observation(g, x, fixtures::no_zin(g), asg, Observability::FullRow);
    EXPECT_EQ(limited, (std::vector<int>{1, 1, 0, 0, 0, 0}));
    EXPECT_EQ(full, (std::vector<int>{1, 1, 1, 1, 1, 1}));
}

TEST(EffectiveObservation, AddingADeviceIsMonotone)
{
    const auto g = fixtures::load("feeder10");
    const auto u = zin_vector(g);
    std::mt19937_64 rng(3);
    for (auto mode : {CaseMode::A, CaseMode::B}) {
        Bench s(g, mode, true);
        for (int t = 0; t < 200; ++t) {
            const auto x = from_code(static_cast<unsigned>(rng() % 1024), 10);
            const auto b = static_cast<std::size_t>(rng() % 10);
            auto y = x;
            y.set(b, true);
            const auto ox = effective_observation(g, x, u, assign_channels(g, x, s.cfg));
            const auto oy = effective_observation(g, y, u, assign_channels(g, y, s.cfg));
            for (std::size_t i = 0; i < 10; ++i) {
                EXPECT_GE(oy[i], ox[i]);
            }
            const auto rx = s.check(x, u);
            const auto ry = s.check(y, u);
            EXPECT_LE(ry.violations_normal, rx.violations_normal);
            EXPECT_LE(ry.violations_contingency, rx.violations_contingency);
        }
    }
}

TEST(CheckConstraints, SingleCenterDevice)
{
    const auto g = fixtures::chain(3);
    const auto x = Placement::from_buses(3, {1});
    const auto normal = Bench(g, CaseMode::B, false).check(x, fixtures::no_zin(g));
    EXPECT_TRUE(normal.observable_normal);
    EXPECT_EQ(normal.violations_normal, 0);
    EXPECT_FALSE(normal.contingency_evaluated);
    EXPECT_TRUE(normal.channel_ok);
    const auto cont = Bench(g, CaseMode::B, true).check(x, fixtures::no_zin(g));
    EXPECT_TRUE(cont.contingency_evaluated);
    EXPECT_FALSE(cont.observable_contingency);
    EXPECT_GE(cont.violations_contingency, 3);
}

TEST(CheckConstraints, MatchesRowCheckOnChainWithZin)
{
    const auto g = fixtures::load("chain5");
    const auto a = build_connectivity(g);
    const auto x = Placement::from_buses(5, {0, 4});
    const auto u = Placement::from_buses(5, {2});
    const Eigen::VectorXi prod = a * (vec(x) + vec(u));
    const int expected = static_cast<int>((prod.array() == 0).count());
    const auto rep = Bench(g, CaseMode::B, false).check(x, u);
    EXPECT_EQ(rep.violations_normal, expected);
    EXPECT_EQ(rep.observable_normal, expected == 0);
}

TEST(CheckConstraints, ContingencyImpliesNormalExhaustively)
{
    for (const auto& g : {fixtures::load("chain5"), fixtures::load("star6"), fixtures::chain(8, {3})}) {
        for (auto mode : {CaseMode::A, CaseMode::B}) {
            Bench s(g, mode, true);
            for (unsigned code = 0; code < (1u << g.num_buses()); ++code) {
                const auto rep = s.check(from_code(code, g.num_buses()), s.u);
                ASSERT_EQ(rep.observable_normal, rep.violations_normal == 0);
                ASSERT_EQ(rep.observable_contingency, rep.violations_contingency == 0);
                if (rep.observable_contingency) {
                    ASSERT_TRUE(rep.observable_normal) << "code " << code;
                }
            }
        }
    }
}

TEST(CheckConstraints, ContingencyCountMatchesDirectStacking)
{
    // oracle: count unobserved buses per failure directly from the line list
    const auto g = fixtures::load("feeder10");
    Bench s(g, CaseMode::B, true);
    const int n = g.num_buses();
    std::mt19937_64 rng(11);
    for (int t = 0; t < 100; ++t) {
        const auto x = from_code(static_cast<unsigned>(rng() % 1024), n);
        auto observed = [&](int dead_bus, int dead_line) {
            int v = 0;
            for (int i = 0; i < n; ++i) {
                int c = (x[static_cast<std::size_t>(i)] && i != dead_bus) + s.u[static_cast<std::size_t>(i)];
                for (const auto& ln : g.lines()) {
                    if (ln.id == dead_line || !ln.touches(i)) {
                        continue;
                    }
                    const int j = ln.other(i);
                    c += (x[static_cast<std::size_t>(j)] && j != dead_bus) + s.u[static_cast<std::size_t>(j)];
                }
                v += c == 0;
            }
            return v;
        };
        int expected = 0;
        for (int b = 0; b < n; ++b) {
            expected += observed(b, -1);
        }
        for (int l = 0; l < g.num_lines(); ++l) {
            expected += observed(-1, l);
        }
        EXPECT_EQ(s.check(x, s.u).violations_contingency, expected);
    }
}

TEST(ChannelCost, Examples)
{
    const auto g = fixtures::load("ieee37");
    std::vector<int> loads;
    for (const auto& b : g.buses()) {
        if (!b.zero_injection && b.id != g.slack_bus()) {
            loads.push_back(b.id);
        }
    }
    ASSERT_EQ(loads.size(), 25u);
    const auto x = Placement::from_buses(37, loads);
    EXPECT_EQ(channel_cost(x, fixtures::assign(g, loads, CaseMode::A)), 50);
    EXPECT_EQ(channel_cost(Placement(37), fixtures::assign(g, {}, CaseMode::B)), 0);

    // Case B bookkeeping with a 10x3 + 9x4 + 1x5 channel mix
    ChannelAssignment mix;
    mix.buses.resize(37);
    Placement y(37);
    for (int i = 0; i < 20; ++i) {
        y.set(static_cast<std::size_t>(i), true);
        mix.buses[static_cast<std::size_t>(i)].instrumented = true;
        mix.buses[static_cast<std::size_t>(i)].channels_used = i < 10 ? 3 : (i < 19 ? 4 : 5);
    }
    EXPECT_EQ(channel_cost(y, mix), 71);
}

TEST(ChannelCost, CaseBIsAdditiveOverDisjointSupports)
{
    const auto g = fixtures::load("ieee37");
    const auto a = build_connectivity(g);
    const auto cfg = make_channel_config(g, a, CaseMode::B, false);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 100; ++t) {
        Placement x1(37);
        Placement x2(37);
        for (std::size_t i = 0; i < 37; ++i) {
            const auto r = rng() % 3;
            x1.set(i, r == 1);
            x2.set(i, r == 2);
        }
        Placement both(37);
        for (std::size_t i = 0; i < 37; ++i) {
            both.set(i, x1[i] || x2[i]);
        }
        EXPECT_EQ(channel_cost(x1, assign_channels(g, x1, cfg)) + channel_cost(x2, assign_channels(g, x2, cfg)),
                  channel_cost(both, assign_channels(g, both, cfg)));
    }
}
