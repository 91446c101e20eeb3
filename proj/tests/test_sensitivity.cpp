#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace mupmu;

namespace {

MeasurementModel model_for(const GridModel& g, const std::vector<int>& buses, CaseMode mode, const ZinVector& u,
                           const UncertaintyParams& params = {})
{
    return build_measurement_model(g, fixtures::assign(g, buses, mode), u, params);
}

double sigma_r_of(const GridModel& g, const UncertaintyParams& p = {})
{
    return p.common_sigma() * g.base_voltage();
}

/// Brute-force S over every model line and both signs via explicit rebuilds.
double brute_force_s(const MeasurementModel& m, const GridModel& g, double delta, double sigma_r, bool absolute)
{
    const Eigen::MatrixXd s0 = validation::direct_sensitivity(m.H, m.variances, sigma_r);
    double best = 0.0;
    for (int l = 0; l < g.num_lines(); ++l) {
        for (int sign : {+1, -1}) {
            const Eigen::MatrixXd s =
                validation::direct_sensitivity(validation::rebuild_h(m, g, l, sign * delta), m.variances, sigma_r);
            const Eigen::MatrixXd d = s - s0;
            best = std::max(best, absolute ? d.cwiseAbs().maxCoeff() : d.maxCoeff());
        }
    }
    return best;
}

} // namespace

TEST(SensitivityMatrix, IdentityModel)
{
    MeasurementModel m;
    m.num_buses = 2;
    m.n_voltage = 2;
    m.H = Eigen::MatrixXd::Identity(4, 4);
    m.variances = Eigen::VectorXd::Constant(4, 0.25);
    EXPECT_LT((sensitivity_matrix(m, 0.5) - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SensitivityMatrix, MatchesCovarianceAndIgnoresSigmaScale)
{
    const auto g = fixtures::chain(3);
    const auto m = model_for(g, {0, 2}, CaseMode::B, fixtures::no_zin(g));
    const double sr = sigma_r_of(g);
    const Eigen::MatrixXd s = sensitivity_matrix(m, sr);
    const Eigen::MatrixXd phi = error_covariance(m).phi_real;
    EXPECT_LT((s * sr * sr - phi).cwiseAbs().maxCoeff(), 1e-10 * phi.cwiseAbs().maxCoeff());

    UncertaintyParams k;
    k.sigma_v *= 4.0;
    k.sigma_i *= 4.0;
    const auto mk = model_for(g, {0, 2}, CaseMode::B, fixtures::no_zin(g), k);
    const Eigen::MatrixXd sk = sensitivity_matrix(mk, sigma_r_of(g, k));
    EXPECT_LT((sk - s).cwiseAbs().maxCoeff(), 1e-10 * s.cwiseAbs().maxCoeff());
}

TEST(PerturbedModel, ZeroDeltaIsIdentity)
{
    const auto g = fixtures::load("feeder10");
    const auto m = model_for(g, {0, 4, 8}, CaseMode::B, zin_vector(g));
    for (int l = 0; l < g.num_lines(); ++l) {
        EXPECT_EQ(perturbed_model(m, g, l, +1, 0.0).H, m.H);
    }
}

TEST(PerturbedModel, TwoBusCurrentRowScales)
{
    const auto g = fixtures::two_bus(0.0, 0.1);
    const auto m = model_for(g, {0}, CaseMode::B, fixtures::no_zin(g));
    const auto p = perturbed_model(m, g, 0, +1, 0.05);
    for (Eigen::Index r = 2; r < 4; ++r) {
        for (Eigen::Index c = 0; c < 4; ++c) {
            EXPECT_NEAR(p.H(r, c), 1.05 * m.H(r, c), 1e-12);
        }
    }
    EXPECT_EQ(p.H.topRows(2), m.H.topRows(2));
    EXPECT_EQ(p.variances, m.variances);
}

TEST(PerturbedModel, OnlyDependentRowsChange)
{
    const auto g = fixtures::chain(3, {1});
    const auto m = model_for(g, {0}, CaseMode::A, zin_vector(g));
    const auto p = perturbed_model(m, g, 0, +1, 0.05);
    const Eigen::MatrixXd rebuilt = validation::rebuild_h(m, g, 0, 0.05);
    EXPECT_LT((p.H - rebuilt).cwiseAbs().maxCoeff(), 1e-12);
    for (Eigen::Index r = 0; r < m.H.rows(); ++r) {
        const auto kind = m.rows[static_cast<std::size_t>(r)].kind;
        const bool changed = (p.H.row(r) - m.H.row(r)).cwiseAbs().maxCoeff() > 0.0;
        EXPECT_EQ(changed, kind != MeasurementKind::Voltage) << "row " << r;
    }
}

TEST(PerturbedModel, MatchesRebuildEverywhere)
{
    const auto g = fixtures::load("ieee37");
    const auto m = model_for(g, Placement(37, true).buses(), CaseMode::B, zin_vector(g));
    for (int l = 0; l < g.num_lines(); ++l) {
        for (int sign : {+1, -1}) {
            const auto p = perturbed_model(m, g, l, sign, 0.05);
            EXPECT_LT((p.H - validation::rebuild_h(m, g, l, sign * 0.05)).cwiseAbs().maxCoeff(),
                      1e-9 * m.H.cwiseAbs().maxCoeff());
        }
    }
}

TEST(MaxSensitivity, VoltageOnlyIsZero)
{
    const auto g = fixtures::chain(3);
    MeasurementModel m;
    m.num_buses = 3;
    m.n_voltage = 3;
    m.H = Eigen::MatrixXd::Identity(6, 6);
    m.variances = Eigen::VectorXd::Constant(6, 1e-4);
    for (auto search : {SensitivitySearch::PerLineCorners, SensitivitySearch::SingleEntry}) {
        ToleranceSpec tol;
        tol.search = search;
        EXPECT_EQ(max_sensitivity(m, g, tol, 0.01).s_value, 0.0);
    }
}

TEST(MaxSensitivity, MatchesBruteForceRebuilds)
{
    for (const std::string name : {"chain5", "feeder10"}) {
        const auto g = fixtures::load(name);
        const auto u = zin_vector(g);
        const double sr = sigma_r_of(g);
        for (const auto& buses : {std::vector<int>{0, 4}, std::vector<int>{0, 3, 4}, std::vector<int>{1, 3, 5, 8}}) {
            if (buses.back() >= g.num_buses()) {
                continue;
            }
            const auto m = model_for(g, buses, CaseMode::B, u);
            try {
                sensitivity_matrix(m, sr);
            } catch (const SingularGainError&) {
                continue;
            }
            for (bool absolute : {false, true}) {
                ToleranceSpec tol;
                tol.increase = absolute ? IncreaseMode::Absolute : IncreaseMode::Signed;
                const double fast = max_sensitivity(m, g, tol, sr).s_value;
                const double slow = brute_force_s(m, g, tol.delta, sr, absolute);
                EXPECT_NEAR(fast, slow, 1e-7 * slow) << name;
            }
        }
    }
}

TEST(MaxSensitivity, IncreaseAgreesWithMaxEntry)
{
    const auto g = fixtures::load("feeder10");
    const auto m = model_for(g, {0, 3, 5, 8}, CaseMode::B, zin_vector(g));
    const double sr = sigma_r_of(g);
    const Eigen::MatrixXd s = sensitivity_matrix(m, sr);
    const auto factor = detail::sensitivity_factor(m, sr);
    for (int l : model_lines(m, g)) {
        const detail::LineUpdate up(factor, line_dependence(m, g, l));
        for (double eps : {0.05, -0.05, 0.2}) {
            const Eigen::MatrixXd d = up.increase(eps);
            Eigen::Index i = 0;
            Eigen::Index j = 0;
            EXPECT_NEAR(up.max_entry(eps, false, i, j), d.maxCoeff(), 1e-12 * d.cwiseAbs().maxCoeff());
            EXPECT_NEAR(d(i, j), d.maxCoeff(), 1e-12 * d.cwiseAbs().maxCoeff());
            EXPECT_NEAR(up.max_entry(eps, true, i, j), d.cwiseAbs().maxCoeff(), 1e-12 * d.cwiseAbs().maxCoeff());
            // perturbed matrix stays symmetric
            const Eigen::MatrixXd sp = s + d;
            EXPECT_LE((sp - sp.transpose()).cwiseAbs().maxCoeff(), 1e-10 * s.cwiseAbs().maxCoeff());
        }
    }
}

TEST(MaxSensitivity, FiniteDifferenceAgreement)
{
    const auto g = fixtures::chain(3);
    const auto m = model_for(g, {0, 2}, CaseMode::B, fixtures::no_zin(g));
    const double sr = sigma_r_of(g);
    ToleranceSpec tol;
    tol.delta = 0.05;
    tol.increase = IncreaseMode::Absolute;
    const double s = max_sensitivity(m, g, tol, sr).s_value;
    const double fd = validation::first_order_sensitivity(m, g, 0.05, 1e-4, sr);
    EXPECT_NEAR(s, fd, 0.10 * fd);

    tol.delta = 1e-3;
    const double small = max_sensitivity(m, g, tol, sr).s_value;
    const double fd_small = validation::first_order_sensitivity(m, g, 1e-3, 1e-5, sr);
    EXPECT_NEAR(small, fd_small, 0.05 * fd_small);
}

TEST(MaxSensitivity, FirstOrderRatioIsStable)
{
    const auto g = fixtures::load("feeder10");
    const auto m = model_for(g, {0, 3, 5, 8}, CaseMode::B, zin_vector(g));
    const double sr = sigma_r_of(g);
    ToleranceSpec a;
    a.delta = 1e-3;
    ToleranceSpec b;
    b.delta = 5e-4;
    const double ra = max_sensitivity(m, g, a, sr).s_value / a.delta;
    const double rb = max_sensitivity(m, g, b, sr).s_value / b.delta;
    EXPECT_NEAR(ra, rb, 0.05 * rb);
}

TEST(MaxSensitivity, PropertiesOverRandomPlacements)
{
    const auto g = fixtures::load("ieee37");
    const auto a = build_connectivity(g);
    const auto u = zin_vector(g);
    const auto cfg = make_channel_config(g, a, CaseMode::B, false);
    std::mt19937_64 rng(23);
    int tested = 0;
    for (int t = 0; t < 100 && tested < 10; ++t) {
        Placement x(37);
        for (std::size_t i = 0; i < 37; ++i) {
            x.set(i, rng() % 4 != 0);
        }
        const auto m = build_measurement_model(g, assign_channels(g, x, cfg), u, {});
        const double sr = sigma_r_of(g);
        Eigen::MatrixXd s;
        try {
            s = sensitivity_matrix(m, sr);
        } catch (const SingularGainError&) {
            continue;
        }
        ++tested;
        double prev = 0.0;
        for (double delta : {0.01, 0.02, 0.05, 0.1}) {
            ToleranceSpec tol;
            tol.delta = delta;
            const auto res = max_sensitivity(m, g, tol, sr);
            EXPECT_GE(res.s_value, 0.0);
            EXPECT_GE(res.s_value, prev - 1e-12 * std::abs(prev));
            prev = res.s_value;
        }
        UncertaintyParams k;
        k.sigma_v = k.sigma_i = 0.03;
        const auto mk = build_measurement_model(g, assign_channels(g, x, cfg), u, k);
        ToleranceSpec tol;
        const double s1 = max_sensitivity(m, g, tol, sr).s_value;
        const double s3 = max_sensitivity(mk, g, tol, sigma_r_of(g, k)).s_value;
        EXPECT_NEAR(s3, s1, 1e-10 * s1 + 1e-300);
    }
    EXPECT_GE(tested, 3);
}

TEST(MaxSensitivity, SingleEntryIsFinitePositive)
{
    const auto g = fixtures::load("feeder10");
    const auto m = model_for(g, {0, 3, 5, 8}, CaseMode::B, zin_vector(g));
    ToleranceSpec tol;
    tol.search = SensitivitySearch::SingleEntry;
    const auto res = max_sensitivity(m, g, tol, sigma_r_of(g));
    EXPECT_GT(res.s_value, 0.0);
    EXPECT_TRUE(std::isfinite(res.s_value));
    EXPECT_GE(res.argmax.h_row, 0);
    EXPECT_NE(m.rows[static_cast<std::size_t>(res.argmax.h_row)].kind, MeasurementKind::Voltage);
}

TEST(ToleranceSpecTest, Validation)
{
    ToleranceSpec t;
    t.delta = 0.0;
    EXPECT_THROW(t.validate(), SchemaError);
    t.delta = 1.0;
    EXPECT_THROW(t.validate(), SchemaError);
    t.delta = 0.5;
    EXPECT_NO_THROW(t.validate());
}
