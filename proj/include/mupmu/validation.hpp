#ifndef MUPMU_VALIDATION_HPP
#define MUPMU_VALIDATION_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mupmu/error.hpp"
#include "mupmu/estimation.hpp"
#include "mupmu/grid.hpp"
#include "mupmu/moea.hpp"
#include "mupmu/pareto.hpp"

namespace mupmu::validation {

struct MonteCarloReport {
    long trials = 0;
    Eigen::MatrixXd empirical_covariance;   // 2N x 2N
    Eigen::MatrixXcd empirical_complex;     // N x N
    Eigen::MatrixXd analytic_covariance;    // from the SVD route
    double empirical_U = 0.0;               // percent, from the largest eigenvalue
    double empirical_max_bus_rms = 0.0;     // percent, largest per-bus complex RMS error
    double analytic_U = 0.0;
    double max_rel_error = 0.0;             // worst diagonal mismatch, relative
};

namespace detail {

inline constexpr long kShardTrials = 4096;

/// Estimator gain and covariance from an SVD of the whitened model.
struct WhitenedSolution {
    Eigen::MatrixXd gain;       // 2N x 2M
    Eigen::MatrixXd covariance; // 2N x 2N
};

inline WhitenedSolution whitened_solution(const Eigen::MatrixXd& h, const Eigen::VectorXd& variances)
{
    const Eigen::VectorXd wsqrt = variances.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd hw = wsqrt.asDiagonal() * h;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(hw, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    if (sv.size() < h.cols() || sv.size() == 0 || sv(sv.size() - 1) <= 1e-12 * sv(0)) {
        throw SingularGainError("singular gain: whitened model is rank deficient");
    }
    const Eigen::VectorXd inv = sv.cwiseInverse();
    WhitenedSolution out;
    out.gain = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * wsqrt.asDiagonal();
    out.covariance = svd.matrixV() * inv.cwiseAbs2().asDiagonal() * svd.matrixV().transpose();
    return out;
}

inline double lambda_max_percent(const Eigen::MatrixXcd& c, double base)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(c, Eigen::EigenvaluesOnly);
    return 100.0 * std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0)) / base;
}

} // namespace detail

/// Samples z = H v + e with Gaussian e ~ N(0, R), estimates v, and reports
/// the sample error covariance. Shards draw from independent seeded streams.
inline MonteCarloReport monte_carlo_uncertainty(const MeasurementModel& m, const Eigen::VectorXd& true_state,
                                                long trials, std::uint64_t rng_seed, double base_voltage,
                                                unsigned threads = 0)
{
    if (trials < 2) {
        throw Error("monte carlo: at least 2 trials required");
    }
    const auto sol = detail::whitened_solution(m.H, m.variances);
    const Eigen::Index dim = m.H.cols();
    const Eigen::Index n = dim / 2;
    const Eigen::Index rows = m.H.rows();
    const Eigen::VectorXd z0 = m.H * true_state;
    const Eigen::VectorXd sd = m.variances.cwiseSqrt();

    const long shards = (trials + detail::kShardTrials - 1) / detail::kShardTrials;
    struct Partial {
        Eigen::VectorXd sum;
        Eigen::MatrixXd outer;
        Eigen::MatrixXcd outer_c;
    };
    std::vector<Partial> parts(static_cast<std::size_t>(shards));
    mupmu::detail::parallel_for(static_cast<std::size_t>(shards), threads, [&](std::size_t s) {
        const long begin = static_cast<long>(s) * detail::kShardTrials;
        const long count = std::min(detail::kShardTrials, trials - begin);
        std::seed_seq seq{static_cast<std::uint32_t>(rng_seed), static_cast<std::uint32_t>(rng_seed >> 32),
                          static_cast<std::uint32_t>(s)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::MatrixXd z(rows, count);
        for (long t = 0; t < count; ++t) {
            for (Eigen::Index r = 0; r < rows; ++r) {
                z(r, t) = z0(r) + sd(r) * gauss(rng);
            }
        }
        const Eigen::MatrixXd err = (sol.gain * z).colwise() - true_state;
        Eigen::MatrixXcd ec(n, count);
        ec.real() = err.topRows(n);
        ec.imag() = err.bottomRows(n);
        auto& p = parts[s];
        p.sum = err.rowwise().sum();
        p.outer = err * err.transpose();
        p.outer_c = ec * ec.adjoint();
    });

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXcd outer_c = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& p : parts) {
        sum += p.sum;
        outer += p.outer;
        outer_c += p.outer_c;
    }
    const double t = static_cast<double>(trials);
    const Eigen::VectorXd mean = sum / t;
    Eigen::VectorXcd mean_c(n);
    mean_c.real() = mean.head(n);
    mean_c.imag() = mean.tail(n);

    MonteCarloReport rep;
    rep.trials = trials;
    rep.empirical_covariance = (outer - t * mean * mean.transpose()) / (t - 1.0);
    rep.empirical_covariance = 0.5 * (rep.empirical_covariance + rep.empirical_covariance.transpose()).eval();
    rep.empirical_complex = (outer_c - t * mean_c * mean_c.adjoint()) / (t - 1.0);
    rep.empirical_complex = 0.5 * (rep.empirical_complex + rep.empirical_complex.adjoint()).eval();
    rep.analytic_covariance = sol.covariance;

    rep.empirical_U = detail::lambda_max_percent(rep.empirical_complex, base_voltage);
    rep.empirical_max_bus_rms = 100.0 * std::sqrt(rep.empirical_complex.diagonal().real().maxCoeff()) / base_voltage;

    Eigen::MatrixXcd ac(n, n);
    ac.real() = sol.covariance.topLeftCorner(n, n) + sol.covariance.bottomRightCorner(n, n);
    ac.imag() = sol.covariance.bottomLeftCorner(n, n) - sol.covariance.topRightCorner(n, n);
    rep.analytic_U = detail::lambda_max_percent(ac, base_voltage);

    for (Eigen::Index i = 0; i < dim; ++i) {
        const double a = sol.covariance(i, i);
        rep.max_rel_error = std::max(rep.max_rel_error, std::abs(rep.empirical_covariance(i, i) - a) / a);
    }
    return rep;
}

/// Flat profile v = base (1 + 0j) in rectangular coordinates.
inline Eigen::VectorXd flat_state(int num_buses, double base_voltage)
{
    Eigen::VectorXd v = Eigen::VectorXd::Zero(2 * num_buses);
    v.head(num_buses).setConstant(base_voltage);
    return v;
}

/// Normalized information inverse from an SVD of the whitened model.
inline Eigen::MatrixXd direct_sensitivity(const Eigen::MatrixXd& h, const Eigen::VectorXd& variances, double sigma_r)
{
    const Eigen::VectorXd wsqrt = sigma_r * variances.cwiseSqrt().cwiseInverse();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(wsqrt.asDiagonal() * h, Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    if (h.rows() < h.cols() || !(sv.minCoeff() > 1e-14 * sv.maxCoeff())) {
        throw SingularGainError("singular gain at perturbed point");
    }
    const Eigen::MatrixXd v = svd.matrixV() * sv.cwiseInverse().asDiagonal();
    return v * v.transpose();
}

/// Rebuilds H from the row descriptions with the series admittance of `line`
/// scaled by (1 + eps). Rows not touched by the line keep their values.
inline Eigen::MatrixXd rebuild_h(const MeasurementModel& m, const GridModel& grid, int line, double eps)
{
    const int n = m.num_buses;
    auto y_of = [&](int l) {
        const Line& ln = grid.line(l);
        const std::complex<double> y = 1.0 / std::complex<double>(ln.r, ln.x);
        return l == line ? y * (1.0 + eps) : y;
    };
    Eigen::MatrixXd h = m.H;
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        const auto& meta = m.rows[r];
        const auto ri = static_cast<Eigen::Index>(r);
        const bool real = meta.part == Part::Real;
        if (meta.kind == MeasurementKind::Current) {
            if (meta.line != line) {
                continue;
            }
            const Line& ln = grid.line(meta.line);
            const int p = meta.bus;
            const int q = ln.from == p ? ln.to : ln.from;
            const auto y = y_of(meta.line);
            h.row(ri).setZero();
            // real: g(Vr_p - Vr_q) - b(Vi_p - Vi_q); imag: b(Vr_p - Vr_q) + g(Vi_p - Vi_q)
            const double cr = real ? y.real() : y.imag();
            const double ci = real ? -y.imag() : y.real();
            h(ri, p) = cr;
            h(ri, q) = -cr;
            h(ri, n + p) = ci;
            h(ri, n + q) = -ci;
        } else if (meta.kind == MeasurementKind::ZeroInjection) {
            const int z = meta.bus;
            const Line& target = grid.line(line);
            if (target.from != z && target.to != z) {
                continue;
            }
            h.row(ri).setZero();
            // injection at z: sum over incident lines of y (V_z - V_k)
            for (int l = 0; l < grid.num_lines(); ++l) {
                const Line& ln = grid.line(l);
                if (ln.from != z && ln.to != z) {
                    continue;
                }
                const int k = ln.from == z ? ln.to : ln.from;
                const auto y = y_of(l);
                const double cr = real ? y.real() : y.imag();
                const double ci = real ? -y.imag() : y.real();
                h(ri, z) += cr;
                h(ri, k) -= cr;
                h(ri, n + z) += ci;
                h(ri, n + k) -= ci;
            }
        }
    }
    return h;
}

/// Central difference of the normalized sensitivity matrix with respect to a
/// relative change of one line's series admittance.
inline Eigen::MatrixXd finite_difference_sensitivity(const MeasurementModel& m, const GridModel& grid, int line,
                                                     double h, double sigma_r)
{
    if (!(h > 0.0) || h > 1e-3) {
        throw Error("finite difference: step must lie in (0, 1e-3]");
    }
    const Eigen::MatrixXd plus = direct_sensitivity(rebuild_h(m, grid, line, h), m.variances, sigma_r);
    const Eigen::MatrixXd minus = direct_sensitivity(rebuild_h(m, grid, line, -h), m.variances, sigma_r);
    return (plus - minus) / (2.0 * h);
}

/// First-order prediction of the worst entry increase over all lines and both
/// tolerance signs.
inline double first_order_sensitivity(const MeasurementModel& m, const GridModel& grid, double delta, double h,
                                      double sigma_r)
{
    double best = 0.0;
    for (int l = 0; l < grid.num_lines(); ++l) {
        const Eigen::MatrixXd d = finite_difference_sensitivity(m, grid, l, h, sigma_r);
        best = std::max(best, delta * d.cwiseAbs().maxCoeff());
    }
    return best;
}

struct ExhaustiveFront {
    std::vector<Individual> all_evaluations; // index = integer code of x, bus 0 least significant
    std::vector<std::size_t> true_front;     // ascending codes
};

inline constexpr int kExhaustiveCap = 14;

inline Placement placement_from_code(std::uint32_t code, int n)
{
    Placement x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        x.set(static_cast<std::size_t>(i), (code >> i) & 1u);
    }
    return x;
}

/// Pareto front by scoring every placement.
inline ExhaustiveFront exhaustive_pareto(const Problem& p, unsigned threads = 0)
{
    const int n = p.num_buses();
    if (n > kExhaustiveCap) {
        throw CapacityError("exhaustive enumeration refused: " + std::to_string(n) + " buses exceeds the cap of " +
                            std::to_string(kExhaustiveCap));
    }
    const std::size_t total = std::size_t{1} << n;
    ExhaustiveFront out;
    out.all_evaluations.resize(total);
    mupmu::detail::parallel_for(total, threads, [&](std::size_t c) {
        out.all_evaluations[c] = evaluate(placement_from_code(static_cast<std::uint32_t>(c), n), p);
    });
    std::vector<std::size_t> feasible;
    for (std::size_t c = 0; c < total; ++c) {
        if (out.all_evaluations[c].violations == 0) {
            feasible.push_back(c);
        }
    }
    for (auto c : feasible) {
        const auto& a = out.all_evaluations[c].objectives;
        bool dominated = false;
        for (auto d : feasible) {
            const auto& b = out.all_evaluations[d].objectives;
            if (b[0] <= a[0] && b[1] <= a[1] && b[2] <= a[2] && (b[0] < a[0] || b[1] < a[1] || b[2] < a[2])) {
                dominated = true;
                break;
            }
        }
        if (!dominated) {
            out.true_front.push_back(c);
        }
    }
    return out;
}

/// Front peeling by repeated pairwise scans, directly from the definition of
/// constraint domination. Fronts hold ascending indices.
inline std::vector<std::vector<std::size_t>> brute_force_sort(const std::vector<Individual>& pop)
{
    auto beats = [](const Individual& a, const Individual& b) {
        if (a.violations == 0 && b.violations > 0) {
            return true;
        }
        if (a.violations > 0 || b.violations > 0) {
            return a.violations > 0 && b.violations > 0 && a.violations < b.violations;
        }
        bool strict = false;
        for (std::size_t k = 0; k < 3; ++k) {
            if (a.objectives[k] > b.objectives[k]) {
                return false;
            }
            if (a.objectives[k] < b.objectives[k]) {
                strict = true;
            }
        }
        return strict;
    };
    std::vector<bool> placed(pop.size(), false);
    std::size_t remaining = pop.size();
    std::vector<std::vector<std::size_t>> fronts;
    while (remaining > 0) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < pop.size(); ++i) {
            if (placed[i]) {
                continue;
            }
            bool dominated = false;
            for (std::size_t j = 0; j < pop.size() && !dominated; ++j) {
                dominated = !placed[j] && j != i && beats(pop[j], pop[i]);
            }
            if (!dominated) {
                front.push_back(i);
            }
        }
        for (auto i : front) {
            placed[i] = true;
        }
        remaining -= front.size();
        fronts.push_back(std::move(front));
    }
    return fronts;
}

/// Dominated volume estimated by uniform sampling of the box spanned by the
/// componentwise minimum of the points and the reference.
inline double monte_carlo_hypervolume(std::span<const Point<3>> front, const Point<3>& ref, long samples,
                                      std::uint64_t rng_seed, unsigned threads = 0)
{
    if (front.empty()) {
        return 0.0;
    }
    Point<3> lo = front[0];
    for (const auto& p : front) {
        for (std::size_t k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], p[k]);
        }
    }
    constexpr long shard = 1 << 18;
    const long shards = (samples + shard - 1) / shard;
    std::vector<long> hits(static_cast<std::size_t>(shards), 0);
    mupmu::detail::parallel_for(static_cast<std::size_t>(shards), threads, [&](std::size_t s) {
        const long count = std::min(shard, samples - static_cast<long>(s) * shard);
        std::seed_seq seq{static_cast<std::uint32_t>(rng_seed), static_cast<std::uint32_t>(rng_seed >> 32),
                          static_cast<std::uint32_t>(s)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> ux(lo[0], ref[0]);
        std::uniform_real_distribution<double> uy(lo[1], ref[1]);
        std::uniform_real_distribution<double> uz(lo[2], ref[2]);
        long h = 0;
        for (long t = 0; t < count; ++t) {
            const double x = ux(rng);
            const double y = uy(rng);
            const double z = uz(rng);
            for (const auto& p : front) {
                if (p[0] <= x && p[1] <= y && p[2] <= z) {
                    ++h;
                    break;
                }
            }
        }
        hits[s] = h;
    });
    long total = 0;
    for (long h : hits) {
        total += h;
    }
    const double box = (ref[0] - lo[0]) * (ref[1] - lo[1]) * (ref[2] - lo[2]);
    return box * static_cast<double>(total) / static_cast<double>(samples);
}

} // namespace mupmu::validation

#endif
