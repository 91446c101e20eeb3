#ifndef MUPMU_ESTIMATION_HPP
#define MUPMU_ESTIMATION_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mupmu/error.hpp"
#include "mupmu/grid.hpp"
#include "mupmu/placement.hpp"

namespace mupmu {

/// Relative standard uncertainties of the phasor measurements.
struct UncertaintyParams {
    double sigma_v = 0.01;
    double sigma_i = 0.01;
    double zi_sigma_factor = 1e-2;
    /// Common relative uncertainty used to normalize R; defaults to sigma_v.
    std::optional<double> sigma_r;

    [[nodiscard]] double common_sigma() const { return sigma_r.value_or(sigma_v); }

    void validate() const
    {
        if (!(sigma_v > 0.0) || !(sigma_i > 0.0)) {
            throw SchemaError("uncertainty: sigma_v and sigma_i must be positive");
        }
        if (!(zi_sigma_factor > 0.0) || zi_sigma_factor > 1e-2) {
            throw SchemaError("uncertainty: zi_sigma_factor must lie in (0, 1e-2]");
        }
        if (sigma_r && !(*sigma_r > 0.0)) {
            throw SchemaError("uncertainty: sigma_r must be positive");
        }
    }
};

enum class MeasurementKind { Voltage, Current, ZeroInjection };
enum class Part { Real, Imag };

struct MeasurementRow {
    MeasurementKind kind = MeasurementKind::Voltage;
    int bus = -1;  // measuring bus (voltage, current) or the zero-injection bus
    int line = -1; // current rows only
    Part part = Part::Real;
};

/// Rectangular linear measurement model z = H v + e with v = [v_R; v_I].
///
/// Rows are stacked in six blocks: voltage real, voltage imaginary, current
/// real, current imaginary, zero-injection real, zero-injection imaginary.
/// Row k of an imaginary block belongs to the same measurement as row k of
/// the real block just above it.
struct MeasurementModel {
    int num_buses = 0;
    int n_voltage = 0;
    int n_current = 0;
    int n_zero = 0;
    Eigen::MatrixXd H;         // 2M x 2N
    Eigen::VectorXd variances; // diagonal of R
    std::vector<MeasurementRow> rows;

    [[nodiscard]] int num_measurements() const { return n_voltage + n_current + n_zero; }
};

struct StateCovariance {
    Eigen::MatrixXd phi_real;     // 2N x 2N
    Eigen::MatrixXcd phi_complex; // N x N, Hermitian
};

inline constexpr double kSingularRatio = 1e-10;

inline MeasurementModel build_measurement_model(const GridModel& grid, const ChannelAssignment& asg,
                                                const ZinVector& u, const UncertaintyParams& params)
{
    const int n = grid.num_buses();
    const double base = grid.base_voltage();

    struct CurrentMeas {
        int bus;
        int line;
    };
    std::vector<int> vbuses;
    std::vector<CurrentMeas> currents;
    std::vector<int> zbuses;
    for (int i = 0; i < n; ++i) {
        const auto& bc = asg.buses[static_cast<std::size_t>(i)];
        if (bc.instrumented) {
            vbuses.push_back(i);
            for (int l : bc.monitored_lines) {
                currents.push_back({i, l});
            }
        }
        if (u[static_cast<std::size_t>(i)]) {
            zbuses.push_back(i);
        }
    }

    MeasurementModel m;
    m.num_buses = n;
    m.n_voltage = static_cast<int>(vbuses.size());
    m.n_current = static_cast<int>(currents.size());
    m.n_zero = static_cast<int>(zbuses.size());
    const int mtot = m.num_measurements();
    m.H = Eigen::MatrixXd::Zero(2 * mtot, 2 * n);
    m.variances.resize(2 * mtot);
    m.rows.resize(static_cast<std::size_t>(2 * mtot));

    // Block offsets; the imaginary row of a measurement sits one block-length below its real row.
    const int off_v = 0;
    const int off_i = 2 * m.n_voltage;
    const int off_z = 2 * (m.n_voltage + m.n_current);
    auto set_meta = [&](int r, int block_len, MeasurementRow meta) {
        m.rows[static_cast<std::size_t>(r)] = meta;
        meta.part = Part::Imag;
        m.rows[static_cast<std::size_t>(r + block_len)] = meta;
    };

    double min_sigma = std::numeric_limits<double>::infinity();
    for (int k = 0; k < m.n_voltage; ++k) {
        const int bus = vbuses[static_cast<std::size_t>(k)];
        const int r = off_v + k;
        const int ri = r + m.n_voltage;
        m.H(r, bus) = 1.0;
        m.H(ri, n + bus) = 1.0;
        const double s = params.sigma_v * base;
        m.variances(r) = m.variances(ri) = s * s;
        min_sigma = std::min(min_sigma, s);
        set_meta(r, m.n_voltage, {MeasurementKind::Voltage, bus, -1, Part::Real});
    }
    for (int k = 0; k < m.n_current; ++k) {
        const auto [p, l] = currents[static_cast<std::size_t>(k)];
        const Line& ln = grid.line(l);
        const int q = ln.other(p);
        const auto y = ln.admittance();
        const int r = off_i + k;
        const int ri = r + m.n_current;
        // I = y (V_p - V_q)
        m.H(r, p) = y.real();
        m.H(r, q) = -y.real();
        m.H(r, n + p) = -y.imag();
        m.H(r, n + q) = y.imag();
        m.H(ri, p) = y.imag();
        m.H(ri, q) = -y.imag();
        m.H(ri, n + p) = y.real();
        m.H(ri, n + q) = -y.real();
        const double s = params.sigma_i * base * std::abs(y);
        m.variances(r) = m.variances(ri) = s * s;
        min_sigma = std::min(min_sigma, s);
        set_meta(r, m.n_current, {MeasurementKind::Current, p, l, Part::Real});
    }
    if (m.n_zero > 0) {
        if (!std::isfinite(min_sigma)) {
            min_sigma = params.sigma_v * base;
        }
        const double s = params.zi_sigma_factor * min_sigma;
        const auto y = build_admittance(grid);
        for (int k = 0; k < m.n_zero; ++k) {
            const int z = zbuses[static_cast<std::size_t>(k)];
            const int r = off_z + k;
            const int ri = r + m.n_zero;
            m.H.block(r, 0, 1, n) = y.G.row(z);
            m.H.block(r, n, 1, n) = -y.B.row(z);
            m.H.block(ri, 0, 1, n) = y.B.row(z);
            m.H.block(ri, n, 1, n) = y.G.row(z);
            m.variances(r) = m.variances(ri) = s * s;
            set_meta(r, m.n_zero, {MeasurementKind::ZeroInjection, z, -1, Part::Real});
        }
    }
    return m;
}

/// H^T R^{-1} H.
inline Eigen::MatrixXd information_matrix(const MeasurementModel& m)
{
    const Eigen::VectorXd w = m.variances.cwiseInverse();
    return m.H.transpose() * w.asDiagonal() * m.H;
}

/// Eigenvalues of a symmetric PSD information matrix, ascending.
inline Eigen::VectorXd information_spectrum(const Eigen::MatrixXd& info)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

/// Number of information-matrix eigenvalues below kSingularRatio times the largest.
inline int rank_deficiency(const Eigen::VectorXd& spectrum)
{
    if (spectrum.size() == 0) {
        return 0;
    }
    const double top = spectrum.maxCoeff();
    if (!(top > 0.0)) {
        return static_cast<int>(spectrum.size());
    }
    return static_cast<int>((spectrum.array() < kSingularRatio * top).count());
}

namespace detail {

inline void require_nonsingular(const Eigen::MatrixXd& info)
{
    if (info.rows() == 0) {
        return;
    }
    const auto spec = information_spectrum(info);
    if (rank_deficiency(spec) > 0) {
        throw SingularGainError("singular gain: information matrix rank deficient (min/max eigenvalue " +
                                std::to_string(spec.minCoeff() / std::max(spec.maxCoeff(), 1e-300)) + ")");
    }
}

/// Householder QR of the whitened, column-equilibrated model R^-1/2 H D.
/// The triangular factor is a Cholesky factor of the scaled information
/// matrix, so the information matrix itself is never inverted.
struct WhitenedFactor {
    Eigen::VectorXd wsqrt;        // R^-1/2 diagonal
    Eigen::VectorXd col_scale;    // D
    Eigen::HouseholderQR<Eigen::MatrixXd> qr;
    Eigen::MatrixXd r_inv;        // upper triangular
};

inline WhitenedFactor whitened_factor(const MeasurementModel& m)
{
    WhitenedFactor f;
    f.wsqrt = m.variances.cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd a = f.wsqrt.asDiagonal() * m.H;
    f.col_scale = a.colwise().norm().transpose().cwiseInverse();
    a = a * f.col_scale.asDiagonal();
    f.qr.compute(a);
    const Eigen::Index n = m.H.cols();
    const Eigen::MatrixXd r = f.qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    f.r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(n, n));
    if (!f.r_inv.allFinite()) {
        throw SingularGainError("singular gain: triangular factor is singular");
    }
    return f;
}

inline void require_estimable(const MeasurementModel& m)
{
    if (m.H.rows() < m.H.cols()) {
        throw SingularGainError("singular gain: " + std::to_string(m.H.rows()) + " measurement rows for " +
                                std::to_string(m.H.cols()) + " states");
    }
    detail::require_nonsingular(information_matrix(m));
}

} // namespace detail

/// [H^T R^-1 H]^-1, throwing SingularGainError for unobservable models.
inline Eigen::MatrixXd information_inverse(const MeasurementModel& m)
{
    detail::require_estimable(m);
    const auto f = detail::whitened_factor(m);
    const Eigen::MatrixXd g = f.col_scale.asDiagonal() * f.r_inv;
    Eigen::MatrixXd inv = g * g.transpose();
    return 0.5 * (inv + inv.transpose());
}

/// WLS gain F = [H^T R^-1 H]^-1 H^T R^-1 (2N x 2M).
inline Eigen::MatrixXd wls_gain(const MeasurementModel& m)
{
    detail::require_estimable(m);
    const auto f = detail::whitened_factor(m);
    const Eigen::MatrixXd q = f.qr.householderQ() * Eigen::MatrixXd::Identity(m.H.rows(), m.H.cols());
    return f.col_scale.asDiagonal() * f.r_inv * q.transpose() * f.wsqrt.asDiagonal();
}

/// Complex error covariance from the real 2N x 2N one.
inline Eigen::MatrixXcd complex_covariance(const Eigen::MatrixXd& phi_real)
{
    const Eigen::Index n = phi_real.rows() / 2;
    const auto rr = phi_real.topLeftCorner(n, n);
    const auto ii = phi_real.bottomRightCorner(n, n);
    const auto ir = phi_real.bottomLeftCorner(n, n);
    const auto ri = phi_real.topRightCorner(n, n);
    Eigen::MatrixXcd c(n, n);
    c.real() = rr + ii;
    c.imag() = ir - ri;
    return c;
}

/// Covariance of the estimation error propagated through the gain, F R F^T.
inline StateCovariance error_covariance(const MeasurementModel& m)
{
    const Eigen::MatrixXd f = wls_gain(m);
    StateCovariance cov;
    cov.phi_real = f * m.variances.asDiagonal() * f.transpose();
    cov.phi_complex = complex_covariance(cov.phi_real);
    return cov;
}

/// Same covariance taken directly as the information inverse.
inline StateCovariance information_covariance(const MeasurementModel& m)
{
    StateCovariance cov;
    cov.phi_real = information_inverse(m);
    cov.phi_complex = complex_covariance(cov.phi_real);
    return cov;
}

/// Worst-case standard uncertainty, percent of nominal slack voltage.
inline double max_uncertainty(const Eigen::MatrixXcd& phi_complex, double base_voltage)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(phi_complex, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    if (ev.minCoeff() < -1e-10) {
        throw NumericalError("covariance not PSD: eigenvalue " + std::to_string(ev.minCoeff()));
    }
    return 100.0 * std::sqrt(std::max(ev.maxCoeff(), 0.0)) / base_voltage;
}

inline double max_uncertainty(const StateCovariance& cov, double base_voltage)
{
    return max_uncertainty(cov.phi_complex, base_voltage);
}

} // namespace mupmu

#endif
