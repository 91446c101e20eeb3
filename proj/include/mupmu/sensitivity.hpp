#ifndef MUPMU_SENSITIVITY_HPP
#define MUPMU_SENSITIVITY_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mupmu/error.hpp"
#include "mupmu/estimation.hpp"
#include "mupmu/grid.hpp"

namespace mupmu {

enum class SensitivitySearch { PerLineCorners, SingleEntry };
enum class IncreaseMode { Signed, Absolute };

struct ToleranceSpec {
    double delta = 0.05;
    SensitivitySearch search = SensitivitySearch::PerLineCorners;
    IncreaseMode increase = IncreaseMode::Signed;

    void validate() const
    {
        if (!(delta > 0.0 && delta < 1.0)) {
            throw SchemaError("tolerance: delta must lie in (0, 1)");
        }
    }
};

/// Where the worst covariance increase was found.
struct SensitivityArgmax {
    int row = -1; // entry of the 2N x 2N sensitivity matrix
    int col = -1;
    int line = -1; // PerLineCorners: perturbed line
    int sign = 0;  // PerLineCorners: +1 or -1
    int h_row = -1; // SingleEntry: perturbed entry of H
    int h_col = -1;
};

struct SensitivityResult {
    Eigen::MatrixXd s_nominal;
    double s_value = 0.0;
    SensitivityArgmax argmax;
};

class SingularPerturbationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// [H^T Rn^-1 H]^-1 with R = sigma_r^2 Rn.
inline Eigen::MatrixXd sensitivity_matrix(const MeasurementModel& m, double sigma_r)
{
    return information_inverse(m) / (sigma_r * sigma_r);
}

/// Rows of a model that carry the series admittance of one line.
///
/// Scaling y_l by (1 + eps) adds eps * (c_alpha * alpha + c_beta * beta) to
/// each listed row, where with d = e_from - e_to and y_l = g + jb,
/// alpha = [g d; -b d] and beta = [b d; g d].
struct LineDependence {
    int line = -1;
    Eigen::VectorXd alpha;
    Eigen::VectorXd beta;
    struct Row {
        int index;
        double c_alpha;
        double c_beta;
    };
    std::vector<Row> rows;
};

inline LineDependence line_dependence(const MeasurementModel& m, const GridModel& grid, int line)
{
    const Line& ln = grid.line(line);
    const int n = m.num_buses;
    const auto y = ln.admittance();
    LineDependence dep;
    dep.line = line;
    dep.alpha = Eigen::VectorXd::Zero(2 * n);
    dep.beta = Eigen::VectorXd::Zero(2 * n);
    dep.alpha(ln.from) = y.real();
    dep.alpha(ln.to) = -y.real();
    dep.alpha(n + ln.from) = -y.imag();
    dep.alpha(n + ln.to) = y.imag();
    dep.beta(ln.from) = y.imag();
    dep.beta(ln.to) = -y.imag();
    dep.beta(n + ln.from) = y.real();
    dep.beta(n + ln.to) = -y.real();

    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        const auto& meta = m.rows[r];
        double orient = 0.0;
        if (meta.kind == MeasurementKind::Current && meta.line == line) {
            orient = meta.bus == ln.from ? 1.0 : -1.0;
        } else if (meta.kind == MeasurementKind::ZeroInjection && ln.touches(meta.bus)) {
            orient = meta.bus == ln.from ? 1.0 : -1.0;
        } else {
            continue;
        }
        if (meta.part == Part::Real) {
            dep.rows.push_back({static_cast<int>(r), orient, 0.0});
        } else {
            dep.rows.push_back({static_cast<int>(r), 0.0, orient});
        }
    }
    return dep;
}

/// Lines whose admittance enters H, ascending.
inline std::vector<int> model_lines(const MeasurementModel& m, const GridModel& grid)
{
    std::set<int> lines;
    for (const auto& meta : m.rows) {
        if (meta.kind == MeasurementKind::Current) {
            lines.insert(meta.line);
        } else if (meta.kind == MeasurementKind::ZeroInjection) {
            for (int l : grid.incident_lines(meta.bus)) {
                lines.insert(l);
            }
        }
    }
    return {lines.begin(), lines.end()};
}

/// Model with line `line`'s series admittance scaled by (1 + sign*delta).
/// Voltage rows and R stay at their nominal values.
inline MeasurementModel perturbed_model(const MeasurementModel& m, const GridModel& grid, int line, int sign,
                                        double delta)
{
    MeasurementModel out = m;
    const double eps = sign * delta;
    const auto dep = line_dependence(m, grid, line);
    for (const auto& r : dep.rows) {
        out.H.row(r.index) += eps * (r.c_alpha * dep.alpha + r.c_beta * dep.beta).transpose();
    }
    return out;
}

namespace detail {

/// S = (g g^T) / sigma_r^2 from the whitened QR, with the thin orthonormal
/// factor q and the row whitening kept for perturbation updates.
struct SensitivityFactor {
    Eigen::MatrixXd g;
    double inv_sigma_r = 1.0;
    Eigen::MatrixXd q;
    Eigen::VectorXd wsqrt;
};

inline SensitivityFactor sensitivity_factor(const MeasurementModel& m, double sigma_r)
{
    require_estimable(m);
    const auto f = whitened_factor(m);
    SensitivityFactor out;
    out.g = f.col_scale.asDiagonal() * f.r_inv;
    out.inv_sigma_r = 1.0 / sigma_r;
    out.q = f.qr.householderQ() * Eigen::MatrixXd::Identity(m.H.rows(), m.H.cols());
    out.wsqrt = f.wsqrt;
    return out;
}

/// Rank-4 update of S for one line, worked in the orthonormal frame of the
/// whitened QR. With B = g^T [alpha beta] and Z the whitened row
/// coefficients, the scaled information becomes I + V E V^T where
/// V = [B, q^T Z] and E = [eps^2 Z^T Z, eps I; eps I, 0]. In E^-1 + V^T V the
/// q^T Z block cancels against Z^T Z, leaving the part of Z outside range(q).
class LineUpdate {
public:
    LineUpdate(const SensitivityFactor& f, const LineDependence& dep) : line_(dep.line)
    {
        const Eigen::Index dim = f.g.rows();
        Eigen::MatrixXd p(dim, 2);
        p.col(0) = dep.alpha;
        p.col(1) = dep.beta;
        Eigen::MatrixXd v(dim, 4);
        v.leftCols(2) = f.g.transpose() * p;
        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(f.q.rows(), 2);
        for (const auto& r : dep.rows) {
            z.row(r.index) += f.wsqrt(r.index) * Eigen::RowVector2d(r.c_alpha, r.c_beta);
        }
        v.rightCols(2) = f.q.transpose() * z;
        // Z^T Z - Y^T Y cancels when Z lies nearly in range(q), so the
        // orthogonal remainder is formed explicitly, projected twice.
        Eigen::MatrixXd zp = z - f.q * v.rightCols(2);
        zp -= f.q * (f.q.transpose() * zp);
        z2_ = zp.transpose() * zp;
        w_ = v.transpose() * v;
        gv_ = (f.g * v) * f.inv_sigma_r;
    }

    /// S(eps) - S(0).
    [[nodiscard]] Eigen::MatrixXd increase(double eps) const
    {
        Eigen::MatrixXd d = -gv_ * core(eps) * gv_.transpose();
        if (!d.allFinite()) {
            throw SingularPerturbationError("singular under perturbation of line " + std::to_string(line_));
        }
        return d;
    }

    /// Largest entry of increase(eps), or of its magnitude, without forming it.
    /// The increase is symmetric, so only i <= j is visited.
    [[nodiscard]] double max_entry(double eps, bool absolute, Eigen::Index& row, Eigen::Index& col) const
    {
        const Eigen::Matrix<double, 4, Eigen::Dynamic> a = -(gv_ * core(eps)).transpose();
        const Eigen::Matrix<double, 4, Eigen::Dynamic> b = gv_.transpose();
        double best = -std::numeric_limits<double>::infinity();
        row = col = 0;
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            const Eigen::Vector4d bj = b.col(j);
            for (Eigen::Index i = 0; i <= j; ++i) {
                double v = a.col(i).dot(bj);
                if (absolute) {
                    v = std::abs(v);
                }
                if (v > best) {
                    best = v;
                    row = i;
                    col = j;
                }
            }
        }
        if (!std::isfinite(best)) {
            throw SingularPerturbationError("singular under perturbation of line " + std::to_string(line_));
        }
        return best;
    }

private:
    /// (E^-1 + V^T V)^-1 written as D K^-1 D with D = diag(1, 1, eps, eps),
    /// which stays finite as eps -> 0.
    [[nodiscard]] Eigen::Matrix4d core(double eps) const
    {
        const Eigen::Vector4d scale(1.0, 1.0, eps, eps);
        Eigen::Matrix4d k = scale.asDiagonal() * w_ * scale.asDiagonal();
        k.block<2, 2>(0, 2) += Eigen::Matrix2d::Identity();
        k.block<2, 2>(2, 0) += Eigen::Matrix2d::Identity();
        k.block<2, 2>(2, 2) = -(eps * eps) * z2_;
        Eigen::FullPivLU<Eigen::Matrix4d> lu(k);
        if (!lu.isInvertible()) {
            throw SingularPerturbationError("singular under perturbation of line " + std::to_string(line_));
        }
        const Eigen::Matrix4d c = scale.asDiagonal() * lu.inverse() * scale.asDiagonal();
        return 0.5 * (c + c.transpose());
    }

    int line_;
    Eigen::MatrixXd gv_;
    Eigen::Matrix4d w_;
    Eigen::Matrix2d z2_;
};

} // namespace detail

/// Worst increase of a sensitivity-matrix entry under line-parameter
/// tolerance +-delta.
inline SensitivityResult max_sensitivity(const MeasurementModel& m, const GridModel& grid, const ToleranceSpec& tol,
                                         double sigma_r)
{
    const auto factor = detail::sensitivity_factor(m, sigma_r);
    SensitivityResult res;
    const Eigen::MatrixXd gs = factor.g * factor.inv_sigma_r;
    res.s_nominal = gs * gs.transpose();
    res.s_nominal = 0.5 * (res.s_nominal + res.s_nominal.transpose()).eval();
    const Eigen::MatrixXd& s = res.s_nominal;
    const Eigen::VectorXd wn = (sigma_r * sigma_r) * m.variances.cwiseInverse();
    const Eigen::Index dim = s.rows();

    double best = 0.0;
    auto consider = [&](double v, int i, int j, SensitivityArgmax where) {
        if (v > best) {
            best = v;
            where.row = i;
            where.col = j;
            res.argmax = where;
        }
    };

    if (tol.search == SensitivitySearch::PerLineCorners) {
        for (int line : model_lines(m, grid)) {
            const detail::LineUpdate update(factor, line_dependence(m, grid, line));
            for (int sign : {+1, -1}) {
                Eigen::Index i = 0;
                Eigen::Index j = 0;
                const double v =
                    update.max_entry(sign * tol.delta, tol.increase == IncreaseMode::Absolute, i, j);
                consider(v, static_cast<int>(i), static_cast<int>(j), {-1, -1, line, sign, -1, -1});
            }
        }
    } else {
        // First order, one H entry at a time: dS = -eps w (s_c a_r^T + a_r s_c^T),
        // a_r = S h_r. Both signs of eps are admissible, so signed and absolute
        // increases coincide.
        const Eigen::MatrixXd a = s * m.H.transpose();
        for (std::size_t r = 0; r < m.rows.size(); ++r) {
            if (m.rows[r].kind == MeasurementKind::Voltage) {
                continue;
            }
            const auto ri = static_cast<Eigen::Index>(r);
            for (Eigen::Index c = 0; c < m.H.cols(); ++c) {
                const double h = m.H(ri, c);
                if (h == 0.0) {
                    continue;
                }
                const double scale = std::abs(tol.delta * h * wn(ri));
                for (Eigen::Index j = 0; j < dim; ++j) {
                    for (Eigen::Index i = 0; i <= j; ++i) {
                        const double v = scale * std::abs(s(i, c) * a(j, ri) + a(i, ri) * s(j, c));
                        consider(v, static_cast<int>(i), static_cast<int>(j),
                                 {-1, -1, -1, 0, static_cast<int>(r), static_cast<int>(c)});
                    }
                }
            }
        }
    }
    res.s_value = best;
    return res;
}

} // namespace mupmu

#endif
