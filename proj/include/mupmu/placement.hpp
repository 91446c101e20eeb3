#ifndef MUPMU_PLACEMENT_HPP
#define MUPMU_PLACEMENT_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "mupmu/grid.hpp"

namespace mupmu {

/// Binary instrumentation vector: bit i set means a device sits at bus i.
class Placement {
public:
    Placement() = default;
    explicit Placement(std::size_t n, bool value = false) : bits_(n, value ? 1 : 0) {}
    explicit Placement(std::vector<std::uint8_t> bits) : bits_(std::move(bits))
    {
        for (auto& b : bits_) {
            b = b ? 1 : 0;
        }
    }

    static Placement from_buses(std::size_t n, const std::vector<int>& ids)
    {
        Placement p(n);
        for (int id : ids) {
            if (id < 0 || static_cast<std::size_t>(id) >= n) {
                throw SchemaError("unknown bus id " + std::to_string(id));
            }
            p.set(static_cast<std::size_t>(id), true);
        }
        return p;
    }

    [[nodiscard]] std::size_t size() const { return bits_.size(); }
    [[nodiscard]] bool operator[](std::size_t i) const { return bits_[i] != 0; }
    void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }
    void flip(std::size_t i) { bits_[i] ^= 1; }
    [[nodiscard]] int count() const { return static_cast<int>(std::count(bits_.begin(), bits_.end(), 1)); }
    [[nodiscard]] const std::vector<std::uint8_t>& bits() const { return bits_; }

    [[nodiscard]] std::vector<int> buses() const
    {
        std::vector<int> out;
        for (std::size_t i = 0; i < bits_.size(); ++i) {
            if (bits_[i]) {
                out.push_back(static_cast<int>(i));
            }
        }
        return out;
    }

    /// "0101..." with bus 0 first.
    [[nodiscard]] std::string str() const
    {
        std::string s(bits_.size(), '0');
        for (std::size_t i = 0; i < bits_.size(); ++i) {
            s[i] = bits_[i] ? '1' : '0';
        }
        return s;
    }

    friend bool operator==(const Placement&, const Placement&) = default;
    friend auto operator<=>(const Placement& a, const Placement& b) { return a.bits_ <=> b.bits_; }

private:
    std::vector<std::uint8_t> bits_;
};

struct PlacementHash {
    std::size_t operator()(const Placement& p) const noexcept
    {
        // FNV-1a over the bit bytes
        std::uint64_t h = 1469598103934665603ULL;
        for (auto b : p.bits()) {
            h ^= b;
            h *= 1099511628211ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

/// u_i = 1 iff bus i is a zero-injection node.
using ZinVector = Placement;

inline ZinVector zin_vector(const GridModel& grid)
{
    ZinVector u(static_cast<std::size_t>(grid.num_buses()));
    for (const auto& b : grid.buses()) {
        u.set(static_cast<std::size_t>(b.id), b.zero_injection);
    }
    return u;
}

enum class CaseMode { A, B };

/// How a device row enters the observability check. ChannelLimited masks a
/// device's reach to its own bus plus monitored far ends; FullRow applies the
/// plain connectivity row regardless of channels.
enum class Observability { ChannelLimited, FullRow };

struct ChannelConfig {
    CaseMode mode = CaseMode::B;
    Eigen::MatrixXi gamma;   // allowed-measurement matrix
    std::vector<int> n_c;    // per-bus channel caps
    bool contingency_aware = false;
    Observability observability = Observability::ChannelLimited;
};

inline ChannelConfig make_channel_config(const GridModel& grid, const ConnectivityMatrix& a, CaseMode mode,
                                         bool contingency_aware,
                                         Observability obs = Observability::ChannelLimited)
{
    ChannelConfig cfg;
    cfg.mode = mode;
    cfg.contingency_aware = contingency_aware;
    cfg.observability = obs;
    const int n = grid.num_buses();
    cfg.n_c.resize(static_cast<std::size_t>(n));
    if (mode == CaseMode::A) {
        cfg.gamma = Eigen::MatrixXi::Identity(n, n);
        std::fill(cfg.n_c.begin(), cfg.n_c.end(), 2);
    } else {
        cfg.gamma = a;
        for (int i = 0; i < n; ++i) {
            cfg.n_c[static_cast<std::size_t>(i)] = grid.degree(i) + 2;
        }
    }
    return cfg;
}

struct BusChannels {
    bool instrumented = false;
    bool voltage_channel = false;
    std::vector<int> monitored_lines; // ascending line ids
    int channels_used = 0;
};

struct ChannelAssignment {
    std::vector<BusChannels> buses;
};

/// Line a capped device monitors first: far end of smallest degree, then
/// smallest bus index. Depends on topology only.
inline std::vector<int> ranked_incident_lines(const GridModel& grid, int bus)
{
    std::vector<int> lines = grid.incident_lines(bus);
    std::sort(lines.begin(), lines.end(), [&](int la, int lb) {
        const int fa = grid.line(la).other(bus);
        const int fb = grid.line(lb).other(bus);
        const int da = grid.degree(fa);
        const int db = grid.degree(fb);
        return da != db ? da < db : fa < fb;
    });
    return lines;
}

inline ChannelAssignment assign_channels(const GridModel& grid, const Placement& x, const ChannelConfig& cfg)
{
    ChannelAssignment asg;
    asg.buses.resize(static_cast<std::size_t>(grid.num_buses()));
    for (int i = 0; i < grid.num_buses(); ++i) {
        if (!x[static_cast<std::size_t>(i)]) {
            continue;
        }
        auto& bc = asg.buses[static_cast<std::size_t>(i)];
        bc.instrumented = true;
        bc.voltage_channel = true;
        const int current_slots = cfg.n_c[static_cast<std::size_t>(i)] - 1;
        if (grid.degree(i) <= current_slots) {
            bc.monitored_lines = grid.incident_lines(i);
        } else {
            auto ranked = ranked_incident_lines(grid, i);
            ranked.resize(static_cast<std::size_t>(std::max(current_slots, 0)));
            bc.monitored_lines = std::move(ranked);
        }
        std::sort(bc.monitored_lines.begin(), bc.monitored_lines.end());
        bc.channels_used = 1 + static_cast<int>(bc.monitored_lines.size());
    }
    return asg;
}

/// Device reach matrix: entry (i, j) = 1 when a device at j observes bus i.
inline Eigen::MatrixXi device_reach(const GridModel& grid, const ChannelAssignment& asg, const ConnectivityMatrix& a,
                                    Observability obs)
{
    if (obs == Observability::FullRow) {
        return a;
    }
    const int n = grid.num_buses();
    Eigen::MatrixXi reach = Eigen::MatrixXi::Identity(n, n);
    for (int j = 0; j < n; ++j) {
        for (int l : asg.buses[static_cast<std::size_t>(j)].monitored_lines) {
            reach(grid.line(l).other(j), j) = 1;
        }
    }
    return reach;
}

namespace detail {

inline Eigen::VectorXi to_vector(const Placement& p)
{
    Eigen::VectorXi v(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = p[i] ? 1 : 0;
    }
    return v;
}

inline int count_unobserved(const Eigen::VectorXi& obs)
{
    return static_cast<int>((obs.array() == 0).count());
}

} // namespace detail

/// Per-bus count of observation sources under the channel assignment; a
/// zero-injection node contributes like a device with its full connectivity row.
inline std::vector<int> effective_observation(const GridModel& grid, const Placement& x, const ZinVector& u,
                                              const ChannelAssignment& asg,
                                              Observability obs = Observability::ChannelLimited)
{
    const auto a = build_connectivity(grid);
    Eigen::VectorXi counts = device_reach(grid, asg, a, obs) * detail::to_vector(x) + a * detail::to_vector(u);
    return {counts.data(), counts.data() + counts.size()};
}

struct ConstraintReport {
    bool observable_normal = false;
    int violations_normal = 0;
    bool contingency_evaluated = false; // the two fields below are meaningful only when set
    bool observable_contingency = false;
    int violations_contingency = 0;
    bool channel_ok = true;

    /// Unsatisfied rows counted toward feasibility under the active constraint set.
    [[nodiscard]] int total(bool contingency_aware) const
    {
        return violations_normal + (contingency_aware ? violations_contingency : 0);
    }
};

inline bool channels_within_caps(const ChannelAssignment& asg, const ChannelConfig& cfg)
{
    for (std::size_t i = 0; i < asg.buses.size(); ++i) {
        if (asg.buses[i].channels_used > cfg.n_c[i]) {
            return false;
        }
    }
    return true;
}

/// Normal observability plus, when cfg.contingency_aware, the stacked
/// single-failure checks. Zero-injection rows are never removed by a device
/// loss; a line outage removes the branch from both device and ZIN reach.
inline ConstraintReport check_constraints(const GridModel& grid, const Placement& x, const ZinVector& u,
                                          const ChannelConfig& cfg, const ChannelAssignment& asg,
                                          const ConnectivityMatrix& a, const ContingencySet& contingencies)
{
    ConstraintReport rep;
    const Eigen::MatrixXi reach = device_reach(grid, asg, a, cfg.observability);
    const Eigen::VectorXi xv = detail::to_vector(x);
    const Eigen::VectorXi uv = detail::to_vector(u);
    const Eigen::VectorXi zin_obs = a * uv;

    rep.violations_normal = detail::count_unobserved(reach * xv + zin_obs);
    rep.observable_normal = rep.violations_normal == 0;
    rep.channel_ok = channels_within_caps(asg, cfg);

    if (cfg.contingency_aware) {
        int v = 0;
        for (const auto& m : contingencies.pmu_loss) {
            v += detail::count_unobserved(reach.cwiseProduct(m) * xv + zin_obs);
        }
        for (const auto& m : contingencies.line_outage) {
            v += detail::count_unobserved(reach.cwiseProduct(m) * xv + m * uv);
        }
        rep.contingency_evaluated = true;
        rep.violations_contingency = v;
        rep.observable_contingency = v == 0;
    }
    return rep;
}

inline int channel_cost(const Placement& x, const ChannelAssignment& asg)
{
    int c = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i]) {
            c += asg.buses[i].channels_used;
        }
    }
    return c;
}

} // namespace mupmu

#endif
