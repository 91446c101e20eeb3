#ifndef MUPMU_GRID_HPP
#define MUPMU_GRID_HPP

#include <algorithm>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mupmu/error.hpp"

namespace mupmu {

struct Bus {
    int id = 0;
    bool zero_injection = false;
    std::string name;
};

/// Series branch between two buses; r and x in per-unit.
struct Line {
    int id = 0;
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;

    [[nodiscard]] std::complex<double> admittance() const { return 1.0 / std::complex<double>(r, x); }
    [[nodiscard]] int other(int bus) const { return bus == from ? to : from; }
    [[nodiscard]] bool touches(int bus) const { return bus == from || bus == to; }
};

/// Validated single-phase network. Immutable once built by load_grid().
class GridModel {
public:
    GridModel() = default;
    GridModel(std::vector<Bus> buses, std::vector<Line> lines, int slack, double base_voltage);

    [[nodiscard]] int num_buses() const { return static_cast<int>(buses_.size()); }
    [[nodiscard]] int num_lines() const { return static_cast<int>(lines_.size()); }
    [[nodiscard]] const std::vector<Bus>& buses() const { return buses_; }
    [[nodiscard]] const std::vector<Line>& lines() const { return lines_; }
    [[nodiscard]] const Bus& bus(int i) const { return buses_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const Line& line(int l) const { return lines_[static_cast<std::size_t>(l)]; }
    [[nodiscard]] int slack_bus() const { return slack_; }
    [[nodiscard]] double base_voltage() const { return base_voltage_; }

    /// Line ids incident to bus i, ascending.
    [[nodiscard]] const std::vector<int>& incident_lines(int i) const { return incident_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] int degree(int i) const { return static_cast<int>(incident_lines(i).size()); }
    [[nodiscard]] int zero_injection_count() const;

private:
    std::vector<Bus> buses_;
    std::vector<Line> lines_;
    int slack_ = 0;
    double base_voltage_ = 1.0;
    std::vector<std::vector<int>> incident_;
};

using ConnectivityMatrix = Eigen::MatrixXi;

/// Single-failure variants of the connectivity matrix.
struct ContingencySet {
    std::vector<ConnectivityMatrix> pmu_loss;    // one per bus: column b zeroed
    std::vector<ConnectivityMatrix> line_outage; // one per line: that line removed
};

struct NodalAdmittance {
    Eigen::MatrixXd G;
    Eigen::MatrixXd B;
};

// ---------------------------------------------------------------------------

inline GridModel::GridModel(std::vector<Bus> buses, std::vector<Line> lines, int slack, double base_voltage)
    : buses_(std::move(buses)), lines_(std::move(lines)), slack_(slack), base_voltage_(base_voltage)
{
    const auto n = buses_.size();
    if (n < 2) {
        throw SchemaError("network needs at least 2 buses");
    }
    if (lines_.empty()) {
        throw SchemaError("network needs at least 1 line");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (buses_[i].id != static_cast<int>(i)) {
            throw SchemaError("bus ids must be contiguous 0.." + std::to_string(n - 1) + "; bus " +
                              std::to_string(i) + " is missing");
        }
    }
    if (slack_ < 0 || slack_ >= static_cast<int>(n)) {
        throw SchemaError("slack bus " + std::to_string(slack_) + " does not exist");
    }
    if (buses_[static_cast<std::size_t>(slack_)].zero_injection) {
        throw SchemaError("slack bus " + std::to_string(slack_) + " cannot be zero-injection");
    }
    if (!(base_voltage_ > 0.0)) {
        throw SchemaError("base_voltage must be positive");
    }

    std::set<std::pair<int, int>> pairs;
    incident_.assign(n, {});
    for (std::size_t l = 0; l < lines_.size(); ++l) {
        const Line& ln = lines_[l];
        const auto lid = std::to_string(ln.id);
        if (ln.id != static_cast<int>(l)) {
            throw SchemaError("line ids must be contiguous 0.." + std::to_string(lines_.size() - 1) + "; line " +
                              std::to_string(l) + " is missing");
        }
        if (ln.from < 0 || ln.from >= static_cast<int>(n) || ln.to < 0 || ln.to >= static_cast<int>(n)) {
            throw SchemaError("line " + lid + " references an unknown bus");
        }
        if (ln.from == ln.to) {
            throw SchemaError("self-loop on line " + lid);
        }
        if (ln.r < 0.0) {
            throw SchemaError("negative resistance on line " + lid);
        }
        if (ln.r == 0.0 && ln.x == 0.0) {
            throw SchemaError("zero impedance on line " + lid);
        }
        auto key = std::minmax(ln.from, ln.to);
        if (!pairs.insert(key).second) {
            throw SchemaError("duplicate line " + lid + " between buses " + std::to_string(key.first) + " and " +
                              std::to_string(key.second));
        }
        incident_[static_cast<std::size_t>(ln.from)].push_back(ln.id);
        incident_[static_cast<std::size_t>(ln.to)].push_back(ln.id);
    }

    // connectivity by DFS from bus 0
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        int b = stack.back();
        stack.pop_back();
        for (int l : incident_[static_cast<std::size_t>(b)]) {
            int o = lines_[static_cast<std::size_t>(l)].other(b);
            if (!seen[static_cast<std::size_t>(o)]) {
                seen[static_cast<std::size_t>(o)] = 1;
                stack.push_back(o);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!seen[i]) {
            throw SchemaError("disconnected network: bus " + std::to_string(i) + " is unreachable from bus 0");
        }
    }
}

inline int GridModel::zero_injection_count() const
{
    return static_cast<int>(std::count_if(buses_.begin(), buses_.end(), [](const Bus& b) { return b.zero_injection; }));
}

namespace detail {

template <typename T>
T require(const nlohmann::json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key)) {
        throw SchemaError(where + ": missing key '" + key + "'");
    }
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw SchemaError(where + ": key '" + key + "' has the wrong type");
    }
}

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> allowed, const std::string& where)
{
    for (const auto& item : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
            throw SchemaError(where + ": unknown key '" + item.key() + "'");
        }
    }
}

} // namespace detail

/// Parse and validate a network document. Buses and lines may appear in any
/// order; ids must cover 0..N-1 and 0..L-1 exactly.
inline GridModel load_grid(const nlohmann::json& doc)
{
    if (!doc.is_object()) {
        throw SchemaError("network document must be an object");
    }
    detail::reject_unknown(doc, {"buses", "lines", "slack", "base_voltage"}, "network");
    const auto& jb = doc.contains("buses") ? doc.at("buses") : throw SchemaError("network: missing key 'buses'");
    const auto& jl = doc.contains("lines") ? doc.at("lines") : throw SchemaError("network: missing key 'lines'");
    if (!jb.is_array() || !jl.is_array()) {
        throw SchemaError("network: 'buses' and 'lines' must be arrays");
    }

    std::vector<Bus> buses;
    for (std::size_t k = 0; k < jb.size(); ++k) {
        const auto where = "buses[" + std::to_string(k) + "]";
        detail::reject_unknown(jb[k], {"id", "zero_injection", "name"}, where);
        Bus b;
        b.id = detail::require<int>(jb[k], "id", where);
        b.zero_injection = detail::require<bool>(jb[k], "zero_injection", where);
        b.name = jb[k].contains("name") ? detail::require<std::string>(jb[k], "name", where) : std::to_string(b.id);
        buses.push_back(std::move(b));
    }
    std::sort(buses.begin(), buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
    for (std::size_t k = 1; k < buses.size(); ++k) {
        if (buses[k].id == buses[k - 1].id) {
            throw SchemaError("duplicate bus id " + std::to_string(buses[k].id));
        }
    }

    std::vector<Line> lines;
    for (std::size_t k = 0; k < jl.size(); ++k) {
        const auto where = "lines[" + std::to_string(k) + "]";
        detail::reject_unknown(jl[k], {"id", "from", "to", "r", "x"}, where);
        Line ln;
        ln.id = detail::require<int>(jl[k], "id", where);
        ln.from = detail::require<int>(jl[k], "from", where);
        ln.to = detail::require<int>(jl[k], "to", where);
        ln.r = detail::require<double>(jl[k], "r", where);
        ln.x = detail::require<double>(jl[k], "x", where);
        lines.push_back(ln);
    }
    std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
    for (std::size_t k = 1; k < lines.size(); ++k) {
        if (lines[k].id == lines[k - 1].id) {
            throw SchemaError("duplicate line id " + std::to_string(lines[k].id));
        }
    }

    const int slack = detail::require<int>(doc, "slack", "network");
    const double base = doc.contains("base_voltage") ? detail::require<double>(doc, "base_voltage", "network") : 1.0;
    return GridModel(std::move(buses), std::move(lines), slack, base);
}

inline nlohmann::json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw SchemaError(path.string() + ": cannot open file");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

inline GridModel load_grid(const std::filesystem::path& path)
{
    auto doc = read_json_file(path);
    try {
        return load_grid(doc);
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

/// Serialize back to the document schema (canonical ordering).
inline nlohmann::json to_json(const GridModel& grid)
{
    nlohmann::json doc;
    doc["buses"] = nlohmann::json::array();
    for (const auto& b : grid.buses()) {
        doc["buses"].push_back({{"id", b.id}, {"zero_injection", b.zero_injection}, {"name", b.name}});
    }
    doc["lines"] = nlohmann::json::array();
    for (const auto& l : grid.lines()) {
        doc["lines"].push_back({{"id", l.id}, {"from", l.from}, {"to", l.to}, {"r", l.r}, {"x", l.x}});
    }
    doc["slack"] = grid.slack_bus();
    doc["base_voltage"] = grid.base_voltage();
    return doc;
}

inline ConnectivityMatrix build_connectivity(const GridModel& grid)
{
    const int n = grid.num_buses();
    ConnectivityMatrix a = ConnectivityMatrix::Identity(n, n);
    for (const auto& l : grid.lines()) {
        a(l.from, l.to) = 1;
        a(l.to, l.from) = 1;
    }
    return a;
}

inline ContingencySet build_contingencies(const GridModel& grid, const ConnectivityMatrix& a)
{
    ContingencySet set;
    set.pmu_loss.reserve(static_cast<std::size_t>(grid.num_buses()));
    for (int b = 0; b < grid.num_buses(); ++b) {
        ConnectivityMatrix m = a;
        m.col(b).setZero();
        set.pmu_loss.push_back(std::move(m));
    }
    set.line_outage.reserve(static_cast<std::size_t>(grid.num_lines()));
    for (const auto& l : grid.lines()) {
        ConnectivityMatrix m = a;
        m(l.from, l.to) = 0;
        m(l.to, l.from) = 0;
        set.line_outage.push_back(std::move(m));
    }
    return set;
}

/// Nodal G/B from series branch admittances; no shunts.
inline NodalAdmittance build_admittance(const GridModel& grid)
{
    const int n = grid.num_buses();
    NodalAdmittance y{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
    for (const auto& l : grid.lines()) {
        const auto ys = l.admittance();
        y.G(l.from, l.to) -= ys.real();
        y.G(l.to, l.from) -= ys.real();
        y.B(l.from, l.to) -= ys.imag();
        y.B(l.to, l.from) -= ys.imag();
    }
    for (int i = 0; i < n; ++i) {
        y.G(i, i) = -(y.G.row(i).sum() - y.G(i, i));
        y.B(i, i) = -(y.B.row(i).sum() - y.B(i, i));
    }
    return y;
}

} // namespace mupmu

#endif
