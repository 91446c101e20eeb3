#ifndef MUPMU_TESTS_FIXTURES_HPP
#define MUPMU_TESTS_FIXTURES_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "mupmu/mupmu.hpp"

namespace fixtures {

inline std::filesystem::path data(const std::string& name)
{
    return std::filesystem::path(MUPMU_DATA_DIR) / name;
}

inline mupmu::GridModel load(const std::string& name)
{
    return mupmu::load_grid(data(name + ".json"));
}

/// Chain 0-1-...-(n-1) with distinct impedances; ZINs at the listed buses.
inline mupmu::GridModel chain(int n, std::vector<int> zins = {})
{
    std::vector<mupmu::Bus> buses;
    for (int i = 0; i < n; ++i) {
        const bool z = std::find(zins.begin(), zins.end(), i) != zins.end();
        buses.push_back({i, z, std::to_string(i)});
    }
    std::vector<mupmu::Line> lines;
    for (int i = 0; i + 1 < n; ++i) {
        lines.push_back({i, i, i + 1, 0.02 + 0.005 * i, 0.04 + 0.003 * i});
    }
    return mupmu::GridModel(std::move(buses), std::move(lines), 0, 1.0);
}

inline mupmu::GridModel two_bus(double r, double x)
{
    return mupmu::GridModel({{0, false, "0"}, {1, false, "1"}}, {{0, 0, 1, r, x}}, 0, 1.0);
}

inline mupmu::ChannelAssignment assign(const mupmu::GridModel& g, const std::vector<int>& buses, mupmu::CaseMode mode)
{
    const auto a = mupmu::build_connectivity(g);
    const auto cfg = mupmu::make_channel_config(g, a, mode, false);
    return mupmu::assign_channels(g, mupmu::Placement::from_buses(static_cast<std::size_t>(g.num_buses()), buses), cfg);
}

inline mupmu::ZinVector no_zin(const mupmu::GridModel& g)
{
    return mupmu::ZinVector(static_cast<std::size_t>(g.num_buses()));
}

} // namespace fixtures

#endif
