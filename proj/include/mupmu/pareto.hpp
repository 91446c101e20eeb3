#ifndef MUPMU_PARETO_HPP
#define MUPMU_PARETO_HPP

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mupmu/error.hpp"

namespace mupmu {

template <std::size_t M>
using Point = std::array<double, M>;

/// Minimization dominance: no worse in every objective, better in at least one.
template <std::size_t M>
bool dominates(const Point<M>& a, const Point<M>& b)
{
    bool strict = false;
    for (std::size_t k = 0; k < M; ++k) {
        if (a[k] > b[k]) {
            return false;
        }
        strict = strict || a[k] < b[k];
    }
    return strict;
}

/// Deb's fast nondominated sort under an arbitrary strict dominance relation.
/// Fronts list indices into `items` in ascending order.
template <typename T, typename Dominates>
std::vector<std::vector<std::size_t>> fast_nondominated_sort(std::span<const T> items, Dominates&& dom)
{
    const std::size_t n = items.size();
    std::vector<std::vector<std::size_t>> dominated_by(n);
    std::vector<std::size_t> counts(n, 0);
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<std::size_t> current;
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            if (dom(items[p], items[q])) {
                dominated_by[p].push_back(q);
                ++counts[q];
            } else if (dom(items[q], items[p])) {
                dominated_by[q].push_back(p);
                ++counts[p];
            }
        }
    }
    for (std::size_t p = 0; p < n; ++p) {
        if (counts[p] == 0) {
            current.push_back(p);
        }
    }
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (auto p : current) {
            for (auto q : dominated_by[p]) {
                if (--counts[q] == 0) {
                    next.push_back(q);
                }
            }
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(current));
        current = std::move(next);
    }
    return fronts;
}

/// Crowding distance of each point within one front. Extremes of every
/// objective get +inf; objectives with zero range add nothing.
template <std::size_t M>
std::vector<double> crowding_distance(std::span<const Point<M>> front)
{
    const std::size_t n = front.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, 0.0);
    if (n <= 2) {
        std::fill(dist.begin(), dist.end(), inf);
        return dist;
    }
    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < M; ++k) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return front[a][k] < front[b][k]; });
        const double lo = front[order.front()][k];
        const double hi = front[order.back()][k];
        dist[order.front()] = inf;
        dist[order.back()] = inf;
        const double range = hi - lo;
        if (!(range > 0.0)) {
            continue;
        }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            dist[order[i]] += (front[order[i + 1]][k] - front[order[i - 1]][k]) / range;
        }
    }
    return dist;
}

namespace detail {

/// Area dominated by 2-D points inside the box bounded by `ref`; points need
/// not be mutually nondominated.
inline double area_2d(std::vector<std::array<double, 2>> pts, const std::array<double, 2>& ref)
{
    std::sort(pts.begin(), pts.end());
    double area = 0.0;
    double best_y = ref[1];
    for (const auto& p : pts) {
        if (p[1] < best_y) {
            area += (ref[0] - p[0]) * (best_y - p[1]);
            best_y = p[1];
        }
    }
    return area;
}

} // namespace detail

/// Exact dominated hypervolume of 3-objective points relative to `ref`.
/// Every point must satisfy p <= ref componentwise.
inline double hypervolume(std::span<const Point<3>> front, const Point<3>& ref)
{
    for (const auto& p : front) {
        if (p[0] > ref[0] || p[1] > ref[1] || p[2] > ref[2]) {
            std::ostringstream os;
            os << "hypervolume: point (" << p[0] << ", " << p[1] << ", " << p[2] << ") lies outside the reference box ("
               << ref[0] << ", " << ref[1] << ", " << ref[2] << ")";
            throw Error(os.str());
        }
    }
    std::vector<Point<3>> pts(front.begin(), front.end());
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a[0] < b[0]; });
    double volume = 0.0;
    std::vector<std::array<double, 2>> active;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        active.push_back({pts[i][1], pts[i][2]});
        const double x_next = i + 1 < pts.size() ? pts[i + 1][0] : ref[0];
        const double width = x_next - pts[i][0];
        if (width > 0.0) {
            volume += width * detail::area_2d(active, {ref[1], ref[2]});
        }
    }
    return volume;
}

} // namespace mupmu

#endif
