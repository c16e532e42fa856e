#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <vector>

#include "math.hpp"
#include "parallel.hpp"

namespace vsplat {

/// Point count from which knn_mean_distance switches to the grid search.
inline constexpr std::size_t kKnnGridThreshold = 50'000;

namespace detail {

/// Keeps the k smallest distances seen so far.
struct KBest {
    explicit KBest(std::size_t k) : k(k) {}
    void offer(double d) {
        if (heap.size() < k) {
            heap.push(d);
        } else if (d < heap.top()) {
            heap.pop();
            heap.push(d);
        }
    }
    bool full() const { return heap.size() == k; }
    double worst() const { return heap.top(); }
    double mean() {
        double s = 0.0;
        const std::size_t n = heap.size();
        std::vector<double> v;
        while (!heap.empty()) {
            v.push_back(heap.top());
            heap.pop();
        }
        // Ascending summation keeps the result independent of visiting order.
        std::sort(v.begin(), v.end());
        for (double d : v) s += d;
        return s / static_cast<double>(n);
    }
    std::size_t k;
    std::priority_queue<double> heap;
};

} // namespace detail

/// Mean Euclidean distance from each point to its min(k, n-1) nearest other points, by exhaustive search.
/// NaN for a point with no neighbors.
inline std::vector<double> knn_mean_distance_brute(std::span<const Vec3> pts, std::size_t k) {
    const std::size_t n = pts.size();
    std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
    const std::size_t kk = std::min(k, n == 0 ? 0 : n - 1);
    if (kk == 0) return out;
    parallel_for(n, [&](std::size_t i) {
        detail::KBest best(kk);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) best.offer((pts[i] - pts[j]).norm());
        out[i] = best.mean();
    });
    return out;
}

/// Same contract as knn_mean_distance_brute, using a uniform grid with exact shell-by-shell search.
inline std::vector<double> knn_mean_distance_grid(std::span<const Vec3> pts, std::size_t k) {
    const std::size_t n = pts.size();
    std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
    const std::size_t kk = std::min(k, n == 0 ? 0 : n - 1);
    if (kk == 0) return out;

    Vec3 lo = pts[0], hi = pts[0];
    for (const Vec3& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 ext = (hi - lo).cwiseMax(1e-12);
    // ~2 points per occupied cell for roughly uniform data.
    double cell = std::cbrt(ext.prod() * 2.0 / static_cast<double>(n));
    cell = std::max(cell, ext.maxCoeff() / 1024.0);
    std::array<std::int64_t, 3> dims{};
    for (int a = 0; a < 3; ++a) dims[a] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(ext[a] / cell)) + 1);

    auto cell_of = [&](const Vec3& p) {
        std::array<std::int64_t, 3> c{};
        for (int a = 0; a < 3; ++a)
            c[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((p[a] - lo[a]) / cell)), 0, dims[a] - 1);
        return c;
    };
    auto key = [&](const std::array<std::int64_t, 3>& c) { return (c[2] * dims[1] + c[1]) * dims[0] + c[0]; };

    std::vector<std::int64_t> keys(n);
    for (std::size_t i = 0; i < n; ++i) keys[i] = key(cell_of(pts[i]));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    std::vector<std::int64_t> sorted_keys(n);
    for (std::size_t i = 0; i < n; ++i) sorted_keys[i] = keys[order[i]];

    auto visit_cell = [&](const std::array<std::int64_t, 3>& c, std::size_t self, detail::KBest& best) {
        const std::int64_t kcell = key(c);
        auto range = std::equal_range(sorted_keys.begin(), sorted_keys.end(), kcell);
        for (auto it = range.first; it != range.second; ++it) {
            const std::size_t j = order[static_cast<std::size_t>(it - sorted_keys.begin())];
            if (j != self) best.offer((pts[self] - pts[j]).norm());
        }
    };

    const std::int64_t max_r = std::max({dims[0], dims[1], dims[2]});
    parallel_for(n, [&](std::size_t i) {
        detail::KBest best(kk);
        const auto c0 = cell_of(pts[i]);
        for (std::int64_t r = 0; r <= max_r; ++r) {
            // Shell cells at Chebyshev distance r, clipped to the grid.
            const std::int64_t z0 = std::max(-r, -c0[2]), z1 = std::min(r, dims[2] - 1 - c0[2]);
            const std::int64_t y0 = std::max(-r, -c0[1]), y1 = std::min(r, dims[1] - 1 - c0[1]);
            const std::int64_t x0 = std::max(-r, -c0[0]), x1 = std::min(r, dims[0] - 1 - c0[0]);
            for (std::int64_t dz = z0; dz <= z1; ++dz)
                for (std::int64_t dy = y0; dy <= y1; ++dy) {
                    const bool face = std::max(std::abs(dy), std::abs(dz)) == r;
                    if (face) {
                        for (std::int64_t dx = x0; dx <= x1; ++dx) visit_cell({c0[0] + dx, c0[1] + dy, c0[2] + dz}, i, best);
                    } else {
                        if (-r >= x0) visit_cell({c0[0] - r, c0[1] + dy, c0[2] + dz}, i, best);
                        if (r <= x1) visit_cell({c0[0] + r, c0[1] + dy, c0[2] + dz}, i, best);
                    }
                }
            // Any point outside the searched block is farther than r cells away.
            if (best.full() && best.worst() <= static_cast<double>(r) * cell) break;
        }
        out[i] = best.mean();
    });
    return out;
}

inline std::vector<double> knn_mean_distance(std::span<const Vec3> pts, std::size_t k) {
    return pts.size() < kKnnGridThreshold ? knn_mean_distance_brute(pts, k) : knn_mean_distance_grid(pts, k);
}

} // namespace vsplat
