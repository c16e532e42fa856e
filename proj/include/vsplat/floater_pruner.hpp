#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "colmap.hpp"
#include "errors.hpp"
#include "knn.hpp"
#include "rasterizer.hpp"
#include "splat_model.hpp"

namespace vsplat {

struct Aabb {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();

    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
};

struct PruneRuleResult {
    std::string rule;
    /// Indices into the cloud as it was handed to the pruning call (chain input for prune_chain).
    std::vector<std::size_t> removed;
};

struct PruneReport {
    std::size_t before = 0;
    std::size_t after = 0;
    std::vector<PruneRuleResult> rules;

    std::size_t removed_total() const {
        std::size_t n = 0;
        for (const auto& r : rules) n += r.removed.size();
        return n;
    }
};

/// Line-delimited text: a header line, then one line per rule.
inline std::string format_prune_report(const PruneReport& r) {
    std::string s = "before=" + std::to_string(r.before) + " after=" + std::to_string(r.after) + "\n";
    for (const auto& rule : r.rules) {
        s += "rule=" + rule.rule + " removed=" + std::to_string(rule.removed.size()) + " indices=";
        for (std::size_t i = 0; i < rule.removed.size(); ++i) s += (i ? "," : "") + std::to_string(rule.removed[i]);
        s += "\n";
    }
    return s;
}

namespace detail {

/// Linear-interpolated quantile of sorted data, q in [0,1].
inline double quantile_sorted(std::span<const double> v, double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double f = pos - static_cast<double>(lo);
    return v[lo] + (v[hi] - v[lo]) * f;
}

/// Keeps rows where `remove` is 0; returns the removed indices.
inline std::vector<std::size_t> apply_removal(SplatCloud& cloud, const std::vector<std::uint8_t>& remove) {
    std::vector<std::size_t> keep, gone;
    for (std::size_t i = 0; i < remove.size(); ++i) (remove[i] ? gone : keep).push_back(i);
    if (keep.empty()) throw Error("pruned to empty cloud");
    if (!gone.empty()) cloud.keep_rows(keep);
    return gone;
}

inline PruneReport single_rule(SplatCloud& cloud, std::string rule, const std::vector<std::uint8_t>& remove) {
    PruneReport r;
    r.before = cloud.size();
    r.rules.push_back({std::move(rule), apply_removal(cloud, remove)});
    r.after = cloud.size();
    return r;
}

} // namespace detail

/// Per-axis [p, 100-p] percentile box of the sparse points, grown by margin x width on each side.
inline Aabb auto_bounds(const SparsePoints& points, double percentile = 1.0, double margin = 0.2) {
    if (points.empty()) throw InvalidParameter("auto_bounds: empty point set");
    if (!(percentile >= 0 && percentile <= 50)) throw InvalidParameter("auto_bounds: percentile must lie in [0,50]");
    if (!(margin >= 0)) throw InvalidParameter("auto_bounds: margin must be >= 0");
    Aabb box;
    std::vector<double> v(points.size());
    for (int a = 0; a < 3; ++a) {
        for (std::size_t i = 0; i < points.size(); ++i) v[i] = points.positions[i][a];
        std::sort(v.begin(), v.end());
        const double lo = detail::quantile_sorted(v, percentile / 100.0);
        const double hi = detail::quantile_sorted(v, 1.0 - percentile / 100.0);
        const double w = hi - lo;
        box.min[a] = lo - margin * w;
        box.max[a] = hi + margin * w;
    }
    return box;
}

/// Removes Gaussians whose center lies outside the closed box.
inline PruneReport prune_by_bounds(SplatCloud& cloud, const Aabb& box) {
    if (!(box.min.array() <= box.max.array()).all()) throw InvalidParameter("prune_by_bounds: box min exceeds max");
    std::vector<std::uint8_t> remove(cloud.size(), 0);
    for (std::size_t i = 0; i < cloud.size(); ++i) remove[i] = !box.contains(cloud.position(i));
    return detail::single_rule(cloud, "bounds", remove);
}

/// Max of alpha' * T per Gaussian over every pixel of every training view.
inline std::vector<double> compute_support(const SplatCloud& cloud, const SceneBundle& bundle,
                                           const RenderSettings& rs = {}) {
    std::vector<double> support(cloud.size(), 0.0);
    for (auto v : bundle.training_views()) {
        const CameraPose& pose = bundle.poses[v];
        const RenderOutput out = render(cloud, bundle.camera_of(pose), pose, rs);
        for (std::size_t i = 0; i < cloud.size(); ++i) support[i] = std::max(support[i], out.per_gaussian_max_blend[i]);
    }
    return support;
}

inline PruneReport prune_by_support(SplatCloud& cloud, std::span<const double> support, double threshold = 1e-3) {
    if (support.size() != cloud.size()) throw InvalidParameter("prune_by_support: support size does not match cloud");
    std::vector<std::uint8_t> remove(cloud.size(), 0);
    for (std::size_t i = 0; i < cloud.size(); ++i) remove[i] = support[i] < threshold;
    return detail::single_rule(cloud, "support", remove);
}

inline PruneReport prune_by_opacity(SplatCloud& cloud, double threshold = 0.005) {
    std::vector<std::uint8_t> remove(cloud.size(), 0);
    for (std::size_t i = 0; i < cloud.size(); ++i) remove[i] = cloud.opacity(i) < threshold;
    return detail::single_rule(cloud, "opacity", remove);
}

inline constexpr double kKnnSigmaFloor = 1e-12;

/// Statistical outlier removal on the mean distance to the k nearest neighbours.
inline PruneReport prune_by_knn(SplatCloud& cloud, int k = 8, double m = 3.0) {
    if (k < 1) throw InvalidParameter("prune_by_knn: k must be >= 1");
    if (cloud.size() <= static_cast<std::size_t>(k))
        throw InvalidParameter("prune_by_knn: cloud has " + std::to_string(cloud.size()) + " Gaussians, need more than k=" +
                               std::to_string(k));
    std::vector<Vec3> pts(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) pts[i] = cloud.position(i);
    const auto d = knn_mean_distance(pts, static_cast<std::size_t>(k));
    const double n = static_cast<double>(d.size());
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
    double var = 0.0;
    for (double x : d) var += (x - mean) * (x - mean);
    const double sigma = std::max(std::sqrt(var / n), kKnnSigmaFloor);
    const double limit = mean + m * sigma;
    std::vector<std::uint8_t> remove(cloud.size(), 0);
    for (std::size_t i = 0; i < cloud.size(); ++i) remove[i] = d[i] > limit;
    return detail::single_rule(cloud, "knn", remove);
}

struct PruneOptions {
    bool bounds = true;
    bool bounds_auto = true;        ///< derive the box from the bundle's sparse points
    Aabb box;                       ///< used when bounds_auto is false
    double bounds_percentile = 1.0;
    double bounds_margin = 0.2;
    bool support = true;
    double support_threshold = 1e-3;
    bool opacity = true;
    double opacity_threshold = 0.005;
    bool knn = true;
    int knn_k = 8;
    double knn_m = 3.0;
};

/// Runs the enabled rules in order bounds, support, opacity, kNN. `bundle` may be null only
/// when neither support nor automatic bounds are enabled.
inline PruneReport prune_chain(SplatCloud& cloud, const PruneOptions& opt, const SceneBundle* bundle,
                               const RenderSettings& rs = {}) {
    const bool needs_bundle = opt.support || (opt.bounds && opt.bounds_auto);
    if (needs_bundle && !bundle) throw UsageError("support and automatic bounds rules need a dataset");

    PruneReport total;
    total.before = cloud.size();
    std::vector<std::size_t> origin(cloud.size());
    std::iota(origin.begin(), origin.end(), std::size_t{0});
    auto absorb = [&](PruneReport r) {
        auto& rule = r.rules.front();
        std::vector<std::uint8_t> gone(origin.size(), 0);
        for (auto& i : rule.removed) {
            gone[i] = 1;
            i = origin[i];
        }
        std::vector<std::size_t> next;
        for (std::size_t i = 0; i < origin.size(); ++i)
            if (!gone[i]) next.push_back(origin[i]);
        origin = std::move(next);
        total.rules.push_back(std::move(rule));
    };

    if (opt.bounds) {
        const Aabb box = opt.bounds_auto ? auto_bounds(bundle->points, opt.bounds_percentile, opt.bounds_margin) : opt.box;
        absorb(prune_by_bounds(cloud, box));
    }
    if (opt.support) {
        const auto s = compute_support(cloud, *bundle, rs);
        absorb(prune_by_support(cloud, s, opt.support_threshold));
    }
    if (opt.opacity) absorb(prune_by_opacity(cloud, opt.opacity_threshold));
    if (opt.knn) absorb(prune_by_knn(cloud, opt.knn_k, opt.knn_m));
    total.after = cloud.size();
    return total;
}

} // namespace vsplat
