#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "backprop.hpp"
#include "rasterizer.hpp"
#include "splat_model.hpp"

namespace vsplat {

struct FdOptions {
    double rel_step = 1e-4;   ///< h = max(rel_step * |x|, min_step)
    double min_step = 1e-6;
    double tolerance = 1e-4;  ///< relative error counted as a match
    double gross = 1e-2;      ///< relative error counted as a gross mismatch
    double zero_floor = 1e-10;///< |analytic| and |numeric| both below: match
};

struct FdCoordinate {
    ParamGroup group{};
    std::size_t offset = 0;   ///< index into the group's flat array
    double analytic = 0;
    double numeric = 0;
    double rel_error = 0;
    bool excluded = false;
};

struct FdReport {
    std::vector<FdCoordinate> coords;
    std::size_t checked = 0;
    std::size_t excluded = 0;
    std::size_t matched = 0;
    std::size_t gross = 0;

    double match_fraction() const { return checked ? static_cast<double>(matched) / checked : 1.0; }
};

namespace detail {

inline double weighted_sum(const Image& img, const Image& w) {
    double s = 0;
    for (std::size_t i = 0; i < img.data.size(); ++i) s += img.data[i] * w.data[i];
    return s;
}

/// Everything the forward pass decided discretely: culling, sort order, skip / clamp /
/// termination per pixel, and SH color clamping.
struct DecisionState {
    std::uint64_t hash = 0;
    std::vector<std::uint8_t> touched;
    std::vector<std::size_t> order;
    std::vector<std::array<bool, 3>> color_clamped;
    friend bool operator==(const DecisionState&, const DecisionState&) = default;
};

inline DecisionState decisions_of(const RenderOutput& r) {
    DecisionState s;
    s.hash = r.decision_hash;
    s.touched = r.touched;
    for (const auto& g : r.projected) {
        s.order.push_back(g.index);
        s.color_clamped.push_back(g.color_clamped);
    }
    return s;
}

} // namespace detail

/// Scalar loss of a rendered image. When `grad` is non-null it receives dL/d(render).
using ImageLoss = std::function<double(const Image& render, Image* grad)>;

/// Central finite differences of loss(render) against backward(). A coordinate is excluded
/// when the perturbation flips any discrete forward-pass decision.
inline FdReport finite_difference_check(const SplatCloud& cloud, const CameraView& view, const ImageLoss& loss,
                                        RenderSettings rs = {}, const FdOptions& opt = {}) {
    rs.track_decisions = true;
    const RenderOutput base = render(cloud, view, rs);
    Image dL;
    loss(base.color, &dL);
    const GradientSet grads = backward(cloud, view, base, dL);
    const auto base_state = detail::decisions_of(base);

    FdReport rep;
    SplatCloud work = cloud;
    for (auto g : kAllGroups) {
        auto& params = work[g];
        for (std::size_t k = 0; k < params.size(); ++k) {
            const double x = params[k];
            const double h = std::max(opt.rel_step * std::abs(x), opt.min_step);
            params[k] = x + h;
            const RenderOutput rp = render(work, view, rs);
            params[k] = x - h;
            const RenderOutput rm = render(work, view, rs);
            params[k] = x;

            FdCoordinate c;
            c.group = g;
            c.offset = k;
            c.analytic = grads[g][k];
            c.numeric = (loss(rp.color, nullptr) - loss(rm.color, nullptr)) / (2.0 * h);
            c.excluded = !(detail::decisions_of(rp) == base_state) || !(detail::decisions_of(rm) == base_state);
            const double scale = std::max(std::abs(c.analytic), std::abs(c.numeric));
            c.rel_error = scale < opt.zero_floor ? 0.0 : std::abs(c.analytic - c.numeric) / scale;
            if (c.excluded) {
                ++rep.excluded;
            } else {
                ++rep.checked;
                if (c.rel_error < opt.tolerance) ++rep.matched;
                if (c.rel_error > opt.gross) ++rep.gross;
            }
            rep.coords.push_back(c);
        }
    }
    return rep;
}

/// Linear loss L = sum(weights * render).
inline FdReport finite_difference_check(const SplatCloud& cloud, const CameraView& view, const Image& weights,
                                        RenderSettings rs = {}, const FdOptions& opt = {}) {
    const ImageLoss loss = [&weights](const Image& img, Image* grad) {
        if (grad) *grad = weights;
        return detail::weighted_sum(img, weights);
    };
    return finite_difference_check(cloud, view, loss, rs, opt);
}

} // namespace vsplat
