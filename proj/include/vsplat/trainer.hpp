#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "backprop.hpp"
#include "colmap.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "losses_metrics.hpp"
#include "rasterizer.hpp"
#include "splat_model.hpp"

namespace vsplat {

/// Optimizer and density-control hyper-parameters. Defaults follow the reference 3DGS
/// recipe, with a desk-scale iteration count.
struct TrainConfig {
    int iterations = 7000;
    double lr_position_initial = 1.6e-4; ///< times scene extent
    double lr_position_final = 1.6e-6;   ///< times scene extent
    int lr_position_max_steps = 30000;
    double lr_opacity = 0.05;
    double lr_scale = 5e-3;
    double lr_rotation = 1e-3;
    double lr_sh_dc = 2.5e-3;
    double lr_sh_rest = 2.5e-3 / 20.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-15;
    double lambda = 0.2;
    int densify_start_iter = 500;
    int densify_end_iter = -1; ///< -1: iterations / 2
    int densify_interval = 100;
    double densify_grad_threshold = 2e-4;
    bool grad_stat_ndc = true; ///< measure the densify statistic in NDC units (x W/2, x H/2)
    double split_scale_threshold = 0.01; ///< fraction of scene extent
    int split_factor = 2;
    double split_scale_shrink = 1.6;
    double prune_opacity_threshold = 0.005;
    double prune_scale_fraction = 0.1;   ///< world-scale prune (fraction of extent), after an opacity reset
    int opacity_reset_interval = 3000;
    double opacity_reset_value = 0.01;
    int sh_promote_interval = 1000;
    int max_sh_degree = 3;
    Vec3 background = Vec3::Zero();
    int downscale = 1;
    std::uint64_t seed = 0;
    int checkpoint_interval = 0; ///< 0: final checkpoint only

    int effective_densify_end() const { return densify_end_iter < 0 ? iterations / 2 : densify_end_iter; }
};

inline const std::vector<ConfigField<TrainConfig>>& train_config_fields() {
    using C = TrainConfig;
    static const std::vector<ConfigField<C>> f{
        {"iterations", &C::iterations, "optimization steps"},
        {"lr_position_initial", &C::lr_position_initial, "initial position rate (x extent)"},
        {"lr_position_final", &C::lr_position_final, "final position rate (x extent)"},
        {"lr_position_max_steps", &C::lr_position_max_steps, "steps of the exponential position schedule"},
        {"lr_opacity", &C::lr_opacity, ""},
        {"lr_scale", &C::lr_scale, ""},
        {"lr_rotation", &C::lr_rotation, ""},
        {"lr_sh_dc", &C::lr_sh_dc, ""},
        {"lr_sh_rest", &C::lr_sh_rest, ""},
        {"adam_beta1", &C::adam_beta1, ""},
        {"adam_beta2", &C::adam_beta2, ""},
        {"adam_eps", &C::adam_eps, ""},
        {"lambda", &C::lambda, "D-SSIM weight"},
        {"densify_start_iter", &C::densify_start_iter, ""},
        {"densify_end_iter", &C::densify_end_iter, "-1 = iterations/2"},
        {"densify_interval", &C::densify_interval, ""},
        {"densify_grad_threshold", &C::densify_grad_threshold, ""},
        {"grad_stat_ndc", &C::grad_stat_ndc, ""},
        {"split_scale_threshold", &C::split_scale_threshold, "fraction of extent"},
        {"split_factor", &C::split_factor, ""},
        {"split_scale_shrink", &C::split_scale_shrink, ""},
        {"prune_opacity_threshold", &C::prune_opacity_threshold, ""},
        {"prune_scale_fraction", &C::prune_scale_fraction, ""},
        {"opacity_reset_interval", &C::opacity_reset_interval, ""},
        {"opacity_reset_value", &C::opacity_reset_value, ""},
        {"sh_promote_interval", &C::sh_promote_interval, ""},
        {"max_sh_degree", &C::max_sh_degree, ""},
        {"background", &C::background, "r,g,b"},
        {"downscale", &C::downscale, ""},
        {"seed", &C::seed, ""},
        {"checkpoint_interval", &C::checkpoint_interval, "0 = final only"},
    };
    return f;
}

/// Throws InvalidParameter on an inconsistent configuration.
inline void validate(const TrainConfig& c) {
    auto fail = [](const std::string& m) { throw InvalidParameter("invalid training config: " + m); };
    if (c.iterations < 0) fail("iterations < 0");
    for (double r : {c.lr_position_initial, c.lr_position_final, c.lr_opacity, c.lr_scale, c.lr_rotation, c.lr_sh_dc,
                     c.lr_sh_rest})
        if (!(r > 0)) fail("all learning rates must be > 0");
    if (c.lr_position_max_steps <= 0) fail("lr_position_max_steps must be > 0");
    if (c.densify_start_iter < 0 || (c.densify_end_iter >= 0 && c.densify_end_iter < c.densify_start_iter))
        fail("need 0 <= densify_start_iter <= densify_end_iter");
    if (c.densify_end_iter > c.iterations) fail("densify_end_iter exceeds iterations");
    for (double t : {c.densify_grad_threshold, c.split_scale_threshold, c.prune_opacity_threshold, c.prune_scale_fraction})
        if (!(t > 0)) fail("thresholds must be > 0");
    if (c.densify_interval <= 0 || c.opacity_reset_interval <= 0 || c.sh_promote_interval <= 0)
        fail("intervals must be > 0");
    if (c.split_factor < 1 || !(c.split_scale_shrink > 0)) fail("split_factor >= 1 and split_scale_shrink > 0 required");
    if (!(c.opacity_reset_value > 0 && c.opacity_reset_value < 1)) fail("opacity_reset_value must lie in (0,1)");
    if (c.lambda < 0 || c.lambda > 1) fail("lambda must lie in [0,1]");
    if (c.max_sh_degree < 0 || c.max_sh_degree > kMaxShDegree) fail("max_sh_degree must lie in [0,3]");
    if (c.downscale < 1) fail("downscale must be >= 1");
    if (!(c.adam_beta1 >= 0 && c.adam_beta1 < 1 && c.adam_beta2 >= 0 && c.adam_beta2 < 1 && c.adam_eps >= 0))
        fail("adam constants out of range");
}

struct SceneExtent {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
};

/// 1.1 x the radius of the camera-center bounding sphere (about the mean center).
inline SceneExtent camera_extent(const SceneBundle& b, std::span<const std::size_t> views) {
    SceneExtent e;
    if (views.empty()) return e;
    Vec3 c = Vec3::Zero();
    for (auto i : views) c += b.poses[i].center();
    c /= static_cast<double>(views.size());
    double r = 0.0;
    for (auto i : views) r = std::max(r, (b.poses[i].center() - c).norm());
    e.center = c;
    e.radius = r > 0 ? 1.1 * r : 1.0;
    return e;
}

inline SceneExtent camera_extent(const SceneBundle& b) {
    const auto v = b.training_views();
    return camera_extent(b, v);
}

/// Adaptive-moment state, row-congruent with the cloud.
struct OptimizerState {
    ParamArrays m;
    ParamArrays v;
    std::int64_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-15;

    void reset(std::size_t n) {
        m.resize(0);
        v.resize(0);
        m.resize(n);
        v.resize(n);
        step = 0;
    }
};

/// Bias-corrected Adam update of one parameter group; `step` is the 1-based step index.
inline void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                      std::int64_t step, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-15) {
    if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size())
        throw InternalError("adam_step: shape mismatch");
    if (step < 1) throw InternalError("adam_step: step must be >= 1");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

/// Exponential interpolation lr_initial -> lr_final over max_steps.
inline double lr_schedule(std::int64_t step, double lr_initial, double lr_final, std::int64_t max_steps) {
    if (max_steps <= 0) return lr_final;
    const double t = std::clamp(static_cast<double>(step) / static_cast<double>(max_steps), 0.0, 1.0);
    if (t == 0.0) return lr_initial;
    if (t == 1.0) return lr_final;
    return std::exp(std::log(lr_initial) * (1.0 - t) + std::log(lr_final) * t);
}

/// View-space gradient statistics accumulated between densification steps.
struct DensifyStats {
    std::vector<double> grad_accum;
    std::vector<int> denom;

    void reset(std::size_t n) {
        grad_accum.assign(n, 0.0);
        denom.assign(n, 0);
    }
    double mean(std::size_t i) const { return denom[i] > 0 ? grad_accum[i] / denom[i] : 0.0; }
};

inline void densify_stats_reset(const SplatCloud& cloud, DensifyStats& stats) { stats.reset(cloud.size()); }

struct DensifyEvent {
    std::size_t before = 0;
    std::size_t clones = 0;
    std::size_t splits = 0; ///< parents split
    std::size_t split_children = 0;
    std::size_t prunes = 0;
    std::size_t after = 0;
};

/// Removes rows not listed in `keep` from the cloud and both moment arrays.
inline void keep_rows(SplatCloud& cloud, OptimizerState* opt, std::span<const std::size_t> keep) {
    cloud.keep_rows(keep);
    if (opt) {
        opt->m.keep_rows(keep);
        opt->v.keep_rows(keep);
    }
}

/// Clone small / split large high-gradient Gaussians, then prune transparent and (after an
/// opacity reset) oversized ones. New rows get zero optimizer moments; stats are reset.
inline DensifyEvent densify_and_prune(SplatCloud& cloud, DensifyStats& stats, const TrainConfig& cfg, double extent,
                                      OptimizerState* opt, std::mt19937_64& rng, bool opacity_was_reset) {
    const std::size_t n = cloud.size();
    if (stats.grad_accum.size() != n || stats.denom.size() != n) throw InternalError("densify: stats size mismatch");
    if (opt && (opt->m.rows() != n || opt->v.rows() != n)) throw InternalError("densify: optimizer state size mismatch");

    DensifyEvent ev;
    ev.before = n;
    std::vector<std::size_t> clone_ids, split_ids;
    const double split_limit = cfg.split_scale_threshold * extent;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(stats.mean(i) > cfg.densify_grad_threshold)) continue;
        const double max_scale = std::exp(cloud.log_scale(i).maxCoeff());
        (max_scale > split_limit ? split_ids : clone_ids).push_back(i);
    }
    ev.clones = clone_ids.size();
    ev.splits = split_ids.size();

    for (std::size_t i : clone_ids) {
        cloud.append_row_from(cloud, i);
        if (opt) {
            opt->m.append_zero_rows(1);
            opt->v.append_zero_rows(1);
        }
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    const double log_shrink = std::log(cfg.split_scale_shrink);
    for (std::size_t i : split_ids) {
        const Vec3 mu = cloud.position(i);
        const Vec3 s = cloud.log_scale(i).array().exp();
        const Mat3 R = rotation_from_quat(cloud.rotation(i));
        for (int c = 0; c < cfg.split_factor; ++c) {
            Vec3 z;
            for (int k = 0; k < 3; ++k) z[k] = normal(rng);
            const std::size_t row = cloud.size();
            cloud.append_row_from(cloud, i);
            cloud.position(row) = mu + R * s.cwiseProduct(z);
            cloud.log_scale(row) = cloud.log_scale(i) - Vec3::Constant(log_shrink);
            ++ev.split_children;
        }
        if (opt) {
            opt->m.append_zero_rows(static_cast<std::size_t>(cfg.split_factor));
            opt->v.append_zero_rows(static_cast<std::size_t>(cfg.split_factor));
        }
    }

    std::vector<std::uint8_t> remove(cloud.size(), 0);
    for (std::size_t i : split_ids) remove[i] = 1;
    const double scale_limit = cfg.prune_scale_fraction * extent;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (remove[i]) continue;
        const bool transparent = cloud.opacity(i) < cfg.prune_opacity_threshold;
        const bool oversized = opacity_was_reset && std::exp(cloud.log_scale(i).maxCoeff()) > scale_limit;
        if (transparent || oversized) {
            remove[i] = 1;
            ++ev.prunes;
        }
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (!remove[i]) keep.push_back(i);
    if (keep.empty()) throw Error("pruned to empty cloud");
    keep_rows(cloud, opt, keep);
    ev.after = cloud.size();
    densify_stats_reset(cloud, stats);
    return ev;
}

/// Caps every opacity at `value` (logits above logit(value) are replaced; others untouched).
inline void opacity_reset(SplatCloud& cloud, double value) {
    if (!(value > 0 && value < 1)) throw InvalidParameter("opacity reset value must lie in (0,1)");
    const double cap = logit(value);
    for (double& o : cloud[ParamGroup::opacity])
        if (sigmoid(o) > value) o = cap;
}

struct TrainLogRecord {
    int iteration = 0;
    std::string view;
    LossBreakdown loss;
    std::size_t cloud_size = 0;
    std::size_t clones = 0, splits = 0, prunes = 0;
    bool opacity_reset = false;
    int sh_degree = 0;
};

inline std::string format_log_record(const TrainLogRecord& r) {
    return "iter=" + std::to_string(r.iteration) + " view=" + r.view + " l1=" + detail::format_real(r.loss.l1) +
           " dssim=" + detail::format_real(r.loss.dssim) + " total=" + detail::format_real(r.loss.total) +
           " n=" + std::to_string(r.cloud_size) + " clones=" + std::to_string(r.clones) + " splits=" +
           std::to_string(r.splits) + " prunes=" + std::to_string(r.prunes) + " opacity_reset=" +
           (r.opacity_reset ? "1" : "0") + " sh_degree=" + std::to_string(r.sh_degree);
}

struct TrainHooks {
    std::function<void(const TrainLogRecord&)> on_step;
    /// Called every checkpoint_interval steps (if > 0) with an immutable snapshot.
    std::function<void(int iteration, const SplatCloud&)> on_checkpoint;
};

struct TrainResult {
    SplatCloud cloud;
    std::vector<TrainLogRecord> log;
    SceneExtent extent;
};

/// One prepared training view.
struct TrainView {
    std::string name;
    CameraView camera;
    Image target;
};

inline std::vector<TrainView> prepare_views(const SceneBundle& b, std::span<const std::size_t> views, int downscale) {
    std::vector<TrainView> out;
    for (auto i : views) {
        const CameraPose& p = b.poses[i];
        const auto it = b.images.find(p.image_name);
        if (it == b.images.end()) throw Error("no image loaded for view " + p.image_name);
        TrainView tv;
        tv.name = p.image_name;
        tv.camera = CameraView::from(b.camera_of(p).downscaled(downscale), p);
        tv.target = downsample(it->second, downscale);
        if (tv.target.width != tv.camera.width || tv.target.height != tv.camera.height)
            throw Error("image size does not match camera for view " + p.image_name);
        out.push_back(std::move(tv));
    }
    return out;
}

inline RenderSettings training_render_settings(const TrainConfig& cfg) {
    RenderSettings rs;
    rs.background = cfg.background;
    return rs;
}

/// The optimization loop over the bundle's training (non-held-out) views.
inline TrainResult train(const SceneBundle& bundle, const SplatCloud& init, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
    validate(cfg);
    check_cloud(init);
    const auto view_ids = bundle.training_views();
    if (view_ids.size() < 2) throw Error("insufficient views: need at least 2 registered training views");

    TrainResult res;
    res.cloud = init;
    res.extent = camera_extent(bundle, view_ids);
    if (cfg.iterations == 0) return res;

    const auto views = prepare_views(bundle, view_ids, cfg.downscale);
    const RenderSettings rs = training_render_settings(cfg);
    const double extent = res.extent.radius;
    SplatCloud& cloud = res.cloud;

    OptimizerState opt;
    opt.reset(cloud.size());
    opt.beta1 = cfg.adam_beta1;
    opt.beta2 = cfg.adam_beta2;
    opt.eps = cfg.adam_eps;
    DensifyStats stats;
    densify_stats_reset(cloud, stats);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> epoch;
    bool reset_happened = false;
    const int densify_end = cfg.effective_densify_end();

    for (int it = 1; it <= cfg.iterations; ++it) {
        if (it % cfg.sh_promote_interval == 0 && cloud.active_sh_degree < cfg.max_sh_degree) ++cloud.active_sh_degree;

        if (epoch.empty()) {
            epoch.resize(views.size());
            std::iota(epoch.begin(), epoch.end(), 0);
            std::shuffle(epoch.begin(), epoch.end(), rng);
            std::reverse(epoch.begin(), epoch.end());
        }
        const TrainView& view = views[epoch.back()];
        epoch.pop_back();

        RenderOutput out = render(cloud, view.camera, rs);
        Image dL;
        TrainLogRecord rec;
        rec.iteration = it;
        rec.view = view.name;
        rec.loss = photometric_loss(out.color, view.target, cfg.lambda, &dL);
        if (!std::isfinite(rec.loss.total))
            throw Error("non-finite loss at iteration " + std::to_string(it) + " (view " + view.name + ")");

        GradientSet grads = backward(cloud, view.camera, out, dL);
        const double sx = cfg.grad_stat_ndc ? 0.5 * view.camera.width : 1.0;
        const double sy = cfg.grad_stat_ndc ? 0.5 * view.camera.height : 1.0;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            if (!out.touched[i]) continue;
            stats.grad_accum[i] += std::hypot(grads.mean2d_grad[2 * i] * sx, grads.mean2d_grad[2 * i + 1] * sy);
            stats.denom[i] += 1;
        }

        ++opt.step;
        for (auto g : kAllGroups) {
            double lr = 0;
            switch (g) {
            case ParamGroup::position:
                lr = lr_schedule(opt.step, cfg.lr_position_initial, cfg.lr_position_final, cfg.lr_position_max_steps) * extent;
                break;
            case ParamGroup::scale: lr = cfg.lr_scale; break;
            case ParamGroup::rotation: lr = cfg.lr_rotation; break;
            case ParamGroup::opacity: lr = cfg.lr_opacity; break;
            case ParamGroup::sh_dc: lr = cfg.lr_sh_dc; break;
            case ParamGroup::sh_rest: lr = cfg.lr_sh_rest; break;
            }
            adam_step(cloud[g], grads[g], opt.m[g], opt.v[g], opt.step, lr, opt.beta1, opt.beta2, opt.eps);
        }

        if (it >= cfg.densify_start_iter && it <= densify_end && it % cfg.densify_interval == 0) {
            const DensifyEvent ev = densify_and_prune(cloud, stats, cfg, extent, &opt, rng, reset_happened);
            rec.clones = ev.clones;
            rec.splits = ev.splits;
            rec.prunes = ev.prunes;
        }
        if (it <= densify_end && it % cfg.opacity_reset_interval == 0) {
            opacity_reset(cloud, cfg.opacity_reset_value);
            std::fill(opt.m[ParamGroup::opacity].begin(), opt.m[ParamGroup::opacity].end(), 0.0);
            std::fill(opt.v[ParamGroup::opacity].begin(), opt.v[ParamGroup::opacity].end(), 0.0);
            reset_happened = true;
            rec.opacity_reset = true;
        }
        rec.cloud_size = cloud.size();
        rec.sh_degree = cloud.active_sh_degree;
        if (hooks.on_step) hooks.on_step(rec);
        res.log.push_back(std::move(rec));
        if (hooks.on_checkpoint && cfg.checkpoint_interval > 0 && it % cfg.checkpoint_interval == 0 && it != cfg.iterations)
            hooks.on_checkpoint(it, cloud);
    }
    return res;
}

} // namespace vsplat
