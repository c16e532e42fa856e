#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "colmap.hpp"
#include "errors.hpp"
#include "image.hpp"
#include "math.hpp"
#include "parallel.hpp"
#include "splat_model.hpp"

namespace vsplat {

/// Forward-rendering constants. Defaults are the reference 3DGS values; the oracle
/// comparison disables the transmittance cutoff.
struct RenderSettings {
    double near_plane = 0.2;
    double dilation = 0.3;                ///< px^2 added to the screen covariance diagonal
    double alpha_clamp = 0.99;
    double min_alpha = 1.0 / 255.0;       ///< contributions below are skipped
    double transmittance_cutoff = 1e-4;   ///< pixel terminates once T drops below
    Vec3 background = Vec3::Zero();
    bool track_decisions = false;         ///< fill RenderOutput::decision_hash
};

/// Pinhole camera with its world-to-camera transform, in the form the renderer consumes.
struct CameraView {
    int width = 0;
    int height = 0;
    double fx = 1, fy = 1, cx = 0, cy = 0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static CameraView from(const CameraIntrinsics& in, const CameraPose& pose) {
        CameraView v;
        v.width = in.width;
        v.height = in.height;
        v.fx = in.fx;
        v.fy = in.fy;
        v.cx = in.cx;
        v.cy = in.cy;
        v.rotation = pose.rotation();
        v.translation = pose.t;
        return v;
    }

    Vec3 center() const { return -rotation.transpose() * translation; }
};

struct ProjectedGaussian {
    std::size_t index = 0;   ///< source Gaussian id
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    Mat2 conic = Mat2::Identity();
    double depth = 0;
    Vec3 color = Vec3::Zero();
    double alpha = 0;        ///< sigmoid(opacity_logit)
    int radius = 0;
    Vec3 cam_pos = Vec3::Zero();
    std::array<bool, 3> color_clamped{};
};

/// Screen-space footprint radius: 3 sigma, widened where the opacity lets the tail reach
/// min_alpha so that the disc contains every pixel with a non-skipped contribution.
inline int footprint_radius(const Mat2& cov2d, double alpha, double min_alpha) {
    const double a = cov2d(0, 0), b = cov2d(0, 1), c = cov2d(1, 1);
    const double mid = 0.5 * (a + c);
    const double lambda_max = mid + std::sqrt(std::max(0.1, mid * mid - (a * c - b * b)));
    double k = 3.0;
    const double floor_alpha = std::max(min_alpha, 1e-30);
    if (alpha > floor_alpha) k = std::max(k, std::sqrt(2.0 * std::log(alpha / floor_alpha)));
    return std::max(1, static_cast<int>(std::ceil(k * std::sqrt(lambda_max))));
}

/// Projects one Gaussian; nullopt when it lies at or in front of the near plane.
inline std::optional<ProjectedGaussian> project_one(const SplatCloud& cloud, std::size_t i, const CameraView& view,
                                                    const Vec3& cam_center, const RenderSettings& rs) {
    const Vec3 mu = cloud.position(i);
    const Vec3 p = view.rotation * mu + view.translation;
    if (!(p.z() > rs.near_plane)) return std::nullopt;

    ProjectedGaussian g;
    g.index = i;
    g.cam_pos = p;
    g.depth = p.z();
    const double iz = 1.0 / p.z();
    g.mean2d = Vec2(view.fx * p.x() * iz + view.cx, view.fy * p.y() * iz + view.cy);

    Mat23 j;
    j << view.fx * iz, 0.0, -view.fx * p.x() * iz * iz, 0.0, view.fy * iz, -view.fy * p.y() * iz * iz;
    const Mat23 t = j * view.rotation;
    const Mat3 sigma = build_covariance(cloud.log_scale(i), cloud.rotation(i));
    g.cov2d = t * sigma * t.transpose();
    g.cov2d(0, 1) = g.cov2d(1, 0) = 0.5 * (g.cov2d(0, 1) + g.cov2d(1, 0));
    g.cov2d(0, 0) += rs.dilation;
    g.cov2d(1, 1) += rs.dilation;
    const double det = g.cov2d.determinant();
    if (!(det > 0.0)) throw InternalError("non-invertible screen covariance for Gaussian " + std::to_string(i));
    g.conic << g.cov2d(1, 1) / det, -g.cov2d(0, 1) / det, -g.cov2d(1, 0) / det, g.cov2d(0, 0) / det;

    g.alpha = cloud.opacity(i);
    g.radius = footprint_radius(g.cov2d, g.alpha, rs.min_alpha);

    const Vec3 dir = (mu - cam_center).normalized();
    const auto y = sh::basis(cloud.active_sh_degree, dir);
    const int ncoef = sh::coeff_count(cloud.active_sh_degree);
    for (int c = 0; c < 3; ++c) {
        double v = 0.5;
        for (int k = 0; k < ncoef; ++k) v += cloud.sh(i, c, k) * y[k];
        g.color_clamped[c] = v < 0.0;
        g.color[c] = std::max(0.0, v);
    }
    return g;
}

/// Projects every Gaussian in front of the near plane whose footprint touches the image.
/// Output keeps source index order.
inline std::vector<ProjectedGaussian> project(const SplatCloud& cloud, const CameraView& view, const RenderSettings& rs = {}) {
    const std::size_t n = cloud.size();
    std::vector<std::optional<ProjectedGaussian>> tmp(n);
    const Vec3 cc = view.center();
    constexpr std::size_t kChunk = 256;
    parallel_for((n + kChunk - 1) / kChunk, [&](std::size_t chunk) {
        const std::size_t end = std::min(n, (chunk + 1) * kChunk);
        for (std::size_t i = chunk * kChunk; i < end; ++i) {
            auto g = project_one(cloud, i, view, cc, rs);
            if (!g) continue;
            const double r = g->radius;
            if (g->mean2d.x() + r < 0.0 || g->mean2d.x() - r > view.width || g->mean2d.y() + r < 0.0 ||
                g->mean2d.y() - r > view.height)
                continue;
            tmp[i] = std::move(g);
        }
    });
    std::vector<ProjectedGaussian> out;
    for (auto& g : tmp)
        if (g) out.push_back(std::move(*g));
    return out;
}

inline std::vector<ProjectedGaussian> project(const SplatCloud& cloud, const CameraIntrinsics& intr, const CameraPose& pose,
                                              const RenderSettings& rs = {}) {
    return project(cloud, CameraView::from(intr, pose), rs);
}

/// Depth-sorted Gaussians binned into 16x16 tiles; a band is one row of tiles and is the
/// unit of parallel work. Built identically by the forward and backward passes.
struct TileBins {
    static constexpr int kTile = 16;
    int width = 0, height = 0, tiles_x = 0, tiles_y = 0;
    std::vector<std::size_t> order;                       ///< projected positions sorted by (depth, index)
    std::vector<std::vector<std::uint32_t>> band_list;    ///< per band: projected positions, depth order
    std::vector<std::vector<std::vector<std::uint32_t>>> tile_list; ///< per band, per tile: band-local ids
};

inline TileBins bin_gaussians(const std::vector<ProjectedGaussian>& proj, int width, int height) {
    TileBins b;
    b.width = width;
    b.height = height;
    b.tiles_x = (width + TileBins::kTile - 1) / TileBins::kTile;
    b.tiles_y = (height + TileBins::kTile - 1) / TileBins::kTile;
    b.order.resize(proj.size());
    std::iota(b.order.begin(), b.order.end(), 0);
    std::sort(b.order.begin(), b.order.end(), [&](std::size_t a, std::size_t c) {
        if (proj[a].depth != proj[c].depth) return proj[a].depth < proj[c].depth;
        return proj[a].index < proj[c].index;
    });
    b.band_list.assign(b.tiles_y, {});
    b.tile_list.assign(b.tiles_y, std::vector<std::vector<std::uint32_t>>(b.tiles_x));
    for (std::size_t pos : b.order) {
        const auto& g = proj[pos];
        const double r = g.radius;
        // Pixel centers (x + 0.5) inside [u - r, u + r].
        const int x0 = std::max(0, static_cast<int>(std::ceil(g.mean2d.x() - r - 0.5)));
        const int x1 = std::min(width - 1, static_cast<int>(std::floor(g.mean2d.x() + r - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(g.mean2d.y() - r - 0.5)));
        const int y1 = std::min(height - 1, static_cast<int>(std::floor(g.mean2d.y() + r - 0.5)));
        if (x0 > x1 || y0 > y1) continue;
        for (int ty = y0 / TileBins::kTile; ty <= y1 / TileBins::kTile; ++ty) {
            const auto local = static_cast<std::uint32_t>(b.band_list[ty].size());
            b.band_list[ty].push_back(static_cast<std::uint32_t>(pos));
            for (int tx = x0 / TileBins::kTile; tx <= x1 / TileBins::kTile; ++tx) b.tile_list[ty][tx].push_back(local);
        }
    }
    return b;
}

struct RenderOutput {
    Image color;
    std::vector<double> final_transmittance;    ///< per pixel
    std::vector<double> per_gaussian_max_blend; ///< per source Gaussian, max of alpha' * T
    std::vector<double> screen_grad_accum;      ///< per source Gaussian, filled by backward()
    std::vector<std::uint8_t> touched;          ///< per source Gaussian, survived culling
    std::uint64_t decision_hash = 0;            ///< skip/clamp/termination pattern (if tracked)

    // Compositing record consumed by backward().
    RenderSettings settings;
    std::vector<ProjectedGaussian> projected;
    TileBins bins;
    std::vector<std::uint32_t> n_contrib;       ///< per pixel: tile-list prefix length walked
};

namespace detail {

inline std::uint64_t mix_hash(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

/// alpha' for a pixel center; returns false when the Gaussian's disc misses the pixel.
inline bool pixel_alpha(const ProjectedGaussian& g, double px, double py, const RenderSettings& rs, double& a_out,
                        double& g_out, bool& clamped, Vec2& d_out) {
    const double dx = px - g.mean2d.x(), dy = py - g.mean2d.y();
    if (dx * dx + dy * dy > static_cast<double>(g.radius) * g.radius) return false;
    const double power = -0.5 * (g.conic(0, 0) * dx * dx + 2.0 * g.conic(0, 1) * dx * dy + g.conic(1, 1) * dy * dy);
    const double gv = std::exp(power);
    const double raw = g.alpha * gv;
    clamped = raw > rs.alpha_clamp;
    a_out = clamped ? rs.alpha_clamp : raw;
    g_out = gv;
    d_out = Vec2(dx, dy);
    return true;
}

} // namespace detail

/// Front-to-back alpha compositing of depth-sorted splats. `cloud_size` sizes the
/// per-Gaussian statistics (indices refer to the source cloud).
inline RenderOutput composite(std::vector<ProjectedGaussian> projected, int width, int height, std::size_t cloud_size,
                              const RenderSettings& rs = {}) {
    for (const auto& g : projected) {
        if (!(g.cov2d.determinant() > 0.0)) throw InternalError("non-invertible screen covariance");
        if (g.index >= cloud_size) throw InternalError("projected Gaussian index outside the cloud");
    }
    RenderOutput out;
    out.settings = rs;
    out.projected = std::move(projected);
    out.bins = bin_gaussians(out.projected, width, height);
    out.color = Image(width, height);
    out.final_transmittance.assign(static_cast<std::size_t>(width) * height, 1.0);
    out.n_contrib.assign(static_cast<std::size_t>(width) * height, 0);
    out.per_gaussian_max_blend.assign(cloud_size, 0.0);
    out.screen_grad_accum.assign(cloud_size, 0.0);
    out.touched.assign(cloud_size, 0);
    for (const auto& g : out.projected) out.touched[g.index] = 1;

    const TileBins& bins = out.bins;
    const auto& proj = out.projected;
    std::vector<std::vector<double>> band_max(bins.tiles_y);
    std::vector<std::uint64_t> band_hash(bins.tiles_y, 0);

    parallel_for(static_cast<std::size_t>(bins.tiles_y), [&](std::size_t band) {
        const auto& blist = bins.band_list[band];
        auto& bmax = band_max[band];
        bmax.assign(blist.size(), 0.0);
        std::uint64_t h = 0;
        const int y_begin = static_cast<int>(band) * TileBins::kTile;
        const int y_end = std::min(height, y_begin + TileBins::kTile);
        for (int tx = 0; tx < bins.tiles_x; ++tx) {
            const auto& tlist = bins.tile_list[band][tx];
            const int x_begin = tx * TileBins::kTile, x_end = std::min(width, x_begin + TileBins::kTile);
            for (int y = y_begin; y < y_end; ++y)
                for (int x = x_begin; x < x_end; ++x) {
                    const double px = x + 0.5, py = y + 0.5;
                    double T = 1.0;
                    Vec3 c = Vec3::Zero();
                    std::uint32_t walked = 0;
                    for (std::uint32_t k = 0; k < tlist.size(); ++k) {
                        const std::uint32_t local = tlist[k];
                        const auto& g = proj[blist[local]];
                        double a, gv;
                        bool clamped;
                        Vec2 d;
                        if (!detail::pixel_alpha(g, px, py, rs, a, gv, clamped, d)) continue;
                        if (a < rs.min_alpha) {
                            if (rs.track_decisions) h = detail::mix_hash(h, (std::uint64_t(g.index) << 2) | 1);
                            continue;
                        }
                        if (rs.track_decisions) h = detail::mix_hash(h, (std::uint64_t(g.index) << 2) | (clamped ? 2 : 3));
                        const double w = a * T;
                        c += g.color * w;
                        bmax[local] = std::max(bmax[local], w);
                        T *= 1.0 - a;
                        walked = k + 1;
                        if (T < rs.transmittance_cutoff) break;
                    }
                    c += T * rs.background;
                    const std::size_t pix = static_cast<std::size_t>(y) * width + x;
                    out.final_transmittance[pix] = T;
                    out.n_contrib[pix] = walked;
                    for (int ch = 0; ch < 3; ++ch) out.color.data[pix * 3 + ch] = c[ch];
                    if (rs.track_decisions) h = detail::mix_hash(h, walked);
                }
        }
        band_hash[band] = h;
    });

    for (std::size_t band = 0; band < band_max.size(); ++band) {
        const auto& blist = bins.band_list[band];
        for (std::size_t j = 0; j < blist.size(); ++j) {
            double& m = out.per_gaussian_max_blend[proj[blist[j]].index];
            m = std::max(m, band_max[band][j]);
        }
        out.decision_hash = detail::mix_hash(out.decision_hash, band_hash[band]);
    }
    return out;
}

/// project + composite.
inline RenderOutput render(const SplatCloud& cloud, const CameraView& view, const RenderSettings& rs = {}) {
    return composite(project(cloud, view, rs), view.width, view.height, cloud.size(), rs);
}

inline RenderOutput render(const SplatCloud& cloud, const CameraIntrinsics& intr, const CameraPose& pose,
                           const RenderSettings& rs = {}) {
    return render(cloud, CameraView::from(intr, pose), rs);
}

/// Ground-truth renderer for tests: every Gaussian in front of the near plane is evaluated at
/// every pixel in exact depth order, with no culling, footprint bound or early termination.
inline Image oracle_render(const SplatCloud& cloud, const CameraView& view, const RenderSettings& rs = {}) {
    const Vec3 cc = view.center();
    std::vector<ProjectedGaussian> all;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (auto g = project_one(cloud, i, view, cc, rs)) all.push_back(*g);
    std::sort(all.begin(), all.end(), [](const ProjectedGaussian& a, const ProjectedGaussian& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.index < b.index;
    });
    Image img(view.width, view.height);
    for (int y = 0; y < view.height; ++y)
        for (int x = 0; x < view.width; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            double T = 1.0;
            Vec3 c = Vec3::Zero();
            for (const auto& g : all) {
                const double dx = px - g.mean2d.x(), dy = py - g.mean2d.y();
                const double power =
                    -0.5 * (g.conic(0, 0) * dx * dx + 2.0 * g.conic(0, 1) * dx * dy + g.conic(1, 1) * dy * dy);
                const double a = std::min(rs.alpha_clamp, g.alpha * std::exp(power));
                if (a < rs.min_alpha) continue;
                c += g.color * (a * T);
                T *= 1.0 - a;
            }
            c += T * rs.background;
            for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = c[ch];
        }
    return img;
}

inline Image oracle_render(const SplatCloud& cloud, const CameraIntrinsics& intr, const CameraPose& pose,
                           const RenderSettings& rs = {}) {
    return oracle_render(cloud, CameraView::from(intr, pose), rs);
}

} // namespace vsplat
