#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "image.hpp"
#include "math.hpp"
#include "parallel.hpp"
#include "rasterizer.hpp"
#include "splat_model.hpp"

namespace vsplat {

/// Parameter gradients, row-congruent with the cloud, plus screen-space statistics.
struct GradientSet : ParamArrays {
    /// |dL/dmean2d| in pixels per Gaussian (0 when untouched).
    std::vector<double> view_space_grad_norm;
    /// dL/dmean2d (u, v) in pixels, two entries per Gaussian.
    std::vector<double> mean2d_grad;

    void reset(std::size_t n) {
        resize(0);
        resize(n, 0.0);
        view_space_grad_norm.assign(n, 0.0);
        mean2d_grad.assign(2 * n, 0.0);
    }
};

namespace detail {

/// Screen-space gradient of one Gaussian: color (3), alpha (1), mean2d (2), conic a/b/c (3).
struct ScreenGrad {
    std::array<double, 9> v{};
    void add(const ScreenGrad& o) {
        for (int i = 0; i < 9; ++i) v[i] += o.v[i];
    }
};

struct Contribution {
    std::uint32_t local;
    double a, T, gv;
    bool clamped;
    Vec2 d;
};

/// dR/dq_k for unit q = (w, x, y, z).
inline std::array<Mat3, 4> rotation_jacobian(const Quat& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    std::array<Mat3, 4> d;
    d[0] << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
    d[1] << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
    d[2] << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
    d[3] << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
    return d;
}

} // namespace detail

/// Chain rule from per-pixel loss gradients to every Gaussian parameter. Walks each pixel's
/// compositing sequence again and accumulates back to front; clamped, skipped and
/// terminated contributions receive zero gradient exactly as in the forward pass.
inline GradientSet backward(const SplatCloud& cloud, const CameraView& view, const RenderOutput& rendered,
                            const Image& dL_dpixels) {
    const int W = rendered.color.width, H = rendered.color.height;
    if (dL_dpixels.width != W || dL_dpixels.height != H || dL_dpixels.data.size() != rendered.color.data.size())
        throw InternalError("backward: pixel gradient shape does not match the render");
    if (rendered.touched.size() != cloud.size()) throw InternalError("backward: render was produced from a different cloud");
    if (view.width != W || view.height != H) throw InternalError("backward: camera does not match the render");

    const auto& rs = rendered.settings;
    const auto& proj = rendered.projected;
    const auto& bins = rendered.bins;

    // Pass 1: per-band screen-space gradients, band-local storage.
    std::vector<std::vector<detail::ScreenGrad>> band_grad(bins.tiles_y);
    parallel_for(static_cast<std::size_t>(bins.tiles_y), [&](std::size_t band) {
        const auto& blist = bins.band_list[band];
        auto& acc = band_grad[band];
        acc.assign(blist.size(), {});
        std::vector<detail::Contribution> seq;
        const int y_begin = static_cast<int>(band) * TileBins::kTile;
        const int y_end = std::min(H, y_begin + TileBins::kTile);
        for (int tx = 0; tx < bins.tiles_x; ++tx) {
            const auto& tlist = bins.tile_list[band][tx];
            const int x_begin = tx * TileBins::kTile, x_end = std::min(W, x_begin + TileBins::kTile);
            for (int y = y_begin; y < y_end; ++y)
                for (int x = x_begin; x < x_end; ++x) {
                    const std::size_t pix = static_cast<std::size_t>(y) * W + x;
                    const Vec3 dLdC(dL_dpixels.data[pix * 3], dL_dpixels.data[pix * 3 + 1], dL_dpixels.data[pix * 3 + 2]);
                    if (dLdC.isZero(0.0)) continue;
                    const double px = x + 0.5, py = y + 0.5;
                    seq.clear();
                    double T = 1.0;
                    for (std::uint32_t k = 0; k < rendered.n_contrib[pix]; ++k) {
                        const std::uint32_t local = tlist[k];
                        const auto& g = proj[blist[local]];
                        double a, gv;
                        bool clamped;
                        Vec2 d;
                        if (!detail::pixel_alpha(g, px, py, rs, a, gv, clamped, d)) continue;
                        if (a < rs.min_alpha) continue;
                        seq.push_back({local, a, T, gv, clamped, d});
                        T *= 1.0 - a;
                    }
                    Vec3 suffix = rs.background; // color composited behind the current splat, per unit transmittance
                    for (auto it = seq.rbegin(); it != seq.rend(); ++it) {
                        const auto& g = proj[blist[it->local]];
                        auto& sg = acc[it->local];
                        const double w = it->a * it->T;
                        for (int c = 0; c < 3; ++c) sg.v[c] += dLdC[c] * w;
                        const double dL_da = it->T * dLdC.dot(g.color - suffix);
                        suffix = it->a * g.color + (1.0 - it->a) * suffix;
                        if (it->clamped) continue;
                        sg.v[3] += dL_da * it->gv;
                        const double dL_dpow = dL_da * it->a;
                        const double dx = it->d.x(), dy = it->d.y();
                        // d = pixel - mean, so dmean = -dd.
                        sg.v[4] += dL_dpow * (g.conic(0, 0) * dx + g.conic(0, 1) * dy);
                        sg.v[5] += dL_dpow * (g.conic(0, 1) * dx + g.conic(1, 1) * dy);
                        sg.v[6] += dL_dpow * (-0.5 * dx * dx);
                        sg.v[7] += dL_dpow * (-dx * dy);
                        sg.v[8] += dL_dpow * (-0.5 * dy * dy);
                    }
                }
        }
    });

    // Fixed band order reduction keeps the result independent of the thread count.
    std::vector<detail::ScreenGrad> screen(proj.size());
    for (std::size_t band = 0; band < band_grad.size(); ++band) {
        const auto& blist = bins.band_list[band];
        for (std::size_t j = 0; j < blist.size(); ++j) screen[blist[j]].add(band_grad[band][j]);
    }

    GradientSet out;
    out.reset(cloud.size());
    const Vec3 cam_center = view.center();
    const Mat3& Wr = view.rotation;
    const int degree = cloud.active_sh_degree;
    const int ncoef = sh::coeff_count(degree);

    // Pass 2: per-Gaussian chain rule through projection, covariance and color.
    parallel_for(proj.size(), [&](std::size_t pos) {
        const auto& g = proj[pos];
        const auto& s = screen[pos].v;
        const std::size_t i = g.index;
        const Vec3 dL_dcolor(s[0], s[1], s[2]);
        const double dL_dalpha = s[3];
        const Vec2 dL_dmean(s[4], s[5]);

        out.mean2d_grad[2 * i] = dL_dmean.x();
        out.mean2d_grad[2 * i + 1] = dL_dmean.y();
        out.view_space_grad_norm[i] = dL_dmean.norm();

        out[ParamGroup::opacity][i] = dL_dalpha * g.alpha * (1.0 - g.alpha);

        // conic -> cov2d
        Mat2 g_conic;
        g_conic << s[6], 0.5 * s[7], 0.5 * s[7], s[8];
        const Mat2 g_cov2d = -g.conic * g_conic * g.conic;

        const Vec3 p = g.cam_pos;
        const double iz = 1.0 / p.z(), iz2 = iz * iz, iz3 = iz2 * iz;
        Mat23 J;
        J << view.fx * iz, 0.0, -view.fx * p.x() * iz2, 0.0, view.fy * iz, -view.fy * p.y() * iz2;
        const Mat23 T = J * Wr;
        const Quat q = cloud.rotation(i);
        const double qn = q.norm();
        const Quat qh = q / qn;
        const Mat3 R = rotation_from_unit_quat(qh);
        const Vec3 sc = cloud.log_scale(i).array().exp();
        const Mat3 M = R * sc.asDiagonal();
        const Mat3 sigma = M * M.transpose();

        const Mat3 g_sigma = T.transpose() * g_cov2d * T;
        const Mat23 g_T = 2.0 * g_cov2d * T * sigma;
        const Mat23 g_J = g_T * Wr.transpose();

        Vec3 g_p = Vec3::Zero();
        g_p.x() += dL_dmean.x() * view.fx * iz;
        g_p.z() -= dL_dmean.x() * view.fx * p.x() * iz2;
        g_p.y() += dL_dmean.y() * view.fy * iz;
        g_p.z() -= dL_dmean.y() * view.fy * p.y() * iz2;
        g_p.z() -= g_J(0, 0) * view.fx * iz2;
        g_p.x() -= g_J(0, 2) * view.fx * iz2;
        g_p.z() += g_J(0, 2) * 2.0 * view.fx * p.x() * iz3;
        g_p.z() -= g_J(1, 1) * view.fy * iz2;
        g_p.y() -= g_J(1, 2) * view.fy * iz2;
        g_p.z() += g_J(1, 2) * 2.0 * view.fy * p.y() * iz3;
        Vec3 g_mu = Wr.transpose() * g_p;

        // Sigma = M M^T, M = R diag(s)
        const Mat3 g_M = 2.0 * g_sigma * M;
        for (int k = 0; k < 3; ++k) {
            double gs = 0.0;
            for (int j = 0; j < 3; ++j) gs += g_M(j, k) * R(j, k);
            out[ParamGroup::scale][3 * i + k] = gs * sc[k];
        }
        const Mat3 g_R = g_M * sc.asDiagonal();
        const auto dR = detail::rotation_jacobian(qh);
        Quat g_qh;
        for (int k = 0; k < 4; ++k) g_qh[k] = (g_R.array() * dR[k].array()).sum();
        const Quat g_q = (g_qh - qh * qh.dot(g_qh)) / qn;
        for (int k = 0; k < 4; ++k) out[ParamGroup::rotation][4 * i + k] = g_q[k];

        // Color from SH along the viewing direction.
        const Vec3 v = cloud.position(i) - cam_center;
        const double vn = v.norm();
        const Vec3 dir = v / vn;
        const auto Y = sh::basis(degree, dir);
        const auto dY = sh::basis_gradient(degree, dir);
        Vec3 g_dir = Vec3::Zero();
        for (int c = 0; c < 3; ++c) {
            if (g.color_clamped[c]) continue;
            const double gc = dL_dcolor[c];
            out[ParamGroup::sh_dc][3 * i + c] = gc * Y[0];
            for (int k = 1; k < ncoef; ++k) {
                out[ParamGroup::sh_rest][45 * i + 15 * c + (k - 1)] = gc * Y[k];
                g_dir += gc * cloud.sh(i, c, k) * dY[k];
            }
        }
        g_mu += (g_dir - dir * dir.dot(g_dir)) / vn;
        for (int k = 0; k < 3; ++k) out[ParamGroup::position][3 * i + k] = g_mu[k];
    });
    return out;
}

inline GradientSet backward(const SplatCloud& cloud, const CameraIntrinsics& intr, const CameraPose& pose,
                            const RenderOutput& rendered, const Image& dL_dpixels) {
    return backward(cloud, CameraView::from(intr, pose), rendered, dL_dpixels);
}

} // namespace vsplat

namespace vsplat {

/// Adds this view's |dL/dmean2d| into the render's per-Gaussian accumulator.
inline void accumulate_screen_grad(RenderOutput& rendered, const GradientSet& grads) {
    if (rendered.screen_grad_accum.size() != grads.view_space_grad_norm.size())
        throw InternalError("accumulate_screen_grad: size mismatch");
    for (std::size_t i = 0; i < grads.view_space_grad_norm.size(); ++i)
        rendered.screen_grad_accum[i] += grads.view_space_grad_norm[i];
}

} // namespace vsplat
