#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "image.hpp"

namespace vsplat {

struct LossBreakdown {
    double l1 = 0;
    double dssim = 0; ///< 1 - ssim
    double total = 0;
    double lambda = 0.2;
};

namespace detail {

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b) || a.data.size() != b.data.size())
        throw InvalidParameter(std::string(what) + ": image dimensions differ (" + std::to_string(a.width) + "x" +
                               std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                               std::to_string(b.height) + ")");
}

} // namespace detail

/// Mean absolute difference over all pixels and channels. If `grad` is non-null it receives
/// d/da: sign(a - b) / (3N), zero at exact ties.
inline double l1_loss(const Image& a, const Image& b, Image* grad = nullptr) {
    detail::require_same_shape(a, b, "l1_loss");
    const double inv = a.data.empty() ? 0.0 : 1.0 / static_cast<double>(a.data.size());
    double s = 0.0;
    if (grad) *grad = Image(a.width, a.height);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += std::abs(d);
        if (grad) grad->data[i] = d > 0 ? inv : (d < 0 ? -inv : 0.0);
    }
    return s * inv;
}

inline double mse(const Image& a, const Image& b) {
    detail::require_same_shape(a, b, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return a.data.empty() ? 0.0 : s / static_cast<double>(a.data.size());
}

/// 10 log10(1 / MSE) for [0,1] images, capped at 100 dB.
inline double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m < 1e-10) return 100.0;
    return 10.0 * std::log10(1.0 / m);
}

struct SsimParams {
    static constexpr int kRadius = 5; ///< 11x11 window
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double range = 1.0;
};

/// Normalized 11-tap Gaussian kernel.
inline std::array<double, 2 * SsimParams::kRadius + 1> ssim_kernel(double sigma = 1.5) {
    std::array<double, 2 * SsimParams::kRadius + 1> w{};
    double s = 0.0;
    for (int i = -SsimParams::kRadius; i <= SsimParams::kRadius; ++i) {
        w[i + SsimParams::kRadius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        s += w[i + SsimParams::kRadius];
    }
    for (double& v : w) v /= s;
    return w;
}

/// Mirror index without repeating the edge sample (... c b | a b c ... ).
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

namespace detail {

using Plane = std::vector<double>;
using Kernel = std::array<double, 2 * SsimParams::kRadius + 1>;

inline Plane filter_plane(const Plane& in, int w, int h, const Kernel& k) {
    constexpr int R = SsimParams::kRadius;
    Plane tmp(in.size()), out(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int t = -R; t <= R; ++t) s += k[t + R] * in[static_cast<std::size_t>(y) * w + reflect_index(x + t, w)];
            tmp[static_cast<std::size_t>(y) * w + x] = s;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int t = -R; t <= R; ++t) s += k[t + R] * tmp[static_cast<std::size_t>(reflect_index(y + t, h)) * w + x];
            out[static_cast<std::size_t>(y) * w + x] = s;
        }
    return out;
}

/// Transpose of filter_plane (reflection makes the filter non-symmetric near borders).
inline Plane filter_plane_adjoint(const Plane& in, int w, int h, const Kernel& k) {
    constexpr int R = SsimParams::kRadius;
    Plane tmp(in.size(), 0.0), out(in.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = in[static_cast<std::size_t>(y) * w + x];
            for (int t = -R; t <= R; ++t) tmp[static_cast<std::size_t>(reflect_index(y + t, h)) * w + x] += k[t + R] * v;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = tmp[static_cast<std::size_t>(y) * w + x];
            for (int t = -R; t <= R; ++t) out[static_cast<std::size_t>(y) * w + reflect_index(x + t, w)] += k[t + R] * v;
        }
    return out;
}

} // namespace detail

/// Mean structural similarity over pixels and channels (11x11 Gaussian window, sigma 1.5,
/// reflection padding). If `grad` is non-null it receives d ssim / d a.
inline double ssim(const Image& a, const Image& b, Image* grad = nullptr, const SsimParams& prm = {}) {
    detail::require_same_shape(a, b, "ssim");
    const int w = a.width, h = a.height;
    const std::size_t n = a.pixel_count();
    if (grad) *grad = Image(w, h);
    if (n == 0) return 1.0;
    const auto k = ssim_kernel(prm.sigma);
    const double c1 = (prm.k1 * prm.range) * (prm.k1 * prm.range);
    const double c2 = (prm.k2 * prm.range) * (prm.k2 * prm.range);
    const double inv_count = 1.0 / (3.0 * static_cast<double>(n));
    double total = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        detail::Plane pa(n), pb(n), paa(n), pbb(n), pab(n);
        for (std::size_t i = 0; i < n; ++i) {
            pa[i] = a.data[3 * i + ch];
            pb[i] = b.data[3 * i + ch];
            paa[i] = pa[i] * pa[i];
            pbb[i] = pb[i] * pb[i];
            pab[i] = pa[i] * pb[i];
        }
        const auto mu_a = detail::filter_plane(pa, w, h, k);
        const auto mu_b = detail::filter_plane(pb, w, h, k);
        const auto e_aa = detail::filter_plane(paa, w, h, k);
        const auto e_bb = detail::filter_plane(pbb, w, h, k);
        const auto e_ab = detail::filter_plane(pab, w, h, k);
        detail::Plane d_mu, d_eaa, d_eab;
        if (grad) {
            d_mu.resize(n);
            d_eaa.resize(n);
            d_eab.resize(n);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double ma = mu_a[i], mb = mu_b[i];
            const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cab = e_ab[i] - ma * mb;
            const double A1 = 2.0 * ma * mb + c1, A2 = 2.0 * cab + c2;
            const double B1 = ma * ma + mb * mb + c1, B2 = va + vb + c2;
            const double s = (A1 * A2) / (B1 * B2);
            total += s;
            if (grad) {
                const double ds_dma = 2.0 * mb * A2 / (B1 * B2) - s * 2.0 * ma / B1;
                const double ds_dva = -s / B2;
                const double ds_dcab = 2.0 * A1 / (B1 * B2);
                d_mu[i] = ds_dma - 2.0 * ma * ds_dva - mb * ds_dcab;
                d_eaa[i] = ds_dva;
                d_eab[i] = ds_dcab;
            }
        }
        if (grad) {
            const auto g_mu = detail::filter_plane_adjoint(d_mu, w, h, k);
            const auto g_eaa = detail::filter_plane_adjoint(d_eaa, w, h, k);
            const auto g_eab = detail::filter_plane_adjoint(d_eab, w, h, k);
            for (std::size_t i = 0; i < n; ++i)
                grad->data[3 * i + ch] = (g_mu[i] + 2.0 * pa[i] * g_eaa[i] + pb[i] * g_eab[i]) * inv_count;
        }
    }
    return total / (3.0 * static_cast<double>(n));
}

/// (1 - lambda) * L1 + lambda * (1 - ssim). `grad` receives dL/d(render).
inline LossBreakdown photometric_loss(const Image& render, const Image& target, double lambda, Image* grad = nullptr) {
    if (lambda < 0.0 || lambda > 1.0) throw InvalidParameter("loss lambda must lie in [0,1]");
    LossBreakdown lb;
    lb.lambda = lambda;
    Image g1, gs;
    lb.l1 = l1_loss(render, target, grad ? &g1 : nullptr);
    const double s = lambda > 0.0 ? ssim(render, target, grad ? &gs : nullptr) : 1.0;
    lb.dssim = 1.0 - s;
    lb.total = (1.0 - lambda) * lb.l1 + lambda * lb.dssim;
    if (grad) {
        *grad = Image(render.width, render.height);
        for (std::size_t i = 0; i < grad->data.size(); ++i)
            grad->data[i] = (1.0 - lambda) * g1.data[i] - (lambda > 0.0 ? lambda * gs.data[i] : 0.0);
    }
    return lb;
}

} // namespace vsplat
