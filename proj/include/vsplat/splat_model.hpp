#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include "colmap.hpp"
#include "errors.hpp"
#include "knn.hpp"
#include "math.hpp"

namespace vsplat {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kShCoeffs = 16;
inline constexpr int kShRest = kShCoeffs - 1;
inline constexpr double kShC0 = 0.28209479177387814;

enum class ParamGroup : int { position = 0, scale, rotation, opacity, sh_dc, sh_rest };

inline constexpr std::array<ParamGroup, 6> kAllGroups{ParamGroup::position, ParamGroup::scale,  ParamGroup::rotation,
                                                      ParamGroup::opacity,  ParamGroup::sh_dc, ParamGroup::sh_rest};
inline constexpr std::array<std::size_t, 6> kGroupStride{3, 3, 4, 1, 3, 3 * kShRest};
inline constexpr std::array<std::string_view, 6> kGroupName{"position", "scale", "rotation", "opacity", "sh_dc", "sh_rest"};

inline constexpr std::size_t stride_of(ParamGroup g) { return kGroupStride[static_cast<int>(g)]; }

/// Six row-aligned parameter arrays, one row per Gaussian. Shared by the cloud, its
/// gradients and the optimizer moments so densify/prune can treat them uniformly.
///
/// sh_dc rows are (r, g, b); sh_rest rows are channel-major: the 15 degree>=1
/// coefficients of r, then of g, then of b.
struct ParamArrays {
    std::array<std::vector<double>, 6> groups;

    std::vector<double>& operator[](ParamGroup g) { return groups[static_cast<int>(g)]; }
    const std::vector<double>& operator[](ParamGroup g) const { return groups[static_cast<int>(g)]; }

    std::size_t rows() const { return groups[static_cast<int>(ParamGroup::opacity)].size(); }

    std::size_t total_scalars() const {
        std::size_t s = 0;
        for (const auto& g : groups) s += g.size();
        return s;
    }

    void resize(std::size_t n, double fill = 0.0) {
        for (auto g : kAllGroups) (*this)[g].resize(n * stride_of(g), fill);
    }

    bool congruent_with(const ParamArrays& o) const {
        for (auto g : kAllGroups)
            if ((*this)[g].size() != o[g].size()) return false;
        return true;
    }

    /// Order-preserving row selection.
    void keep_rows(std::span<const std::size_t> keep) {
        for (auto g : kAllGroups) {
            const std::size_t s = stride_of(g);
            auto& v = (*this)[g];
            std::vector<double> out(keep.size() * s);
            for (std::size_t r = 0; r < keep.size(); ++r)
                std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(keep[r] * s), s, out.begin() + static_cast<std::ptrdiff_t>(r * s));
            v = std::move(out);
        }
    }

    void append_row_from(const ParamArrays& src, std::size_t row) {
        for (auto g : kAllGroups) {
            const std::size_t s = stride_of(g);
            const auto& from = src[g];
            // Copy first: src may be *this, and insert() must not read from the vector it grows.
            const std::vector<double> tmp(from.begin() + static_cast<std::ptrdiff_t>(row * s),
                                          from.begin() + static_cast<std::ptrdiff_t>((row + 1) * s));
            auto& to = (*this)[g];
            to.insert(to.end(), tmp.begin(), tmp.end());
        }
    }

    void append_zero_rows(std::size_t n) { resize(rows() + n, 0.0); }

    bool all_finite() const {
        for (const auto& g : groups)
            for (double v : g)
                if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const ParamArrays&, const ParamArrays&) = default;
};

/// The optimizable scene. Scales are stored as logarithms, opacities as logits and
/// rotations as unnormalized quaternions (w, x, y, z).
struct SplatCloud : ParamArrays {
    int active_sh_degree = 0;

    std::size_t size() const { return rows(); }

    Vec3 position(std::size_t i) const { return Eigen::Map<const Vec3>((*this)[ParamGroup::position].data() + 3 * i); }
    Vec3 log_scale(std::size_t i) const { return Eigen::Map<const Vec3>((*this)[ParamGroup::scale].data() + 3 * i); }
    Quat rotation(std::size_t i) const { return Eigen::Map<const Quat>((*this)[ParamGroup::rotation].data() + 4 * i); }
    double opacity_logit(std::size_t i) const { return (*this)[ParamGroup::opacity][i]; }
    double opacity(std::size_t i) const { return sigmoid(opacity_logit(i)); }

    Eigen::Map<Vec3> position(std::size_t i) { return Eigen::Map<Vec3>((*this)[ParamGroup::position].data() + 3 * i); }
    Eigen::Map<Vec3> log_scale(std::size_t i) { return Eigen::Map<Vec3>((*this)[ParamGroup::scale].data() + 3 * i); }
    Eigen::Map<Quat> rotation(std::size_t i) { return Eigen::Map<Quat>((*this)[ParamGroup::rotation].data() + 4 * i); }
    double& opacity_logit(std::size_t i) { return (*this)[ParamGroup::opacity][i]; }

    /// Coefficient k (0..15) of channel c.
    double sh(std::size_t i, int c, int k) const {
        return k == 0 ? (*this)[ParamGroup::sh_dc][3 * i + c] : (*this)[ParamGroup::sh_rest][45 * i + 15 * c + (k - 1)];
    }
    double& sh(std::size_t i, int c, int k) {
        return k == 0 ? (*this)[ParamGroup::sh_dc][3 * i + c] : (*this)[ParamGroup::sh_rest][45 * i + 15 * c + (k - 1)];
    }

    /// Channel-major 3x16 coefficient block of Gaussian i.
    std::array<double, 48> sh_block(std::size_t i) const {
        std::array<double, 48> out{};
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < kShCoeffs; ++k) out[16 * c + k] = sh(i, c, k);
        return out;
    }

    /// Appends one Gaussian; sh may hold 3 (dc only) or 48 channel-major coefficients.
    void push_back(const Vec3& mu, const Vec3& log_s, const Quat& q, double opacity_logit_value,
                   std::span<const double> sh_coeffs) {
        const std::size_t i = size();
        append_zero_rows(1);
        position(i) = mu;
        log_scale(i) = log_s;
        rotation(i) = q;
        opacity_logit(i) = opacity_logit_value;
        if (sh_coeffs.size() == 3) {
            for (int c = 0; c < 3; ++c) sh(i, c, 0) = sh_coeffs[c];
        } else if (sh_coeffs.size() == 48) {
            for (int c = 0; c < 3; ++c)
                for (int k = 0; k < kShCoeffs; ++k) sh(i, c, k) = sh_coeffs[16 * c + k];
        } else {
            throw InvalidParameter("sh coefficients must have 3 or 48 entries");
        }
    }

    friend bool operator==(const SplatCloud&, const SplatCloud&) = default;
};

/// Throws InvalidParameter when a SplatCloud invariant is violated.
inline void check_cloud(const SplatCloud& c) {
    const std::size_t n = c.size();
    for (auto g : kAllGroups)
        if (c[g].size() != n * stride_of(g)) throw InvalidParameter("parameter arrays disagree on Gaussian count");
    if (!c.all_finite()) throw InvalidParameter("non-finite parameter value");
    if (c.active_sh_degree < 0 || c.active_sh_degree > kMaxShDegree) throw InvalidParameter("active_sh_degree out of [0,3]");
    for (std::size_t i = 0; i < n; ++i)
        if (!(c.rotation(i).norm() > 0.0)) throw InvalidParameter("zero quaternion at Gaussian " + std::to_string(i));
}

struct GroupView {
    ParamGroup group;
    std::string_view name;
    std::size_t stride;
    std::span<double> values;
};

struct ConstGroupView {
    ParamGroup group;
    std::string_view name;
    std::size_t stride;
    std::span<const double> values;
};

/// Named parameter groups; together they partition every scalar of the cloud exactly once.
inline std::array<GroupView, 6> parameters_view(ParamArrays& p) {
    std::array<GroupView, 6> out{};
    for (auto g : kAllGroups) {
        const int i = static_cast<int>(g);
        out[i] = {g, kGroupName[i], kGroupStride[i], std::span<double>(p[g])};
    }
    return out;
}

inline std::array<ConstGroupView, 6> parameters_view(const ParamArrays& p) {
    std::array<ConstGroupView, 6> out{};
    for (auto g : kAllGroups) {
        const int i = static_cast<int>(g);
        out[i] = {g, kGroupName[i], kGroupStride[i], std::span<const double>(p[g])};
    }
    return out;
}

/// Sigma = R(q/|q|) * diag(exp(s))^2 * R^T.
inline Mat3 build_covariance(const Vec3& log_scale, const Quat& q) {
    const Mat3 r = rotation_from_quat(q);
    const Vec3 s = log_scale.array().exp();
    const Mat3 m = r * s.asDiagonal();
    return m * m.transpose();
}

// Real spherical-harmonics basis up to degree 3 in the ordering used by the
// splat interchange format: band l occupies indices l^2 .. l^2+2l, m = -l..l.
namespace sh {
inline constexpr double C1 = 0.4886025119029199;
inline constexpr std::array<double, 5> C2{1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                          -1.0925484305920792, 0.5462742152960396};
inline constexpr std::array<double, 7> C3{-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                          0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                                          -0.5900435899266435};

inline int coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Basis values Y_k(d) for k < (degree+1)^2; remaining entries zeroed.
inline std::array<double, 16> basis(int degree, const Vec3& d) {
    std::array<double, 16> y{};
    const double x = d.x(), yy = d.y(), z = d.z();
    y[0] = kShC0;
    if (degree >= 1) {
        y[1] = -C1 * yy;
        y[2] = C1 * z;
        y[3] = -C1 * x;
    }
    if (degree >= 2) {
        const double xx = x * x, y2 = yy * yy, zz = z * z;
        y[4] = C2[0] * x * yy;
        y[5] = C2[1] * yy * z;
        y[6] = C2[2] * (2.0 * zz - xx - y2);
        y[7] = C2[3] * x * z;
        y[8] = C2[4] * (xx - y2);
        if (degree >= 3) {
            y[9] = C3[0] * yy * (3.0 * xx - y2);
            y[10] = C3[1] * x * yy * z;
            y[11] = C3[2] * yy * (4.0 * zz - xx - y2);
            y[12] = C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * y2);
            y[13] = C3[4] * x * (4.0 * zz - xx - y2);
            y[14] = C3[5] * z * (xx - y2);
            y[15] = C3[6] * x * (xx - 3.0 * y2);
        }
    }
    return y;
}

/// Gradients of the basis polynomials with respect to the (unnormalized) direction components.
inline std::array<Vec3, 16> basis_gradient(int degree, const Vec3& d) {
    std::array<Vec3, 16> g;
    g.fill(Vec3::Zero());
    const double x = d.x(), y = d.y(), z = d.z();
    if (degree >= 1) {
        g[1] = Vec3(0, -C1, 0);
        g[2] = Vec3(0, 0, C1);
        g[3] = Vec3(-C1, 0, 0);
    }
    if (degree >= 2) {
        g[4] = C2[0] * Vec3(y, x, 0);
        g[5] = C2[1] * Vec3(0, z, y);
        g[6] = C2[2] * Vec3(-2 * x, -2 * y, 4 * z);
        g[7] = C2[3] * Vec3(z, 0, x);
        g[8] = C2[4] * Vec3(2 * x, -2 * y, 0);
    }
    if (degree >= 3) {
        const double xx = x * x, yy = y * y, zz = z * z;
        g[9] = C3[0] * Vec3(6 * x * y, 3 * xx - 3 * yy, 0);
        g[10] = C3[1] * Vec3(y * z, x * z, x * y);
        g[11] = C3[2] * Vec3(-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z);
        g[12] = C3[3] * Vec3(-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy);
        g[13] = C3[4] * Vec3(4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z);
        g[14] = C3[5] * Vec3(2 * x * z, -2 * y * z, xx - yy);
        g[15] = C3[6] * Vec3(3 * xx - 3 * yy, -6 * x * y, 0);
    }
    return g;
}
} // namespace sh

/// View-dependent color from channel-major coefficients (3 x 16): max(0, 0.5 + sum_k c_k Y_k(dir)).
inline Vec3 eval_sh_color(std::span<const double, 48> coeffs, int degree, const Vec3& dir) {
    if (degree < 0 || degree > kMaxShDegree) throw InvalidParameter("sh degree out of [0,3]");
    if (std::abs(dir.norm() - 1.0) > 1e-6) throw InvalidParameter("sh direction must be a unit vector");
    const auto y = sh::basis(degree, dir);
    const int n = sh::coeff_count(degree);
    Vec3 out;
    for (int c = 0; c < 3; ++c) {
        double v = 0.5;
        for (int k = 0; k < n; ++k) v += coeffs[16 * c + k] * y[k];
        out[c] = std::max(0.0, v);
    }
    return out;
}

/// Degree-0 coefficient that reproduces a color in [0,1].
inline double rgb_to_sh_dc(double rgb) { return (rgb - 0.5) / kShC0; }

struct InitOptions {
    /// Scene extent for scale clamping; <= 0 derives it from the points' bounding sphere.
    double extent = 0.0;
    double initial_opacity = 0.1;
};

/// Radius of the bounding sphere about the centroid, times 1.1 (positive fallback for a single point).
inline double points_extent(std::span<const Vec3> pts) {
    if (pts.empty()) return 1.0;
    Vec3 c = Vec3::Zero();
    for (const Vec3& p : pts) c += p;
    c /= static_cast<double>(pts.size());
    double r = 0.0;
    for (const Vec3& p : pts) r = std::max(r, (p - c).norm());
    return r > 0.0 ? 1.1 * r : 1.0;
}

/// One Gaussian per sparse point: isotropic scale from the 3-NN mean distance, identity rotation,
/// opacity 0.1, degree-0 color matching the point color.
inline SplatCloud init_from_sparse(const SparsePoints& points, const InitOptions& opt = {}) {
    if (points.empty()) throw InvalidParameter("cannot initialize from empty cloud");
    const std::span<const Vec3> pos(points.positions);
    const double extent = opt.extent > 0.0 ? opt.extent : points_extent(pos);
    const auto knn = knn_mean_distance(pos, 3);
    const double lo = std::log(1e-7 * extent), hi = std::log(0.1 * extent);
    const double fallback = std::log(0.01 * extent);

    SplatCloud cloud;
    cloud.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        cloud.position(i) = points.positions[i];
        double ls = fallback;
        if (std::isfinite(knn[i])) ls = knn[i] > 0.0 ? std::clamp(std::log(knn[i]), lo, hi) : lo;
        cloud.log_scale(i) = Vec3::Constant(ls);
        cloud.rotation(i) = Quat(1, 0, 0, 0);
        cloud.opacity_logit(i) = logit(opt.initial_opacity);
        for (int c = 0; c < 3; ++c) cloud.sh(i, c, 0) = rgb_to_sh_dc(points.colors[i][c] / 255.0);
    }
    cloud.active_sh_degree = 0;
    return cloud;
}

} // namespace vsplat
