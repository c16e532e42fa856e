#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "atomic_file.hpp"
#include "errors.hpp"
#include "image.hpp"
#include "math.hpp"

namespace vsplat {

enum class CameraModel { simple_pinhole, pinhole, simple_radial };

inline std::string_view to_string(CameraModel m) {
    switch (m) {
    case CameraModel::simple_pinhole: return "SIMPLE_PINHOLE";
    case CameraModel::pinhole: return "PINHOLE";
    case CameraModel::simple_radial: return "SIMPLE_RADIAL";
    }
    return "?";
}

struct CameraIntrinsics {
    int camera_id = 0;
    CameraModel model = CameraModel::pinhole;
    int width = 0;
    int height = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    double radial_k = 0; ///< parsed for SIMPLE_RADIAL, never applied

    /// Same camera rescaled for an image downsampled by an integer factor.
    CameraIntrinsics downscaled(int factor) const {
        if (factor <= 1) return *this;
        CameraIntrinsics c = *this;
        c.width = width / factor;
        c.height = height / factor;
        c.fx /= factor;
        c.fy /= factor;
        c.cx /= factor;
        c.cy /= factor;
        return c;
    }

    friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// World-to-camera pose: x_cam = R(q) * x_world + t.
struct CameraPose {
    int image_id = 0;
    Quat q = Quat(1, 0, 0, 0);
    Vec3 t = Vec3::Zero();
    int camera_id = 0;
    std::string image_name;
    /// POINT3D_IDs of the image's 2D observations (-1 entries dropped).
    std::vector<std::int64_t> observed_point_ids;

    Mat3 rotation() const { return rotation_from_quat(q); }
    Vec3 center() const { return -rotation().transpose() * t; }
    Vec3 to_camera(const Vec3& world) const { return rotation() * world + t; }

    friend bool operator==(const CameraPose&, const CameraPose&) = default;
};

struct SparsePoints {
    std::vector<std::int64_t> ids;
    std::vector<Vec3> positions;
    std::vector<std::array<std::uint8_t, 3>> colors;
    std::vector<int> track_lengths;
    std::vector<double> errors;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }

    void push_back(std::int64_t id, const Vec3& p, std::array<std::uint8_t, 3> rgb, int track = 2, double err = 0.0) {
        ids.push_back(id);
        positions.push_back(p);
        colors.push_back(rgb);
        track_lengths.push_back(track);
        errors.push_back(err);
    }

    friend bool operator==(const SparsePoints&, const SparsePoints&) = default;
};

enum class DiagnosticKind { missing_view, merged_views, sparse_view, radial_ignored, short_track };

inline std::string_view to_string(DiagnosticKind k) {
    switch (k) {
    case DiagnosticKind::missing_view: return "missing-view";
    case DiagnosticKind::merged_views: return "merged-views";
    case DiagnosticKind::sparse_view: return "sparse-view";
    case DiagnosticKind::radial_ignored: return "radial-ignored";
    case DiagnosticKind::short_track: return "short-track";
    }
    return "?";
}

struct Diagnostic {
    DiagnosticKind kind;
    std::string message;
    std::vector<std::string> images;
};

struct SceneBundle {
    std::map<int, CameraIntrinsics> intrinsics;
    std::vector<CameraPose> poses;
    SparsePoints points;
    std::map<std::string, Image> images;
    std::vector<Diagnostic> warnings;
    /// Image names reserved for evaluation (from an optional `holdout.txt`).
    std::set<std::string> held_out;

    const CameraIntrinsics& camera_of(const CameraPose& p) const { return intrinsics.at(p.camera_id); }

    std::vector<std::size_t> training_views() const {
        std::vector<std::size_t> v;
        for (std::size_t i = 0; i < poses.size(); ++i)
            if (!held_out.count(poses[i].image_name)) v.push_back(i);
        return v;
    }
    std::vector<std::size_t> held_out_views() const {
        std::vector<std::size_t> v;
        for (std::size_t i = 0; i < poses.size(); ++i)
            if (held_out.count(poses[i].image_name)) v.push_back(i);
        return v;
    }
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

struct LineCursor {
    std::string file;
    std::size_t line = 0;

    template <class T>
    T number(std::string_view tok, const char* field) const {
        T v{};
        const char* end = tok.data() + tok.size();
        auto [ptr, ec] = std::from_chars(tok.data(), end, v);
        if (ec != std::errc() || ptr != end)
            throw ParseError(file, line, std::string("malformed numeric field '") + field + "': '" + std::string(tok) + "'");
        if constexpr (std::is_floating_point_v<T>) {
            if (!std::isfinite(v)) throw ParseError(file, line, std::string("non-finite value in field '") + field + "'");
        }
        return v;
    }
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), "missing or unreadable file");
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// Splits text into lines, keeping empty ones (images.txt uses them for empty observation lists).
inline std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size()) out.push_back(text.substr(start));
            break;
        }
        out.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

inline bool is_comment(std::string_view line) {
    for (char c : line) {
        if (c == ' ' || c == '\t' || c == '\r') continue;
        return c == '#';
    }
    return false;
}

inline bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// Parses `cameras.txt` content.
inline std::map<int, CameraIntrinsics> parse_cameras_txt(std::string_view text, const std::string& file,
                                                         std::vector<Diagnostic>* warnings = nullptr) {
    std::map<int, CameraIntrinsics> cams;
    detail::LineCursor cur{file};
    for (std::string_view line : detail::lines_of(text)) {
        ++cur.line;
        if (detail::is_comment(line) || detail::is_blank(line)) continue;
        auto tok = detail::split_ws(line);
        if (tok.size() < 4) throw ParseError(file, cur.line, "expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS...");
        CameraIntrinsics c;
        c.camera_id = cur.number<int>(tok[0], "CAMERA_ID");
        c.width = cur.number<int>(tok[2], "WIDTH");
        c.height = cur.number<int>(tok[3], "HEIGHT");
        std::vector<double> params;
        for (std::size_t i = 4; i < tok.size(); ++i) params.push_back(cur.number<double>(tok[i], "PARAMS"));
        auto need = [&](std::size_t n) {
            if (params.size() != n)
                throw ParseError(file, cur.line, "camera model " + std::string(tok[1]) + " expects " + std::to_string(n) +
                                                     " parameters, got " + std::to_string(params.size()));
        };
        if (tok[1] == "SIMPLE_PINHOLE") {
            need(3);
            c.model = CameraModel::simple_pinhole;
            c.fx = c.fy = params[0];
            c.cx = params[1];
            c.cy = params[2];
        } else if (tok[1] == "PINHOLE") {
            need(4);
            c.model = CameraModel::pinhole;
            c.fx = params[0];
            c.fy = params[1];
            c.cx = params[2];
            c.cy = params[3];
        } else if (tok[1] == "SIMPLE_RADIAL") {
            need(4);
            c.model = CameraModel::simple_radial;
            c.fx = c.fy = params[0];
            c.cx = params[1];
            c.cy = params[2];
            c.radial_k = params[3];
            if (warnings && c.radial_k != 0.0)
                warnings->push_back({DiagnosticKind::radial_ignored,
                                     "camera " + std::to_string(c.camera_id) + ": SIMPLE_RADIAL k=" +
                                         detail::fmt_double(c.radial_k) + " ignored (ideal pinhole assumed)",
                                     {}});
        } else {
            throw ParseError(file, cur.line, "unknown camera model: " + std::string(tok[1]));
        }
        if (c.width <= 0 || c.height <= 0) throw ParseError(file, cur.line, "camera dimensions must be positive");
        if (!(c.fx > 0) || !(c.fy > 0)) throw ParseError(file, cur.line, "focal lengths must be positive");
        if (c.cx < 0 || c.cx > c.width || c.cy < 0 || c.cy > c.height)
            throw ParseError(file, cur.line, "principal point outside the image");
        if (cams.count(c.camera_id)) throw ParseError(file, cur.line, "duplicate CAMERA_ID " + std::to_string(c.camera_id));
        cams[c.camera_id] = c;
    }
    return cams;
}

/// Parses `images.txt` content: pose line followed by a (possibly empty) observation line.
inline std::vector<CameraPose> parse_images_txt(std::string_view text, const std::string& file) {
    std::vector<CameraPose> poses;
    detail::LineCursor cur{file};
    bool expect_obs = false;
    for (std::string_view line : detail::lines_of(text)) {
        ++cur.line;
        if (detail::is_comment(line)) continue;
        if (!expect_obs) {
            if (detail::is_blank(line)) continue;
            auto tok = detail::split_ws(line);
            if (tok.size() != 10)
                throw ParseError(file, cur.line, "expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME");
            CameraPose p;
            p.image_id = cur.number<int>(tok[0], "IMAGE_ID");
            for (int k = 0; k < 4; ++k) p.q[k] = cur.number<double>(tok[1 + k], "Q");
            for (int k = 0; k < 3; ++k) p.t[k] = cur.number<double>(tok[5 + k], "T");
            p.camera_id = cur.number<int>(tok[8], "CAMERA_ID");
            p.image_name = std::string(tok[9]);
            const double n = p.q.norm();
            if (!(n > 0.0)) throw ParseError(file, cur.line, "zero-norm quaternion");
            // Leave already-unit quaternions untouched so parse/serialize/parse is a fixed point.
            if (std::abs(n - 1.0) > 1e-12) p.q /= n;
            poses.push_back(std::move(p));
            expect_obs = true;
        } else {
            auto tok = detail::split_ws(line);
            if (tok.size() % 3 != 0) throw ParseError(file, cur.line, "observation line must hold X Y POINT3D_ID triples");
            for (std::size_t i = 0; i < tok.size(); i += 3) {
                cur.number<double>(tok[i], "X");
                cur.number<double>(tok[i + 1], "Y");
                const auto id = cur.number<std::int64_t>(tok[i + 2], "POINT3D_ID");
                if (id != -1) poses.back().observed_point_ids.push_back(id);
            }
            expect_obs = false;
        }
    }
    return poses;
}

inline SparsePoints parse_points3d_txt(std::string_view text, const std::string& file,
                                       std::vector<Diagnostic>* warnings = nullptr) {
    SparsePoints pts;
    detail::LineCursor cur{file};
    std::size_t short_tracks = 0;
    for (std::string_view line : detail::lines_of(text)) {
        ++cur.line;
        if (detail::is_comment(line) || detail::is_blank(line)) continue;
        auto tok = detail::split_ws(line);
        if (tok.size() < 8) throw ParseError(file, cur.line, "expected POINT3D_ID X Y Z R G B ERROR TRACK...");
        if ((tok.size() - 8) % 2 != 0) throw ParseError(file, cur.line, "track must hold IMAGE_ID POINT2D_IDX pairs");
        const auto id = cur.number<std::int64_t>(tok[0], "POINT3D_ID");
        Vec3 p(cur.number<double>(tok[1], "X"), cur.number<double>(tok[2], "Y"), cur.number<double>(tok[3], "Z"));
        std::array<std::uint8_t, 3> rgb{};
        for (int c = 0; c < 3; ++c) {
            const int v = cur.number<int>(tok[4 + c], "RGB");
            if (v < 0 || v > 255) throw ParseError(file, cur.line, "color channel out of [0,255]");
            rgb[c] = static_cast<std::uint8_t>(v);
        }
        const double err = cur.number<double>(tok[7], "ERROR");
        for (std::size_t i = 8; i < tok.size(); ++i) cur.number<std::int64_t>(tok[i], "TRACK");
        const int track = static_cast<int>((tok.size() - 8) / 2);
        if (track < 2) ++short_tracks;
        pts.push_back(id, p, rgb, track, err);
    }
    if (warnings && short_tracks > 0)
        warnings->push_back({DiagnosticKind::short_track, std::to_string(short_tracks) + " sparse points have track length < 2", {}});
    return pts;
}

/// Reads a COLMAP text export: cameras.txt, images.txt, points3D.txt and the `images/` directory.
/// An optional `holdout.txt` (one image name per line) marks evaluation views.
inline SceneBundle parse_colmap_dir(const std::filesystem::path& dir, bool load_images = true) {
    namespace fs = std::filesystem;
    SceneBundle b;
    for (const char* name : {"cameras.txt", "images.txt", "points3D.txt"})
        if (!fs::is_regular_file(dir / name)) throw ParseError((dir / name).string(), std::string("missing file: ") + name);

    b.intrinsics = parse_cameras_txt(detail::slurp(dir / "cameras.txt"), (dir / "cameras.txt").string(), &b.warnings);
    b.poses = parse_images_txt(detail::slurp(dir / "images.txt"), (dir / "images.txt").string());
    b.points = parse_points3d_txt(detail::slurp(dir / "points3D.txt"), (dir / "points3D.txt").string(), &b.warnings);

    const fs::path holdout = dir / "holdout.txt";
    if (fs::is_regular_file(holdout)) {
        const std::string text = detail::slurp(holdout);
        for (std::string_view line : detail::lines_of(text)) {
            if (detail::is_comment(line) || detail::is_blank(line)) continue;
            for (auto tok : detail::split_ws(line)) b.held_out.insert(std::string(tok));
        }
    }

    for (const CameraPose& p : b.poses) {
        if (!b.intrinsics.count(p.camera_id))
            throw ParseError((dir / "images.txt").string(),
                             "image " + p.image_name + " references unknown CAMERA_ID " + std::to_string(p.camera_id));
        if (!load_images) continue;
        const fs::path img_path = dir / "images" / p.image_name;
        if (!fs::is_regular_file(img_path)) throw ParseError(img_path.string(), "referenced image file is missing");
        Image img = read_image(img_path);
        const CameraIntrinsics& cam = b.intrinsics.at(p.camera_id);
        if (img.width != cam.width || img.height != cam.height)
            throw ParseError(img_path.string(), "image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                                                    " but camera " + std::to_string(cam.camera_id) + " is " +
                                                    std::to_string(cam.width) + "x" + std::to_string(cam.height));
        b.images.emplace(p.image_name, std::move(img));
    }
    return b;
}

/// Writes cameras.txt / images.txt / points3D.txt (and holdout.txt when non-empty).
/// Tracks are regenerated from the per-image observation lists, so an export whose
/// tracks reference images absent from images.txt loses those entries.
inline void write_colmap_text(const SceneBundle& b, const std::filesystem::path& dir) {
    using detail::fmt_double;
    std::ostringstream cams;
    cams << "# Camera list with one line of data per camera:\n#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
    for (const auto& [id, c] : b.intrinsics) {
        cams << id << ' ' << to_string(c.model) << ' ' << c.width << ' ' << c.height << ' ';
        switch (c.model) {
        case CameraModel::simple_pinhole: cams << fmt_double(c.fx) << ' ' << fmt_double(c.cx) << ' ' << fmt_double(c.cy); break;
        case CameraModel::pinhole:
            cams << fmt_double(c.fx) << ' ' << fmt_double(c.fy) << ' ' << fmt_double(c.cx) << ' ' << fmt_double(c.cy);
            break;
        case CameraModel::simple_radial:
            cams << fmt_double(c.fx) << ' ' << fmt_double(c.cx) << ' ' << fmt_double(c.cy) << ' ' << fmt_double(c.radial_k);
            break;
        }
        cams << '\n';
    }

    std::map<std::int64_t, std::size_t> point_index;
    for (std::size_t i = 0; i < b.points.size(); ++i) point_index[b.points.ids[i]] = i;
    std::map<std::int64_t, std::vector<std::pair<int, std::size_t>>> tracks;

    std::ostringstream imgs;
    imgs << "# Image list with two lines of data per image:\n"
            "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
            "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
    for (const CameraPose& p : b.poses) {
        imgs << p.image_id;
        for (int k = 0; k < 4; ++k) imgs << ' ' << fmt_double(p.q[k]);
        for (int k = 0; k < 3; ++k) imgs << ' ' << fmt_double(p.t[k]);
        imgs << ' ' << p.camera_id << ' ' << p.image_name << '\n';
        const auto cam_it = b.intrinsics.find(p.camera_id);
        for (std::size_t j = 0; j < p.observed_point_ids.size(); ++j) {
            const std::int64_t id = p.observed_point_ids[j];
            double u = 0, v = 0;
            if (auto it = point_index.find(id); it != point_index.end() && cam_it != b.intrinsics.end()) {
                const Vec3 x = p.to_camera(b.points.positions[it->second]);
                if (x.z() > 0) {
                    u = cam_it->second.fx * x.x() / x.z() + cam_it->second.cx;
                    v = cam_it->second.fy * x.y() / x.z() + cam_it->second.cy;
                }
                tracks[id].push_back({p.image_id, j});
            }
            imgs << (j ? " " : "") << fmt_double(u) << ' ' << fmt_double(v) << ' ' << id;
        }
        imgs << '\n';
    }

    std::ostringstream pts;
    pts << "# 3D point list with one line of data per point:\n"
           "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
    for (std::size_t i = 0; i < b.points.size(); ++i) {
        pts << b.points.ids[i];
        for (int k = 0; k < 3; ++k) pts << ' ' << fmt_double(b.points.positions[i][k]);
        for (int k = 0; k < 3; ++k) pts << ' ' << int(b.points.colors[i][k]);
        pts << ' ' << fmt_double(b.points.errors[i]);
        for (auto [img, idx] : tracks[b.points.ids[i]]) pts << ' ' << img << ' ' << idx;
        pts << '\n';
    }

    write_text_atomically(dir / "cameras.txt", cams.str());
    write_text_atomically(dir / "images.txt", imgs.str());
    write_text_atomically(dir / "points3D.txt", pts.str());
    if (!b.held_out.empty()) {
        std::string h;
        for (const auto& n : b.held_out) h += n + "\n";
        write_text_atomically(dir / "holdout.txt", h);
    }
}

/// Registration shortfalls: missing views, near-coincident camera centers, views with few points.
/// Held-out views are excluded from every check.
inline std::vector<Diagnostic> diagnose_registration(const SceneBundle& b, int expected_cameras) {
    if (expected_cameras < 1) throw InvalidParameter("expected_cameras must be >= 1");
    std::vector<Diagnostic> out;
    const auto views = b.training_views();

    std::set<std::string> names;
    for (auto i : views) names.insert(b.poses[i].image_name);
    if (static_cast<int>(names.size()) < expected_cameras) {
        std::string msg = "only " + std::to_string(names.size()) + " of " + std::to_string(expected_cameras) +
                          " cameras registered:";
        for (const auto& n : names) msg += " " + n;
        out.push_back({DiagnosticKind::missing_view, msg, {names.begin(), names.end()}});
    }

    std::vector<Vec3> centers;
    for (auto i : views) centers.push_back(b.poses[i].center());
    double diameter = 0.0;
    for (std::size_t i = 0; i < centers.size(); ++i)
        for (std::size_t j = i + 1; j < centers.size(); ++j) diameter = std::max(diameter, (centers[i] - centers[j]).norm());
    for (std::size_t i = 0; i < centers.size(); ++i)
        for (std::size_t j = i + 1; j < centers.size(); ++j) {
            const double d = (centers[i] - centers[j]).norm();
            if (d <= 0.01 * diameter) {
                const auto& a = b.poses[views[i]].image_name;
                const auto& c = b.poses[views[j]].image_name;
                out.push_back({DiagnosticKind::merged_views,
                               "possible merged/duplicate views: " + a + " and " + c + " centers " + detail::fmt_double(d) +
                                   " apart (rig diameter " + detail::fmt_double(diameter) + ")",
                               {a, c}});
            }
        }

    for (auto i : views) {
        const auto& p = b.poses[i];
        if (p.observed_point_ids.size() < 10)
            out.push_back({DiagnosticKind::sparse_view,
                           "view " + p.image_name + " observes only " + std::to_string(p.observed_point_ids.size()) +
                               " sparse points",
                           {p.image_name}});
    }
    return out;
}

} // namespace vsplat
