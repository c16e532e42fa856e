#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "atomic_file.hpp"
#include "colmap.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "floater_pruner.hpp"
#include "image.hpp"
#include "parallel.hpp"
#include "ply.hpp"
#include "rasterizer.hpp"
#include "splat_model.hpp"
#include "synth_bench.hpp"
#include "trainer.hpp"

namespace vsplat::cli {

namespace fs = std::filesystem;

/// A named, string-convertible setting bound to some configuration member.
struct Setting {
    std::string name;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
    std::string help;
};

template <class T>
void bind_fields(std::vector<Setting>& out, T& obj, const std::vector<ConfigField<T>>& fields) {
    for (const auto& f : fields)
        out.push_back({f.name, [&obj, &f] { return get_field(obj, f); },
                       [&obj, &f](const std::string& v) { set_field(obj, f, v); }, f.help});
}

inline std::string dump_settings(const std::vector<Setting>& s) {
    std::string out;
    for (const auto& x : s) out += x.name + " = " + x.get() + "\n";
    return out;
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw Error("cannot create directory " + p.string() + ": " + ec.message());
}

struct PruneFlags {
    bool no_bounds = false, no_support = false, no_opacity = false, no_knn = false;
    std::string bounds = "auto"; ///< "auto" or xmin,ymin,zmin,xmax,ymax,zmax
};

inline Aabb parse_box(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) v.push_back(detail::parse_number<double>(tok, "bounds"));
    if (v.size() != 6) throw UsageError("--bounds expects 'auto' or six comma-separated numbers");
    Aabb b;
    b.min = Vec3(v[0], v[1], v[2]);
    b.max = Vec3(v[3], v[4], v[5]);
    if (!(b.min.array() <= b.max.array()).all()) throw UsageError("--bounds: min exceeds max");
    return b;
}

/// Pose from "fx,fy,cx,cy,width,height,qw,qx,qy,qz,tx,ty,tz".
inline std::pair<CameraIntrinsics, CameraPose> parse_camera(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) v.push_back(detail::parse_number<double>(tok, "camera"));
    if (v.size() != 13) throw UsageError("--camera expects fx,fy,cx,cy,width,height,qw,qx,qy,qz,tx,ty,tz");
    CameraIntrinsics c;
    c.camera_id = 1;
    c.fx = v[0];
    c.fy = v[1];
    c.cx = v[2];
    c.cy = v[3];
    c.width = static_cast<int>(v[4]);
    c.height = static_cast<int>(v[5]);
    if (c.width < 1 || c.height < 1 || c.width != v[4] || c.height != v[5] || !(c.fx > 0 && c.fy > 0))
        throw UsageError("--camera: image size must be positive integers and focal lengths positive");
    CameraPose p;
    p.q = Quat(v[6], v[7], v[8], v[9]);
    if (p.q.norm() == 0.0) throw UsageError("--camera: zero quaternion");
    p.q = normalized_quat(p.q);
    p.t = Vec3(v[10], v[11], v[12]);
    return {c, p};
}

inline std::string scene_summary(const SceneBundle& b, const SceneExtent& e, const std::vector<Diagnostic>& diags) {
    std::ostringstream s;
    s << "registered views: " << b.training_views().size() << "\n";
    s << "held-out views: " << b.held_out_views().size() << "\n";
    s << "sparse points: " << b.points.size() << "\n";
    s << "extent: " << detail::format_real(e.radius) << "\n";
    s << "warnings: " << diags.size() << "\n";
    for (const auto& d : diags) s << "warning[" << to_string(d.kind) << "]: " << d.message << "\n";
    return s.str();
}

inline SplatCloud initial_cloud(const SceneBundle& b) {
    InitOptions io;
    io.extent = camera_extent(b).radius;
    return init_from_sparse(b.points, io);
}

inline std::string checkpoint_metadata(int iteration, const std::string& config_text, double extent, std::uint64_t seed) {
    return "iteration = " + std::to_string(iteration) + "\nconfig_hash = " + hex64(fnv1a(config_text)) +
           "\nextent = " + detail::format_real(extent) + "\nseed = " + std::to_string(seed) + "\n";
}

inline void write_checkpoint(const SplatCloud& c, const fs::path& ply, int iteration, const std::string& config_text,
                             double extent, std::uint64_t seed) {
    write_splat_ply(c, ply);
    fs::path meta = ply;
    meta.replace_extension(".meta.txt");
    write_text_atomically(meta, checkpoint_metadata(iteration, config_text, extent, seed));
}

inline std::string cloud_info(const SplatCloud& c) {
    std::ostringstream s;
    s << "gaussians: " << c.size() << "\n";
    s << "sh_degree: " << c.active_sh_degree << "\n";
    if (c.size() > 0) {
        Vec3 lo = c.position(0), hi = c.position(0);
        double omin = 1, omax = 0, osum = 0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            lo = lo.cwiseMin(c.position(i));
            hi = hi.cwiseMax(c.position(i));
            const double o = c.opacity(i);
            omin = std::min(omin, o);
            omax = std::max(omax, o);
            osum += o;
        }
        s << "bounds_min: " << detail::format_real(lo.x()) << "," << detail::format_real(lo.y()) << ","
          << detail::format_real(lo.z()) << "\n";
        s << "bounds_max: " << detail::format_real(hi.x()) << "," << detail::format_real(hi.y()) << ","
          << detail::format_real(hi.z()) << "\n";
        s << "opacity_min: " << detail::format_real(omin) << "\nopacity_max: " << detail::format_real(omax)
          << "\nopacity_mean: " << detail::format_real(osum / c.size()) << "\n";
    }
    return s.str();
}

/// Ring of `n` inward-looking poses around the cloud centroid.
inline std::vector<CameraPose> orbit_poses(const SplatCloud& c, int n, double radius, double elevation) {
    Vec3 centroid = Vec3::Zero();
    double bound = 0;
    for (std::size_t i = 0; i < c.size(); ++i) centroid += c.position(i);
    if (c.size() > 0) centroid /= static_cast<double>(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) bound = std::max(bound, (c.position(i) - centroid).norm());
    if (!(bound > 0)) bound = 1.0;
    if (!(radius > 0)) radius = 2.5 * bound;
    std::vector<CameraPose> poses;
    for (int i = 0; i < n; ++i) {
        const double az = 2.0 * std::numbers::pi * i / n;
        const Vec3 eye = centroid + Vec3(radius * std::cos(az), radius * std::sin(az), elevation * radius);
        CameraPose p = look_at_pose(eye, centroid);
        p.image_id = i + 1;
        p.camera_id = 1;
        poses.push_back(p);
    }
    return poses;
}

inline std::string indexed_name(const std::string& stem, std::size_t i) {
    std::string n = std::to_string(i);
    if (n.size() < 3) n.insert(0, 3 - n.size(), '0');
    return stem + n + ".ppm";
}

/// Entry point shared by the executable and the tests. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Gaussian splatting reconstruction toolkit for sparse camera rigs", "vsplat"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    int threads = 0;
    bool verbose = false, print_config = false;
    std::string config_file;
    auto* seed_opt = app.add_option("--seed", seed, "random seed");
    app.add_option("--threads", threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    app.add_flag("--verbose,-v", verbose, "progress output on stderr");
    app.add_flag("--print-config", print_config, "print the effective configuration and exit");
    app.add_option("--config", config_file, "file of 'key = value' lines applied before command-line flags");

    // Per-subcommand key = value settings.
    TrainConfig train_cfg;
    VortexSpec vortex;
    RigSpec rig;
    DatasetOptions data;
    PruneOptions prune_opt;
    std::vector<Setting> train_settings, synth_settings, prune_settings;
    bind_fields(train_settings, train_cfg, train_config_fields());
    bind_fields(synth_settings, vortex, vortex_spec_fields());
    bind_fields(synth_settings, rig, rig_spec_fields());
    bind_fields(synth_settings, data, dataset_option_fields());
    prune_settings.push_back({"bounds_percentile", [&] { return detail::format_real(prune_opt.bounds_percentile); },
                              [&](const std::string& v) { prune_opt.bounds_percentile = detail::parse_number<double>(v, "bounds_percentile"); }, ""});
    prune_settings.push_back({"bounds_margin", [&] { return detail::format_real(prune_opt.bounds_margin); },
                              [&](const std::string& v) { prune_opt.bounds_margin = detail::parse_number<double>(v, "bounds_margin"); }, ""});
    prune_settings.push_back({"support_threshold", [&] { return detail::format_real(prune_opt.support_threshold); },
                              [&](const std::string& v) { prune_opt.support_threshold = detail::parse_number<double>(v, "support_threshold"); }, ""});
    prune_settings.push_back({"opacity_threshold", [&] { return detail::format_real(prune_opt.opacity_threshold); },
                              [&](const std::string& v) { prune_opt.opacity_threshold = detail::parse_number<double>(v, "opacity_threshold"); }, ""});
    prune_settings.push_back({"knn_k", [&] { return std::to_string(prune_opt.knn_k); },
                              [&](const std::string& v) { prune_opt.knn_k = detail::parse_number<int>(v, "knn_k"); }, ""});
    prune_settings.push_back({"knn_m", [&] { return detail::format_real(prune_opt.knn_m); },
                              [&](const std::string& v) { prune_opt.knn_m = detail::parse_number<double>(v, "knn_m"); }, ""});

    std::map<std::string, std::string> flag_values;
    auto add_settings = [&](CLI::App* sub, const std::vector<Setting>& settings) {
        for (const auto& s : settings)
            sub->add_option("--" + s.name, flag_values[s.name], s.help.empty() ? "default " + s.get() : s.help)
                ->default_str(s.get());
    };

    auto* ingest_cmd = app.add_subcommand("ingest", "parse a COLMAP text export, diagnose registration, write the initial cloud");
    std::string in_dir, out_path, ply_path, dataset_dir, report_path;
    int expected = 8;
    ingest_cmd->add_option("colmap_dir", in_dir, "directory with cameras.txt, images.txt, points3D.txt, images/")->required();
    ingest_cmd->add_option("--expected-cameras", expected, "number of cameras in the rig")->check(CLI::PositiveNumber);
    ingest_cmd->add_option("-o,--out", out_path, "output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "optimize a splat cloud on a dataset");
    std::string init_ply;
    train_cmd->add_option("dataset", in_dir, "dataset directory")->required();
    train_cmd->add_option("-o,--out", out_path, "output directory")->required();
    train_cmd->add_option("--init", init_ply, "initial cloud (default: from the dataset's sparse points)");
    add_settings(train_cmd, train_settings);

    auto* prune_cmd = app.add_subcommand("prune", "remove floaters from a splat cloud");
    PruneFlags pf;
    prune_cmd->add_option("ply", ply_path, "input splat PLY")->required();
    prune_cmd->add_option("-o,--out", out_path, "output splat PLY")->required();
    prune_cmd->add_option("--dataset", dataset_dir, "dataset directory (needed by support and automatic bounds)");
    prune_cmd->add_option("--bounds", pf.bounds, "'auto' or xmin,ymin,zmin,xmax,ymax,zmax")->default_str("auto");
    prune_cmd->add_flag("--no-bounds", pf.no_bounds, "skip the bounding-box rule");
    prune_cmd->add_flag("--no-support", pf.no_support, "skip the support rule");
    prune_cmd->add_flag("--no-opacity", pf.no_opacity, "skip the opacity rule");
    prune_cmd->add_flag("--no-knn", pf.no_knn, "skip the k-nearest-neighbour rule");
    prune_cmd->add_option("--report", report_path, "prune report path (default: <out>.report.txt)");
    add_settings(prune_cmd, prune_settings);

    auto* render_cmd = app.add_subcommand("render", "render images of a splat cloud");
    std::vector<std::string> cameras;
    int orbit = 0;
    double orbit_radius = 0, orbit_elevation = 0.3, focal = 140;
    int width = 128, height = 128;
    std::string views = "all";
    Vec3 background = Vec3::Zero();
    std::string background_str = "0,0,0";
    render_cmd->add_option("ply", ply_path, "splat PLY")->required();
    render_cmd->add_option("-o,--out", out_path, "output directory")->required();
    render_cmd->add_option("--camera", cameras, "fx,fy,cx,cy,width,height,qw,qx,qy,qz,tx,ty,tz (repeatable)");
    render_cmd->add_option("--orbit", orbit, "number of orbit poses around the cloud centroid")->check(CLI::PositiveNumber);
    render_cmd->add_option("--orbit-radius", orbit_radius, "orbit radius (0 = 2.5x cloud radius)");
    render_cmd->add_option("--orbit-elevation", orbit_elevation, "camera height as a fraction of the radius");
    render_cmd->add_option("--width", width, "orbit image width")->check(CLI::PositiveNumber);
    render_cmd->add_option("--height", height, "orbit image height")->check(CLI::PositiveNumber);
    render_cmd->add_option("--focal", focal, "orbit focal length in pixels")->check(CLI::PositiveNumber);
    render_cmd->add_option("--dataset", dataset_dir, "render the poses of a dataset");
    render_cmd->add_option("--views", views, "with --dataset: all, train or heldout")->check(CLI::IsMember({"all", "train", "heldout"}));
    render_cmd->add_option("--background", background_str, "r,g,b");

    auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic vortex dataset");
    synth_cmd->add_option("-o,--out", out_path, "output directory")->required();
    add_settings(synth_cmd, synth_settings);

    auto* eval_cmd = app.add_subcommand("eval", "PSNR / SSIM of a cloud on dataset views");
    std::vector<int> eval_views;
    eval_cmd->add_option("ply", ply_path, "splat PLY")->required();
    eval_cmd->add_option("dataset", dataset_dir, "dataset directory")->required();
    eval_cmd->add_option("--view", eval_views, "pose indices to evaluate (default: held-out views)");
    eval_cmd->add_option("-o,--out", out_path, "metrics output file");
    eval_cmd->add_option("--background", background_str, "r,g,b");

    auto* info_cmd = app.add_subcommand("info", "print splat PLY statistics");
    info_cmd->add_option("ply", ply_path, "splat PLY")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        set_thread_count(threads);
        auto log = [&](const std::string& s) {
            if (verbose) err << s << "\n";
        };

        const std::vector<Setting>* active = nullptr;
        if (train_cmd->parsed()) active = &train_settings;
        if (synth_cmd->parsed()) active = &synth_settings;
        if (prune_cmd->parsed()) active = &prune_settings;

        if (!config_file.empty()) {
            std::ifstream f(config_file, std::ios::binary);
            if (!f) throw UsageError("cannot read config file " + config_file);
            std::stringstream ss;
            ss << f.rdbuf();
            for (const auto& [key, value] : parse_config_text(ss.str(), config_file)) {
                if (key == "seed" && !active) continue;
                const Setting* hit = nullptr;
                if (active)
                    for (const auto& s : *active)
                        if (s.name == key) hit = &s;
                if (!hit) throw UsageError(config_file + ": unknown key '" + key + "'");
                hit->set(value);
            }
        }
        if (active) {
            for (const auto& s : *active) {
                auto* sub = train_cmd->parsed() ? train_cmd : synth_cmd->parsed() ? synth_cmd : prune_cmd;
                if (sub->get_option("--" + s.name)->count() > 0) s.set(flag_values[s.name]);
            }
        }
        if (seed_opt->count() > 0) {
            train_cfg.seed = seed;
            vortex.seed = seed;
            data.noise_seed = seed + 1;
        }
        {
            Setting bg{"background", {}, [&](const std::string& v) {
                           ConfigField<RenderSettings> f{"background", &RenderSettings::background, ""};
                           RenderSettings tmp;
                           set_field(tmp, f, v);
                           background = tmp.background;
                       }, ""};
            bg.set(background_str);
        }

        if (print_config) {
            if (active) out << dump_settings(*active);
            else out << "seed = " << seed << "\n";
            return 0;
        }

        if (ingest_cmd->parsed()) {
            SceneBundle b = parse_colmap_dir(in_dir);
            const auto diags = diagnose_registration(b, expected);
            std::vector<Diagnostic> all = b.warnings;
            all.insert(all.end(), diags.begin(), diags.end());
            const SceneExtent e = camera_extent(b);
            const SplatCloud init = initial_cloud(b);
            ensure_dir(out_path);
            write_splat_ply(init, fs::path(out_path) / "init.ply");
            const std::string summary = scene_summary(b, e, all);
            write_text_atomically(fs::path(out_path) / "summary.txt", summary);
            out << summary;
            return 0;
        }

        if (train_cmd->parsed()) {
            validate(train_cfg);
            SceneBundle b = parse_colmap_dir(in_dir);
            SplatCloud init = init_ply.empty() ? initial_cloud(b) : read_splat_ply(init_ply);
            if (!init_ply.empty()) init.active_sh_degree = 0;
            ensure_dir(out_path);
            const fs::path dir(out_path);
            const std::string config_text = dump_settings(train_settings);
            write_text_atomically(dir / "config.txt", config_text);
            const double extent = camera_extent(b).radius;
            std::string log_text;
            TrainHooks hooks;
            hooks.on_step = [&](const TrainLogRecord& r) {
                const std::string line = format_log_record(r);
                log_text += line + "\n";
                if (verbose && (r.iteration % 100 == 0 || r.clones || r.splits || r.prunes)) err << line << "\n";
            };
            hooks.on_checkpoint = [&](int it, const SplatCloud& c) {
                write_checkpoint(c, dir / ("checkpoint_" + std::to_string(it) + ".ply"), it, config_text, extent,
                                 train_cfg.seed);
                write_text_atomically(dir / "train.log", log_text);
            };
            const TrainResult res = train(b, init, train_cfg, hooks);
            write_checkpoint(res.cloud, dir / "checkpoint.ply", train_cfg.iterations, config_text, extent, train_cfg.seed);
            write_text_atomically(dir / "train.log", log_text);
            if (!b.held_out.empty()) {
                RenderSettings rs = oracle_equivalent_settings(train_cfg.background);
                const MetricsTable t = evaluate_held_out(res.cloud, b, rs);
                write_text_atomically(dir / "metrics.txt", format_metrics(t));
                out << format_metrics(t);
            }
            out << "gaussians: " << res.cloud.size() << "\n";
            return 0;
        }

        if (prune_cmd->parsed()) {
            prune_opt.bounds = !pf.no_bounds;
            prune_opt.support = !pf.no_support;
            prune_opt.opacity = !pf.no_opacity;
            prune_opt.knn = !pf.no_knn;
            prune_opt.bounds_auto = pf.bounds == "auto";
            if (!prune_opt.bounds_auto) prune_opt.box = parse_box(pf.bounds);
            if (dataset_dir.empty()) {
                if (prune_opt.support) throw UsageError("the support rule needs --dataset (or --no-support)");
                if (prune_opt.bounds && prune_opt.bounds_auto)
                    throw UsageError("--bounds auto needs --dataset (or an explicit box, or --no-bounds)");
            }
            SplatCloud c = read_splat_ply(ply_path);
            std::optional<SceneBundle> b;
            if (!dataset_dir.empty()) b = parse_colmap_dir(dataset_dir, prune_opt.support);
            const PruneReport rep = prune_chain(c, prune_opt, b ? &*b : nullptr);
            write_splat_ply(c, out_path);
            const fs::path rp = report_path.empty() ? fs::path(out_path + ".report.txt") : fs::path(report_path);
            write_text_atomically(rp, format_prune_report(rep));
            out << "before=" << rep.before << " after=" << rep.after << "\n";
            for (const auto& r : rep.rules) out << r.rule << ": " << r.removed.size() << "\n";
            return 0;
        }

        if (render_cmd->parsed()) {
            const int modes = (!cameras.empty()) + (orbit > 0) + (!dataset_dir.empty());
            if (modes != 1) throw UsageError("render needs exactly one of --camera, --orbit, --dataset");
            const SplatCloud c = read_splat_ply(ply_path);
            const RenderSettings rs = oracle_equivalent_settings(background);
            std::vector<std::pair<CameraIntrinsics, CameraPose>> jobs;
            std::vector<std::string> names;
            if (!cameras.empty()) {
                for (std::size_t i = 0; i < cameras.size(); ++i) {
                    jobs.push_back(parse_camera(cameras[i]));
                    names.push_back(indexed_name("render_", i));
                }
            } else if (orbit > 0) {
                CameraIntrinsics k;
                k.camera_id = 1;
                k.width = width;
                k.height = height;
                k.fx = k.fy = focal;
                k.cx = 0.5 * width;
                k.cy = 0.5 * height;
                const auto poses = orbit_poses(c, orbit, orbit_radius, orbit_elevation);
                for (std::size_t i = 0; i < poses.size(); ++i) {
                    jobs.push_back({k, poses[i]});
                    names.push_back(indexed_name("orbit_", i));
                }
            } else {
                const SceneBundle b = parse_colmap_dir(dataset_dir, false);
                std::vector<std::size_t> ids;
                if (views == "train") ids = b.training_views();
                else if (views == "heldout") ids = b.held_out_views();
                else
                    for (std::size_t i = 0; i < b.poses.size(); ++i) ids.push_back(i);
                for (auto i : ids) {
                    jobs.push_back({b.camera_of(b.poses[i]), b.poses[i]});
                    names.push_back(b.poses[i].image_name);
                }
            }
            ensure_dir(out_path);
            for (std::size_t i = 0; i < jobs.size(); ++i) {
                write_image(render(c, jobs[i].first, jobs[i].second, rs).color, fs::path(out_path) / names[i]);
                log("wrote " + names[i]);
            }
            out << "rendered " << jobs.size() << " images\n";
            return 0;
        }

        if (synth_cmd->parsed()) {
            const SceneBundle b = make_dataset(vortex, rig, data, out_path);
            write_splat_ply(generate_scene(vortex), fs::path(out_path) / "ground_truth.ply");
            out << "views: " << b.training_views().size() << " training, " << b.held_out_views().size()
                << " held-out\nsparse points: " << b.points.size() << "\n";
            return 0;
        }

        if (eval_cmd->parsed()) {
            const SplatCloud c = read_splat_ply(ply_path);
            const SceneBundle b = parse_colmap_dir(dataset_dir);
            std::vector<std::size_t> ids;
            if (eval_views.empty()) {
                ids = b.held_out_views();
            } else {
                for (int v : eval_views) {
                    if (v < 0 || static_cast<std::size_t>(v) >= b.poses.size())
                        throw UsageError("unknown view index " + std::to_string(v) + " (dataset has " +
                                         std::to_string(b.poses.size()) + " views)");
                    ids.push_back(static_cast<std::size_t>(v));
                }
            }
            const MetricsTable t = evaluate(c, b, ids, oracle_equivalent_settings(background));
            const std::string text = format_metrics(t);
            if (!out_path.empty()) write_text_atomically(out_path, text);
            out << text;
            return 0;
        }

        if (info_cmd->parsed()) {
            std::vector<std::string> warnings;
            const SplatCloud c = read_splat_ply(ply_path, &warnings);
            for (const auto& w : warnings) err << "warning: " << w << "\n";
            out << cloud_info(c);
            return 0;
        }
        return 2;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace vsplat::cli
