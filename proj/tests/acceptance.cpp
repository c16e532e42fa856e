// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance <work-dir>

#include <vsplat/cli.hpp>
#include <vsplat/vsplat.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace vsplat;
namespace fs = std::filesystem;

int g_failures = 0;

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

void run_criterion(int id, const char* name, double budget_s, const std::function<Verdict()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < budget_s;
    const bool pass = v.pass && in_time;
    if (!pass) ++g_failures;
    std::printf("%s criterion %d %s: %s; %.1f s (limit %.0f s)\n", pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), secs,
                budget_s);
    std::fflush(stdout);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SplatCloud random_cloud(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> d(2.0, 6.0);
    SplatCloud c;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = d(rng);
        const Vec3 mu(0.45 * z * u(rng), 0.45 * z * u(rng), z);
        const Vec3 ls(std::log(0.15 + 0.1 * u(rng)), std::log(0.15 + 0.1 * u(rng)), std::log(0.15 + 0.1 * u(rng)));
        const Quat q(u(rng), u(rng), u(rng), u(rng));
        std::array<double, 48> sh{};
        for (int ch = 0; ch < 3; ++ch) {
            sh[ch * 16] = 0.8 * u(rng);
            for (int k = 1; k < 16; ++k) sh[ch * 16 + k] = 0.15 * u(rng);
        }
        c.push_back(mu, ls, q, 1.5 * u(rng), sh);
    }
    c.active_sh_degree = 3;
    return c;
}

CameraView front_camera(int w, int h) {
    CameraView v;
    v.width = w;
    v.height = h;
    v.fx = v.fy = 0.9 * w;
    v.cx = 0.5 * w;
    v.cy = 0.5 * h;
    return v;
}

double held_out_psnr(const SplatCloud& c, const SceneBundle& b) { return evaluate_held_out(c, b).mean_psnr; }

// Shared between criteria: the default synthetic dataset and the cloud trained on it.
struct Shared {
    fs::path work;
    fs::path dataset;
    std::optional<SplatCloud> trained;
};

Verdict gradient_check() {
    const SplatCloud cloud = random_cloud(101, 10);
    const CameraView view = front_camera(32, 32);
    Image target(32, 32);
    std::mt19937_64 rng(102);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& x : target.data) x = u(rng);
    const ImageLoss loss = [&](const Image& img, Image* grad) { return photometric_loss(img, target, 0.2, grad).total; };
    const FdReport rep = finite_difference_check(cloud, view, loss);
    const bool ok = rep.checked > 0 && rep.match_fraction() >= 0.95 && rep.gross == 0;
    return {ok, fmt("%zu/%zu non-excluded coordinates match (%.2f%%), %zu gross, %zu excluded", rep.matched, rep.checked,
                    100.0 * rep.match_fraction(), rep.gross, rep.excluded)};
}

Verdict oracle_equivalence() {
    RenderSettings rs;
    rs.transmittance_cutoff = 0.0;
    double worst = 0.0, peak = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const SplatCloud cloud = random_cloud(1000 + seed, 10 + 2 * seed);
        const CameraView view = front_camera(48 + 4 * static_cast<int>(seed % 5), 40 + 3 * static_cast<int>(seed % 7));
        const Image a = render(cloud, view, rs).color;
        const Image b = oracle_render(cloud, view, rs);
        for (std::size_t i = 0; i < a.data.size(); ++i) {
            worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
            peak = std::max(peak, std::abs(b.data[i]));
        }
    }
    return {worst < 1e-6, fmt("max per-channel difference %.3g over 20 scenes (largest oracle value %.3g)", worst, peak)};
}

Verdict synthetic_reconstruction(Shared& sh) {
    const SceneBundle b = parse_colmap_dir(sh.dataset);
    const SplatCloud init = cli::initial_cloud(b);
    TrainConfig cfg;
    cfg.iterations = 2000;
    const double p0 = held_out_psnr(init, b);
    TrainResult res = train(b, init, cfg);
    const double p1 = held_out_psnr(res.cloud, b);
    write_splat_ply(res.cloud, sh.work / "trained_2000.ply");
    sh.trained = std::move(res.cloud);
    const bool ok = p1 >= 25.0 && p1 - p0 >= 8.0;
    return {ok, fmt("held-out PSNR %.2f dB at iteration 0, %.2f dB at 2000 (gain %.2f dB), %zu -> %zu Gaussians", p0, p1,
                    p1 - p0, init.size(), sh.trained->size())};
}

void add_floater(SplatCloud& c, const Vec3& p, double scale, double opacity, double gray) {
    std::array<double, 48> coeffs{};
    for (int ch = 0; ch < 3; ++ch) coeffs[ch * 16] = rgb_to_sh_dc(gray);
    const double ls = std::log(scale);
    c.push_back(p, Vec3(ls, ls, ls), Quat(1, 0, 0, 0), logit(opacity), coeffs);
}

Verdict floater_removal(const Shared& sh) {
    if (!sh.trained) return {false, "no converged cloud (criterion 3 did not produce one)"};
    const SceneBundle b = parse_colmap_dir(sh.dataset);
    const SplatCloud& converged = *sh.trained;
    const std::size_t n0 = converged.size();
    const PruneOptions defaults;
    const Aabb box = auto_bounds(b.points, defaults.bounds_percentile, defaults.bounds_margin);

    SplatCloud planted = converged;
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto lerp = [&](double a, double c) { return a + (c - a) * u(rng); };

    int outside = 0;
    while (outside < 50) {
        const Vec3 p(lerp(box.min.x() - 0.6, box.max.x() + 0.6), lerp(box.min.y() - 0.6, box.max.y() + 0.6),
                     lerp(box.min.z() - 0.6, box.max.z() + 0.6));
        if (box.contains(p)) continue;
        add_floater(planted, p, lerp(0.02, 0.05), lerp(0.4, 0.9), lerp(0.2, 0.9));
        ++outside;
    }

    // Behind a training camera and raised above the ring: directly behind, a point sits in the
    // opposite camera's view.
    const auto views = b.training_views();
    int behind = 0, attempts = 0;
    while (behind < 20 && attempts < 20000) {
        ++attempts;
        const CameraPose& pose = b.poses[views[static_cast<std::size_t>(attempts) % views.size()]];
        const Vec3 forward = pose.rotation().transpose() * Vec3(0, 0, 1);
        const Vec3 p = pose.center() - lerp(0.2, 0.6) * forward + Vec3(lerp(-0.3, 0.3), lerp(-0.3, 0.3), lerp(1.8, 2.8));
        const double scale = lerp(0.02, 0.05), opacity = lerp(0.4, 0.9), gray = lerp(0.2, 0.9);
        SplatCloud probe;
        add_floater(probe, p, scale, opacity, gray);
        if (pose.to_camera(p).z() >= 0.0 || compute_support(probe, b)[0] != 0.0) continue;
        add_floater(planted, p, scale, opacity, gray);
        ++behind;
    }
    if (behind < 20) return {false, fmt("could only place %d zero-support floaters", behind)};
    const auto support = compute_support(planted, b);
    for (std::size_t i = n0 + 50; i < planted.size(); ++i)
        if (support[i] != 0.0) return {false, "a behind-camera floater has nonzero support in the planted cloud"};

    const double p_clean = held_out_psnr(converged, b);
    const double p_before = held_out_psnr(planted, b);
    SplatCloud pruned = planted;
    const PruneReport rep = prune_chain(pruned, defaults, &b);
    const double p_after = held_out_psnr(pruned, b);

    std::size_t planted_removed = 0, real_removed = 0;
    std::string per_rule;
    for (const auto& rule : rep.rules) {
        std::size_t pl = 0;
        for (auto i : rule.removed) (i >= n0 ? pl : real_removed) += 1;
        planted_removed += pl;
        per_rule += fmt(" %s=%zu/%zu", rule.rule.c_str(), pl, rule.removed.size() - pl);
    }
    const std::size_t n_planted = planted.size() - n0;
    const bool ok = planted_removed * 100 >= 95 * n_planted && real_removed * 100 <= n0 && p_after >= p_before - 0.1 &&
                    p_after >= p_clean - 0.1;
    return {ok, fmt("removed %zu/%zu planted and %zu/%zu non-planted (%.2f%%) [planted/non-planted per rule:%s]; held-out "
                    "PSNR %.2f dB converged, %.2f dB with floaters, %.2f dB after pruning",
                    planted_removed, n_planted, real_removed, n0, 100.0 * static_cast<double>(real_removed) / n0,
                    per_rule.c_str(), p_clean, p_before, p_after)};
}

// Copies the export and drops the images.txt record (pose line + observation line) of `name`.
void drop_image_record(const fs::path& from, const fs::path& to, const std::string& name) {
    fs::remove_all(to);
    fs::copy(from, to, fs::copy_options::recursive);
    const std::string text = read_file(from / "images.txt");
    std::istringstream in(text);
    std::string line, out;
    bool skip_next = false;
    bool pose_line = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            out += line + "\n";
            continue;
        }
        if (pose_line) {
            std::istringstream ls(line);
            std::string tok, last;
            while (ls >> tok) last = tok;
            skip_next = last == name;
            if (!skip_next) out += line + "\n";
        } else if (!skip_next) {
            out += line + "\n";
        }
        pose_line = !pose_line;
    }
    std::ofstream(to / "images.txt", std::ios::binary | std::ios::trunc) << out;
}

Verdict missing_view(const Shared& sh) {
    const fs::path dir = sh.work / "synth_7of8";
    drop_image_record(sh.dataset, dir, ring_image_name(5));
    const SceneBundle b = parse_colmap_dir(dir);
    std::vector<Diagnostic> diags = b.warnings;
    for (auto& d : diagnose_registration(b, 8)) diags.push_back(d);
    int missing = 0;
    std::string message;
    for (const auto& d : diags)
        if (d.kind == DiagnosticKind::missing_view) {
            ++missing;
            message = d.message;
        }
    const bool diag_ok = missing == 1 && message.find("7 of 8") != std::string::npos;

    const SplatCloud init = cli::initial_cloud(b);
    TrainConfig cfg;
    cfg.iterations = 2000;
    const double p0 = held_out_psnr(init, b);
    const TrainResult res = train(b, init, cfg);
    const double p1 = held_out_psnr(res.cloud, b);
    const bool ok = diag_ok && b.training_views().size() == 7 && p1 >= 23.0 && p1 - p0 >= 6.0;
    return {ok, fmt("%d missing-view warning(s) \"%s\"; %zu training views; held-out PSNR %.2f -> %.2f dB (gain %.2f dB)",
                    missing, message.c_str(), b.training_views().size(), p0, p1, p1 - p0)};
}

Verdict format_integrity(const Shared& sh) {
    std::string problems;

    // COLMAP text: parse -> serialize -> parse.
    const SceneBundle a = parse_colmap_dir(sh.dataset, false);
    write_colmap_text(a, sh.work / "colmap_rt1");
    const SceneBundle b = parse_colmap_dir(sh.work / "colmap_rt1", false);
    write_colmap_text(b, sh.work / "colmap_rt2");
    const SceneBundle c = parse_colmap_dir(sh.work / "colmap_rt2", false);
    if (!(a.intrinsics == b.intrinsics && a.poses == b.poses && a.points == b.points)) problems += " colmap-structures";
    if (!(b.intrinsics == c.intrinsics && b.poses == c.poses && b.points == c.points)) problems += " colmap-reparse";
    for (const char* f : {"cameras.txt", "images.txt", "points3D.txt"})
        if (read_file(sh.work / "colmap_rt1" / f) != read_file(sh.work / "colmap_rt2" / f)) problems += std::string(" ") + f;

    // Splat PLY, 1e5 splats with float32-representable parameters.
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    auto f32 = [&] { return static_cast<double>(static_cast<float>(u(rng))); };
    SplatCloud cloud;
    for (int i = 0; i < 100000; ++i) {
        std::array<double, 48> coeffs{};
        for (double& x : coeffs) x = f32();
        cloud.push_back(Vec3(f32(), f32(), f32()), Vec3(f32(), f32(), f32()), Quat(f32(), f32(), f32(), f32()), f32(),
                        coeffs);
    }
    cloud.active_sh_degree = 3;
    const fs::path ply = sh.work / "roundtrip.ply";
    write_splat_ply(cloud, ply);
    const std::string bytes = read_file(ply);
    const SplatCloud back = read_splat_ply(ply);
    if (!(static_cast<const ParamArrays&>(back) == static_cast<const ParamArrays&>(cloud))) problems += " ply-values";
    if (encode_splat_ply(back) != bytes) problems += " ply-bytes";

    // PPM: every 8-bit level, written and read back.
    Image img(97, 61);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>((i * 37 + i / 7) % 256) / 255.0;
    const fs::path ppm = sh.work / "roundtrip.ppm";
    write_image(img, ppm);
    const Image img_back = read_image(ppm);
    if (!(img_back == img)) problems += " ppm-values";
    if (encode_ppm(img_back) != read_file(ppm)) problems += " ppm-bytes";

    return {problems.empty(), problems.empty() ? fmt("COLMAP idempotent (%zu poses, %zu points); PLY %zu splats bit-exact; "
                                                     "PPM %dx%d lossless",
                                                     a.poses.size(), a.points.size(), cloud.size(), img.width, img.height)
                                               : "mismatch:" + problems};
}

Verdict determinism(const Shared& sh) {
    std::string digests[2];
    for (int run = 0; run < 2; ++run) {
        const fs::path out = sh.work / ("determinism_" + std::to_string(run));
        fs::remove_all(out);
        const std::string cmd = std::string("\"") + VSPLAT_TOOL + "\" --seed 17 --threads 2 train \"" + sh.dataset.string() +
                                "\" -o \"" + out.string() +
                                "\" --iterations 600 --densify_start_iter 100 --densify_end_iter 500 --densify_interval 100"
                                " --opacity_reset_interval 300 --sh_promote_interval 200 > \"" +
                                (sh.work / ("determinism_" + std::to_string(run) + ".out")).string() + "\" 2>&1";
        const int rc = std::system(cmd.c_str());
        if (rc != 0) return {false, fmt("train run %d exited with status %d", run, rc)};
        digests[run] = read_file(out / "checkpoint.ply");
    }
    const bool same = !digests[0].empty() && digests[0] == digests[1];
    return {same, fmt("two 600-iteration train runs (seed 17, 2 threads): checkpoints %s (%zu bytes)",
                      same ? "bitwise identical" : "differ", digests[0].size())};
}

} // namespace

int main(int argc, char** argv) {
    Shared sh;
    sh.work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "vsplat_acceptance";
    // Optional second argument: comma-separated criteria to run (default all).
    const std::string only = argc > 2 ? std::string(",") + argv[2] + "," : "";
    auto selected = [&](int id) { return only.empty() || only.find("," + std::to_string(id) + ",") != std::string::npos; };

    fs::remove_all(sh.work);
    fs::create_directories(sh.work);
    sh.dataset = sh.work / "synth";
    make_dataset(VortexSpec{}, RigSpec{}, DatasetOptions{}, sh.dataset);

    if (selected(1)) run_criterion(1, "gradient-correctness", 60, gradient_check);
    if (selected(2)) run_criterion(2, "renderer-oracle-equivalence", 60, oracle_equivalence);
    double crit3_seconds = 15 * 60;
    if (selected(3)) {
        const auto t3 = std::chrono::steady_clock::now();
        run_criterion(3, "synthetic-reconstruction", 15 * 60, [&] { return synthetic_reconstruction(sh); });
        crit3_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t3).count();
    }
    if (selected(4)) run_criterion(4, "planted-floater-removal", 5 * 60, [&] { return floater_removal(sh); });
    if (selected(5)) run_criterion(5, "registration-diagnostics", 15 * 60, [&] { return missing_view(sh); });
    if (selected(6)) run_criterion(6, "format-integrity", 30, [&] { return format_integrity(sh); });
    if (selected(7)) run_criterion(7, "determinism", 2 * crit3_seconds, [&] { return determinism(sh); });

    std::printf("%s: %d failing criteria\n", g_failures ? "FAIL" : "PASS", g_failures);
    return g_failures ? 1 : 0;
}
