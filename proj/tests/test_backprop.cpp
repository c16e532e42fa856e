#include "test_util.hpp"

using namespace vsplat;

namespace {

Image random_weights(std::uint64_t seed, int w, int h) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Image img(w, h);
    for (double& v : img.data) v = u(rng);
    return img;
}

bool all_zero(const ParamArrays& p) {
    for (auto g : kAllGroups)
        for (double v : p[g])
            if (v != 0.0) return false;
    return true;
}

GradientSet grads_for(const SplatCloud& c, const CameraView& cam, const Image& w, const RenderSettings& rs = {}) {
    return backward(c, cam, render(c, cam, rs), w);
}

} // namespace

TEST(Backward, ZeroPixelGradientGivesZero) {
    const SplatCloud c = test::random_cloud(1, 10);
    const CameraView cam = test::front_camera(32, 32);
    const GradientSet g = grads_for(c, cam, Image(32, 32));
    EXPECT_TRUE(all_zero(g));
    for (double v : g.view_space_grad_norm) EXPECT_EQ(v, 0.0);
}

TEST(Backward, ShapesCongruentAndFinite) {
    const SplatCloud c = test::random_cloud(2, 25);
    const CameraView cam = test::front_camera(32, 32);
    const GradientSet g = grads_for(c, cam, random_weights(2, 32, 32));
    EXPECT_EQ(g.rows(), c.size());
    for (auto grp : kAllGroups) EXPECT_EQ(g[grp].size(), c[grp].size());
    EXPECT_TRUE(g.all_finite());
    for (std::size_t i = 0; i < c.size(); ++i)
        EXPECT_NEAR(g.view_space_grad_norm[i], std::hypot(g.mean2d_grad[2 * i], g.mean2d_grad[2 * i + 1]), 1e-15);
}

TEST(Backward, UntouchedAndCulledGaussiansHaveZeroGradient) {
    SplatCloud c = test::random_cloud(3, 6);
    c.position(1) = Vec3(100, 0, 3);  // projects far off-image
    c.position(4) = Vec3(0, 0, -3);   // behind the camera
    const CameraView cam = test::front_camera(32, 32);
    const GradientSet g = grads_for(c, cam, random_weights(3, 32, 32));
    for (std::size_t i : {1u, 4u}) {
        for (auto grp : kAllGroups)
            for (std::size_t k = 0; k < stride_of(grp); ++k) EXPECT_EQ(g[grp][stride_of(grp) * i + k], 0.0);
        EXPECT_EQ(g.view_space_grad_norm[i], 0.0);
    }
    EXPECT_GT(g.view_space_grad_norm[0] + g.view_space_grad_norm[2], 0.0);
}

TEST(Backward, LinearInPixelGradient) {
    const SplatCloud c = test::random_cloud(4, 10);
    const CameraView cam = test::front_camera(32, 32);
    const Image w1 = random_weights(10, 32, 32), w2 = random_weights(11, 32, 32);
    Image w2x = w1, mix = w1;
    for (std::size_t i = 0; i < w1.data.size(); ++i) {
        w2x.data[i] = 2.0 * w1.data[i];
        mix.data[i] = 0.5 * w1.data[i] - 3.0 * w2.data[i];
    }
    const GradientSet g1 = grads_for(c, cam, w1), g2 = grads_for(c, cam, w2);
    const GradientSet d = grads_for(c, cam, w2x), m = grads_for(c, cam, mix);
    for (auto grp : kAllGroups)
        for (std::size_t k = 0; k < g1[grp].size(); ++k) {
            EXPECT_EQ(d[grp][k], 2.0 * g1[grp][k]);
            const double expect = 0.5 * g1[grp][k] - 3.0 * g2[grp][k];
            EXPECT_NEAR(m[grp][k], expect, 1e-12 * (1.0 + std::abs(expect)));
        }
}

TEST(Backward, DeterministicAcrossThreadCounts) {
    const SplatCloud c = test::random_cloud(5, 60);
    const CameraView cam = test::front_camera(64, 48);
    const Image w = random_weights(5, 64, 48);
    set_thread_count(1);
    const GradientSet a = grads_for(c, cam, w);
    set_thread_count(3);
    const GradientSet b = grads_for(c, cam, w);
    const GradientSet b2 = grads_for(c, cam, w);
    set_thread_count(0);
    EXPECT_TRUE(static_cast<const ParamArrays&>(a) == static_cast<const ParamArrays&>(b));
    EXPECT_TRUE(static_cast<const ParamArrays&>(b) == static_cast<const ParamArrays&>(b2));
    EXPECT_EQ(a.view_space_grad_norm, b.view_space_grad_norm);
}

TEST(Backward, ShapeMismatchIsInternalError) {
    const SplatCloud c = test::random_cloud(6, 4);
    const CameraView cam = test::front_camera(16, 16);
    const RenderOutput r = render(c, cam);
    EXPECT_THROW(backward(c, cam, r, Image(8, 16)), InternalError);
    SplatCloud other = c;
    other.append_zero_rows(1);
    EXPECT_THROW(backward(other, cam, r, Image(16, 16)), InternalError);
}

TEST(Backward, ViewSpaceGradNormTranslationInvariant) {
    const SplatCloud c = test::random_cloud(7, 15);
    CameraView cam = test::front_camera(32, 32);
    cam.rotation = rotation_from_quat(Quat(0.99, 0.05, -0.08, 0.02));
    cam.translation = Vec3(0.05, -0.1, 0.2);
    const Image w = random_weights(7, 32, 32);
    const GradientSet a = grads_for(c, cam, w);

    const Vec3 t(3.0, -2.0, 5.0);
    SplatCloud moved = c;
    for (std::size_t i = 0; i < moved.size(); ++i) moved.position(i) += t;
    CameraView cam2 = cam;
    cam2.translation = cam.translation - cam.rotation * t;
    const GradientSet b = grads_for(moved, cam2, w);
    for (std::size_t i = 0; i < c.size(); ++i)
        EXPECT_NEAR(a.view_space_grad_norm[i], b.view_space_grad_norm[i], 1e-9 * (1.0 + a.view_space_grad_norm[i]));
}

TEST(Backward, AccumulateScreenGrad) {
    const SplatCloud c = test::random_cloud(8, 5);
    const CameraView cam = test::front_camera(16, 16);
    RenderOutput r = render(c, cam);
    const GradientSet g = backward(c, cam, r, random_weights(8, 16, 16));
    accumulate_screen_grad(r, g);
    accumulate_screen_grad(r, g);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(r.screen_grad_accum[i], 2.0 * g.view_space_grad_norm[i]);
}

class FiniteDifference : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(FiniteDifference, TenGaussianScene) {
    const std::uint64_t seed = GetParam();
    const SplatCloud c = test::random_cloud(seed, 10, 3, 2.0, 4.0);
    const CameraView cam = test::front_camera(32, 32);
    const FdReport rep = finite_difference_check(c, cam, random_weights(seed + 100, 32, 32));
    EXPECT_EQ(rep.checked + rep.excluded, c.total_scalars());
    EXPECT_GE(rep.match_fraction(), 0.95);
    EXPECT_EQ(rep.gross, 0u);
}

INSTANTIATE_TEST_SUITE_P(Seeds, FiniteDifference, ::testing::Values(1u, 2u, 3u, 4u));

TEST(FiniteDifferenceCheck, ZeroLossPasses) {
    const SplatCloud c = test::random_cloud(9, 10);
    const FdReport rep = finite_difference_check(c, test::front_camera(32, 32), Image(32, 32));
    EXPECT_EQ(rep.matched, rep.checked);
    for (const auto& co : rep.coords) {
        EXPECT_EQ(co.analytic, 0.0);
        EXPECT_EQ(co.numeric, 0.0);
    }
}

TEST(FiniteDifferenceCheck, FullyOccludedOpacityHasZeroGradient) {
    // Three wide opaque layers: alpha' clamps to 0.99 everywhere, so T drops to 1e-6 and
    // every pixel terminates before the Gaussian behind them.
    SplatCloud c;
    const std::array<double, 3> white{rgb_to_sh_dc(1.0), rgb_to_sh_dc(1.0), rgb_to_sh_dc(1.0)};
    for (int layer = 0; layer < 3; ++layer)
        c.push_back(Vec3(0, 0, 2.0 + 0.1 * layer), Vec3::Constant(std::log(50.0)), Quat(1, 0, 0, 0), logit(0.99999), white);
    const std::array<double, 3> red{rgb_to_sh_dc(1.0), rgb_to_sh_dc(0.0), rgb_to_sh_dc(0.0)};
    c.push_back(Vec3(0, 0, 5.0), Vec3::Constant(std::log(0.2)), Quat(1, 0, 0, 0), 0.0, red);
    const CameraView cam = test::front_camera(16, 16);
    const FdReport rep = finite_difference_check(c, cam, random_weights(12, 16, 16));
    bool seen = false;
    for (const auto& co : rep.coords)
        if (co.group == ParamGroup::opacity && co.offset == 3) {
            seen = true;
            EXPECT_EQ(co.analytic, 0.0);
            EXPECT_EQ(co.numeric, 0.0);
        }
    EXPECT_TRUE(seen);
}
