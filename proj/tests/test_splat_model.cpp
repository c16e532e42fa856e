#include "test_util.hpp"

#include <boost/math/special_functions/legendre.hpp>

using namespace vsplat;

namespace {

/// Real spherical harmonic Y_lm by the associated Legendre definition (Condon-Shortley phase
/// included in boost's P_l^m). Independent of the hard-coded polynomial constants.
double real_sh(int l, int m, const Vec3& d) {
    const double theta = std::acos(std::clamp(d.z(), -1.0, 1.0));
    const double phi = std::atan2(d.y(), d.x());
    const int am = std::abs(m);
    double fact = 1.0;
    for (int i = l - am + 1; i <= l + am; ++i) fact *= i;
    const double k = std::sqrt((2 * l + 1) / (4 * std::numbers::pi) / fact);
    const double p = boost::math::legendre_p(l, am, std::cos(theta));
    if (m == 0) return k * p;
    if (m > 0) return std::sqrt(2.0) * k * p * std::cos(m * phi);
    return std::sqrt(2.0) * k * p * std::sin(am * phi);
}

/// Coefficient k = l*l + l + m holds Y_lm.
double reference_basis(int l, int m, const Vec3& d) { return real_sh(l, m, d); }

Vec3 random_dir(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    return Vec3(n(rng), n(rng), n(rng)).normalized();
}

} // namespace

TEST(Covariance, Examples) {
    EXPECT_LT((build_covariance(Vec3::Zero(), Quat(1, 0, 0, 0)) - Mat3::Identity()).norm(), 1e-15);
    const Vec3 s(std::log(2.0), 0, 0);
    EXPECT_LT((build_covariance(s, Quat(1, 0, 0, 0)) - Vec3(4, 1, 1).asDiagonal().toDenseMatrix()).norm(), 1e-14);
    const double h = std::sqrt(0.5);
    const Mat3 rz = build_covariance(s, Quat(h, 0, 0, h));
    // Oracle: explicit rotation by 90 degrees about z.
    Mat3 r;
    r << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    const Mat3 expect = r * Vec3(4, 1, 1).asDiagonal() * r.transpose();
    EXPECT_LT((rz - expect).norm(), 1e-14);
    EXPECT_LT((rz - Vec3(1, 4, 1).asDiagonal().toDenseMatrix()).norm(), 1e-14);
    EXPECT_THROW(build_covariance(s, Quat::Zero()), InvalidParameter);
}

TEST(Covariance, SymmetricPsdAndDoubleCover) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n;
    for (int i = 0; i < 100000; ++i) {
        const Vec3 s(n(rng), n(rng), n(rng));
        const Quat q(n(rng), n(rng), n(rng), n(rng));
        const Mat3 c = build_covariance(s, q);
        ASSERT_LE((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff()));
        if (i % 100 == 0) {
            Eigen::SelfAdjointEigenSolver<Mat3> es(c);
            ASSERT_GE(es.eigenvalues().minCoeff(), -1e-9 * std::max(1.0, es.eigenvalues().maxCoeff()));
        }
        ASSERT_TRUE(build_covariance(s, q) == build_covariance(s, -q));
    }
}

TEST(SphericalHarmonics, BasisMatchesLegendreOracle) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 200; ++t) {
        const Vec3 d = random_dir(rng);
        const auto y = sh::basis(3, d);
        for (int l = 0; l <= 3; ++l)
            for (int m = -l; m <= l; ++m) EXPECT_NEAR(y[l * l + l + m], reference_basis(l, m, d), 1e-12) << l << "," << m;
    }
}

TEST(SphericalHarmonics, BasisGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 50; ++t) {
        const Vec3 d = random_dir(rng);
        const auto g = sh::basis_gradient(3, d);
        for (int a = 0; a < 3; ++a) {
            Vec3 dp = d, dm = d;
            const double h = 1e-6;
            dp[a] += h;
            dm[a] -= h;
            // The polynomial basis is evaluated on the raw vector.
            const auto yp = sh::basis(3, dp), ym = sh::basis(3, dm);
            for (int k = 0; k < 16; ++k) EXPECT_NEAR(g[k][a], (yp[k] - ym[k]) / (2 * h), 1e-7);
        }
    }
}

TEST(SphericalHarmonics, EvalExamples) {
    std::array<double, 48> c{};
    for (int ch = 0; ch < 3; ++ch) c[ch * 16] = 0.5 / kShC0;
    std::mt19937_64 rng(10);
    for (int t = 0; t < 10; ++t) EXPECT_LT((eval_sh_color(c, 0, random_dir(rng)) - Vec3(1, 1, 1)).norm(), 1e-15);
    std::array<double, 48> z{};
    EXPECT_EQ(eval_sh_color(z, 0, Vec3::UnitX()), Vec3(0.5, 0.5, 0.5));

    // Band-1 z coefficient (index 2): +z vs -z differ by twice the band term.
    std::array<double, 48> b{};
    b[2] = 0.3;
    const Vec3 up = eval_sh_color(b, 1, Vec3::UnitZ());
    const Vec3 down = eval_sh_color(b, 1, -Vec3::UnitZ());
    const double term = 0.3 * reference_basis(1, 0, Vec3::UnitZ());
    EXPECT_NEAR(up[0] - down[0], 2 * term, 1e-15);
    // Degree 0 ignores higher coefficients.
    EXPECT_EQ(eval_sh_color(b, 0, Vec3::UnitZ()), Vec3(0.5, 0.5, 0.5));
}

TEST(SphericalHarmonics, ClampAndErrors) {
    std::array<double, 48> c{};
    c[0] = -10;
    EXPECT_EQ(eval_sh_color(c, 0, Vec3::UnitX())[0], 0.0);
    EXPECT_THROW(eval_sh_color(c, 0, Vec3(1, 1, 0)), InvalidParameter);
    EXPECT_THROW(eval_sh_color(c, 4, Vec3::UnitX()), InvalidParameter);
    EXPECT_NO_THROW(eval_sh_color(c, 3, Vec3(1 + 5e-7, 0, 0)));
}

TEST(Init, SinglePointFallsBack) {
    SparsePoints p;
    p.push_back(1, Vec3(1, 2, 3), {10, 20, 30});
    InitOptions o;
    o.extent = 2.0;
    const SplatCloud c = init_from_sparse(p, o);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c.log_scale(0), Vec3::Constant(std::log(0.02)));
    EXPECT_EQ(c.position(0), Vec3(1, 2, 3));
    EXPECT_EQ(c.rotation(0), Quat(1, 0, 0, 0));
    EXPECT_DOUBLE_EQ(c.opacity(0), 0.1);
    EXPECT_EQ(c.active_sh_degree, 0);
}

TEST(Init, WhitePointDcCoefficient) {
    SparsePoints p;
    p.push_back(1, Vec3::Zero(), {255, 255, 255});
    const SplatCloud c = init_from_sparse(p);
    for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(c.sh(0, ch, 0), 1.7724538509055159, 1e-12);
    EXPECT_NEAR(eval_sh_color(c.sh_block(0), 0, Vec3::UnitZ())[0], 1.0, 1e-15);
    for (int k = 1; k < 16; ++k) EXPECT_EQ(c.sh(0, 1, k), 0.0);
}

TEST(Init, CollinearPoints) {
    SparsePoints p;
    p.push_back(1, Vec3(0, 0, 0), {0, 0, 0});
    p.push_back(2, Vec3(1, 0, 0), {0, 0, 0});
    p.push_back(3, Vec3(2, 0, 0), {0, 0, 0});
    InitOptions o;
    o.extent = 100.0;
    const SplatCloud c = init_from_sparse(p, o);
    EXPECT_EQ(c.log_scale(1)[0], 0.0);
    EXPECT_DOUBLE_EQ(c.log_scale(0)[0], std::log(1.5));
    EXPECT_DOUBLE_EQ(c.log_scale(2)[2], std::log(1.5));
}

TEST(Init, ScaleClampedToExtent) {
    SparsePoints p;
    p.push_back(1, Vec3(0, 0, 0), {0, 0, 0});
    p.push_back(2, Vec3(50, 0, 0), {0, 0, 0});
    p.push_back(3, Vec3(0, 0, 0), {0, 0, 0});
    InitOptions o;
    o.extent = 1.0;
    const SplatCloud c = init_from_sparse(p, o);
    EXPECT_DOUBLE_EQ(c.log_scale(1)[0], std::log(0.1));   // far point: upper clamp
    EXPECT_DOUBLE_EQ(c.log_scale(0)[0], std::log(0.1));   // neighbours at 0 and 50 -> 25
    p.positions[1] = Vec3::Zero();
    const SplatCloud d = init_from_sparse(p, o);
    EXPECT_DOUBLE_EQ(d.log_scale(0)[0], std::log(1e-7)); // all coincident: lower clamp
}

TEST(Init, EmptyRejected) {
    try {
        init_from_sparse(SparsePoints{});
        FAIL();
    } catch (const InvalidParameter& e) {
        EXPECT_STREQ(e.what(), "cannot initialize from empty cloud");
    }
}

TEST(Init, ArraysCongruent) {
    SparsePoints p;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 100; ++i) p.push_back(i, Vec3(u(rng), u(rng), u(rng)), {1, 2, 3});
    const SplatCloud c = init_from_sparse(p);
    EXPECT_EQ(c.size(), 100u);
    for (auto g : kAllGroups) EXPECT_EQ(c[g].size(), 100u * stride_of(g));
    EXPECT_NO_THROW(check_cloud(c));
}

TEST(ParameterGroups, PartitionAllScalars) {
    SplatCloud empty;
    for (const auto& v : parameters_view(empty)) EXPECT_EQ(v.values.size(), 0u);
    const SplatCloud c = test::random_cloud(1, 5);
    const auto views = parameters_view(c);
    EXPECT_EQ(views[0].values.size(), 15u);
    std::size_t total = 0;
    for (const auto& v : views) total += v.values.size();
    EXPECT_EQ(total, 5u * (3 + 3 + 4 + 1 + 3 + 45));
    EXPECT_EQ(total, c.total_scalars());
}

TEST(ParameterGroups, DensifyStatsReset) {
    const SplatCloud c = test::random_cloud(1, 7);
    DensifyStats s;
    s.grad_accum.assign(3, 1.0);
    densify_stats_reset(c, s);
    EXPECT_EQ(s.grad_accum, std::vector<double>(7, 0.0));
    EXPECT_EQ(s.denom, std::vector<int>(7, 0));
}
