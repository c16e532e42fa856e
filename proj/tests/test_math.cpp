#include "test_util.hpp"

using namespace vsplat;

TEST(Math, SigmoidLogitInverse) {
    for (double p : {1e-6, 0.005, 0.1, 0.5, 0.9, 0.99}) EXPECT_NEAR(sigmoid(logit(p)), p, 1e-15);
    EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
}

TEST(Math, RotationFromQuatIsProperOrthogonal) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    for (int i = 0; i < 100; ++i) {
        const Quat q(n(rng), n(rng), n(rng), n(rng));
        const Mat3 r = rotation_from_quat(q);
        EXPECT_LT((r * r.transpose() - Mat3::Identity()).norm(), 1e-13);
        EXPECT_NEAR(r.determinant(), 1.0, 1e-13);
        // Agrees with Eigen's own conversion.
        const Mat3 e = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized().toRotationMatrix();
        EXPECT_LT((r - e).norm(), 1e-13);
        const Quat back = quat_from_rotation(r);
        EXPECT_LT((rotation_from_unit_quat(back) - r).norm(), 1e-13);
        EXPECT_GE(back[0], 0.0);
    }
}

TEST(Math, ScaledQuaternionGivesSameRotation) {
    const Quat q(0.3, -0.2, 0.9, 0.1);
    EXPECT_LT((rotation_from_quat(q) - rotation_from_quat(7.5 * q)).norm(), 1e-14);
}

TEST(Math, ZeroQuaternionRejected) {
    EXPECT_THROW(normalized_quat(Quat::Zero()), InvalidParameter);
    EXPECT_THROW(rotation_from_quat(Quat::Zero()), InvalidParameter);
}

TEST(Parallel, ForVisitsEveryIndexOnce) {
    for (int threads : {1, 3, 0}) {
        set_thread_count(threads);
        std::vector<int> hits(1000, 0);
        parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
        for (int h : hits) EXPECT_EQ(h, 1);
    }
    set_thread_count(0);
}

TEST(Parallel, PropagatesExceptions) {
    set_thread_count(2);
    EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                     if (i == 7) throw InvalidParameter("boom");
                 }),
                 InvalidParameter);
    set_thread_count(0);
}

TEST(AtomicFile, ReplacesContentAndLeavesNoTemp) {
    test::TempDir dir("atomic");
    const auto p = dir / "out.txt";
    write_text_atomically(p, "one");
    write_text_atomically(p, "two");
    EXPECT_EQ(test::slurp(p), "two");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
    EXPECT_EQ(files, 1u);
}

TEST(Config, FieldsRoundTripThroughText) {
    TrainConfig a;
    a.iterations = 123;
    a.lambda = 0.35;
    a.background = Vec3(0.1, 0.2, 0.3);
    a.grad_stat_ndc = false;
    a.seed = 99;
    const std::string text = dump_config(a, train_config_fields());
    TrainConfig b;
    for (const auto& [k, v] : parse_config_text(text, "test")) {
        const auto* f = find_field(train_config_fields(), k);
        ASSERT_NE(f, nullptr) << k;
        set_field(b, *f, v);
    }
    EXPECT_EQ(dump_config(b, train_config_fields()), text);
    EXPECT_EQ(b.iterations, 123);
    EXPECT_EQ(b.lambda, 0.35);
    EXPECT_EQ(b.background, Vec3(0.1, 0.2, 0.3));
    EXPECT_FALSE(b.grad_stat_ndc);
    EXPECT_EQ(b.seed, 99u);
}

TEST(Config, RejectsMalformedInput) {
    EXPECT_THROW(parse_config_text("iterations 5\n", "f"), UsageError);
    TrainConfig c;
    const auto* f = find_field(train_config_fields(), "iterations");
    EXPECT_THROW(set_field(c, *f, "12x"), UsageError);
    const auto* bg = find_field(train_config_fields(), "background");
    EXPECT_THROW(set_field(c, *bg, "1,2"), UsageError);
    const auto m = parse_config_text("# comment\n a = 1 # trailing\n\n", "f");
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m.at("a"), "1");
}
