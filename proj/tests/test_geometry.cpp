#include "cmest/geometry.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace cmest;
using cmest::testing::vec;

namespace {

const SpdMetric I2 = SpdMetric::identity(2);

ConvexSet orthant() {
    Matrix a(2, 2);
    a << -1, 0, 0, -1;
    return Polyhedron(a, Vector::Zero(2));
}

Matrix diag2(double a, double b) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

void expect_vec_near(const Vector& got, const Vector& want, double tol) {
    ASSERT_EQ(got.size(), want.size());
    EXPECT_LE((got - want).norm(), tol) << "got " << got.transpose() << " want " << want.transpose();
}

}  // namespace

TEST(Contains, Examples) {
    EXPECT_TRUE(contains(Ball(Vector::Zero(2), 1.0), vec({0.5, 0}), 0.0));
    Matrix a(1, 2);
    a << 1, 0;
    EXPECT_TRUE(contains(Polyhedron(a, Vector::Zero(1)), vec({1e-9, 0}), 1e-8));
    EXPECT_FALSE(contains(Polyhedron(a, Vector::Zero(1)), vec({1e-7, 0}), 1e-8));
    EXPECT_FALSE(contains(Box(vec({0, 0}), vec({1, 1})), vec({2, 0}), 0.0));
    EXPECT_THROW(contains(Box(vec({0, 0}), vec({1, 1})), vec({2}), 0.0), InvalidArgument);
}

TEST(Project, Examples) {
    expect_vec_near(project(Ball(Vector::Zero(2), 1.0), vec({2, 0}), I2), vec({1, 0}), 1e-15);
    expect_vec_near(project(orthant(), vec({-1, 2}), I2), vec({0, 2}), 1e-15);
}

TEST(Project, WeightedHalfspaceMatchesLineSearchOracle) {
    // min (y-x)^T S (y-x) on the line y = (t, 1-t), by golden section.
    const Vector x = vec({1, 1});
    const Matrix s = diag2(1, 4);
    auto f = [&](double t) {
        const Vector r = vec({t, 1 - t}) - x;
        return r.dot(s * r);
    };
    double lo = -5, hi = 5;
    const double g = (std::sqrt(5.0) - 1) / 2;
    for (int i = 0; i < 200; ++i) {
        const double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
        (f(c) < f(d) ? hi : lo) = (f(c) < f(d) ? d : c);
    }
    const double t = 0.5 * (lo + hi);
    EXPECT_NEAR(t, 0.2, 1e-7);

    Matrix a(1, 2);
    a << 1, 1;
    const Vector y = project(Polyhedron(a, vec({1})), x, SpdMetric(s));
    expect_vec_near(y, vec({0.2, 0.8}), 1e-14);
}

TEST(Project, BallUnderGeneralMetricSatisfiesKkt) {
    const Ball ball(vec({0.5, -0.5}), 1.0);
    Matrix s(2, 2);
    s << 2, 0.7, 0.7, 1;
    const SpdMetric m(s);
    const Vector x = vec({3, 1});
    const Vector y = project(ball, x, m);
    EXPECT_NEAR((y - ball.center).norm(), 1.0, 1e-14);
    // S (x - y) is parallel to the outward normal with a positive factor.
    const Vector g = s * (x - y);
    const Vector n = y - ball.center;
    EXPECT_NEAR(g[0] * n[1] - g[1] * n[0], 0.0, 1e-12);
    EXPECT_GT(g.dot(n), 0.0);
}

TEST(Project, EmptyPolyhedronIsReported) {
    Matrix a(2, 1);
    a << 1, -1;
    EXPECT_THROW(Polyhedron(a, vec({0, -1})), InfeasibleSet);
}

TEST(Project, ActiveSetAgreesWithDykstra) {
    CounterRng rng(2024);
    for (int rep = 0; rep < 60; ++rep) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(rep % 3);
        const ConvexSet set = cmest::testing::random_set(rng, cmest::testing::SetKind::polyhedron, d);
        const SpdMetric m = cmest::testing::random_metric(rng, d);
        const Vector x = 3.0 * rng.normal_vector(d);
        const Vector exact = project(set, x, m);
        const DykstraResult dk = project_dykstra(set, x, m, 1e-12);
        ASSERT_TRUE(contains(set, exact, 1e-12));
        if (dk.converged)
            EXPECT_LE(m.norm(exact - dk.point), 1e-6) << "rep " << rep << " cycles " << dk.cycles;
        else if (contains(set, dk.point, 1e-12))
            EXPECT_LE(m.norm(x - exact), m.norm(x - dk.point) + 1e-12) << "rep " << rep;
    }
}

TEST(SupportCone, Examples) {
    const auto apex = support_cone(orthant(), vec({0, 0}));
    ASSERT_TRUE(std::holds_alternative<PolyhedralCone>(apex));
    EXPECT_EQ(std::get<PolyhedralCone>(apex).a.rows(), 2);

    const auto face = support_cone(orthant(), vec({0, 1}));
    ASSERT_TRUE(std::holds_alternative<PolyhedralCone>(face));
    EXPECT_TRUE(cone_contains(face, vec({1, -5}), 0.0));
    EXPECT_FALSE(cone_contains(face, vec({-1, 0}), 0.0));

    const auto tangent = support_cone(Ball(Vector::Zero(2), 1.0), vec({1, 0}));
    ASSERT_TRUE(std::holds_alternative<Halfspace>(tangent));
    EXPECT_TRUE(cone_contains(tangent, vec({-1, 3}), 0.0));
    EXPECT_FALSE(cone_contains(tangent, vec({0.1, 3}), 0.0));

    EXPECT_TRUE(std::holds_alternative<FullSpace>(support_cone(Ball(Vector::Zero(2), 1.0), vec({0.2, 0}))));
    EXPECT_THROW(support_cone(orthant(), vec({-1, 0})), InvalidArgument);
}

TEST(Dproj, Examples) {
    const Ball ball(Vector::Zero(2), 1.0);
    expect_vec_near(dproj(ball, vec({2, 0}), vec({0, 1}), I2), vec({0, 0.5}), 1e-15);
    expect_vec_near(dproj(ball, vec({0.1, 0.2}), vec({3, -1}), I2), vec({3, -1}), 0.0);
    expect_vec_near(dproj(orthant(), vec({1, 2}), vec({3, -1}), I2), vec({3, -1}), 0.0);
    expect_vec_near(dproj(orthant(), vec({0, -1}), vec({1, 1}), I2), vec({1, 0}), 1e-15);
    expect_vec_near(dproj_fd(orthant(), vec({0, -1}), vec({1, 1}), I2), vec({1, 0}), 1e-9);
    expect_vec_near(dproj(orthant(), vec({0, -1}), Vector::Zero(2), I2), Vector::Zero(2), 0.0);
}

TEST(Dproj, FiniteDifferenceRichardsonOnBall) {
    const Ball ball(Vector::Zero(2), 1.0);
    const Vector a = dproj_fd(ball, vec({2, 0}), vec({0, 1}), I2, 1e-6);
    const Vector b = dproj_fd(ball, vec({2, 0}), vec({0, 1}), I2, 5e-7);
    expect_vec_near(a, vec({0, 0.5}), 1e-5);
    expect_vec_near(2 * b - a, vec({0, 0.5}), 1e-5);
    expect_vec_near(dproj_fd(ball, vec({0.1, 0}), vec({3, -1}), I2), vec({3, -1}), 1e-8);
}

TEST(Dproj, BallGeneralMetricMatchesFiniteDifference) {
    CounterRng rng(99);
    for (int rep = 0; rep < 50; ++rep) {
        const ConvexSet set = cmest::testing::random_set(rng, cmest::testing::SetKind::ball, 3);
        const SpdMetric m(cmest::testing::random_spd(rng, 3));
        const Vector x = std::get<Ball>(set).center + 4.0 * rng.normal_vector(3);
        if (contains(set, x, 0.0)) continue;
        const Vector z = rng.normal_vector(3);
        const Vector fd = (project(set, x + 1e-6 * z, m) - project(set, x - 1e-6 * z, m)) / 2e-6;
        EXPECT_LE((dproj(set, x, z, m) - fd).norm(), 1e-6 * (1 + z.norm()));
    }
}

TEST(Dproj, RandomBranchesAgreeWithFiniteDifference) {
    using cmest::testing::SetKind;
    CounterRng rng(31337);
    for (SetKind kind : {SetKind::ball, SetKind::box, SetKind::polyhedron, SetKind::cone}) {
        for (int rep = 0; rep < 40; ++rep) {
            const Eigen::Index d = 2 + static_cast<Eigen::Index>(rep % 3);
            const ConvexSet set = cmest::testing::random_set(rng, kind, d);
            const SpdMetric m = cmest::testing::random_metric(rng, d);
            const Vector x = cmest::testing::random_point(rng, set, m, rep);
            const Vector z = rng.normal_vector(d);
            const Vector dp = dproj(set, x, z, m);
            const Vector fd = dproj_fd(set, x, z, m);
            EXPECT_LE((dp - fd).norm(), 1e-4 * std::max(1.0, z.norm()))
                << cmest::testing::kind_label(kind) << " rep " << rep;
        }
    }
}

TEST(NormalCone, Examples) {
    const Ball ball(Vector::Zero(2), 1.0);
    EXPECT_TRUE(in_normal_cone(ball, vec({1, 0}), vec({1, 0}), I2));
    EXPECT_FALSE(in_normal_cone(ball, vec({1, 0}), vec({0, 1}), I2));
    EXPECT_TRUE(in_normal_cone(orthant(), vec({0, 0}), vec({-1, -1}), I2));
    EXPECT_FALSE(in_normal_cone(orthant(), vec({0, 0}), vec({1, -1}), I2));
    EXPECT_TRUE(in_normal_cone(orthant(), vec({0, 2}), vec({-3, 0}), I2));
}

// Three constraints in the plane that cut the cone down to {0}: every vector
// is normal at the apex, and no probe may leave the set.
TEST(NormalCone, PointedApex) {
    Matrix a(3, 2);
    a << -0.772274, -0.562363, -0.145033, 0.832134, 0.159664, -0.221829;
    const ConvexSet cone = PolyhedralCone(a);
    Matrix s(2, 2);
    s << 1.30077, 0.605739, 0.605739, 1.38004;
    const SpdMetric m(s);
    const Vector x = vec({-1.55831, -5.22986});
    const Vector y = project(cone, x, m);
    EXPECT_LE(y.norm(), 1e-12);
    EXPECT_TRUE(in_normal_cone(cone, Vector::Zero(2), x, m));
    EXPECT_LE(characterization_gap(cone, x, y, m), 1e-9);
}

TEST(Translate, ShiftsMembership) {
    const Ball ball(vec({1, 1}), 1.0);
    const ConvexSet shifted = translate(ball, vec({1, 1}));
    EXPECT_TRUE(contains(shifted, vec({0, 0.9}), 0.0));
    const ConvexSet cone_shift = translate(orthant(), vec({1, 0}));
    EXPECT_TRUE(contains(cone_shift, vec({-1, 0}), 0.0));
    EXPECT_FALSE(contains(cone_shift, vec({-1.1, 0}), 0.0));
}

TEST(Json, RoundTrip) {
    const std::vector<ConvexSet> sets = {FullSpace{3}, Ball(vec({1, 2}), 0.5), Box(vec({0, 0}), vec({1, 2})),
                                         orthant(), PolyhedralCone(Matrix::Identity(2, 2))};
    for (const auto& s : sets) {
        const ConvexSet back = set_from_json(set_to_json(s));
        EXPECT_EQ(set_to_json(back).dump(), set_to_json(s).dump());
    }
    EXPECT_THROW(set_from_json(nlohmann::json{{"type", "torus"}}), InvalidArgument);
    EXPECT_THROW(set_from_json(nlohmann::json::parse(R"({"type":"ball","center":[0,0],"radius":-1})")),
                 InvalidArgument);
}
