#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "foid/qcqp.hpp"
#include "oracles.hpp"

using namespace foid;
using namespace foid::qcqp;

namespace {

ConvexQCQP from_oracle(const oracle::Qp& qp) {
    auto prob = ConvexQCQP::with_variables(qp.p.rows());
    prob.objective = {qp.p, qp.q, 0.0};
    prob.g = qp.g;
    prob.h = qp.h;
    return prob;
}

QuadraticForm ball(const Vector& c, double r) {
    // |x - c|^2 - r^2 = 1/2 x'(2I)x - 2c'x + |c|^2 - r^2
    const auto n = c.size();
    return {2.0 * Matrix::Identity(n, n), -2.0 * c, c.squaredNorm() - r * r};
}

}  // namespace

TEST(Qcqp, ScalarWithLowerBound) {
    // min x^2 s.t. x >= 1
    auto prob = ConvexQCQP::with_variables(1);
    prob.objective.p(0, 0) = 2.0;
    prob.add_inequality(Vector::Constant(1, -1.0), -1.0);
    const auto sol = solve(prob);
    ASSERT_EQ(sol.status, Status::optimal);
    EXPECT_NEAR(sol.x(0), 1.0, 1e-7);
    EXPECT_NEAR(sol.objective, 1.0, 1e-7);
    EXPECT_NEAR(sol.z_lin(0), 2.0, 1e-6);
    EXPECT_LT(sol.kkt.max(), 1e-7);
}

TEST(Qcqp, ProjectionOntoUnitBall) {
    // min |x - (2,0)|^2 s.t. |x|^2 <= 1  ->  x = (1, 0), multiplier 1
    auto prob = ConvexQCQP::with_variables(2);
    prob.objective = {2.0 * Matrix::Identity(2, 2), Vector(Eigen::Vector2d(-4.0, 0.0)), 4.0};
    prob.add_quadratic(ball(Vector::Zero(2), 1.0), "unit ball");
    const auto sol = solve(prob);
    ASSERT_EQ(sol.status, Status::optimal);
    EXPECT_NEAR(sol.x(0), 1.0, 1e-6);
    EXPECT_NEAR(sol.x(1), 0.0, 1e-6);
    EXPECT_NEAR(sol.objective, 1.0, 1e-6);
    EXPECT_NEAR(sol.z_quad(0), 1.0, 1e-5);
}

TEST(Qcqp, EqualityConstrained) {
    // min x'x s.t. x0 + x1 + x2 = 3  ->  x = 1
    auto prob = ConvexQCQP::with_variables(3);
    prob.objective.p = 2.0 * Matrix::Identity(3, 3);
    prob.add_equality(Vector::Ones(3), 3.0);
    const auto sol = solve(prob);
    ASSERT_EQ(sol.status, Status::optimal);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(sol.x(i), 1.0, 1e-7);
    EXPECT_NEAR(sol.y(0), -2.0, 1e-6);
}

TEST(Qcqp, RandomQpsMatchActiveSetOracle) {
    std::mt19937 rng(20240601);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto qp = oracle::random_qp(rng, 4, 6);
        const auto ref = oracle::active_set_qp(qp);
        ASSERT_TRUE(ref.has_value());
        const auto sol = solve(from_oracle(qp));
        ASSERT_EQ(sol.status, Status::optimal) << "trial " << trial;
        EXPECT_LT((sol.x - *ref).cwiseAbs().maxCoeff(), 1e-5) << "trial " << trial;
        EXPECT_LT(sol.kkt.max(), 1e-7) << "trial " << trial;
        ++checked;
    }
    EXPECT_EQ(checked, 100);
}

TEST(Qcqp, RandomBallConstrainedMatchesMultiplierBisection) {
    std::mt19937 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index n = 3;
        Matrix f(n, n);
        Vector q(n), c(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            q(i) = 4.0 * g(rng);
            c(i) = g(rng);
            for (Eigen::Index j = 0; j < n; ++j) f(i, j) = g(rng);
        }
        // rank-deficient objective on odd trials
        if (trial % 2) f.row(0).setZero();
        const Matrix p = f.transpose() * f;
        const double r = 0.5 + std::abs(g(rng));
        auto prob = ConvexQCQP::with_variables(n);
        prob.objective = {p, q, 0.0};
        prob.add_quadratic(ball(c, r));
        const auto sol = solve(prob);
        ASSERT_EQ(sol.status, Status::optimal) << "trial " << trial;
        const Vector ref = oracle::ball_qp(p, q, c, r);
        EXPECT_LT((sol.x - ref).cwiseAbs().maxCoeff(), 1e-5) << "trial " << trial;
    }
}

TEST(Qcqp, DetectsInfeasibleLinearRows) {
    // x <= -1 and x >= 1
    auto prob = ConvexQCQP::with_variables(1);
    prob.objective.p(0, 0) = 1.0;
    prob.add_inequality(Vector::Constant(1, 1.0), -1.0);
    prob.add_inequality(Vector::Constant(1, -1.0), -1.0);
    EXPECT_EQ(solve(prob).status, Status::infeasible);
}

TEST(Qcqp, DetectsDisjointBalls) {
    auto prob = ConvexQCQP::with_variables(2);
    prob.objective.p = Matrix::Identity(2, 2);
    prob.add_quadratic(ball(Vector::Zero(2), 1.0));
    prob.add_quadratic(ball(Vector(Eigen::Vector2d(3.0, 0.0)), 1.0));
    EXPECT_EQ(solve(prob).status, Status::infeasible);
}

TEST(Qcqp, DetectsBallOutsideHalfspace) {
    auto prob = ConvexQCQP::with_variables(2);
    prob.objective.p = Matrix::Identity(2, 2);
    prob.add_quadratic(ball(Vector::Zero(2), 1.0));
    prob.add_inequality(Vector(Eigen::Vector2d(-1.0, 0.0)), -2.0);  // x0 >= 2
    EXPECT_EQ(solve(prob).status, Status::infeasible);
}

TEST(Qcqp, ConvexityCheckNamesFailingBlock) {
    auto prob = ConvexQCQP::with_variables(2);
    prob.objective.p = Matrix::Identity(2, 2);
    prob.add_quadratic(ball(Vector::Zero(2), 1.0), "fine");
    EXPECT_TRUE(check_convexity(prob).convex);

    QuadraticForm saddle{Matrix::Zero(2, 2), Vector::Zero(2), -1.0};
    saddle.p(0, 0) = 1.0;
    saddle.p(1, 1) = -1.0;
    prob.add_quadratic(saddle, "saddle row");
    const auto rep = check_convexity(prob);
    EXPECT_FALSE(rep.convex);
    ASSERT_EQ(rep.failing.size(), 1u);
    EXPECT_EQ(rep.failing[0], "saddle row");
    EXPECT_THROW(solve(prob), ValidationError);

    auto concave = ConvexQCQP::with_variables(1);
    concave.objective.p(0, 0) = -1.0;
    EXPECT_FALSE(check_convexity(concave).convex);
    EXPECT_EQ(check_convexity(concave).failing[0], "objective");
    EXPECT_TRUE(is_psd(Matrix::Zero(3, 3)));
}

TEST(Qcqp, WeakDualityHolds) {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        auto prob = from_oracle(oracle::random_qp(rng, 3, 4));
        prob.add_quadratic(ball(Vector::Zero(3), 5.0));
        const auto sol = solve(prob);
        ASSERT_EQ(sol.status, Status::optimal);
        EXPECT_LE(sol.dual_objective, sol.objective + 1e-7);
        EXPECT_NEAR(sol.dual_objective, sol.objective, 1e-5);
        EXPECT_GE(sol.z_lin.minCoeff(), -1e-9);
        EXPECT_GE(sol.z_quad.minCoeff(), -1e-9);
    }
}

TEST(Qcqp, ObjectiveScalingLeavesMinimizerUnchanged) {
    std::mt19937 rng(11);
    auto prob = from_oracle(oracle::random_qp(rng, 4, 5));
    prob.add_quadratic(ball(Vector::Zero(4), 2.0));
    const auto a = solve(prob);
    prob.objective.p *= 1000.0;
    prob.objective.q *= 1000.0;
    const auto b = solve(prob);
    ASSERT_EQ(a.status, Status::optimal);
    ASSERT_EQ(b.status, Status::optimal);
    EXPECT_LT((a.x - b.x).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Qcqp, Deterministic) {
    std::mt19937 rng(5);
    auto prob = from_oracle(oracle::random_qp(rng, 5, 7));
    prob.add_quadratic(ball(Vector::Zero(5), 3.0));
    const auto a = solve(prob);
    const auto b = solve(prob);
    EXPECT_EQ(a.iterations, b.iterations);
    for (Eigen::Index i = 0; i < a.x.size(); ++i) EXPECT_EQ(a.x(i), b.x(i));
}

TEST(Qcqp, EmptyProblem) {
    auto prob = ConvexQCQP::with_variables(0);
    prob.objective.r = 2.5;
    const auto sol = solve(prob);
    EXPECT_EQ(sol.status, Status::optimal);
    EXPECT_EQ(sol.x.size(), 0);
    EXPECT_DOUBLE_EQ(sol.objective, 2.5);

    prob.add_inequality(Vector::Zero(0), -1.0);  // 0 <= -1
    EXPECT_EQ(solve(prob).status, Status::infeasible);
}

TEST(Qcqp, DimensionMismatchThrows) {
    auto prob = ConvexQCQP::with_variables(2);
    prob.objective.q = Vector::Zero(3);
    EXPECT_THROW(solve(prob), DimensionError);

    auto bad_quad = ConvexQCQP::with_variables(2);
    bad_quad.add_quadratic({Matrix::Identity(3, 3), Vector::Zero(3), 0.0});
    EXPECT_THROW(check_dimensions(bad_quad), DimensionError);
}

TEST(Qcqp, DumpIsParseableJson) {
    auto prob = ConvexQCQP::with_variables(2);
    prob.objective.p = Matrix::Identity(2, 2);
    prob.add_equality(Vector::Ones(2), 1.0);
    prob.add_quadratic(ball(Vector::Zero(2), 1.0), "disc");
    std::ostringstream out;
    dump(prob, out);
    const auto j = nlohmann::json::parse(out.str());
    EXPECT_EQ(j["n"], 2);
    EXPECT_EQ(j["quad"][0]["name"], "disc");
    EXPECT_DOUBLE_EQ(j["b"][0].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(j["quad"][0]["r"].get<double>(), -1.0);
}

TEST(ConeAlgebra, JordanDivideInvertsProduct) {
    detail::Cone k;
    k.nl = 2;
    k.soc = {3};
    k.offset = {2};
    Vector u(5), v(5);
    u << 2.0, 0.5, 3.0, 1.0, -0.5;
    v << 1.0, -2.0, 0.3, 0.7, 0.1;
    const Vector w = detail::jordan(k, u, v);
    EXPECT_LT((detail::jordan_divide(k, u, w) - v).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT((detail::jordan(k, detail::identity(k), v) - v).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ConeAlgebra, NtScalingMapsZToWInverseS) {
    detail::Cone k;
    k.nl = 1;
    k.soc = {3};
    k.offset = {1};
    Vector s(4), z(4);
    s << 0.5, 2.0, 0.3, -1.2;
    z << 3.0, 1.5, -0.4, 0.9;
    const auto sc = detail::nt_scaling(k, s, z);
    EXPECT_LT((sc.w * z - sc.w_inv * s).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((sc.w * sc.w_inv - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((sc.w - sc.w.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ConeAlgebra, MaxStepReachesBoundary) {
    detail::Cone k;
    k.nl = 1;
    k.soc = {3};
    k.offset = {1};
    Vector u(4), du(4);
    u << 1.0, 2.0, 0.0, 0.0;
    du << 0.0, -1.0, 1.0, 0.0;
    const double a = detail::max_step(k, u, du);
    // SOC block: (2 - a)^2 = a^2  ->  a = 1
    EXPECT_NEAR(a, 1.0, 1e-14);
    du << -0.25, 0.0, 0.0, 0.0;
    EXPECT_NEAR(detail::max_step(k, u, du), 4.0, 1e-14);
    du << 1.0, 1.0, 0.0, 0.0;
    EXPECT_TRUE(std::isinf(detail::max_step(k, u, du)));
}
