#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <random>

#include "gmplan/environment.hpp"

using namespace gmplan;

namespace {

SignedDistanceField constant_field(double value) {
    std::vector<double> values(21 * 21, value);
    return SignedDistanceField(2, Eigen::Vector2d(-5.0, -5.0), 0.5, {21, 21}, values);
}

/// Values increase by 1 per cell along x: f(x, y) = x - origin_x.
SignedDistanceField linear_field() {
    std::vector<double> values;
    values.reserve(11 * 11);
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x) values.push_back(static_cast<double>(x));
    return SignedDistanceField(2, Eigen::Vector2d(0.0, 0.0), 1.0, {11, 11}, values);
}

}  // namespace

TEST_CASE("sdf interpolation") {
    SUBCASE("constant field returns the constant with zero gradient") {
        const SignedDistanceField field = constant_field(3.0);
        auto [d, g] = field.query(Eigen::Vector2d(0.37, -1.21));
        CHECK(d == doctest::Approx(3.0));
        CHECK(g.norm() < 1e-12);
    }
    SUBCASE("linear field has unit gradient along x") {
        const SignedDistanceField field = linear_field();
        for (const auto& p : {Eigen::Vector2d(2.3, 4.7), Eigen::Vector2d(7.9, 1.2)}) {
            auto [d, g] = field.query(p);
            CHECK(d == doctest::Approx(p.x()).epsilon(1e-12));
            CHECK(g(0) == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(std::abs(g(1)) < 1e-10);
        }
    }
    SUBCASE("grid nodes reproduce stored values") {
        const SignedDistanceField field = linear_field();
        CHECK(field.distance(Eigen::Vector2d(4.0, 6.0)) == doctest::Approx(4.0));
    }
    SUBCASE("out-of-range queries clamp") {
        const SignedDistanceField field = linear_field();
        CHECK(field.distance(Eigen::Vector2d(100.0, 5.0)) == doctest::Approx(10.0));
        CHECK(field.distance(Eigen::Vector2d(-100.0, 5.0)) == doctest::Approx(0.0));
    }
}

TEST_CASE("box signed distance and rasterization") {
    std::vector<BoxObstacle> boxes(1);
    boxes[0].center = Eigen::Vector2d(0.0, 0.0);
    boxes[0].half_extents = Eigen::Vector2d(1.0, 2.0);

    CHECK(box_signed_distance(Eigen::Vector2d(3.0, 0.0), boxes) == doctest::Approx(2.0));
    CHECK(box_signed_distance(Eigen::Vector2d(0.0, 0.0), boxes) == doctest::Approx(-1.0));
    CHECK(box_signed_distance(Eigen::Vector2d(2.0, 3.0), boxes) ==
          doctest::Approx(std::sqrt(2.0)));

    const SignedDistanceField field =
        make_sdf(boxes, 2, Eigen::Vector2d(-5.0, -5.0), 0.25, {41, 41});
    // interior nodes agree with the exact distance; interpolation is exact on
    // nodes by construction
    CHECK(field.distance(Eigen::Vector2d(3.0, 0.0)) == doctest::Approx(2.0));
    CHECK(field.distance(Eigen::Vector2d(0.0, 0.0)) == doctest::Approx(-1.0));
}

TEST_CASE("sdf save/load round trip") {
    std::vector<BoxObstacle> boxes(1);
    boxes[0].center = Eigen::Vector2d(1.0, -1.0);
    boxes[0].half_extents = Eigen::Vector2d(0.5, 0.5);
    const SignedDistanceField field =
        make_sdf(boxes, 2, Eigen::Vector2d(-3.0, -3.0), 0.5, {13, 13});
    const std::string path = "test_sdf_roundtrip.sdf";
    field.save(path);
    const SignedDistanceField loaded = SignedDistanceField::load(path);
    CHECK(loaded.dims() == field.dims());
    CHECK(loaded.cell_size() == field.cell_size());
    for (std::size_t i = 0; i < field.values().size(); ++i)
        CHECK(loaded.values()[i] == doctest::Approx(field.values()[i]).epsilon(1e-15));
    std::remove(path.c_str());
}

TEST_CASE("forward kinematics") {
    SUBCASE("point robot is the identity on the position block") {
        RobotModel robot;
        robot.kind = RobotKind::PointRobot;
        robot.dof = 2;
        robot.radius = 0.4;
        Eigen::VectorXd state(4);
        state << 3.0, -5.0, 0.0, 0.0;
        const auto points = forward_kinematics(robot, state);
        REQUIRE(points.size() == 1);
        CHECK((points[0].position - Eigen::Vector2d(3.0, -5.0)).norm() == 0.0);
        CHECK(points[0].radius == doctest::Approx(0.4));
    }
    SUBCASE("two-link arm trigonometry") {
        RobotModel arm;
        arm.kind = RobotKind::PlanarArm;
        arm.dof = 2;
        arm.link_lengths = {1.0, 1.0};
        arm.points_per_link = 3;
        Eigen::VectorXd q(4);
        q << 0.0, M_PI / 2.0, 0.0, 0.0;
        const auto points = forward_kinematics(arm, q);
        REQUIRE(points.size() == 6);
        // elbow = end of link one, tip = end of link two
        CHECK((points[2].position - Eigen::Vector2d(1.0, 0.0)).norm() < 1e-12);
        CHECK((points[5].position - Eigen::Vector2d(1.0, 1.0)).norm() < 1e-12);
    }
    SUBCASE("zero angles put every checking point on the x axis") {
        RobotModel arm;
        arm.kind = RobotKind::PlanarArm;
        arm.dof = 2;
        arm.link_lengths = {1.2, 0.8};
        Eigen::VectorXd q = Eigen::VectorXd::Zero(4);
        for (const auto& cp : forward_kinematics(arm, q)) CHECK(std::abs(cp.position.y()) < 1e-14);
    }
    SUBCASE("arm Jacobians match finite differences") {
        RobotModel arm;
        arm.kind = RobotKind::PlanarArm;
        arm.dof = 2;
        arm.link_lengths = {1.0, 0.7};
        Eigen::VectorXd q(2);
        q << 0.4, -0.9;
        const auto points = forward_kinematics(arm, q);
        const double h = 1e-7;
        for (std::size_t k = 0; k < points.size(); ++k) {
            for (int j = 0; j < 2; ++j) {
                Eigen::VectorXd qp = q, qm = q;
                qp(j) += h;
                qm(j) -= h;
                const Eigen::VectorXd fd =
                    (forward_kinematics(arm, qp)[k].position -
                     forward_kinematics(arm, qm)[k].position) /
                    (2.0 * h);
                CHECK((points[k].jacobian.col(j) - fd).norm() < 1e-6);
            }
        }
    }
}

TEST_CASE("hinge loss") {
    CollisionParams params;
    params.eps_margin = 0.5;
    CHECK(hinge(10.0, params, 0.5) == 0.0);
    CHECK(hinge(0.3, params, 0.5) == doctest::Approx(0.7));
    CHECK(hinge(1.0, params, 0.5) == 0.0);  // exactly at the kink

    SUBCASE("1-Lipschitz in the distance") {
        std::mt19937 rng(2);
        std::uniform_real_distribution<double> uniform(-2.0, 2.0);
        for (int i = 0; i < 200; ++i) {
            const double d1 = uniform(rng);
            const double d2 = uniform(rng);
            CHECK(std::abs(hinge(d1, params, 0.3) - hinge(d2, params, 0.3)) <=
                  std::abs(d1 - d2) + 1e-15);
        }
    }
}

TEST_CASE("collision cost") {
    RobotModel robot;
    robot.kind = RobotKind::PointRobot;
    robot.dof = 2;
    robot.radius = 0.5;
    CollisionParams params;
    params.eps_margin = 0.5;
    params.sigma_obs = 1.0;

    SUBCASE("far from obstacles the cost is zero") {
        const SignedDistanceField field = constant_field(50.0);
        Eigen::VectorXd state(4);
        state << 0.0, 0.0, 1.0, -1.0;
        CHECK(collision_cost(robot, field, params, state) == 0.0);
    }
    SUBCASE("single active hinge squares the violation") {
        const SignedDistanceField field = constant_field(0.3);
        Eigen::VectorXd state = Eigen::VectorXd::Zero(4);
        CHECK(collision_cost(robot, field, params, state) == doctest::Approx(0.49));
    }
    SUBCASE("cost is linear in the weight") {
        const SignedDistanceField field = constant_field(0.3);
        Eigen::VectorXd state = Eigen::VectorXd::Zero(4);
        CollisionParams heavy = params;
        heavy.sigma_obs = 2.0;
        CHECK(collision_cost(robot, field, heavy, state) ==
              doctest::Approx(2.0 * collision_cost(robot, field, params, state)));
    }
}

TEST_CASE("collision gradient and Gauss-Newton Hessian") {
    RobotModel robot;
    robot.kind = RobotKind::PointRobot;
    robot.dof = 2;
    robot.radius = 0.5;
    CollisionParams params;
    params.eps_margin = 0.5;
    params.sigma_obs = 1.5;

    SUBCASE("zero outside the hinge support") {
        const SignedDistanceField field = constant_field(50.0);
        auto [grad, hess] = collision_grad(robot, field, params, Eigen::VectorXd::Zero(4));
        CHECK(grad.norm() == 0.0);
        CHECK(hess.norm() == 0.0);
    }
    SUBCASE("matches central finite differences inside the margin") {
        const SignedDistanceField field = linear_field();
        Eigen::VectorXd state(4);
        state << 0.4, 5.0, 0.0, 0.0;  // hinge active, away from the kink
        auto [grad, hess] = collision_grad(robot, field, params, state);
        const double h = 1e-6;
        for (int j = 0; j < 4; ++j) {
            Eigen::VectorXd plus = state, minus = state;
            plus(j) += h;
            minus(j) -= h;
            const double fd = (collision_cost(robot, field, params, plus) -
                               collision_cost(robot, field, params, minus)) /
                              (2.0 * h);
            CHECK(std::abs(grad(j) - fd) < 1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
    SUBCASE("gradient check at 100 random non-kink states") {
        std::vector<BoxObstacle> boxes(2);
        boxes[0].center = Eigen::Vector2d(0.0, 0.0);
        boxes[0].half_extents = Eigen::Vector2d(1.5, 1.0);
        boxes[1].center = Eigen::Vector2d(3.5, 2.0);
        boxes[1].half_extents = Eigen::Vector2d(0.8, 0.8);
        const SignedDistanceField field =
            make_sdf(boxes, 2, Eigen::Vector2d(-8.0, -8.0), 0.25, {65, 65});

        std::mt19937 rng(17);
        std::uniform_real_distribution<double> uniform(-5.0, 5.0);
        int checked = 0;
        while (checked < 100) {
            Eigen::VectorXd state(4);
            state << uniform(rng), uniform(rng), 0.0, 0.0;
            const auto points = forward_kinematics(robot, state);
            const double hv = hinge(field.distance(points[0].position), params, robot.radius);
            if (std::abs(hv) < 0.05) continue;  // keep clear of the hinge kink
            auto [grad, hess] = collision_grad(robot, field, params, state);
            const double h = 1e-5;
            bool near_kink = false;
            Eigen::VectorXd fd(4);
            for (int j = 0; j < 4; ++j) {
                Eigen::VectorXd plus = state, minus = state;
                plus(j) += h;
                minus(j) -= h;
                fd(j) = (collision_cost(robot, field, params, plus) -
                         collision_cost(robot, field, params, minus)) /
                        (2.0 * h);
            }
            if (near_kink) continue;
            const double denom = std::max(1.0, fd.norm());
            CHECK((grad - fd).norm() / denom < 1e-4);
            ++checked;
        }
    }
    SUBCASE("Gauss-Newton Hessian is positive semi-definite") {
        const SignedDistanceField field = linear_field();
        std::mt19937 rng(29);
        std::uniform_real_distribution<double> uniform(0.0, 2.0);
        for (int i = 0; i < 50; ++i) {
            Eigen::VectorXd state(4);
            state << uniform(rng), uniform(rng) + 3.0, 0.0, 0.0;
            auto [grad, hess] = collision_grad(robot, field, params, state);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
            CHECK(es.eigenvalues().minCoeff() > -1e-10);
        }
    }
}

TEST_CASE("collision cost is invariant under rigid translation of field and state") {
    std::vector<BoxObstacle> boxes(1);
    boxes[0].center = Eigen::Vector2d(1.0, 2.0);
    boxes[0].half_extents = Eigen::Vector2d(1.0, 1.0);
    const Eigen::Vector2d offset(2.5, -1.5);
    std::vector<BoxObstacle> shifted_boxes = boxes;
    shifted_boxes[0].center += offset;

    const SignedDistanceField field =
        make_sdf(boxes, 2, Eigen::Vector2d(-6.0, -6.0), 0.25, {81, 81});
    const SignedDistanceField shifted =
        make_sdf(shifted_boxes, 2, Eigen::Vector2d(-6.0, -6.0) + offset, 0.25, {81, 81});

    RobotModel robot;
    robot.kind = RobotKind::PointRobot;
    robot.dof = 2;
    robot.radius = 0.5;
    CollisionParams params;

    std::mt19937 rng(31);
    std::uniform_real_distribution<double> uniform(-2.0, 4.0);
    for (int i = 0; i < 30; ++i) {
        Eigen::VectorXd state(4);
        state << uniform(rng), uniform(rng), 0.0, 0.0;
        Eigen::VectorXd moved = state;
        moved.head(2) += offset;
        CHECK(collision_cost(robot, field, params, state) ==
              doctest::Approx(collision_cost(robot, shifted, params, moved)).epsilon(1e-9));
    }
}
