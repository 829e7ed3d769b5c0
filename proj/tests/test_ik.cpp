#include <doctest.h>

#include "helpers.hpp"
#include "tdlfd/error.hpp"
#include "tdlfd/ik.hpp"

using namespace tdlfd;

TEST_SUITE("ik") {

TEST_CASE("Jacobian matches fine central differences away from bounds") {
  const RobotSpec spec = testing::eight_robot();
  Config c = home_config(spec);
  c.tensions << 3.0, 1.0, 2.0, 4.0, 0.5;
  const IkSettings s;
  const auto jac = tip_jacobian(spec, c, s);
  const double h = 1e-6;
  for (Eigen::Index j = 0; j < jac.cols(); ++j) {
    Config plus = c, minus = c;
    plus.tensions[j] += h;
    minus.tensions[j] -= h;
    const Vec3 fd = (forward_tip(spec, plus) - forward_tip(spec, minus)) / (2 * h);
    CHECK((jac.col(j) - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()) + 1e-8);
  }
}

TEST_CASE("serial and parallel Jacobians are bit-identical") {
  const RobotSpec spec = testing::eight_robot();
  std::mt19937_64 rng(4);
  IkSettings serial, parallel;
  parallel.exec = Exec::parallel;
  for (int trial = 0; trial < 5; ++trial) {
    const Config c = testing::random_config(spec, rng);
    const auto a = tip_jacobian(spec, c, serial);
    const auto b = tip_jacobian(spec, c, parallel);
    CHECK(a == b);
  }
}

TEST_CASE("a refinement step never increases the error and keeps the config valid") {
  const RobotSpec spec = testing::eight_robot();
  std::mt19937_64 rng(8);
  const IkSettings s;
  for (int trial = 0; trial < 20; ++trial) {
    Config c = testing::random_config(spec, rng);
    const Vec3 target = forward_tip(spec, testing::random_config(spec, rng)) + Vec3(0.0, 0.0, 0.01 * (trial % 3));
    Vec3 tip = forward_tip(spec, c, s.fk_steps);
    double err = (target - tip).norm();
    for (int k = 0; k < 15; ++k) {
      const IkStep step = ik_refine(spec, c, tip, target, s);
      CHECK(step.error <= err);
      CHECK_NOTHROW(validate(spec, step.config));
      c = step.config;
      tip = step.tip;
      err = step.error;
    }
  }
}

TEST_CASE("target equal to the current tip leaves the config unchanged") {
  const RobotSpec spec = testing::eight_robot();
  std::mt19937_64 rng(2);
  const Config c = testing::random_config(spec, rng);
  const IkSettings s;
  const Vec3 tip = forward_tip(spec, c, s.fk_steps);
  const IkStep step = ik_refine(spec, c, tip, tip, s);
  CHECK(step.config == c);
  CHECK(step.error == 0.0);
}

TEST_CASE("FK-generated targets are solved") {
  const RobotSpec spec = testing::eight_robot();
  std::mt19937_64 rng(21);
  const IkSettings s;
  int solved = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    const Vec3 target = forward_tip(spec, testing::random_config(spec, rng));
    const IkSolution sol = solve_ik(spec, home_config(spec), target, s);
    CHECK(sol.iterations <= s.max_iters);
    CHECK(sol.residual == doctest::Approx((forward_tip(spec, sol.config) - target).norm()).epsilon(1e-9));
    if (sol.residual < 1e-4) ++solved;
  }
  CHECK(solved >= trials - 1);
}

TEST_CASE("unreachable target reports its residual") {
  const RobotSpec spec = testing::eight_robot();
  const Vec3 far(0.0, 0.0, 0.5);
  const IkSolution sol = solve_ik(spec, home_config(spec), far, IkSettings{});
  CHECK(sol.residual == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("warm-started trajectory planning tracks a reachable segment") {
  const RobotSpec spec = testing::eight_robot();
  Config a = home_config(spec), b = home_config(spec);
  a.tensions << 4.0, 0.0, 0.0, 1.0, 0.0;
  b.tensions << 0.0, 4.0, 0.0, 0.0, 1.0;
  std::vector<Vec3> path;
  for (int i = 0; i <= 20; ++i) {
    Config c = a;
    c.tensions = a.tensions + (b.tensions - a.tensions) * (i / 20.0);
    path.push_back(forward_tip(spec, c));
  }
  const ConfigTrajectory plan = plan_config_trajectory(spec, path, home_config(spec), IkSettings{});
  REQUIRE(plan.waypoints.size() == path.size());
  REQUIRE(plan.tips.size() == path.size());
  CHECK(plan.mean_residual() < 1e-4);
  for (std::size_t i = 0; i < path.size(); ++i) {
    CHECK(plan.residuals[i] == doctest::Approx((plan.tips[i] - path[i]).norm()).epsilon(1e-9));
    CHECK(plan.tips[i] == forward_tip(spec, plan.waypoints[i]));
  }
}

TEST_CASE("settings are validated") {
  IkSettings s;
  s.damping = -1.0;
  CHECK_THROWS_AS(validate(s), Error);
  s = IkSettings{};
  s.max_iters = 0;
  CHECK_THROWS_AS(validate(s), Error);
}

}  // TEST_SUITE
