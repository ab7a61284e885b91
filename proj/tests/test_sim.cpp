#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "tvdcov/sim.hpp"

using namespace tvdcov;

namespace {

const Domain kUnit = Domain::box(-1, -1, 1, 1);
const Domain kBox = Domain::box(-3, -3, 3, 3);

DensityField static_phi1() {
  GaussianComponent g;
  g.inverse_scales = Point(1.0, 1.0 / 16.0);
  return DensityField({g});
}

Scenario scenario(const DensityField& f, ControllerSpec c, std::vector<Point> start, double duration, double dt) {
  Scenario sc;
  sc.density = f;
  sc.controller = c;
  sc.initial_positions = std::move(start);
  sc.robot_count = sc.initial_positions.size();
  sc.init_cvt.enabled = false;
  sc.duration = duration;
  sc.dt = dt;
  sc.log_lambda_max = false;
  return sc;
}

}  // namespace

TEST(LocationalCost, UniformSquare) {
  const DensityField flat({}, 1.0);
  EXPECT_NEAR(locational_cost(tessellate({Point(0, 0)}, kUnit), flat, 0.0, Quadrature()), 8.0 / 3.0, 1e-13);
  EXPECT_NEAR(locational_cost(tessellate({Point(-0.5, 0), Point(0.5, 0)}, kUnit), flat, 0.0, Quadrature()),
              5.0 / 3.0, 1e-13);
}

TEST(LocationalCost, MatchesGridOracle) {
  std::mt19937_64 rng(41);
  const DensityField f = builtin_density("phi2");
  for (int trial = 0; trial < 3; ++trial) {
    const auto p = oracle::random_points(rng, 5, -2.9, 2.9, 0.2);
    const double t = 2.5 * trial;
    const DensitySnapshot phi = f.at(t);
    const auto grid = oracle::grid_moments(p, [&](const Point& q) { return phi.value(q); }, -3, 3, 1500);
    double expect = 0.0;
    for (double c : grid.cost) expect += c;
    const double got = locational_cost(tessellate(p, kBox), f, t, Quadrature());
    EXPECT_NEAR(got / expect, 1.0, 1e-3);
    // The cost also falls out of the moment pass.
    EXPECT_NEAR(moments(tessellate(p, kBox), f, t, Quadrature()).locational_cost(), got, 1e-12 * got);
  }
}

TEST(CostGradient, UniformTwoRobot) {
  const DensityField flat({}, 1.0);
  const auto t = tessellate({Point(-0.4, 0), Point(0.5, 0)}, kUnit);
  const MomentSet ms = moments(t, flat, 0.0, Quadrature());
  // Bisector at x = 0.05: cell 1 is [-1, 0.05] x [-1, 1].
  const double m = 2.0 * 1.05;
  const Point c(-0.475, 0);
  const auto g = cost_gradient(t, ms);
  EXPECT_LT((g[0] - 2.0 * m * (Point(-0.4, 0) - c)).norm(), 1e-12);
  EXPECT_GT(g[0].x(), 0.0);
}

TEST(CostGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(42);
  QuadratureConfig cfg;
  cfg.subdivision_depth = 3;
  const Quadrature quad(cfg);
  for (const char* name : {"phi1", "phi2", "phi5"}) {
    const DensityField f = builtin_density(name);
    const auto p = oracle::random_points(rng, 6, -2.9, 2.9, 0.3);
    const auto g = cost_gradient(tessellate(p, kBox), moments(tessellate(p, kBox), f, 1.0, quad));
    double scale = 0.0;
    for (const auto& v : g) scale = std::max(scale, v.norm());
    const double h = 1e-5;
    for (std::size_t i = 0; i < p.size(); ++i)
      for (int a = 0; a < 2; ++a) {
        auto pp = p, pm = p;
        pp[i][a] += h;
        pm[i][a] -= h;
        const double fd = (locational_cost(tessellate(pp, kBox), f, 1.0, quad) -
                           locational_cost(tessellate(pm, kBox), f, 1.0, quad)) /
                          (2 * h);
        EXPECT_NEAR(g[i][a], fd, 1e-4 * scale) << name;
      }
  }
}

TEST(CostGradient, ZeroAtCvt) {
  InitCvtConfig cfg;
  cfg.tolerance = 1e-10;
  std::mt19937_64 rng(43);
  const auto cvt =
      init_cvt(oracle::random_points(rng, 4, -2.9, 2.9, 0.3), static_phi1(), 0.0, kBox, Quadrature(), cfg);
  ASSERT_TRUE(cvt.converged);
  const auto t = tessellate(cvt.positions, kBox);
  for (const auto& g : cost_gradient(t, moments(t, static_phi1(), 0.0, Quadrature()))) EXPECT_LT(g.norm(), 1e-8);
}

TEST(Step, ZeroFieldLeavesPositionsUnchanged) {
  const Dynamics dyn{kUnit, DensityField({}, 1.0), {ControllerKind::TvdC, 0}, 1.0, 5.0, Quadrature()};
  const std::vector<Point> p{Point(-0.5, 0), Point(0.5, 0)};
  const StepResult r = step(dyn, p, 0.0, 0.1);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LT((r.positions[i] - p[i]).norm(), 1e-14);
  EXPECT_EQ(r.clamp_events, 0);
}

// A narrow Gaussian translating at constant velocity v, with a lone robot on
// its center: under tvd_c every stage velocity is v, so one RK4 step moves the
// robot by exactly v dt (up to quadrature error).
TEST(Step, ConstantVelocityIsExact) {
  const Point v(0.3, -0.2);
  GaussianComponent g;
  g.inverse_scales = Point(20, 20);
  WaypointPath line;
  line.knots.push_back({0.0, {Point(-0.5, 0.2), v, Point::Zero()}});
  line.knots.push_back({10.0, {Point(-0.5, 0.2) + 10.0 * v, v, Point::Zero()}});
  g.path = line;
  QuadratureConfig cfg;
  cfg.subdivision_depth = 5;
  const Dynamics dyn{kBox, DensityField({g}, 1e-300), {ControllerKind::TvdC, 0}, 1.0, 100.0, Quadrature(cfg)};
  const Point p0(-0.5, 0.2);
  const StepResult r = step(dyn, {p0}, 0.0, 0.5);
  EXPECT_LT((r.positions[0] - (p0 + 0.5 * v)).norm(), 1e-9);
}

TEST(Step, ClampsIntoDomain) {
  // Overshooting stages (kappa dt = 10) carry the update past the wall.
  const Dynamics dyn{kUnit, DensityField({}, 1.0), {ControllerKind::Lloyd, 0}, 20.0, 100.0, Quadrature()};
  const StepResult r = step(dyn, {Point(0.9, 0)}, 0.0, 0.5);
  EXPECT_EQ(r.clamp_events, 1);
  EXPECT_TRUE(kUnit.contains(r.positions[0], 0.0));
}

TEST(Step, FourthOrderInDt) {
  const DensityField f = builtin_density("phi2");
  std::mt19937_64 rng(44);
  const auto start = oracle::random_points(rng, 4, -2, 2, 0.5);
  auto final_positions = [&](double dt) {
    return run(scenario(f, {ControllerKind::Lloyd, 0}, start, 0.8, dt)).positions.back();
  };
  const auto ref = final_positions(0.0125);
  std::vector<double> err;
  for (double dt : {0.1, 0.05, 0.025}) {
    const auto p = final_positions(dt);
    double e = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) e = std::max(e, (p[i] - ref[i]).norm());
    err.push_back(e);
  }
  // Richardson: e(dt) ~ C dt^4 (1 - 2^-4 ...) so successive ratios approach 16.
  EXPECT_GT(err[0] / err[1], 12.0);
  EXPECT_GT(err[1] / err[2], 12.0);
}

TEST(InitCvt, AlreadyCentroidalReturnsImmediately) {
  const std::vector<Point> p{Point(-0.5, 0), Point(0.5, 0)};
  const auto r = init_cvt(p, DensityField({}, 1.0), 0.0, kUnit, Quadrature(), {});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.positions, p);
}

TEST(InitCvt, UniformTwoRobotCvt) {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 5; ++trial) {
    const auto r = init_cvt(oracle::random_points(rng, 2, -0.9, 0.9, 0.1), DensityField({}, 1.0), 0.0, kUnit,
                            Quadrature(), {});
    ASSERT_TRUE(r.converged);
    EXPECT_LT(r.residual, 1e-6);
    // Any CVT of two robots in a square: symmetric about the origin, half a unit out.
    EXPECT_LT((r.positions[0] + r.positions[1]).norm(), 1e-5);
    const double radius = r.positions[0].norm();
    EXPECT_TRUE(std::abs(radius - 0.5) < 1e-5 || std::abs(radius - std::sqrt(2.0) / 3.0) < 1e-5) << radius;
  }
}

TEST(InitCvt, Phi1FiveRobots) {
  const auto r = init_cvt(random_positions(kBox, 5, 1), builtin_density("phi1"), 0.0, kBox, Quadrature(), {});
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.residual, 1e-6);
}

TEST(InitCvt, BudgetExhaustedReturnsBest) {
  InitCvtConfig cfg;
  cfg.max_steps = 3;
  const auto r = init_cvt(random_positions(kBox, 5, 1), builtin_density("phi1"), 0.0, kBox, Quadrature(), cfg,
                          true);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3);
  ASSERT_EQ(r.cost_history.size(), 4u);
  for (std::size_t k = 1; k < r.cost_history.size(); ++k) EXPECT_LE(r.cost_history[k], r.cost_history[k - 1]);
  EXPECT_GT(r.residual, 0.0);
}

TEST(Run, ZeroDurationHasOneSample) {
  Scenario sc;
  sc.duration = 0.0;
  const SimTrace tr = run(sc);
  EXPECT_EQ(tr.size(), 1u);
  EXPECT_EQ(tr.total_cost, 0.0);
  EXPECT_EQ(tr.times[0], 0.0);
}

TEST(Run, LyapunovDecreaseUnderLloyd) {
  const DensityField f = static_phi1();
  for (std::uint64_t seed : {3u, 4u}) {
    const SimTrace tr = run(scenario(f, {ControllerKind::Lloyd, 0}, random_positions(kBox, 5, seed), 20.0, 0.02));
    for (std::size_t k = 1; k < tr.size(); ++k) EXPECT_LE(tr.cost[k], tr.cost[k - 1] + 1e-9) << "sample " << k;
    EXPECT_LT(tr.tracking_error.back(), tr.tracking_error.front());
  }
}

TEST(Run, TotalCostIsTrapezoidal) {
  Scenario sc = scenario(builtin_density("phi2"), {ControllerKind::Cortes, 0}, random_positions(kBox, 5, 2), 0.5,
                         0.01);
  const SimTrace tr = run(sc);
  double expect = 0.0;
  for (std::size_t k = 1; k < tr.size(); ++k)
    expect += 0.5 * (tr.times[k] - tr.times[k - 1]) * (tr.cost[k] + tr.cost[k - 1]);
  EXPECT_NEAR(tr.total_cost, expect, 1e-12 * expect);
  EXPECT_GT(tr.total_cost, 0.0);
  for (std::size_t k = 1; k < tr.size(); ++k) EXPECT_GT(tr.times[k], tr.times[k - 1]);
}

TEST(Run, SampleEveryThins) {
  Scenario sc = scenario(builtin_density("phi2"), {ControllerKind::Lloyd, 0}, random_positions(kBox, 3, 2), 0.1,
                         0.01);
  sc.sample_every = 4;
  const SimTrace tr = run(sc);
  ASSERT_EQ(tr.size(), 4u);  // steps 0, 4, 8 and the final step 10
  EXPECT_NEAR(tr.times.back(), 0.1, 1e-15);
  sc.sample_every = 1;
  EXPECT_NEAR(run(sc).total_cost, tr.total_cost, 1e-15);
}

TEST(Run, DeterministicCsv) {
  Scenario sc;
  sc.duration = 0.3;
  sc.seed = 9;
  EXPECT_EQ(trace_csv(run(sc)), trace_csv(run(sc)));
}

TEST(Run, CsvHeader) {
  Scenario sc;
  sc.robot_count = 2;
  sc.duration = 0.01;
  const std::string csv = trace_csv(run(sc));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,p_1x,p_1y,p_2x,p_2y,H,max_tracking_error,lambda_max,condition_flag");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Run, LambdaLoggedOnlyWhenAsked) {
  Scenario sc;
  sc.duration = 0.02;
  sc.controller = {ControllerKind::Lloyd, 0};
  sc.log_lambda_max = true;
  EXPECT_FALSE(std::isnan(run(sc).lambda_max[0]));
  sc.log_lambda_max = false;
  EXPECT_TRUE(std::isnan(run(sc).lambda_max[0]));
}

TEST(Scenario, ValidationRejects) {
  Scenario sc;
  sc.dt = 0.0;
  EXPECT_THROW(sc.validate(), Error);
  sc = {};
  sc.duration = -1.0;
  EXPECT_THROW(sc.validate(), Error);
  sc = {};
  sc.robot_count = 0;
  EXPECT_THROW(sc.validate(), Error);
  sc = {};
  sc.initial_positions = {Point(0, 0)};
  EXPECT_THROW(sc.validate(), Error);
  EXPECT_NO_THROW(Scenario{}.validate());
}

TEST(RandomPositions, InsideAndSeeded) {
  const auto a = random_positions(kBox, 20, 7), b = random_positions(kBox, 20, 7), c = random_positions(kBox, 20, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (const auto& p : a) EXPECT_TRUE(kBox.contains(p, 1e-2));
}

TEST(Unicycle, Examples) {
  auto u = unicycle_map(Point(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(u.v, 1.0);
  EXPECT_DOUBLE_EQ(u.omega, 0.0);
  u = unicycle_map(Point(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(u.v, 1.0);
  EXPECT_DOUBLE_EQ(u.omega, 1.0);
  u = unicycle_map(Point(0, 0), 1.3);
  EXPECT_EQ(u.v, 0.0);
  EXPECT_EQ(u.omega, 0.0);
  u = unicycle_map(Point(0, -2), std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(u.v, 2.0);
  EXPECT_NEAR(u.omega, 0.0, 1e-15);
}
