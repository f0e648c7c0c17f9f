#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "infosample/random.hpp"
#include "infosample/synthetic.hpp"
#include "support.hpp"

using namespace infosample;
using infosample::testing::open_world;

namespace {

// Entry distance of the ray into the box [x0, x1) x [y0, y1), or +inf.
struct Interval {
  double enter = std::numeric_limits<double>::infinity();
  double exit = -std::numeric_limits<double>::infinity();
};

Interval slab(double ox, double oy, double dx, double dy, double x0, double y0, double x1, double y1) {
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  auto axis = [&](double o, double d, double a, double b) {
    if (std::abs(d) < 1e-15) {
      if (o < a || o >= b) hi = -1.0;
      return;
    }
    double t0 = (a - o) / d, t1 = (b - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  };
  axis(ox, dx, x0, x1);
  axis(oy, dy, y0, y1);
  if (hi <= lo) return {};
  return {lo, hi};
}

// Ray-box oracle over every occupied cell plus the map boundary. `first` is
// the earliest contact; `solid` ignores cells the ray only clips for less than
// one march step, which fixed-step marching can legitimately miss.
struct RayTruth {
  double first = std::numeric_limits<double>::infinity();
  double solid = std::numeric_limits<double>::infinity();
};

RayTruth ray_truth(const SimWorld& w, double ox, double oy, double a) {
  const double dx = std::cos(a), dy = std::sin(a);
  RayTruth t;
  const Interval inside = slab(ox, oy, dx, dy, 0.0, 0.0, w.width(), w.height());
  t.first = t.solid = inside.exit;
  for (int y = 0; y < w.height(); ++y) {
    for (int x = 0; x < w.width(); ++x) {
      if (!w.obstacles(y, x)) continue;
      const Interval c = slab(ox, oy, dx, dy, x, y, x + 1, y + 1);
      if (c.exit < c.enter) continue;
      t.first = std::min(t.first, c.enter);
      if (c.exit - c.enter >= kRayStep + 1e-9) t.solid = std::min(t.solid, c.enter);
    }
  }
  return t;
}

SimWorld random_obstacle_world(std::uint64_t seed, int w, int h, double density) {
  Rng rng(mix_seed(seed));
  GridArray<std::uint8_t> occ(h, w);
  for (Eigen::Index i = 0; i < occ.size(); ++i) occ.data()[i] = uniform01(rng) < density ? 1 : 0;
  occ(h / 2, w / 2) = 0;
  GridArray<int> cls(h, w);
  for (Eigen::Index i = 0; i < cls.size(); ++i) cls.data()[i] = uniform_index(rng, 2);
  return SimWorld(ClassMap(cls, 2), occ, {w / 2 + 0.5, h / 2 + 0.5, 0.0});
}

}  // namespace

TEST_SUITE("gridworld") {
  TEST_CASE("straight motion advances along the heading") {
    SimWorld w = open_world(10, 10, {5.0, 5.0, 0.0});
    const StepResult r = step_unicycle(w, 0.0, 1.0);
    CHECK_FALSE(r.collided);
    CHECK(r.pose.px == doctest::Approx(6.0));
    CHECK(r.pose.py == doctest::Approx(5.0));
    CHECK(r.pose.heading == 0.0);
    CHECK(r.cell_entered == GridPose{6, 5});
    CHECK(w.step_count == 1);
  }

  TEST_CASE("quarter turn then advance") {
    SimWorld w = open_world(10, 10, {5.0, 5.0, 0.0});
    const StepResult r = step_unicycle(w, kPi / 2, 1.0, kPi / 2);
    CHECK(r.pose.heading == doctest::Approx(kPi / 2));
    CHECK(r.pose.px == doctest::Approx(5.0));
    CHECK(r.pose.py == doctest::Approx(6.0));
  }

  TEST_CASE("blocked move keeps the position and applies the turn") {
    GridArray<std::uint8_t> occ = GridArray<std::uint8_t>::Zero(10, 10);
    occ(5, 6) = 1;
    SimWorld w(ClassMap(GridArray<int>::Zero(10, 10), 1), occ, {5.5, 5.5, 0.1});
    const StepResult r = step_unicycle(w, -0.1, 1.0);
    CHECK(r.collided);
    CHECK(r.pose.px == 5.5);
    CHECK(r.pose.py == 5.5);
    CHECK(r.pose.heading == doctest::Approx(0.0));
    CHECK(r.cell_entered == GridPose{6, 5});

    SimWorld edge = open_world(10, 10, {9.5, 5.5, 0.0});
    const StepResult off = step_unicycle(edge, 0.0, 1.0);
    CHECK(off.collided);
    CHECK(off.cell_entered == GridPose{9, 5});
  }

  TEST_CASE("step arguments are validated") {
    SimWorld w = open_world(5, 5, {2.5, 2.5, 0.0});
    CHECK_THROWS_AS(step_unicycle(w, 1.0, 0.5), ParameterError);
    CHECK_THROWS_AS(step_unicycle(w, 0.0, 0.0), ParameterError);
    CHECK_THROWS_AS(SimWorld(ClassMap(GridArray<int>::Zero(3, 3), 1), GridArray<std::uint8_t>::Ones(3, 3),
                             {1.5, 1.5, 0.0}),
                    InvalidState);
    CHECK_THROWS_AS(SimWorld(ClassMap(GridArray<int>::Zero(3, 3), 1), GridArray<std::uint8_t>::Zero(2, 3),
                             {1.5, 1.5, 0.0}),
                    ParameterError);
  }

  TEST_CASE("heading wraps into [-pi, pi)") {
    CHECK(wrap_angle(kPi) == doctest::Approx(-kPi));
    CHECK(wrap_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
    CHECK(wrap_angle(-kPi) == doctest::Approx(-kPi));
    for (double a = -20.0; a < 20.0; a += 0.37) {
      const double w = wrap_angle(a);
      CHECK(w >= -kPi);
      CHECK(w < kPi);
      CHECK(std::remainder(w - a, 2 * kPi) == doctest::Approx(0.0).epsilon(1e-9));
    }
  }

  TEST_CASE("ray in an empty world reaches max range") {
    const SimWorld w = open_world(30, 30, {15.5, 15.5, 0.3});
    for (double off = -1.0; off <= 1.0; off += 0.25) CHECK(ray_cast(w, w.robot, off, 6.0) == 6.0);
  }

  TEST_CASE("ray to an axis-aligned wall") {
    GridArray<std::uint8_t> occ = GridArray<std::uint8_t>::Zero(10, 20);
    occ.col(8).setOnes();
    const SimWorld w(ClassMap(GridArray<int>::Zero(10, 20), 1), occ, {5.0, 5.5, 0.0});
    CHECK(std::abs(ray_cast(w, w.robot, 0.0, 8.0) - 3.0) <= 0.5 * kRayStep + 1e-12);
    CHECK_THROWS_AS(ray_cast(w, {8.5, 5.5, 0.0}, 0.0, 8.0), InvalidState);
    CHECK_THROWS_AS(ray_cast(w, w.robot, 0.0, 0.0), ParameterError);
  }

  TEST_CASE("ray cast agrees with a line-box intersection oracle") {
    int agreements = 0, rays = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const SimWorld w = random_obstacle_world(seed, 16, 12, 0.2);
      Rng rng(mix_seed(seed, 99));
      for (int i = 0; i < 60; ++i) {
        const double a = uniform(rng, -kPi, kPi);
        const double range = 6.0;
        const double r = ray_cast(w, w.robot, a, range);
        const RayTruth t = ray_truth(w, w.robot.px, w.robot.py, a);
        ++rays;
        CHECK(r > 0.0);
        CHECK(r <= range);
        if (t.first >= range) {
          CHECK(r == range);
          ++agreements;
          continue;
        }
        CHECK(r >= t.first - 0.5 * kRayStep - 1e-9);
        CHECK(r <= std::min(range, t.solid + 0.5 * kRayStep + 1e-9));
        if (std::abs(r - t.first) <= 0.5 * kRayStep + 1e-9) ++agreements;
      }
    }
    // Grazes are the exception, not the rule.
    CHECK(agreements >= rays * 9 / 10);
  }

  TEST_CASE("no step ever ends inside an obstacle") {
    const Episode e = make_random_episode(5, RandomWorldConfig{30, 30, 10, 20, 4});
    SimWorld w = e.world;
    Rng rng(mix_seed(17));
    long collisions = 0;
    for (int i = 0; i < 100000; ++i) {
      const StepResult r = step_unicycle(w, uniform(rng, -kPi / 4, kPi / 4), 0.5);
      collisions += r.collided;
      const GridPose c = w.robot.cell();
      REQUIRE(w.in_bounds(c));
      REQUIRE(w.obstacles(c.y, c.x) == 0);
      REQUIRE(w.robot.heading >= -kPi);
      REQUIRE(w.robot.heading < kPi);
    }
    CHECK(collisions > 0);
  }

  TEST_CASE("feedback of a straight unobstructed run") {
    const ClassMap cm(GridArray<int>::Zero(3, 12), 1);
    Trajectory t;
    t.start = {0.5, 0.5, 0.0};
    for (int i = 1; i <= 5; ++i) t.steps.push_back({{0.5 + i, 0.5, 0.0}, false, {i, 0}});
    const auto fb = measure_feedback(t, {10, 0}, cm);
    REQUIRE(fb.size() == 1);
    CHECK(fb[0].class_id == 0);
    CHECK(fb[0].progress_rate == doctest::Approx(1.0));
    CHECK(fb[0].obstacle_incidents == 0);
    CHECK(fb[0].steps == 5);
  }

  TEST_CASE("feedback of a robot pinned against the border") {
    SimWorld w = open_world(6, 6, {0.2, 2.5, kPi});
    Trajectory t;
    t.start = w.robot;
    for (int i = 0; i < 4; ++i) {
      const StepResult r = step_unicycle(w, 0.0, 0.5);
      t.steps.push_back({r.pose, r.collided, r.cell_entered});
    }
    const auto fb = measure_feedback(t, {5, 2}, w.class_map);
    REQUIRE(fb.size() == 1);
    CHECK(fb[0].progress_rate == 0.0);
    CHECK(fb[0].obstacle_incidents == 4);
    CHECK(fb[0].steps == 4);
    CHECK_THROWS_AS(measure_feedback(Trajectory{}, {1, 1}, w.class_map), ParameterError);
  }

  TEST_CASE("mixed-class feedback equals a direct per-class decomposition") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      SimWorld w = random_obstacle_world(seed + 100, 14, 14, 0.15);
      Rng rng(mix_seed(seed, 5));
      Trajectory t;
      t.start = w.robot;
      for (int i = 0; i < 200; ++i) {
        const StepResult r = step_unicycle(w, uniform(rng, -kPi / 4, kPi / 4), 0.5);
        t.steps.push_back({r.pose, r.collided, r.cell_entered});
      }
      const GridPose goal{1, 12};
      const auto fb = measure_feedback(t, goal, w.class_map);

      double progress[2] = {0, 0};
      int incidents[2] = {0, 0}, steps[2] = {0, 0};
      ContinuousPose prev = t.start;
      for (const auto& s : t.steps) {
        const int c = w.class_map(s.cell);
        progress[c] += std::hypot(goal.x + 0.5 - prev.px, goal.y + 0.5 - prev.py) -
                       std::hypot(goal.x + 0.5 - s.pose.px, goal.y + 0.5 - s.pose.py);
        incidents[c] += s.collided;
        steps[c] += 1;
        prev = s.pose;
      }
      int total = 0;
      for (const auto& f : fb) {
        CHECK(f.steps == steps[f.class_id]);
        CHECK(f.obstacle_incidents == incidents[f.class_id]);
        CHECK(f.progress_rate == doctest::Approx(progress[f.class_id] / steps[f.class_id]).epsilon(1e-12));
        total += f.steps;
      }
      CHECK(total == int(t.steps.size()));
    }
  }

  TEST_CASE("accumulators merge into the same totals") {
    FeedbackAccumulator a, b, all;
    Rng rng(mix_seed(3));
    for (int i = 0; i < 500; ++i) {
      const int c = uniform_index(rng, 4);
      const double p = uniform(rng, -0.5, 0.5);
      const bool hit = uniform01(rng) < 0.2;
      (i % 2 ? a : b).add(c, p, hit);
      all.add(c, p, hit);
    }
    a.merge(b);
    CHECK(a.total_steps() == 500);
    const auto x = a.result(), y = all.result();
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(x[i].steps == y[i].steps);
      CHECK(x[i].obstacle_incidents == y[i].obstacle_incidents);
      CHECK(x[i].progress_rate == doctest::Approx(y[i].progress_rate).epsilon(1e-12));
    }
  }

  TEST_CASE("same world and actions give byte-identical trajectory logs") {
    auto run = [] {
      SimWorld w = random_obstacle_world(42, 20, 20, 0.1);
      Rng rng(mix_seed(8));
      Trajectory t;
      t.start = w.robot;
      for (int i = 0; i < 300; ++i) {
        const StepResult r = step_unicycle(w, uniform(rng, -kPi / 4, kPi / 4), 0.5);
        t.steps.push_back({r.pose, r.collided, r.cell_entered});
      }
      return trajectory_csv(t, w.class_map);
    };
    CHECK(run() == run());
  }
}
