#include <doctest.h>

#include <cmath>

#include "infosample/random.hpp"
#include "infosample/scoremap.hpp"

using namespace infosample;

namespace {

TraversalFeedback feedback(int cls, double progress, int incidents, int steps) { return {cls, progress, incidents, steps}; }

}  // namespace

TEST_SUITE("scoremap") {
  TEST_CASE("uniform class map renders a uniform score map") {
    DrivabilityTable t;
    t.set(0, 0.8);
    const ScoreMap m = render_scoremap(ClassMap(GridArray<int>::Zero(4, 6), 1), t);
    CHECK(m.width() == 6);
    CHECK(m.height() == 4);
    CHECK((m.values().array() == 0.8).all());
  }

  TEST_CASE("checkerboard classes render a checkerboard") {
    GridArray<int> ids(5, 5);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) ids(y, x) = (x + y) % 2;
    DrivabilityTable t;
    t.set(0, 1.0);
    t.set(1, 0.0);
    const ScoreMap m = render_scoremap(ClassMap(ids, 2), t);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) CHECK(m.at(x, y) == ((x + y) % 2 ? 0.0 : 1.0));
  }

  TEST_CASE("rendering is a per-cell table lookup") {
    Rng rng(mix_seed(2));
    GridArray<int> ids(9, 13);
    for (Eigen::Index i = 0; i < ids.size(); ++i) ids.data()[i] = uniform_index(rng, 5);
    DrivabilityTable t;
    double scores[5];
    for (int c = 0; c < 4; ++c) {  // class 4 stays at the prior
      scores[c] = uniform01(rng);
      t.set(c, scores[c]);
    }
    scores[4] = 0.5;
    const ScoreMap m = render_scoremap(ClassMap(ids, 5), t);
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 13; ++x) CHECK(m.at(x, y) == scores[ids(y, x)]);
  }

  TEST_CASE("perfect traversal from the prior") {
    const DrivabilityTable t = update_drivability(DrivabilityTable(), feedback(0, 0.5, 0, 10));
    CHECK(t.score(0) == doctest::Approx(0.65));
    CHECK(t.observations(0) == 1);
  }

  TEST_CASE("fully blocked class decays geometrically") {
    DrivabilityTable t;
    t.set(2, 0.9);
    const DrivabilityTable u = update_drivability(t, feedback(2, 0.0, 7, 7));
    CHECK(u.score(2) == doctest::Approx(0.7 * 0.9));
  }

  TEST_CASE("unknown classes start from the prior") {
    DrivabilityTable::Config cfg;
    cfg.prior = 0.2;
    const DrivabilityTable t(cfg);
    CHECK(t.score(9) == 0.2);
    CHECK_FALSE(t.has(9));
    const DrivabilityTable u = update_drivability(t, feedback(9, 0.25, 0, 4));
    CHECK(u.score(9) == doctest::Approx(0.7 * 0.2 + 0.3 * 0.5));
    CHECK(u.has(9));
  }

  TEST_CASE("n identical updates match the closed form") {
    for (int n : {1, 2, 5, 17, 40}) {
      DrivabilityTable t;
      t.set(1, 0.9);
      const TraversalFeedback f = feedback(1, 0.2, 1, 8);  // d = 0.4 - 0.125
      const double d = 0.2 / 0.5 - 1.0 / 8.0;
      for (int i = 0; i < n; ++i) t = update_drivability(t, f);
      const double decay = std::pow(0.7, n);
      CHECK(t.score(1) == doctest::Approx(decay * 0.9 + (1 - decay) * d).epsilon(1e-12));
      CHECK(t.observations(1) == n);
    }
  }

  TEST_CASE("instantaneous drivability clamps") {
    const DrivabilityTable::Config cfg;
    CHECK(instantaneous_drivability(cfg, feedback(0, 2.0, 0, 3)) == 1.0);
    CHECK(instantaneous_drivability(cfg, feedback(0, -1.0, 3, 3)) == 0.0);
    CHECK_THROWS_AS(instantaneous_drivability(cfg, feedback(0, 0.1, 0, 0)), ParameterError);
  }

  TEST_CASE("scores stay in [0, 1] under random feedback") {
    Rng rng(mix_seed(10));
    DrivabilityTable t;
    for (int i = 0; i < 10000; ++i) {
      const int steps = 1 + uniform_index(rng, 50);
      t = update_drivability(t, feedback(uniform_index(rng, 6), uniform(rng, -5.0, 5.0), uniform_index(rng, steps + 1), steps));
      for (const auto& [id, e] : t.entries()) {
        REQUIRE(e.score >= 0.0);
        REQUIRE(e.score <= 1.0);
      }
    }
  }

  TEST_CASE("better feedback never lowers the updated score") {
    Rng rng(mix_seed(11));
    for (int i = 0; i < 2000; ++i) {
      DrivabilityTable t;
      t.set(0, uniform01(rng));
      const int steps = 1 + uniform_index(rng, 20);
      const int hits = uniform_index(rng, steps + 1);
      const double p = uniform(rng, -1.0, 1.0);
      const double q = p + uniform(rng, 0.0, 1.0);
      CHECK(update_drivability(t, feedback(0, q, hits, steps)).score(0) >=
            update_drivability(t, feedback(0, p, hits, steps)).score(0));
      if (hits > 0)
        CHECK(update_drivability(t, feedback(0, p, hits - 1, steps)).score(0) >=
              update_drivability(t, feedback(0, p, hits, steps)).score(0));
    }
  }

  TEST_CASE("repeated feedback converges to its drivability within 50 updates") {
    for (double s0 : {0.0, 0.5, 1.0}) {
      for (double progress : {0.0, 0.1, 0.35, 0.5}) {
        DrivabilityTable t;
        t.set(0, s0);
        const TraversalFeedback f = feedback(0, progress, 0, 5);
        const double d = instantaneous_drivability(t.config(), f);
        for (int i = 0; i < 50; ++i) t = update_drivability(t, f);
        CHECK(std::abs(t.score(0) - d) < 1e-6);
      }
    }
  }

  TEST_CASE("table configuration and entries are validated") {
    DrivabilityTable::Config bad;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(DrivabilityTable{bad}, ParameterError);
    DrivabilityTable t;
    CHECK_THROWS_AS(t.set(0, 1.5), ParameterError);
    CHECK_THROWS_AS(t.set(-1, 0.5), ParameterError);
  }

  TEST_CASE("drivability JSON round trip") {
    DrivabilityTable::Config cfg;
    cfg.alpha = 0.25;
    cfg.beta = 2.0;
    cfg.prior = 0.4;
    DrivabilityTable t(cfg);
    t.set(0, 0.125, 3);
    t.set(5, 0.9, 1);
    const DrivabilityTable u = parse_drivability_json(drivability_json(t));
    CHECK(u.config().alpha == 0.25);
    CHECK(u.config().beta == 2.0);
    CHECK(u.config().prior == 0.4);
    CHECK(u.score(0) == 0.125);
    CHECK(u.observations(0) == 3);
    CHECK(u.score(5) == 0.9);
    CHECK(u.score(3) == 0.4);
    CHECK(drivability_json(u) == drivability_json(t));
  }
}
