#include <doctest.h>

#include <cmath>
#include <numeric>

#include "infosample/csv.hpp"
#include "infosample/local_planner.hpp"
#include "infosample/random.hpp"
#include "support.hpp"

using namespace infosample;
using infosample::testing::open_world;
using infosample::testing::scratch;

namespace {

// Hand-built net that steers toward the goal bearing: the logit of class c is
// a * c * tanh(s * bearing) - c^2 / 2, peaking at the nearest bin.
SteeringNet pursuit_net(const SteeringBins& bins) {
  const int n = bins.count();
  SteeringNet net = SteeringNet::zeros(observation_length(bins), 4, n);
  const double s = 0.1;
  const double a = (kPi / bins.angle(1)) / s;
  net.w1(0, n) = s;
  for (int i = 0; i < n; ++i) {
    const int c = bins.steering_class(i);
    net.w2(i, 0) = a * c;
    net.b2[i] = -0.5 * c * c;
  }
  return net;
}

CloneDataset random_dataset(int inputs, int outputs, int n, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 2));
  CloneDataset d;
  for (int i = 0; i < n; ++i) {
    CloneSample s{Eigen::VectorXd(inputs), Eigen::VectorXd::Zero(outputs)};
    for (int j = 0; j < inputs; ++j) s.observation[j] = uniform(rng, -1.0, 1.0);
    for (int j = 0; j < outputs; ++j) s.label[j] = uniform01(rng);
    s.label /= s.label.sum();
    d.push_back(std::move(s));
  }
  return d;
}

Eigen::VectorXd mirror_input(const Eigen::VectorXd& x, int bins) {
  return Observation::from_vector(x, bins).mirrored().to_vector();
}

// Hidden units come in mirror pairs so that f(mirror x) = reverse f(x).
SteeringNet mirror_symmetric_net(const SteeringBins& bins, int pairs, std::uint64_t seed) {
  const int n = bins.count();
  const SteeringNet r = SteeringNet::random(observation_length(bins), pairs, n, seed);
  SteeringNet net = SteeringNet::zeros(observation_length(bins), 2 * pairs, n);
  for (int k = 0; k < pairs; ++k) {
    net.w1.row(k) = r.w1.row(k);
    net.w1.row(pairs + k) = mirror_input(r.w1.row(k).transpose(), n).transpose();
    net.b1[k] = net.b1[pairs + k] = 0.1 * (k % 3);
    net.w2.col(k) = r.w2.col(k);
    net.w2.col(pairs + k) = r.w2.col(k).reverse();
  }
  for (int i = 0; i < n; ++i) net.b2[i] = 0.05 * std::abs(bins.steering_class(i));
  return net;
}

SimWorld world_with(int w, int h, std::initializer_list<GridPose> blocked, ContinuousPose start) {
  GridArray<std::uint8_t> occ = GridArray<std::uint8_t>::Zero(h, w);
  for (const auto& c : blocked) occ(c.y, c.x) = 1;
  return SimWorld(ClassMap(GridArray<int>::Zero(h, w), 1), occ, start);
}

}  // namespace

TEST_SUITE("local_planner") {
  TEST_CASE("steering bins are antisymmetric") {
    const SteeringBins bins;
    CHECK(bins.count() == 15);
    CHECK(bins.angle(0) == 0.0);
    for (int c = 1; c <= bins.M; ++c) CHECK(bins.angle(-c) == -bins.angle(c));
    CHECK(bins.angle(bins.M) == doctest::Approx(kPi / 4));
    CHECK(bins.nearest(0.0) == 0);
    CHECK(bins.nearest(10.0) == bins.M);
    CHECK(bins.nearest(-bins.angle(3) - 0.01) == -3);
    CHECK(observation_length(bins) == 32);
  }

  TEST_CASE("label smoothing") {
    const SteeringBins bins;
    const Eigen::VectorXd hard = smooth_labels(bins, 0, 0.0);
    CHECK(hard[7] == 1.0);
    CHECK(hard.sum() == 1.0);
    const Eigen::VectorXd soft = smooth_labels(bins, 0, 0.2);
    CHECK(soft[6] == doctest::Approx(0.1));
    CHECK(soft[7] == doctest::Approx(0.8));
    CHECK(soft[8] == doctest::Approx(0.1));
    const Eigen::VectorXd edge = smooth_labels(bins, bins.M, 0.2);
    CHECK(edge[14] == doctest::Approx(0.8));
    CHECK(edge[13] == doctest::Approx(0.2));
    CHECK(edge.sum() == doctest::Approx(1.0));
    for (int c = -7; c <= 7; ++c) CHECK(smooth_labels(bins, c, 0.3).sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(smooth_labels(bins, 8, 0.2), ParameterError);
    CHECK_THROWS_AS(smooth_labels(bins, 0, 1.0), ParameterError);
  }

  TEST_CASE("observations round trip, mirror, and stay in range") {
    const SteeringBins bins;
    const SensorConfig sensor;
    DrivabilityTable table;
    const SimWorld open = open_world(30, 30, {15.5, 15.5, 0.7});
    const Observation far = observe(open, open.robot, 20.0, 3.0, table, bins, sensor);
    CHECK((far.ray_depths.array() == 1.0).all());
    CHECK((far.terrain_scores.array() == 0.5).all());

    const Episode e = make_random_episode(4);
    const Observation o = observe(e.world, e.world.robot, e.goal.x + 0.5, e.goal.y + 0.5, table, bins, sensor);
    CHECK(o.ray_depths.minCoeff() > 0.0);
    CHECK(o.ray_depths.maxCoeff() <= 1.0);
    CHECK(std::abs(o.goal_bearing) <= 1.0);
    CHECK(o.goal_distance >= 0.0);
    CHECK(o.goal_distance <= 1.0);
    const Eigen::VectorXd v = o.to_vector();
    CHECK(Observation::from_vector(v, 15).to_vector() == v);
    CHECK(o.mirrored().mirrored().to_vector() == v);
    CHECK(o.mirrored().ray_depths == o.ray_depths.reverse());
    CHECK(o.mirrored().goal_bearing == -o.goal_bearing);
  }

  TEST_CASE("zero weights predict the uniform distribution") {
    const SteeringNet net = SteeringNet::zeros(32, 8, 15);
    const Eigen::VectorXd f = predict(net, Eigen::VectorXd::Random(32));
    for (int i = 0; i < 15; ++i) CHECK(f[i] == doctest::Approx(1.0 / 15));
    CHECK_THROWS_AS(predict(net, Eigen::VectorXd::Zero(31)), ParameterError);
  }

  TEST_CASE("predictions match direct matrix arithmetic") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const SteeringNet net = SteeringNet::random(32, 32, 15, seed);
      Rng rng(mix_seed(seed));
      Eigen::VectorXd x(32);
      for (int i = 0; i < 32; ++i) x[i] = uniform(rng, -1.0, 1.0);
      const Eigen::VectorXd z = net.w2 * (net.w1 * x + net.b1).array().tanh().matrix() + net.b2;
      const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
      const Eigen::VectorXd oracle = e / e.sum();
      const Eigen::VectorXd f = predict(net, x);
      CHECK((f - oracle).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(std::abs(f.sum() - 1.0) < 1e-12);
    }
  }

  TEST_CASE("cross-entropy identities") {
    CloneDataset one{{Eigen::VectorXd::Zero(32), smooth_labels(SteeringBins{}, 2, 0.0)}};
    const SteeringNet uniform = SteeringNet::zeros(32, 8, 15);
    CHECK(clone_loss(uniform, one, 0.0, 0.0).loss == doctest::Approx(std::log(15.0)));

    SteeringNet sure = SteeringNet::zeros(32, 8, 15);
    sure.b2.setConstant(-30.0);
    sure.b2[9] = 30.0;
    CHECK(clone_loss(sure, one, 0.0, 0.0).loss < 1e-20);
  }

  TEST_CASE("loss with no penalties is the smoothed-label cross-entropy") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const SteeringNet net = SteeringNet::random(32, 16, 15, seed);
      const CloneDataset d = random_dataset(32, 15, 12, seed);
      double ce = 0.0;
      for (const auto& s : d) ce -= s.label.dot(predict(net, s.observation).array().log().matrix());
      CHECK(clone_loss(net, d, 0.0, 0.0).loss == doctest::Approx(ce).epsilon(1e-12));

      double entropy = 0.0;
      for (const auto& s : d) entropy += prediction_entropy(predict(net, s.observation));
      const double w2 = net.flatten().squaredNorm();
      CHECK(clone_loss(net, d, 0.3, 0.7).loss == doctest::Approx(ce - 0.7 * entropy + 0.3 * 0.5 * w2).epsilon(1e-12));
    }
  }

  TEST_CASE("backpropagation matches finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(mix_seed(seed, 4));
      const int hidden = 3 + uniform_index(rng, 6);
      SteeringNet net = SteeringNet::random(32, hidden, 15, seed + 1000);
      for (int i = 0; i < net.b1.size(); ++i) net.b1[i] = uniform(rng, -0.5, 0.5);
      for (int i = 0; i < net.b2.size(); ++i) net.b2[i] = uniform(rng, -0.5, 0.5);
      const CloneDataset d = random_dataset(32, 15, 1 + uniform_index(rng, 10), seed);
      const double l1 = uniform(rng, 0.0, 0.01), l2 = uniform(rng, 0.0, 0.5);
      const LossAndGradient lg = clone_loss(net, d, l1, l2);
      const Eigen::VectorXd p = net.flatten();
      Eigen::VectorXd fd(p.size());
      const double h = 1e-5;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        SteeringNet a = net, b = net;
        Eigen::VectorXd pp = p, pm = p;
        pp[i] += h;
        pm[i] -= h;
        a.assign(pp);
        b.assign(pm);
        fd[i] = (clone_loss(a, d, l1, l2).loss - clone_loss(b, d, l1, l2).loss) / (2 * h);
      }
      CHECK((lg.gradient - fd).norm() / std::max(lg.gradient.norm(), 1e-12) < 1e-5);
    }
  }

  TEST_CASE("flatten and assign are inverse") {
    SteeringNet net = SteeringNet::random(5, 3, 4, 1);
    SteeringNet other = SteeringNet::zeros(5, 3, 4);
    other.assign(net.flatten());
    CHECK(other.flatten() == net.flatten());
    CHECK(other.w1 == net.w1);
    CHECK(net.parameter_count() == 5 * 3 + 3 + 3 * 4 + 4);
    CHECK_THROWS_AS(other.assign(Eigen::VectorXd::Zero(3)), ParameterError);
  }

  TEST_CASE("a stronger entropy penalty never sharpens the trained net") {
    const LocalPlannerConfig cfg;
    DrivabilityTable table;
    CloneDataset data;
    for (std::uint64_t s = 0; s < 6; ++s) {
      const Episode e = make_random_episode(s + 500);
      drive(e.world, {e.goal}, expert_driver(table, cfg), table, cfg, NavLimits{},
            [&](const SimWorld& w, const Observation& o, GridPose wp) {
              data.push_back({o.to_vector(), smooth_labels(cfg.bins, expert_action(w, w.robot, wp, table, cfg), 0.0)});
            });
    }
    REQUIRE(data.size() > 50);
    double previous = -1.0;
    for (double l2 : {0.0, 0.1, 0.5}) {
      SteeringNet net = SteeringNet::random(32, 32, 15, 9);
      FitConfig fc;
      fc.epochs = 30;
      fc.lambda2 = l2;
      fit(net, data, fc);
      double h = 0.0;
      for (const auto& s : data) h += prediction_entropy(predict(net, s.observation));
      h /= double(data.size());
      CHECK(h >= previous);
      previous = h;
    }
  }

  TEST_CASE("training on mirror-augmented data keeps predictions mirror-equivariant") {
    const SteeringBins bins;
    SteeringNet net = mirror_symmetric_net(bins, 8, 3);
    const Eigen::VectorXd initial = net.flatten();
    CloneDataset data;
    Rng rng(mix_seed(21));
    for (int i = 0; i < 40; ++i) {
      Observation o;
      o.ray_depths = (Eigen::VectorXd::Random(15).array() * 0.5 + 0.5).matrix();
      o.terrain_scores = (Eigen::VectorXd::Random(15).array() * 0.5 + 0.5).matrix();
      o.goal_bearing = uniform(rng, -1.0, 1.0);
      o.goal_distance = uniform01(rng);
      const int c = uniform_index(rng, 15) - 7;
      data.push_back({o.to_vector(), smooth_labels(bins, c, 0.2)});
      data.push_back({o.mirrored().to_vector(), smooth_labels(bins, -c, 0.2)});
    }
    FitConfig fc;
    fc.epochs = 50;
    fc.batch_size = int(data.size());
    fit(net, data, fc);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd x = Eigen::VectorXd::Random(32);
      worst = std::max(worst, (predict(net, mirror_input(x, 15)) - predict(net, x).reverse()).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-6);
    CHECK((net.flatten() - initial).norm() > 0.1);
  }

  TEST_CASE("expert drives straight at a clear waypoint") {
    const LocalPlannerConfig cfg;
    const SimWorld w = open_world(20, 20, {2.5, 10.5, 0.0});
    CHECK(expert_action(w, w.robot, {15, 10}, DrivabilityTable(), cfg) == 0);
    CHECK_THROWS_AS(expert_action(w, w.robot, {25, 10}, DrivabilityTable(), cfg), ParameterError);
  }

  TEST_CASE("expert escapes through the only opening") {
    const LocalPlannerConfig cfg;
    const DrivabilityTable table;
    std::vector<GridPose> east_wall, west_wall;
    for (int y = 0; y < 12; ++y) {
      east_wall.push_back({6, y});
      west_wall.push_back({4, y});
    }
    auto build = [](const std::vector<GridPose>& wall, ContinuousPose start) {
      GridArray<std::uint8_t> occ = GridArray<std::uint8_t>::Zero(12, 12);
      for (const auto& c : wall) occ(c.y, c.x) = 1;
      return SimWorld(ClassMap(GridArray<int>::Zero(12, 12), 1), occ, start);
    };
    // Heading north-east against a wall on the right: only the leftmost ray (due north) is clear.
    const SimWorld left = build(east_wall, {5.95, 5.5, kPi / 4});
    CHECK(expert_action(left, left.robot, {10, 9}, table, cfg) == cfg.bins.M);
    // Mirror image: heading north-west against a wall on the left.
    const SimWorld right = build(west_wall, {5.05, 5.5, 3 * kPi / 4});
    CHECK(expert_action(right, right.robot, {1, 9}, table, cfg) == -cfg.bins.M);
  }

  TEST_CASE("expert presses on into a blocked waypoint cell but avoids other obstacles") {
    const LocalPlannerConfig cfg;
    const DrivabilityTable table;
    const SimWorld w = world_with(12, 12, {{3, 5}}, {1.5, 5.5, 0.0});
    CHECK(expert_action(w, w.robot, {3, 5}, table, cfg) == 0);
    CHECK(expert_action(w, w.robot, {8, 5}, table, cfg) != 0);
  }

  TEST_CASE("expert reaches random unblocked waypoints within twice the straight-line steps") {
    const LocalPlannerConfig cfg;
    const DrivabilityTable table;
    int within = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
      const Episode e = make_random_episode(700000 + s);
      const NavResult r = drive(e.world, {e.goal}, expert_driver(table, cfg), table, cfg, NavLimits{});
      const double straight = std::hypot(e.goal.x + 0.5 - e.world.robot.px, e.goal.y + 0.5 - e.world.robot.py);
      const double budget = 2.0 * straight / cfg.unicycle.speed;
      within += r.outcome == NavOutcome::Completed && double(r.trajectory.steps.size()) <= budget;
    }
    CHECK(within == 50);
  }

  TEST_CASE("navigation follows a chain of waypoints in open space") {
    const LocalPlannerConfig cfg;
    const SteeringNet net = pursuit_net(cfg.bins);
    const SimWorld w = open_world(22, 6, {1.5, 2.5, 0.0});
    const NavResult r = navigate(net, w, {{5, 2}, {10, 3}, {15, 2}, {20, 2}}, DrivabilityTable(), cfg);
    CHECK(r.outcome == NavOutcome::Completed);
    CHECK(r.collisions == 0);
    CHECK(r.waypoints_reached == 4);
    int steps = 0;
    for (const auto& f : r.feedback) steps += f.steps;
    CHECK(steps == int(r.trajectory.steps.size()));
  }

  TEST_CASE("an enclosed waypoint leaves the robot stuck") {
    const LocalPlannerConfig cfg;
    const SteeringNet net = pursuit_net(cfg.bins);
    std::vector<GridPose> ring;
    GridArray<std::uint8_t> occ = GridArray<std::uint8_t>::Zero(20, 20);
    for (int y = 8; y <= 12; ++y)
      for (int x = 8; x <= 12; ++x)
        if (x == 8 || x == 12 || y == 8 || y == 12) occ(y, x) = 1;
    const SimWorld w(ClassMap(GridArray<int>::Zero(20, 20), 1), occ, {2.5, 10.5, 0.0});
    NavLimits lim;
    const NavResult r = navigate(net, w, {{10, 10}}, DrivabilityTable(), cfg, lim);
    CHECK(r.outcome == NavOutcome::Stuck);
    CHECK(int(r.trajectory.steps.size()) < lim.max_steps);
    CHECK(r.waypoints_reached == 0);
  }

  TEST_CASE("navigation is deterministic") {
    const LocalPlannerConfig cfg;
    const SteeringNet net = SteeringNet::random(32, 32, 15, 5);
    const Episode e = make_random_episode(31);
    DrivabilityTable table;
    table.set(1, 0.2);
    const NavResult a = navigate(net, e.world, {e.goal}, table, cfg);
    const NavResult b = navigate(net, e.world, {e.goal}, table, cfg);
    CHECK(trajectory_csv(a.trajectory, e.world.class_map) == trajectory_csv(b.trajectory, e.world.class_map));
    CHECK(feedback_csv(a.feedback) == feedback_csv(b.feedback));
    CHECK(a.outcome == b.outcome);
    CHECK_THROWS_AS(navigate(net, e.world, {}, table, cfg), ParameterError);
  }

  TEST_CASE("DAgger bookkeeping") {
    const LocalPlannerConfig cfg;
    const DrivabilityTable table;
    CloneTrainConfig tc;
    tc.episodes_per_round = 4;
    tc.eval_episodes = 3;
    tc.fit.epochs = 3;
    auto gen = [](std::uint64_t s) { return make_random_episode(s); };

    tc.dagger_rounds = 1;
    const CloneTrainResult bc = train_clone(gen, table, cfg, tc);
    REQUIRE(bc.rounds.size() == 1);
    CHECK(bc.rounds[0].dataset_size == bc.dataset.size());
    // Round 0 is plain cloning of expert-driven episodes.
    for (const auto& s : bc.dataset) {
      const Observation o = Observation::from_vector(s.observation, 15);
      Eigen::Index best;
      s.label.maxCoeff(&best);
      CHECK(s.label.sum() == doctest::Approx(1.0));
      CHECK(s.label[best] == doctest::Approx(1.0 - tc.smoothing));
      CHECK(std::abs(o.goal_bearing) <= 1.0);
    }

    tc.dagger_rounds = 3;
    const CloneTrainResult dg = train_clone(gen, table, cfg, tc);
    REQUIRE(dg.rounds.size() == 3);
    CHECK(dg.rounds[0].dataset_size == bc.dataset.size());
    for (std::size_t i = 0; i < bc.dataset.size(); ++i) CHECK(dg.dataset[i].observation == bc.dataset[i].observation);
    CHECK(dg.rounds[1].dataset_size > dg.rounds[0].dataset_size);
    CHECK(dg.rounds[2].dataset_size > dg.rounds[1].dataset_size);
    CHECK(dg.rounds.back().dataset_size == dg.dataset.size());
    for (const auto& r : dg.rounds) {
      CHECK(r.success_rate >= 0.0);
      CHECK(r.success_rate <= 1.0);
    }
    CHECK(dg.net.finite());
  }

  TEST_CASE("steering net JSON and dataset CSV round trip") {
    const SteeringBins bins;
    const SteeringNet net = SteeringNet::random(32, 6, 15, 2);
    SteeringBins back_bins{3, 0.1};
    const SteeringNet back = parse_steering_net_json(steering_net_json(net, bins), &back_bins);
    CHECK(back.flatten() == net.flatten());
    CHECK(back_bins.M == bins.M);
    CHECK(back_bins.max_angle == bins.max_angle);

    const CloneDataset d = random_dataset(32, 15, 7, 3);
    const std::string path = scratch("dataset.csv");
    write_text(path, dataset_csv(d, bins));
    const CloneDataset e = read_dataset_csv(path, bins);
    REQUIRE(e.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(e[i].observation == d[i].observation);
      CHECK(e[i].label == d[i].label);
    }
    CHECK_THROWS_AS(read_dataset_csv(path, SteeringBins{3}), FormatError);
  }
}
