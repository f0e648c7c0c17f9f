#include "infosample/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "infosample/csv.hpp"
#include "infosample/image_io.hpp"
#include "infosample/random.hpp"
#include "infosample/synthetic.hpp"

namespace fs = std::filesystem;

namespace infosample {
namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::map<int, double> class_map_of(const nlohmann::json& j) {
  std::map<int, double> out;
  for (const auto& [k, v] : j.items()) out[std::stoi(k)] = v.get<double>();
  return out;
}

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& base_dir,
                                         std::optional<std::uint64_t> seed) {
  const auto j = nlohmann::json::parse(text);
  ExperimentConfig c;
  if (!seed && j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
  if (seed) {
    c.segment.seed = mix_seed(*seed, 1);
    c.planner.seed = mix_seed(*seed, 2);
    c.world_seed = mix_seed(*seed, 3);
    c.local_train.seed = mix_seed(*seed, 4);
  }
  get_if(j, "image", c.image);
  get_if(j, "output_dir", c.output_dir);
  get_if(j, "loop_count", c.loop_count);
  c.image = resolve(base_dir, c.image);
  c.output_dir = resolve(base_dir, c.output_dir);

  if (j.contains("texture")) {
    const auto& t = j.at("texture");
    get_if(t, "k", c.segment.k);
    get_if(t, "patch", c.segment.patch_size);
    get_if(t, "seed", c.segment.seed);
    get_if(t, "hue_bins", c.segment.hue_bins);
    get_if(t, "orientations", c.bank.orientations);
    get_if(t, "wavelengths", c.bank.wavelengths);
    get_if(t, "sigma_ratio", c.bank.sigma_ratio);
    get_if(t, "aspect_ratio", c.bank.aspect_ratio);
    get_if(t, "kernel_size", c.bank.kernel_size);
  }
  if (j.contains("scoremap")) {
    const auto& s = j.at("scoremap");
    get_if(s, "alpha", c.drivability.alpha);
    get_if(s, "beta", c.drivability.beta);
    get_if(s, "prior", c.drivability.prior);
    get_if(s, "nominal_speed", c.drivability.nominal_speed);
    if (s.contains("initial_scores")) c.initial_scores = class_map_of(s.at("initial_scores"));
  }
  if (j.contains("global_planner")) {
    const auto& g = j.at("global_planner");
    get_if(g, "iters", c.planner.iterations);
    get_if(g, "m", c.planner.rollouts_per_iteration);
    get_if(g, "horizon", c.planner.horizon);
    get_if(g, "lr", c.planner.learning_rate);
    get_if(g, "seed", c.planner.seed);
    get_if(g, "stride", c.waypoint_stride);
    if (g.contains("start")) {
      const auto s = g.at("start").get<std::vector<int>>();
      if (s.size() != 2) throw ParameterError("start must be [x, y]");
      c.planner.start = {s[0], s[1]};
    }
  }
  if (j.contains("sim")) {
    const auto& s = j.at("sim");
    get_if(s, "obstacles", c.obstacles_pgm);
    c.obstacles_pgm = resolve(base_dir, c.obstacles_pgm);
    if (s.contains("obstacle_density")) c.obstacle_density = class_map_of(s.at("obstacle_density"));
    get_if(s, "seed", c.world_seed);
    get_if(s, "speed", c.local.unicycle.speed);
    get_if(s, "max_steering", c.local.unicycle.max_steering);
    c.local.bins.max_angle = c.local.unicycle.max_steering;
  }
  if (j.contains("local_planner")) {
    const auto& l = j.at("local_planner");
    get_if(l, "net", c.local_net);
    c.local_net = resolve(base_dir, c.local_net);
    get_if(l, "M", c.local.bins.M);
    get_if(l, "max_range", c.local.sensor.max_range);
    get_if(l, "hidden", c.local.hidden);
    get_if(l, "max_steps", c.limits.max_steps);
    get_if(l, "stuck_window", c.limits.stuck_window);
    get_if(l, "rounds", c.local_train.dagger_rounds);
    get_if(l, "episodes", c.local_train.episodes_per_round);
    get_if(l, "eval_episodes", c.local_train.eval_episodes);
    get_if(l, "seed", c.local_train.seed);
    get_if(l, "epochs", c.local_train.fit.epochs);
    get_if(l, "lr", c.local_train.fit.learning_rate);
    get_if(l, "smoothing", c.local_train.smoothing);
    get_if(l, "lambda1", c.local_train.fit.lambda1);
    get_if(l, "lambda2", c.local_train.fit.lambda2);
    if (l.contains("train_worlds")) {
      const auto& w = l.at("train_worlds");
      get_if(w, "width", c.local_worlds.width);
      get_if(w, "height", c.local_worlds.height);
      get_if(w, "min_obstacles", c.local_worlds.min_obstacles);
      get_if(w, "max_obstacles", c.local_worlds.max_obstacles);
      get_if(w, "max_block", c.local_worlds.max_block);
      get_if(w, "min_goal_distance", c.local_worlds.min_goal_distance);
      get_if(w, "max_goal_distance", c.local_worlds.max_goal_distance);
      get_if(w, "margin", c.local_worlds.margin);
      get_if(w, "blocked_goal_rate", c.local_worlds.blocked_goal_rate);
    }
  }
  if (c.loop_count < 0) throw ParameterError("loop_count must be nonnegative");
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path, std::optional<std::uint64_t> seed) {
  return parse_experiment_config(read_file(path), fs::path(path).parent_path().string(), seed);
}

GridArray<std::uint8_t> build_obstacles(const ExperimentConfig& config, const ClassMap& classes, GridPose keep_free) {
  GridArray<std::uint8_t> occ = GridArray<std::uint8_t>::Zero(classes.height(), classes.width());
  if (!config.obstacles_pgm.empty()) {
    const GridArray<int> levels = read_pgm(config.obstacles_pgm);
    if (levels.rows() != classes.height() || levels.cols() != classes.width())
      throw ParameterError("obstacle map shape does not match the class map");
    occ = levels.unaryExpr([](int v) { return std::uint8_t(v >= 128 ? 1 : 0); });
  } else {
    Rng rng(mix_seed(config.world_seed, 0x0b57));
    for (int y = 0; y < classes.height(); ++y) {
      for (int x = 0; x < classes.width(); ++x) {
        auto it = config.obstacle_density.find(classes.at(x, y));
        const double p = it == config.obstacle_density.end() ? 0.0 : it->second;
        const double u = uniform01(rng);
        occ(y, x) = u < p ? 1 : 0;
      }
    }
  }
  if (classes.contains(keep_free)) occ(keep_free.y, keep_free.x) = 0;
  return occ;
}

std::string path_csv(const std::vector<GridPose>& path, const ClassMap& classes) {
  std::ostringstream out;
  out << "step,x,y,class_id\n";
  for (std::size_t i = 0; i < path.size(); ++i)
    out << i << ',' << path[i].x << ',' << path[i].y << ',' << classes(path[i]) << '\n';
  return out.str();
}

std::string waypoints_csv(const std::vector<GridPose>& waypoints) {
  std::ostringstream out;
  out << "index,x,y\n";
  for (std::size_t i = 0; i < waypoints.size(); ++i) out << i << ',' << waypoints[i].x << ',' << waypoints[i].y << '\n';
  return out.str();
}

std::vector<GridPose> read_waypoints_csv(const std::string& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows[0].size() < 3) throw FormatError(path + ": not a waypoint list");
  std::vector<GridPose> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 3) throw FormatError(path + ": bad waypoint row");
    out.push_back({std::stoi(rows[i][1]), std::stoi(rows[i][2])});
  }
  return out;
}

PipelineResult run_pipeline(const ExperimentConfig& config) {
  const fs::path out_dir(config.output_dir.empty() ? "." : config.output_dir);
  fs::create_directories(out_dir);
  auto out = [&](const std::string& name) { return (out_dir / name).string(); };

  PipelineResult result;
  Segmentation seg = stage("segment", [&] {
    const RgbImage image = read_ppm(config.image);
    Segmentation s = segment(image, make_filter_bank(config.bank), config.segment);
    write_pgm(out("classmap.pgm"), class_levels(s.classes));
    write_text(out("classmap.json"), kmeans_model_json(s.model));
    return s;
  });
  result.classes = seg.classes;
  const ClassMap& classes = seg.classes;

  DrivabilityTable table = stage("render-scoremap", [&] {
    DrivabilityTable t(config.drivability);
    for (const auto& [id, score] : config.initial_scores) t.set(id, score);
    write_text(out("drivability_0.json"), drivability_json(t));
    const ScoreMap map = render_scoremap(classes, t);
    write_scoremap_csv(out("scoremap_0.csv"), map);
    write_scoremap_pgm(out("scoremap_0.pgm"), map);
    return t;
  });
  for (int c = 0; c < classes.num_classes(); ++c) result.initial_scores[c] = table.score(c);
  if (config.loop_count == 0) return result;

  const GridPose start = config.planner.start;
  SimWorld world = stage("navigate", [&] {
    if (!classes.contains(start)) throw ParameterError("planner start lies outside the class map");
    GridArray<std::uint8_t> occ = build_obstacles(config, classes, start);
    GridArray<int> levels = occ.cast<int>() * 255;
    write_pgm(out("obstacles.pgm"), levels);
    return SimWorld(classes, std::move(occ), {start.x + 0.5, start.y + 0.5, 0.0});
  });

  SteeringNet net = stage("train-local", [&] {
    if (!config.local_net.empty()) {
      SteeringBins bins;
      SteeringNet n = parse_steering_net_json(read_file(config.local_net), &bins);
      if (bins.M != config.local.bins.M) throw ParameterError("steering net bins do not match the configuration");
      return n;
    }
    RandomWorldConfig wc = config.local_worlds;
    CloneTrainResult r = train_clone([&](std::uint64_t s) { return make_random_episode(s, wc); }, table, config.local,
                                     config.local_train);
    write_text(out("local_net.json"), steering_net_json(r.net, config.local.bins));
    return r.net;
  });

  const FeatureLayout layout;
  ScoreMap scoremap = render_scoremap(classes, table);
  for (int it = 1; it <= config.loop_count; ++it) {
    IterationSummary summary;
    summary.iteration = it;
    const std::string tag = std::to_string(it);

    const TrainResult trained = stage("train-planner", [&] {
      TrainConfig tc = config.planner;
      tc.seed = mix_seed(config.planner.seed, std::uint64_t(it));
      TrainResult r = train(scoremap, tc, layout);
      write_text(out("policy_" + tag + ".json"), policy_json(r.theta, layout.config()));
      write_text(out("learning_curve_" + tag + ".csv"), learning_curve_csv(r.curve));
      return r;
    });

    stage("plan", [&] {
      summary.path =
          rollout(trained.theta, layout, scoremap, start, config.planner.horizon, 0, ActionSelection::Greedy).visited();
      summary.waypoints =
          plan_waypoints(trained.theta, layout, scoremap, start, config.planner.horizon, config.waypoint_stride);
      summary.path_class_counts.assign(std::size_t(classes.num_classes()), 0);
      for (const GridPose& p : summary.path) ++summary.path_class_counts[std::size_t(classes(p))];
      write_text(out("path_" + tag + ".csv"), path_csv(summary.path, classes));
      write_text(out("waypoints_" + tag + ".csv"), waypoints_csv(summary.waypoints));
    });

    const NavResult nav = stage("navigate", [&] {
      NavResult r = navigate(net, world, summary.waypoints, table, config.local, config.limits);
      write_text(out("trajectory_" + tag + ".csv"), trajectory_csv(r.trajectory, classes));
      write_text(out("feedback_" + tag + ".csv"), feedback_csv(r.feedback));
      return r;
    });
    summary.outcome = nav.outcome;
    summary.feedback = nav.feedback;

    stage("update-drivability", [&] {
      for (const TraversalFeedback& f : nav.feedback) table = update_drivability(table, f);
      write_text(out("drivability_" + tag + ".json"), drivability_json(table));
    });

    stage("render-scoremap", [&] {
      scoremap = render_scoremap(classes, table);
      write_scoremap_csv(out("scoremap_" + tag + ".csv"), scoremap);
      write_scoremap_pgm(out("scoremap_" + tag + ".pgm"), scoremap);
    });
    for (int c = 0; c < classes.num_classes(); ++c) summary.scores_after[c] = table.score(c);
    result.iterations.push_back(std::move(summary));
  }
  write_text(out("drivability.json"), drivability_json(table));
  return result;
}

BaselineComparison compare_baselines(const ScoreMap& scoremap, const PolicyParams& theta, const FeatureLayout& layout,
                                     GridPose start, int horizon, double gamma, int trials, std::uint64_t seed) {
  if (trials < 1) throw ParameterError("need at least one trial");
  BaselineComparison cmp;
  const double sweep = discounted_return(baseline_boustrophedon(scoremap, start, horizon), gamma);
  std::map<std::string, std::vector<double>> values;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t s = mix_seed(seed, std::uint64_t(t));
    values["policy_gradient"].push_back(discounted_return(rollout(theta, layout, scoremap, start, horizon, s), gamma));
    values["boustrophedon"].push_back(sweep);
    values["random_walk"].push_back(discounted_return(random_walk(scoremap, start, horizon, s), gamma));
  }
  for (const char* method : kBaselineMethods) {
    const auto& v = values[method];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= double(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    cmp.summary[method] = {mean, std::sqrt(var / double(v.size()))};
    for (std::size_t t = 0; t < v.size(); ++t) cmp.trials.push_back({method, int(t), v[t]});
  }
  return cmp;
}

std::string baseline_csv(const BaselineComparison& cmp) {
  std::ostringstream out;
  out << "method,trial,discounted_return,std\n";
  for (const auto& r : cmp.trials) out << r.method << ',' << r.trial << ',' << format_real(r.discounted_return) << ",\n";
  for (const char* method : kBaselineMethods) {
    const auto& [mean, sd] = cmp.summary.at(method);
    out << method << ",mean," << format_real(mean) << ',' << format_real(sd) << '\n';
  }
  return out.str();
}

}  // namespace infosample
