// Command-line front end: one subcommand per pipeline stage plus the closed loop.
//
// Every subcommand accepts --config FILE.json. Top-level keys and the keys of
// the subcommand's section fill flags that were not given on the command line;
// key `foo_bar` fills `--foo-bar`. Relative paths in the file resolve against
// its directory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "infosample/csv.hpp"
#include "infosample/global_planner.hpp"
#include "infosample/gridworld.hpp"
#include "infosample/image_io.hpp"
#include "infosample/local_planner.hpp"
#include "infosample/pipeline.hpp"
#include "infosample/scoremap.hpp"
#include "infosample/synthetic.hpp"
#include "infosample/texture.hpp"

namespace fs = std::filesystem;
using namespace infosample;

namespace {

const std::set<std::string> kPathKeys{"image",  "out",       "classmap", "drivability", "scoremap", "policy", "curve",
                                      "net",    "waypoints", "obstacles", "path",       "feedback", "dataset"};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sibling(const std::string& path, const std::string& ext) {
  return fs::path(path).replace_extension(ext).string();
}

std::string as_input(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

/// Fills unset options of `sub` from the config file.
void apply_config(CLI::App* sub, const std::string& config_path, const std::vector<std::string>& sections) {
  if (config_path.empty()) return;
  const auto doc = nlohmann::json::parse(slurp(config_path));
  const fs::path base = fs::path(config_path).parent_path();
  nlohmann::json flat = nlohmann::json::object();
  for (const auto& [k, v] : doc.items())
    if (!v.is_object()) flat[k] = v;
  for (const std::string& s : sections)
    if (doc.contains(s) && doc.at(s).is_object())
      for (const auto& [k, v] : doc.at(s).items()) flat[k] = v;

  for (CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty() || opt->count() > 0) continue;
    std::string key = opt->get_lnames().front();
    for (char& c : key)
      if (c == '-') c = '_';
    if (!flat.contains(key) || flat.at(key).is_object()) continue;
    const auto& v = flat.at(key);
    std::vector<std::string> inputs;
    if (v.is_array()) {
      for (const auto& e : v) inputs.push_back(as_input(e));
    } else {
      inputs.push_back(as_input(v));
    }
    if (kPathKeys.count(key) && !inputs.front().empty() && fs::path(inputs.front()).is_relative())
      inputs.front() = (base / inputs.front()).lexically_normal().string();
    opt->add_result(inputs);
    opt->run_callback();
  }
}

void require(const CLI::App* sub, const std::vector<const char*>& names) {
  for (const char* n : names)
    if (sub->get_option(n)->count() == 0) throw CLI::RequiredError(n);
}

ClassMap load_classmap(const std::string& path, int classes) {
  if (classes <= 0) classes = parse_kmeans_model_json(slurp(sibling(path, ".json"))).k;
  return classes_from_levels(read_pgm(path), classes);
}

DrivabilityTable load_table(const std::string& path, double prior) {
  if (!path.empty()) return parse_drivability_json(slurp(path));
  DrivabilityTable::Config c;
  c.prior = prior;
  return DrivabilityTable(c);
}

GridPose pose_of(const std::vector<int>& xy) {
  if (xy.size() != 2) throw ParameterError("start must be two integers: x y");
  return {xy[0], xy[1]};
}

struct Command {
  CLI::App* app = nullptr;
  std::vector<std::string> sections;
  std::string config;
  std::vector<const char*> required;
  std::function<void()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Texture segmentation, drivability maps and learned planners for heterogeneous sampling robots"};
  app.require_subcommand(1);
  std::vector<Command> commands;
  auto add = [&](const char* name, const char* help, std::vector<std::string> sections,
                 std::vector<const char*> required) -> Command& {
    Command& c = commands.emplace_back();
    c.app = app.add_subcommand(name, help);
    c.sections = std::move(sections);
    c.required = std::move(required);
    c.app->add_option("--config", c.config, "JSON file whose keys fill unset flags");
    return c;
  };
  commands.reserve(8);

  // segment
  std::string seg_image, seg_out = "classmap.pgm";
  SegmentConfig seg;
  FilterBankConfig bank;
  std::uint64_t seg_seed = 0;
  {
    Command& c = add("segment", "Texture-segment an image into a class map", {"texture"}, {"--image", "--seed"});
    c.app->add_option("--image", seg_image, "input PPM");
    c.app->add_option("--k", seg.k, "number of texture classes")->capture_default_str();
    c.app->add_option("--patch", seg.patch_size, "patch side in pixels")->capture_default_str();
    c.app->add_option("--hue-bins", seg.hue_bins)->capture_default_str();
    c.app->add_option("--orientations", bank.orientations)->capture_default_str();
    c.app->add_option("--wavelengths", bank.wavelengths)->capture_default_str();
    c.app->add_option("--kernel-size", bank.kernel_size)->capture_default_str();
    c.app->add_option("--seed", seg_seed, "k-means seed");
    c.app->add_option("--out", seg_out, "class map PGM; the model goes next to it as .json")->capture_default_str();
    c.run = [&] {
      seg.seed = seg_seed;
      const Segmentation s = segment(read_ppm(seg_image), make_filter_bank(bank), seg);
      write_pgm(seg_out, class_levels(s.classes));
      write_text(sibling(seg_out, ".json"), kmeans_model_json(s.model));
      std::cout << "classes " << s.classes.num_classes() << ", grid " << s.classes.width() << 'x'
                << s.classes.height() << '\n';
    };
  }

  // render-scoremap
  std::string rs_classmap, rs_table, rs_out = "scoremap.csv";
  int rs_classes = 0;
  double rs_prior = DrivabilityTable::Config{}.prior;
  {
    Command& c = add("render-scoremap", "Paint per-class drivability onto the class map", {"scoremap"}, {"--classmap"});
    c.app->add_option("--classmap", rs_classmap, "class map PGM");
    c.app->add_option("--classes", rs_classes, "class count; read from the .json sidecar when omitted");
    c.app->add_option("--drivability", rs_table, "drivability table JSON; all classes at the prior when omitted");
    c.app->add_option("--prior", rs_prior)->capture_default_str();
    c.app->add_option("--out", rs_out, "score map CSV; a PGM is written next to it")->capture_default_str();
    c.run = [&] {
      const ScoreMap map = render_scoremap(load_classmap(rs_classmap, rs_classes), load_table(rs_table, rs_prior));
      write_scoremap_csv(rs_out, map);
      write_scoremap_pgm(sibling(rs_out, ".pgm"), map);
      std::cout << "total score " << format_real(map.total()) << '\n';
    };
  }

  // train-planner
  std::string tp_scoremap, tp_out = "policy.json", tp_curve;
  TrainConfig tp;
  std::vector<int> tp_start{0, 0};
  {
    Command& c = add("train-planner", "Train the coverage policy with REINFORCE", {"global_planner"},
                     {"--scoremap", "--seed"});
    c.app->add_option("--scoremap", tp_scoremap, "score map CSV");
    c.app->add_option("--iters", tp.iterations)->capture_default_str();
    c.app->add_option("--m", tp.rollouts_per_iteration, "rollouts per iteration")->capture_default_str();
    c.app->add_option("--horizon", tp.horizon)->capture_default_str();
    c.app->add_option("--lr", tp.learning_rate)->capture_default_str();
    c.app->add_option("--start", tp_start, "start cell x y")->expected(2);
    c.app->add_option("--seed", tp.seed);
    c.app->add_option("--out", tp_out)->capture_default_str();
    c.app->add_option("--curve", tp_curve, "learning curve CSV");
    c.run = [&] {
      tp.start = pose_of(tp_start);
      const FeatureLayout layout;
      const TrainResult r = train(read_scoremap_csv(tp_scoremap), tp, layout);
      write_text(tp_out, policy_json(r.theta, layout.config()));
      if (!tp_curve.empty()) write_text(tp_curve, learning_curve_csv(r.curve));
      std::cout << "mean reward " << format_real(r.curve.front().mean_reward) << " -> "
                << format_real(r.curve.back().mean_reward) << '\n';
    };
  }

  // plan
  std::string pl_scoremap, pl_policy, pl_out = "waypoints.csv", pl_path, pl_classmap;
  int pl_horizon = TrainConfig{}.horizon, pl_stride = 3, pl_classes = 0;
  std::vector<int> pl_start{0, 0};
  {
    Command& c = add("plan", "Greedy rollout of a trained policy, thinned to waypoints", {"global_planner"},
                     {"--scoremap", "--policy"});
    c.app->add_option("--scoremap", pl_scoremap);
    c.app->add_option("--policy", pl_policy);
    c.app->add_option("--start", pl_start)->expected(2);
    c.app->add_option("--horizon", pl_horizon)->capture_default_str();
    c.app->add_option("--stride", pl_stride, "keep every stride-th visited cell")->capture_default_str();
    c.app->add_option("--out", pl_out)->capture_default_str();
    c.app->add_option("--path", pl_path, "full visited-cell CSV");
    c.app->add_option("--classmap", pl_classmap, "labels the path CSV with class ids");
    c.app->add_option("--classes", pl_classes);
    c.run = [&] {
      FeatureConfig fc;
      const PolicyParams theta = parse_policy_json(slurp(pl_policy), &fc);
      const FeatureLayout layout(fc);
      const ScoreMap map = read_scoremap_csv(pl_scoremap);
      const GridPose start = pose_of(pl_start);
      const auto wps = plan_waypoints(theta, layout, map, start, pl_horizon, pl_stride);
      write_text(pl_out, waypoints_csv(wps));
      if (!pl_path.empty()) {
        const ClassMap classes = pl_classmap.empty()
                                     ? ClassMap(GridArray<int>::Zero(map.height(), map.width()), 1)
                                     : load_classmap(pl_classmap, pl_classes);
        write_text(pl_path,
                   path_csv(rollout(theta, layout, map, start, pl_horizon, 0, ActionSelection::Greedy).visited(),
                            classes));
      }
      std::cout << wps.size() << " waypoints\n";
    };
  }

  // train-local
  std::string tl_out = "net.json", tl_curve, tl_dataset;
  CloneTrainConfig tl;
  LocalPlannerConfig tl_local;
  {
    Command& c = add("train-local", "Clone the steering expert with DAgger on random worlds", {"local_planner"},
                     {"--seed"});
    c.app->add_option("--rounds", tl.dagger_rounds)->capture_default_str();
    c.app->add_option("--episodes", tl.episodes_per_round)->capture_default_str();
    c.app->add_option("--eval-episodes", tl.eval_episodes)->capture_default_str();
    c.app->add_option("--epochs", tl.fit.epochs)->capture_default_str();
    c.app->add_option("--lr", tl.fit.learning_rate)->capture_default_str();
    c.app->add_option("--smoothing", tl.smoothing)->capture_default_str();
    c.app->add_option("--lambda1", tl.fit.lambda1)->capture_default_str();
    c.app->add_option("--lambda2", tl.fit.lambda2)->capture_default_str();
    c.app->add_option("--hidden", tl_local.hidden)->capture_default_str();
    c.app->add_option("--seed", tl.seed);
    c.app->add_option("--out", tl_out)->capture_default_str();
    c.app->add_option("--curve", tl_curve, "per-round success CSV");
    c.app->add_option("--dataset", tl_dataset, "aggregated training pairs CSV");
    c.run = [&] {
      const DrivabilityTable table;
      const CloneTrainResult r = train_clone([](std::uint64_t s) { return make_random_episode(s); }, table, tl_local, tl);
      write_text(tl_out, steering_net_json(r.net, tl_local.bins));
      if (!tl_dataset.empty()) write_text(tl_dataset, dataset_csv(r.dataset, tl_local.bins));
      std::ostringstream curve;
      curve << "round,dataset_size,success_rate\n";
      for (const CloneRound& round : r.rounds) {
        curve << round.round << ',' << round.dataset_size << ',' << format_real(round.success_rate) << '\n';
        std::cout << "round " << round.round << ": " << round.dataset_size << " samples, success "
                  << format_real(round.success_rate) << '\n';
      }
      if (!tl_curve.empty()) write_text(tl_curve, curve.str());
    };
  }

  // navigate
  std::string nv_net, nv_waypoints, nv_classmap, nv_obstacles, nv_table, nv_out = "trajectory.csv",
                                                                         nv_feedback = "feedback.csv";
  int nv_classes = 0;
  double nv_heading = 0.0;
  std::vector<int> nv_start{0, 0};
  NavLimits nv_limits;
  LocalPlannerConfig nv_local;
  {
    Command& c = add("navigate", "Follow waypoints with a trained steering net", {"local_planner", "sim"},
                     {"--net", "--waypoints", "--classmap"});
    c.app->add_option("--net", nv_net);
    c.app->add_option("--waypoints", nv_waypoints);
    c.app->add_option("--classmap", nv_classmap);
    c.app->add_option("--classes", nv_classes);
    c.app->add_option("--obstacles", nv_obstacles, "occupancy PGM, >= 128 occupied");
    c.app->add_option("--drivability", nv_table);
    c.app->add_option("--start", nv_start)->expected(2);
    c.app->add_option("--heading", nv_heading, "radians, counterclockwise from +x")->capture_default_str();
    c.app->add_option("--speed", nv_local.unicycle.speed)->capture_default_str();
    c.app->add_option("--max-steps", nv_limits.max_steps)->capture_default_str();
    c.app->add_option("--stuck-window", nv_limits.stuck_window)->capture_default_str();
    c.app->add_option("--out", nv_out)->capture_default_str();
    c.app->add_option("--feedback", nv_feedback)->capture_default_str();
    c.run = [&] {
      const ClassMap classes = load_classmap(nv_classmap, nv_classes);
      GridArray<std::uint8_t> occ = GridArray<std::uint8_t>::Zero(classes.height(), classes.width());
      if (!nv_obstacles.empty()) {
        const GridArray<int> levels = read_pgm(nv_obstacles);
        if (levels.rows() != occ.rows() || levels.cols() != occ.cols())
          throw ParameterError("obstacle map shape does not match the class map");
        occ = levels.unaryExpr([](int v) { return std::uint8_t(v >= 128 ? 1 : 0); });
      }
      const GridPose s = pose_of(nv_start);
      const SimWorld world(classes, std::move(occ), {s.x + 0.5, s.y + 0.5, wrap_angle(nv_heading)});
      const SteeringNet net = parse_steering_net_json(slurp(nv_net), &nv_local.bins);
      const NavResult r = navigate(net, world, read_waypoints_csv(nv_waypoints), load_table(nv_table, 0.5), nv_local,
                                   nv_limits);
      write_text(nv_out, trajectory_csv(r.trajectory, classes));
      write_text(nv_feedback, feedback_csv(r.feedback));
      std::cout << (r.outcome == NavOutcome::Completed ? "completed" : "stuck") << ", " << r.waypoints_reached
                << " waypoints reached, " << r.collisions << " collisions\n";
    };
  }

  // compare-baselines
  std::string cb_scoremap, cb_policy, cb_out = "baselines.csv";
  int cb_horizon = 150, cb_trials = 20;
  double cb_gamma = 0.95;
  std::uint64_t cb_seed = 0;
  std::vector<int> cb_start{0, 0};
  {
    Command& c = add("compare-baselines", "Discounted returns of the policy, a lawnmower sweep and a random walk",
                     {"global_planner", "baselines"}, {"--scoremap", "--policy", "--seed"});
    c.app->add_option("--scoremap", cb_scoremap);
    c.app->add_option("--policy", cb_policy);
    c.app->add_option("--start", cb_start)->expected(2);
    c.app->add_option("--horizon", cb_horizon, "budget T")->capture_default_str();
    c.app->add_option("--gamma", cb_gamma)->capture_default_str();
    c.app->add_option("--trials", cb_trials)->capture_default_str();
    c.app->add_option("--seed", cb_seed);
    c.app->add_option("--out", cb_out)->capture_default_str();
    c.run = [&] {
      FeatureConfig fc;
      const PolicyParams theta = parse_policy_json(slurp(cb_policy), &fc);
      const BaselineComparison cmp = compare_baselines(read_scoremap_csv(cb_scoremap), theta, FeatureLayout(fc),
                                                       pose_of(cb_start), cb_horizon, cb_gamma, cb_trials, cb_seed);
      write_text(cb_out, baseline_csv(cmp));
      for (const char* m : kBaselineMethods) {
        const auto& [mean, sd] = cmp.summary.at(m);
        std::cout << m << ": " << format_real(mean) << " +- " << format_real(sd) << '\n';
      }
    };
  }

  // synth-scene: a ready-made closed-loop experiment.
  std::string ss_dir = "scene";
  std::vector<int> ss_block{4, 0, 12, 12}, ss_start{1, 6};
  int ss_cells = 12;
  {
    CLI::App* c = app.add_subcommand("synth-scene", "Write a two-texture demo scene and its experiment config");
    c->add_option("--out-dir", ss_dir)->capture_default_str();
    c->add_option("--cells", ss_cells, "scene side in cells")->capture_default_str();
    c->add_option("--block", ss_block, "grating block x0 y0 x1 y1, in cells")->expected(4);
    c->add_option("--start", ss_start)->expected(2);
    c->callback([&] {
      fs::create_directories(ss_dir);
      write_ppm((fs::path(ss_dir) / "scene.ppm").string(),
                make_block_scene(ss_cells, ss_cells, ss_block[0], ss_block[1], ss_block[2], ss_block[3]));
      const nlohmann::json exp = {
          {"seed", 1},
          {"image", "scene.ppm"},
          {"output_dir", "run"},
          {"loop_count", 2},
          {"texture", {{"k", 2}}},
          {"global_planner", {{"iters", 1500}, {"lr", 0.05}, {"horizon", 30}, {"start", ss_start}}},
          {"sim", {{"obstacle_density", {{"1", 1.0}}}}},
          {"local_planner",
           {{"stuck_window", 10}, {"train_worlds", {{"margin", 0}, {"blocked_goal_rate", 0.25}}}}}};
      write_text((fs::path(ss_dir) / "experiment.json").string(), exp.dump(2) + "\n");
    });
  }

  // run-pipeline: the config is the nested experiment description, read whole.
  std::string rp_config, rp_output, rp_image;
  std::optional<std::uint64_t> rp_seed;
  std::optional<int> rp_loops;
  CLI::App* rp = app.add_subcommand("run-pipeline", "Segment, plan, drive and relearn drivability in a loop");
  rp->add_option("--config", rp_config, "experiment JSON")->required();
  rp->add_option("--seed", rp_seed, "master seed; the config's top-level \"seed\" fills it");
  rp->add_option("--output-dir", rp_output);
  rp->add_option("--image", rp_image);
  rp->add_option("--loop-count", rp_loops);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (Command& c : commands) {
      if (!c.app->parsed()) continue;
      try {
        apply_config(c.app, c.config, c.sections);
        require(c.app, c.required);
      } catch (const CLI::ParseError& e) {
        return app.exit(e);
      }
      try {
        c.run();
      } catch (const StageError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError(c.app->get_name(), e.what());
      }
    }
    if (rp->parsed()) {
      if (!rp_seed) {
        const auto doc = nlohmann::json::parse(slurp(rp_config));
        if (!doc.contains("seed")) return app.exit(CLI::RequiredError("--seed"));
      }
      ExperimentConfig config = load_experiment_config(rp_config, rp_seed);
      if (!rp_output.empty()) config.output_dir = rp_output;
      if (!rp_image.empty()) config.image = rp_image;
      if (rp_loops) config.loop_count = *rp_loops;
      const PipelineResult r = run_pipeline(config);
      std::cout << "classes " << r.classes.num_classes() << '\n';
      for (const IterationSummary& it : r.iterations) {
        std::cout << "iteration " << it.iteration << ": path class counts";
        for (int n : it.path_class_counts) std::cout << ' ' << n;
        std::cout << ", " << (it.outcome == NavOutcome::Completed ? "completed" : "stuck") << ", scores";
        for (const auto& [id, s] : it.scores_after) std::cout << ' ' << id << '=' << format_real(s);
        std::cout << '\n';
      }
    }
  } catch (const StageError& e) {
    std::cerr << "error in stage " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
