#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "infosample/global_planner.hpp"
#include "infosample/local_planner.hpp"
#include "infosample/scoremap.hpp"
#include "infosample/texture.hpp"

namespace infosample {

/// Failure inside a named pipeline stage.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct ExperimentConfig {
  std::string image;       // PPM input
  std::string output_dir;  // created if missing
  int loop_count = 2;

  FilterBankConfig bank;
  SegmentConfig segment;

  DrivabilityTable::Config drivability;
  std::map<int, double> initial_scores;  // optional manual entries

  TrainConfig planner;  // planner.horizon is the budget T
  int waypoint_stride = 3;

  std::string obstacles_pgm;              // 255 = occupied; overrides obstacle_density
  std::map<int, double> obstacle_density;  // per class id, probability a cell is occupied
  std::uint64_t world_seed = 11;

  LocalPlannerConfig local;
  NavLimits limits;
  std::string local_net;  // trained net JSON; trained on random worlds when empty
  CloneTrainConfig local_train;
  RandomWorldConfig local_worlds;
};

/// Reads the JSON experiment description. Relative paths resolve against
/// the config file's directory. Missing keys keep their defaults. A master
/// seed (`seed` argument, else the top-level "seed" key) derives every stage
/// seed that its section does not set explicitly.
ExperimentConfig load_experiment_config(const std::string& path, std::optional<std::uint64_t> seed = {});
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& base_dir = ".",
                                         std::optional<std::uint64_t> seed = {});

struct IterationSummary {
  int iteration = 0;
  std::vector<GridPose> path;        // planned visited cells
  std::vector<GridPose> waypoints;
  std::vector<int> path_class_counts;  // per class id, cells of `path`
  NavOutcome outcome = NavOutcome::Stuck;
  std::vector<TraversalFeedback> feedback;
  std::map<int, double> scores_after;  // per class id
};

struct PipelineResult {
  ClassMap classes;
  std::map<int, double> initial_scores;
  std::vector<IterationSummary> iterations;
};

/// segment -> render -> (train -> plan -> navigate -> feedback -> update -> render) x loop_count.
/// Every artifact is written to output_dir as soon as its stage finishes.
PipelineResult run_pipeline(const ExperimentConfig& config);

/// Occupancy for the simulated world: from a PGM, or sampled per class.
GridArray<std::uint8_t> build_obstacles(const ExperimentConfig& config, const ClassMap& classes, GridPose keep_free);

/// `step,x,y,class_id` for each visited cell.
std::string path_csv(const std::vector<GridPose>& path, const ClassMap& classes);
/// `index,x,y`.
std::string waypoints_csv(const std::vector<GridPose>& waypoints);
std::vector<GridPose> read_waypoints_csv(const std::string& path);

struct BaselineRow {
  std::string method;
  int trial = 0;
  double discounted_return = 0.0;
};

struct BaselineComparison {
  std::vector<BaselineRow> trials;
  std::map<std::string, std::pair<double, double>> summary;  // method -> (mean, std)
};

inline constexpr std::array<const char*, 3> kBaselineMethods{"policy_gradient", "boustrophedon", "random_walk"};

/// Discounted return per trial for the trained policy (sampled rollouts), the
/// lawnmower sweep, and a uniform random walk, all from `start` with budget T.
BaselineComparison compare_baselines(const ScoreMap& scoremap, const PolicyParams& theta, const FeatureLayout& layout,
                                     GridPose start, int horizon, double gamma, int trials, std::uint64_t seed);

/// `method,trial,discounted_return,std`; one row per trial, then one summary row per
/// method with trial = mean.
std::string baseline_csv(const BaselineComparison& comparison);

}  // namespace infosample
