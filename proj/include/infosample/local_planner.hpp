#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "infosample/gridworld.hpp"
#include "infosample/scoremap.hpp"
#include "infosample/synthetic.hpp"

namespace infosample {

/// 2M+1 steering angles spanning [-max_angle, max_angle]; bin index i holds
/// steering class c = i - M, angle c * max_angle / M (positive = counterclockwise).
struct SteeringBins {
  int M = 7;
  double max_angle = kPi / 4.0;

  int count() const { return 2 * M + 1; }
  double angle(int c) const { return M == 0 ? 0.0 : c * max_angle / M; }
  int index(int c) const { return c + M; }
  int steering_class(int index) const { return index - M; }
  /// Nearest bin to `angle`, clamped to the span.
  int nearest(double angle) const;
};

struct SensorConfig {
  double max_range = 8.0;
  double goal_scale = 16.0;  // distance that normalizes to 1
};

/// Egocentric observation; rays are fanned over the steering angles in bin order.
struct Observation {
  Eigen::VectorXd ray_depths;      // [0, 1], depth / max_range
  double goal_bearing = 0.0;       // [-1, 1], relative bearing / pi
  double goal_distance = 0.0;      // [0, 1]
  Eigen::VectorXd terrain_scores;  // [0, 1], drivability where each ray ends

  /// [ray_depths, goal_bearing, goal_distance, terrain_scores].
  Eigen::VectorXd to_vector() const;
  static Observation from_vector(const Eigen::VectorXd& v, int bins);
  /// Left-right reflection: reversed rays and terrain, negated bearing.
  Observation mirrored() const;
};

inline int observation_length(const SteeringBins& bins) { return 2 * bins.count() + 2; }

Observation observe(const SimWorld& world, const ContinuousPose& pose, double goal_x, double goal_y,
                    const DrivabilityTable& table, const SteeringBins& bins, const SensorConfig& sensor);

/// Smoothed target over bins: 1-s at c, s/2 at c+-1; at a boundary the single
/// neighbour takes all of s.
Eigen::VectorXd smooth_labels(const SteeringBins& bins, int steering_class, double smoothing);

/// Two-layer perceptron: logits = W2 tanh(W1 x + b1) + b2, clipped to +-30.
struct SteeringNet {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  static SteeringNet zeros(int inputs, int hidden, int outputs);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static SteeringNet random(int inputs, int hidden, int outputs, std::uint64_t seed);

  int inputs() const { return int(w1.cols()); }
  int hidden() const { return int(w1.rows()); }
  int outputs() const { return int(w2.rows()); }
  Eigen::Index parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  /// Parameters flattened as [w1 row-major, b1, w2 row-major, b2].
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& params);
  bool finite() const;
};

inline constexpr double kLogitClip = 30.0;

Eigen::VectorXd predict(const SteeringNet& net, const Eigen::VectorXd& x);
inline Eigen::VectorXd predict(const SteeringNet& net, const Observation& obs) { return predict(net, obs.to_vector()); }

struct CloneSample {
  Eigen::VectorXd observation;
  Eigen::VectorXd label;  // distribution over bins
};

using CloneDataset = std::vector<CloneSample>;

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // same layout as SteeringNet::flatten()
};

/// L = sum_i [ -sum_j y_ij log f_ij - lambda2 H(f_i) ] + lambda1 * 0.5 ||w||^2,
/// H(f) = -sum_j f_j log f_j; gradient by backpropagation.
LossAndGradient clone_loss(const SteeringNet& net, const CloneDataset& data, double lambda1, double lambda2);
LossAndGradient clone_loss(const SteeringNet& net, const CloneDataset& data, std::span<const std::size_t> batch,
                           double lambda1, double lambda2);

double prediction_entropy(const Eigen::VectorXd& f);

struct ExpertConfig {
  double safety_range = 1.5;  // cells
  double kappa = 0.5;         // terrain preference
  double mu = 0.3;            // heading-error penalty
  double goal_cell_reach = 0.75;  // obstruction this close to the waypoint is the waypoint's cell
};

struct LocalPlannerConfig {
  SteeringBins bins;
  SensorConfig sensor;
  UnicycleConfig unicycle;
  ExpertConfig expert;
  int hidden = 32;
};

/// Pure pursuit to the waypoint unless that ray is shorter than the safety
/// range (and the waypoint) and ends short of the waypoint's own cell; then the
/// clear bin maximizing depth + kappa * terrain - mu * |bearing error|, or the
/// deepest bin if none is clear. A blocked waypoint is therefore driven into,
/// which is how its terrain registers obstacle incidents.
int expert_action(const SimWorld& world, const ContinuousPose& pose, GridPose waypoint, const DrivabilityTable& table,
                  const LocalPlannerConfig& config);

struct FitConfig {
  int epochs = 40;
  int batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double lambda1 = 1e-4;
  double lambda2 = 0.1;
  std::uint64_t seed = 0;
};

/// Mini-batch gradient descent with momentum on clone_loss averaged per sample.
void fit(SteeringNet& net, const CloneDataset& data, const FitConfig& config);

enum class NavOutcome { Completed, Stuck };

struct NavLimits {
  int max_steps = 400;
  int stuck_window = 30;
  double stuck_progress = 0.5;
  double reach_radius = 1.0;
};

struct NavResult {
  Trajectory trajectory;
  std::vector<TraversalFeedback> feedback;
  NavOutcome outcome = NavOutcome::Stuck;
  int waypoints_reached = 0;
  int collisions = 0;
};

/// Chooses a steering class for the current pose and active waypoint.
using Driver = std::function<int(const SimWorld&, const Observation&, GridPose waypoint)>;

/// Drives through the waypoints in order; a waypoint counts as reached within
/// reach_radius of its cell centre. Stuck when the distance to the active
/// waypoint improves by less than stuck_progress over stuck_window steps, or
/// when max_steps run out. Feedback is measured per leg toward its waypoint.
/// `visit` sees every (observation, waypoint) before the driver acts.
NavResult drive(SimWorld world, const std::vector<GridPose>& waypoints, const Driver& driver,
                const DrivabilityTable& table, const LocalPlannerConfig& config, const NavLimits& limits,
                const std::function<void(const SimWorld&, const Observation&, GridPose)>& visit = {});

NavResult navigate(const SteeringNet& net, const SimWorld& world, const std::vector<GridPose>& waypoints,
                   const DrivabilityTable& table, const LocalPlannerConfig& config, const NavLimits& limits = {});

Driver net_driver(const SteeringNet& net, const SteeringBins& bins);
Driver expert_driver(const DrivabilityTable& table, const LocalPlannerConfig& config);

struct CloneTrainConfig {
  int dagger_rounds = 5;
  int episodes_per_round = 40;
  int eval_episodes = 20;
  double smoothing = 0.2;
  FitConfig fit;
  NavLimits limits;
  std::uint64_t seed = 3;
};

struct CloneRound {
  int round = 0;
  std::size_t dataset_size = 0;
  double success_rate = 0.0;  // goal reached without collision
};

struct CloneTrainResult {
  SteeringNet net;
  std::vector<CloneRound> rounds;
  CloneDataset dataset;
};

using EpisodeGenerator = std::function<Episode(std::uint64_t seed)>;

/// Round 0 clones expert-driven episodes; each later round drives the current
/// net, relabels every visited observation with the expert, aggregates and
/// refits. Success is measured after each round on eval_episodes worlds drawn
/// from seeds disjoint from the training ones.
CloneTrainResult train_clone(const EpisodeGenerator& generator, const DrivabilityTable& table,
                             const LocalPlannerConfig& config, const CloneTrainConfig& train);

struct EvalSummary {
  int episodes = 0;
  int reached = 0;
  int collision_free = 0;
  int reached_without_collision = 0;
};

EvalSummary evaluate(const SteeringNet& net, const std::vector<Episode>& episodes, const DrivabilityTable& table,
                     const LocalPlannerConfig& config, const NavLimits& limits);

std::string steering_net_json(const SteeringNet& net, const SteeringBins& bins);
SteeringNet parse_steering_net_json(const std::string& text, SteeringBins* bins = nullptr);

std::string dataset_csv(const CloneDataset& data, const SteeringBins& bins);
CloneDataset read_dataset_csv(const std::string& path, const SteeringBins& bins);

}  // namespace infosample
