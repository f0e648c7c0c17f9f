#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "infosample/grid.hpp"

namespace infosample {

enum class Action : int { North = 0, South = 1, East = 2, West = 3 };
inline constexpr int kNumActions = 4;
inline constexpr std::array<const char*, kNumActions> kActionLabels{"north", "south", "east", "west"};

/// North is +y.
inline GridPose apply_action(GridPose p, int action) {
  static constexpr int dx[kNumActions] = {0, 0, 1, -1};
  static constexpr int dy[kNumActions] = {1, -1, 0, 0};
  return {p.x + dx[action], p.y + dy[action]};
}

using ActionMask = std::array<bool, kNumActions>;

ActionMask feasible_actions(int width, int height, GridPose p);

/// Masked softmax: exp over feasible entries, zero elsewhere, normalized.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, kNumActions, 1> masked_softmax(const Eigen::MatrixBase<Derived>& logits,
                                                                        const ActionMask& mask) {
  using Scalar = typename Derived::Scalar;
  Scalar top = -std::numeric_limits<Scalar>::infinity();
  for (int a = 0; a < kNumActions; ++a) {
    if (mask[std::size_t(a)]) top = std::max(top, logits[a]);
  }
  if (!std::isfinite(double(top))) throw InvalidState("no feasible action");
  Eigen::Matrix<Scalar, kNumActions, 1> p;
  for (int a = 0; a < kNumActions; ++a) p[a] = mask[std::size_t(a)] ? std::exp(logits[a] - top) : Scalar(0);
  return p / p.sum();
}

/// Concentric square rings (Chebyshev distance) split into 8 octants.
struct FeatureConfig {
  std::vector<int> ring_widths{1, 2, 4, 8};

  int rings() const { return int(ring_widths.size()); }
  int length() const { return rings() * 8 + 1; }
  int max_radius() const;
};

/// Bucket index of offset (dx, dy) = ring * 8 + octant, or -1 when the offset
/// is the robot cell or lies beyond the outer ring. Octant 0 is centred on
/// east, counting counterclockwise.
int feature_bucket(const FeatureConfig& config, int dx, int dy);

/// Precomputed offset -> bucket table for a FeatureConfig.
class FeatureLayout {
 public:
  explicit FeatureLayout(FeatureConfig config = {});

  const FeatureConfig& config() const { return config_; }
  int length() const { return config_.length(); }
  int radius() const { return radius_; }
  int bucket(int dx, int dy) const { return table_[std::size_t((dy + radius_) * (2 * radius_ + 1) + dx + radius_)]; }
  int bucket_size(int b) const { return sizes_[std::size_t(b)]; }

 private:
  FeatureConfig config_;
  int radius_ = 0;
  std::vector<int> table_;
  std::vector<int> sizes_;
};

struct PlannerState {
  GridPose pose;
  ScoreMap remaining;
  int t = 0;
  int horizon = 0;
};

/// Per-bucket mean of remaining score (sum / bucket cell count, off-map
/// cells count as zero); last entry is the bias 1.
Eigen::VectorXd extract_features(const FeatureLayout& layout, const ScoreMap& remaining, GridPose pose);
inline Eigen::VectorXd extract_features(const FeatureLayout& layout, const PlannerState& state) {
  return extract_features(layout, state.remaining, state.pose);
}

/// theta: kNumActions x feature length.
using PolicyParams = Eigen::MatrixXd;

Eigen::Vector4d action_distribution(const PolicyParams& theta, const Eigen::VectorXd& phi, const ActionMask& mask);

/// d log pi(a | phi) / d theta.
Eigen::MatrixXd grad_log_policy(const PolicyParams& theta, const Eigen::VectorXd& phi, const ActionMask& mask,
                                int action);

struct RolloutStep {
  Eigen::VectorXd features;
  ActionMask mask{};
  int action = 0;
  double reward = 0.0;
  GridPose pose;  // cell entered
};

struct Rollout {
  GridPose start;
  std::vector<RolloutStep> steps;
  double total_reward = 0.0;

  std::vector<GridPose> visited() const;
};

enum class ActionSelection { Sample, Greedy };

/// Moves one cell per step, collecting and zeroing the entered cell's remaining score.
/// The start cell is not collected. Greedy picks the most probable action (lowest index on ties).
Rollout rollout(const PolicyParams& theta, const FeatureLayout& layout, const ScoreMap& scoremap, GridPose start,
                int horizon, std::uint64_t seed, ActionSelection selection = ActionSelection::Sample);

/// Uniformly random feasible action each step.
Rollout random_walk(const ScoreMap& scoremap, GridPose start, int horizon, std::uint64_t seed);

/// REINFORCE with reward-to-go: (1/m) sum_i sum_t grad log pi(a_t|s_t) (G_t - b).
Eigen::MatrixXd policy_gradient(const std::vector<Rollout>& rollouts, const PolicyParams& theta, double baseline);
/// Baseline b = mean total reward over the rollouts.
Eigen::MatrixXd policy_gradient(const std::vector<Rollout>& rollouts, const PolicyParams& theta);

double mean_total_reward(const std::vector<Rollout>& rollouts);

struct TrainConfig {
  int iterations = 300;
  int rollouts_per_iteration = 32;
  int horizon = 200;
  double learning_rate = 0.01;
  std::uint64_t seed = 1;
  GridPose start{0, 0};
};

struct LearningPoint {
  int iteration = 0;
  double mean_reward = 0.0;
  double baseline = 0.0;
};

struct TrainResult {
  PolicyParams theta;
  std::vector<LearningPoint> curve;
};

/// Vanilla gradient ascent theta += lr * grad from theta = 0.
TrainResult train(const ScoreMap& scoremap, const TrainConfig& config, const FeatureLayout& layout = FeatureLayout());

/// Greedy rollout of length T; every stride-th visited cell plus the final one.
std::vector<GridPose> plan_waypoints(const PolicyParams& theta, const FeatureLayout& layout, const ScoreMap& scoremap,
                                     GridPose start, int horizon, int stride);

/// Lawnmower sweep: east along the row, one step north, west, ... Bounces
/// back south when the top row is swept.
Rollout baseline_boustrophedon(const ScoreMap& scoremap, GridPose start, int horizon);

double discounted_return(const Rollout& rollout, double gamma);

std::string policy_json(const PolicyParams& theta, const FeatureConfig& config);
PolicyParams parse_policy_json(const std::string& text, FeatureConfig* config = nullptr);

std::string learning_curve_csv(const std::vector<LearningPoint>& curve);

}  // namespace infosample
