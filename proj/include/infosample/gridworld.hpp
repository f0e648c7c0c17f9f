#pragma once

#include <string>
#include <vector>

#include "infosample/grid.hpp"

namespace infosample {

/// Sub-cell robot pose. Cell (i, j) spans [i, i+1) x [j, j+1); heading is
/// counterclockwise from +x, kept in [-pi, pi).
struct ContinuousPose {
  double px = 0.0;
  double py = 0.0;
  double heading = 0.0;

  GridPose cell() const { return {int(std::floor(px)), int(std::floor(py))}; }
};

struct UnicycleConfig {
  double max_steering = kPi / 4.0;
  double speed = 0.5;  // cells per step
};

inline constexpr double kRayStep = 0.1;

struct SimWorld {
  ClassMap class_map;
  GridArray<std::uint8_t> obstacles;  // 1 = occupied
  ContinuousPose robot;
  long step_count = 0;

  SimWorld() = default;
  SimWorld(ClassMap classes, GridArray<std::uint8_t> occupied, ContinuousPose start);

  int width() const { return class_map.width(); }
  int height() const { return class_map.height(); }
  bool in_bounds(GridPose c) const { return class_map.contains(c); }
  bool blocked(GridPose c) const { return !in_bounds(c) || obstacles(c.y, c.x) != 0; }
  bool free_at(double px, double py) const;
};

struct StepResult {
  ContinuousPose pose;
  bool collided = false;
  GridPose cell_entered;  // attempted target cell when it is on the map, else the current cell
};

/// Turns by `steering` then advances `speed` along the new heading. A move
/// into an obstacle or off the map leaves the position unchanged (the turn
/// still applies) and reports a collision.
StepResult step_unicycle(SimWorld& world, double steering, double speed, double max_steering = kPi / 4.0);

/// Distance along `origin.heading + angle_offset` to the first occupied or
/// off-map sample, marched at kRayStep and reported at the midpoint of the
/// last step (error within +-kRayStep/2). Returns max_range if nothing is hit.
double ray_cast(const SimWorld& world, const ContinuousPose& origin, double angle_offset, double max_range);

struct TrajectoryStep {
  ContinuousPose pose;
  bool collided = false;
  GridPose cell;
};

struct Trajectory {
  ContinuousPose start;
  std::vector<TrajectoryStep> steps;
};

struct TraversalFeedback {
  int class_id = 0;
  double progress_rate = 0.0;
  int obstacle_incidents = 0;
  int steps = 0;
};

/// Per-class accumulation of goal progress and collisions.
class FeedbackAccumulator {
 public:
  void add(int class_id, double progress, bool collided);
  void merge(const FeedbackAccumulator& other);
  /// Sorted by class id; only classes touched at least once.
  std::vector<TraversalFeedback> result() const;
  int total_steps() const;

 private:
  struct Entry {
    double progress = 0.0;
    int incidents = 0;
    int steps = 0;
  };
  std::vector<Entry> entries_;
};

/// Attributes each step to the class of the cell it entered (or attempted).
void accumulate_feedback(FeedbackAccumulator& acc, const Trajectory& trajectory, double goal_x, double goal_y,
                         const ClassMap& class_map);

/// One record per class touched; progress is measured toward the goal cell centre.
std::vector<TraversalFeedback> measure_feedback(const Trajectory& trajectory, GridPose goal,
                                                const ClassMap& class_map);

/// `step,px,py,heading,collided,cell_x,cell_y,class_id`; step 0 is the start pose.
std::string trajectory_csv(const Trajectory& trajectory, const ClassMap& class_map);
Trajectory read_trajectory_csv(const std::string& path);

std::string feedback_csv(const std::vector<TraversalFeedback>& feedback);

}  // namespace infosample
