#include "infosample/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "infosample/csv.hpp"
#include "infosample/image_io.hpp"

namespace infosample {

SimWorld::SimWorld(ClassMap classes, GridArray<std::uint8_t> occupied, ContinuousPose start)
    : class_map(std::move(classes)), obstacles(std::move(occupied)), robot(start) {
  if (obstacles.rows() != class_map.height() || obstacles.cols() != class_map.width())
    throw ParameterError("obstacle grid shape must match class map");
  robot.heading = wrap_angle(robot.heading);
  if (!free_at(robot.px, robot.py)) throw InvalidState("robot starts inside an obstacle or off the map");
}

bool SimWorld::free_at(double px, double py) const {
  if (!(px >= 0.0 && py >= 0.0 && px < width() && py < height())) return false;
  return obstacles(int(std::floor(py)), int(std::floor(px))) == 0;
}

StepResult step_unicycle(SimWorld& world, double steering, double speed, double max_steering) {
  if (!(std::abs(steering) <= max_steering + 1e-12)) throw ParameterError("steering exceeds the limit");
  if (!(speed > 0.0)) throw ParameterError("speed must be positive");

  ContinuousPose next = world.robot;
  next.heading = wrap_angle(world.robot.heading + steering);
  const double tx = world.robot.px + speed * std::cos(next.heading);
  const double ty = world.robot.py + speed * std::sin(next.heading);
  const GridPose target{int(std::floor(tx)), int(std::floor(ty))};

  StepResult result;
  if (world.free_at(tx, ty)) {
    next.px = tx;
    next.py = ty;
    result.cell_entered = target;
  } else {
    result.collided = true;
    result.cell_entered = world.in_bounds(target) ? target : world.robot.cell();
  }
  result.pose = next;
  world.robot = next;
  ++world.step_count;
  return result;
}

double ray_cast(const SimWorld& world, const ContinuousPose& origin, double angle_offset, double max_range) {
  if (!(max_range > 0.0)) throw ParameterError("max_range must be positive");
  if (!world.free_at(origin.px, origin.py)) throw InvalidState("ray origin lies inside an obstacle");
  const double a = origin.heading + angle_offset;
  const double dx = std::cos(a);
  const double dy = std::sin(a);
  const int samples = int(std::ceil(max_range / kRayStep));
  for (int k = 1; k <= samples; ++k) {
    const double t = std::min(k * kRayStep, max_range);
    if (!world.free_at(origin.px + t * dx, origin.py + t * dy)) {
      return std::min(t - 0.5 * kRayStep, max_range);
    }
  }
  return max_range;
}

void FeedbackAccumulator::add(int class_id, double progress, bool collided) {
  if (class_id < 0) throw ParameterError("negative class id");
  if (std::size_t(class_id) >= entries_.size()) entries_.resize(std::size_t(class_id) + 1);
  Entry& e = entries_[std::size_t(class_id)];
  e.progress += progress;
  e.incidents += collided ? 1 : 0;
  e.steps += 1;
}

void FeedbackAccumulator::merge(const FeedbackAccumulator& other) {
  if (other.entries_.size() > entries_.size()) entries_.resize(other.entries_.size());
  for (std::size_t c = 0; c < other.entries_.size(); ++c) {
    entries_[c].progress += other.entries_[c].progress;
    entries_[c].incidents += other.entries_[c].incidents;
    entries_[c].steps += other.entries_[c].steps;
  }
}

std::vector<TraversalFeedback> FeedbackAccumulator::result() const {
  std::vector<TraversalFeedback> out;
  for (std::size_t c = 0; c < entries_.size(); ++c) {
    const Entry& e = entries_[c];
    if (e.steps == 0) continue;
    out.push_back({int(c), e.progress / e.steps, e.incidents, e.steps});
  }
  return out;
}

int FeedbackAccumulator::total_steps() const {
  int n = 0;
  for (const auto& e : entries_) n += e.steps;
  return n;
}

void accumulate_feedback(FeedbackAccumulator& acc, const Trajectory& trajectory, double goal_x, double goal_y,
                         const ClassMap& class_map) {
  auto dist = [&](const ContinuousPose& p) { return std::hypot(goal_x - p.px, goal_y - p.py); };
  ContinuousPose prev = trajectory.start;
  for (const auto& s : trajectory.steps) {
    if (!class_map.contains(s.cell)) throw ParameterError("trajectory cell outside the class map");
    acc.add(class_map(s.cell), dist(prev) - dist(s.pose), s.collided);
    prev = s.pose;
  }
}

std::vector<TraversalFeedback> measure_feedback(const Trajectory& trajectory, GridPose goal,
                                                const ClassMap& class_map) {
  if (trajectory.steps.empty()) throw ParameterError("trajectory must contain at least one step");
  FeedbackAccumulator acc;
  accumulate_feedback(acc, trajectory, goal.x + 0.5, goal.y + 0.5, class_map);
  return acc.result();
}

std::string trajectory_csv(const Trajectory& trajectory, const ClassMap& class_map) {
  std::ostringstream out;
  out << "step,px,py,heading,collided,cell_x,cell_y,class_id\n";
  auto row = [&](std::size_t i, const ContinuousPose& p, bool collided, GridPose c) {
    out << i << ',' << format_real(p.px) << ',' << format_real(p.py) << ',' << format_real(p.heading) << ','
        << (collided ? 1 : 0) << ',' << c.x << ',' << c.y << ',' << class_map(c) << '\n';
  };
  row(0, trajectory.start, false, trajectory.start.cell());
  for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
    const auto& s = trajectory.steps[i];
    row(i + 1, s.pose, s.collided, s.cell);
  }
  return out.str();
}

Trajectory read_trajectory_csv(const std::string& path) {
  auto rows = read_csv(path);
  if (rows.size() < 2 || rows[0].size() != 8 || rows[0][0] != "step")
    throw FormatError(path + ": not a trajectory log");
  Trajectory t;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 8) throw FormatError(path + ": bad trajectory row");
    TrajectoryStep s{{std::stod(r[1]), std::stod(r[2]), std::stod(r[3])}, r[4] == "1", {std::stoi(r[5]), std::stoi(r[6])}};
    if (i == 1) {
      t.start = s.pose;
    } else {
      t.steps.push_back(s);
    }
  }
  return t;
}

std::string feedback_csv(const std::vector<TraversalFeedback>& feedback) {
  std::ostringstream out;
  out << "class_id,progress_rate,obstacle_incidents,steps\n";
  for (const auto& f : feedback) {
    out << f.class_id << ',' << format_real(f.progress_rate) << ',' << f.obstacle_incidents << ',' << f.steps << '\n';
  }
  return out.str();
}

}  // namespace infosample
