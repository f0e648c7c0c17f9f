#include "infosample/global_planner.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "infosample/csv.hpp"
#include "infosample/random.hpp"

namespace infosample {

ActionMask feasible_actions(int width, int height, GridPose p) {
  ActionMask m{};
  for (int a = 0; a < kNumActions; ++a) {
    const GridPose q = apply_action(p, a);
    m[std::size_t(a)] = q.x >= 0 && q.y >= 0 && q.x < width && q.y < height;
  }
  return m;
}

int FeatureConfig::max_radius() const {
  int r = 0;
  for (int w : ring_widths) r += w;
  return r;
}

int feature_bucket(const FeatureConfig& config, int dx, int dy) {
  const int d = std::max(std::abs(dx), std::abs(dy));
  if (d == 0) return -1;
  int ring = -1;
  int outer = 0;
  for (int r = 0; r < config.rings(); ++r) {
    outer += config.ring_widths[std::size_t(r)];
    if (d <= outer) {
      ring = r;
      break;
    }
  }
  if (ring < 0) return -1;
  // Integer offsets never fall exactly on an octant edge (tan 22.5 deg is irrational).
  const double angle = std::atan2(double(dy), double(dx));
  int octant = int(std::floor((angle + kPi / 8.0) / (kPi / 4.0)));
  octant = ((octant % 8) + 8) % 8;
  return ring * 8 + octant;
}

FeatureLayout::FeatureLayout(FeatureConfig config) : config_(std::move(config)) {
  for (int w : config_.ring_widths) {
    if (w < 1) throw ParameterError("ring widths must be positive");
  }
  if (config_.ring_widths.empty()) throw ParameterError("at least one feature ring is required");
  radius_ = config_.max_radius();
  const int side = 2 * radius_ + 1;
  table_.resize(std::size_t(side) * std::size_t(side));
  sizes_.assign(std::size_t(config_.rings()) * 8, 0);
  for (int dy = -radius_; dy <= radius_; ++dy) {
    for (int dx = -radius_; dx <= radius_; ++dx) {
      const int b = feature_bucket(config_, dx, dy);
      table_[std::size_t((dy + radius_) * side + dx + radius_)] = b;
      if (b >= 0) ++sizes_[std::size_t(b)];
    }
  }
}

Eigen::VectorXd extract_features(const FeatureLayout& layout, const ScoreMap& remaining, GridPose pose) {
  if (!remaining.contains(pose)) throw ParameterError("pose outside the map");
  const int n = layout.length();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  const int r = layout.radius();
  const int y0 = std::max(0, pose.y - r), y1 = std::min(remaining.height() - 1, pose.y + r);
  const int x0 = std::max(0, pose.x - r), x1 = std::min(remaining.width() - 1, pose.x + r);
  const auto& v = remaining.values();
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double s = v(y, x);
      if (s == 0.0) continue;
      const int b = layout.bucket(x - pose.x, y - pose.y);
      if (b >= 0) f[b] += s;
    }
  }
  for (int b = 0; b < n - 1; ++b) f[b] /= layout.bucket_size(b);
  f[n - 1] = 1.0;
  return f;
}

Eigen::Vector4d action_distribution(const PolicyParams& theta, const Eigen::VectorXd& phi, const ActionMask& mask) {
  if (theta.rows() != kNumActions || theta.cols() != phi.size()) throw ParameterError("policy/feature size mismatch");
  return masked_softmax(Eigen::Vector4d(theta * phi), mask);
}

Eigen::MatrixXd grad_log_policy(const PolicyParams& theta, const Eigen::VectorXd& phi, const ActionMask& mask,
                                int action) {
  Eigen::Vector4d coeff = -action_distribution(theta, phi, mask);
  coeff[action] += 1.0;
  return coeff * phi.transpose();
}

std::vector<GridPose> Rollout::visited() const {
  std::vector<GridPose> out;
  out.reserve(steps.size() + 1);
  out.push_back(start);
  for (const auto& s : steps) out.push_back(s.pose);
  return out;
}

namespace {

int pick_action(const Eigen::Vector4d& p, ActionSelection selection, Rng& rng) {
  if (selection == ActionSelection::Greedy) {
    int best = 0;
    for (int a = 1; a < kNumActions; ++a) {
      if (p[a] > p[best]) best = a;
    }
    return best;
  }
  double u = uniform01(rng);
  int last = 0;
  for (int a = 0; a < kNumActions; ++a) {
    if (p[a] <= 0.0) continue;
    last = a;
    u -= p[a];
    if (u < 0.0) return a;
  }
  return last;
}

// Enters `next`, collecting and zeroing its remaining score.
double collect(GridArray<double>& remaining, GridPose next) {
  double& cell = remaining(next.y, next.x);
  const double r = cell;
  cell = 0.0;
  return r;
}

}  // namespace

Rollout rollout(const PolicyParams& theta, const FeatureLayout& layout, const ScoreMap& scoremap, GridPose start,
                int horizon, std::uint64_t seed, ActionSelection selection) {
  if (horizon < 0) throw ParameterError("horizon must be nonnegative");
  if (!scoremap.contains(start)) throw ParameterError("start outside the map");
  Rng rng(mix_seed(seed));
  ScoreMap remaining = scoremap;
  Rollout out;
  out.start = start;
  out.steps.reserve(std::size_t(horizon));
  GridPose pose = start;
  for (int t = 0; t < horizon; ++t) {
    RolloutStep step;
    step.features = extract_features(layout, remaining, pose);
    step.mask = feasible_actions(scoremap.width(), scoremap.height(), pose);
    step.action = pick_action(action_distribution(theta, step.features, step.mask), selection, rng);
    pose = apply_action(pose, step.action);
    step.pose = pose;
    step.reward = remaining(pose);
    remaining.set(pose, 0.0);
    out.total_reward += step.reward;
    out.steps.push_back(std::move(step));
  }
  return out;
}

Rollout random_walk(const ScoreMap& scoremap, GridPose start, int horizon, std::uint64_t seed) {
  if (!scoremap.contains(start)) throw ParameterError("start outside the map");
  Rng rng(mix_seed(seed));
  GridArray<double> values = scoremap.values();
  Rollout out;
  out.start = start;
  GridPose pose = start;
  for (int t = 0; t < horizon; ++t) {
    RolloutStep step;
    step.mask = feasible_actions(scoremap.width(), scoremap.height(), pose);
    Eigen::Vector4d p;
    for (int a = 0; a < kNumActions; ++a) p[a] = step.mask[std::size_t(a)] ? 1.0 : 0.0;
    if (p.sum() == 0.0) throw InvalidState("no feasible action");
    step.action = pick_action(p / p.sum(), ActionSelection::Sample, rng);
    pose = apply_action(pose, step.action);
    step.pose = pose;
    step.reward = collect(values, pose);
    out.total_reward += step.reward;
    out.steps.push_back(std::move(step));
  }
  return out;
}

double mean_total_reward(const std::vector<Rollout>& rollouts) {
  if (rollouts.empty()) throw ParameterError("need at least one rollout");
  double s = 0.0;
  for (const auto& r : rollouts) s += r.total_reward;
  return s / double(rollouts.size());
}

Eigen::MatrixXd policy_gradient(const std::vector<Rollout>& rollouts, const PolicyParams& theta, double baseline) {
  if (rollouts.empty()) throw ParameterError("need at least one rollout");
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
  for (const auto& r : rollouts) {
    double to_go = 0.0;
    for (auto s = r.steps.rbegin(); s != r.steps.rend(); ++s) {
      if (s->features.size() != theta.cols()) throw ParameterError("policy/feature size mismatch");
      to_go += s->reward;
      Eigen::Vector4d coeff = -action_distribution(theta, s->features, s->mask);
      coeff[s->action] += 1.0;
      grad.noalias() += (to_go - baseline) * coeff * s->features.transpose();
    }
  }
  return grad / double(rollouts.size());
}

Eigen::MatrixXd policy_gradient(const std::vector<Rollout>& rollouts, const PolicyParams& theta) {
  return policy_gradient(rollouts, theta, mean_total_reward(rollouts));
}

TrainResult train(const ScoreMap& scoremap, const TrainConfig& config, const FeatureLayout& layout) {
  if (config.iterations < 1 || config.rollouts_per_iteration < 1 || config.horizon < 1 ||
      !(config.learning_rate > 0.0))
    throw ParameterError("training configuration must be positive");
  TrainResult res;
  res.theta = PolicyParams::Zero(kNumActions, layout.length());
  std::vector<Rollout> batch(std::size_t(config.rollouts_per_iteration));
  for (int it = 0; it < config.iterations; ++it) {
    for (int i = 0; i < config.rollouts_per_iteration; ++i) {
      batch[std::size_t(i)] = rollout(res.theta, layout, scoremap, config.start, config.horizon,
                                      mix_seed(config.seed, std::uint64_t(it), std::uint64_t(i)));
    }
    const double b = mean_total_reward(batch);
    res.curve.push_back({it, b, b});
    res.theta += config.learning_rate * policy_gradient(batch, res.theta, b);
    if (!res.theta.allFinite()) throw DivergenceError("policy parameters diverged at iteration " + std::to_string(it), it);
  }
  return res;
}

std::vector<GridPose> plan_waypoints(const PolicyParams& theta, const FeatureLayout& layout, const ScoreMap& scoremap,
                                     GridPose start, int horizon, int stride) {
  if (stride < 1) throw ParameterError("stride must be at least 1");
  const auto cells = rollout(theta, layout, scoremap, start, horizon, 0, ActionSelection::Greedy).visited();
  std::vector<GridPose> out;
  for (std::size_t i = 0; i < cells.size(); i += std::size_t(stride)) out.push_back(cells[i]);
  if ((cells.size() - 1) % std::size_t(stride) != 0) out.push_back(cells.back());
  return out;
}

Rollout baseline_boustrophedon(const ScoreMap& scoremap, GridPose start, int horizon) {
  if (horizon < 1) throw ParameterError("horizon must be at least 1");
  if (!scoremap.contains(start)) throw ParameterError("start outside the map");
  GridArray<double> values = scoremap.values();
  Rollout out;
  out.start = start;
  GridPose p = start;
  int dx = 1, dy = 1;
  for (int t = 0; t < horizon; ++t) {
    GridPose next{p.x + dx, p.y};
    int action = dx > 0 ? int(Action::East) : int(Action::West);
    if (!scoremap.contains(next)) {
      GridPose v{p.x, p.y + dy};
      if (!scoremap.contains(v)) {
        dy = -dy;
        v = {p.x, p.y + dy};
      }
      dx = -dx;
      if (scoremap.contains(v)) {
        next = v;
        action = dy > 0 ? int(Action::North) : int(Action::South);
      } else {
        next = {p.x + dx, p.y};
        action = dx > 0 ? int(Action::East) : int(Action::West);
        if (!scoremap.contains(next)) next = p;  // 1x1 map
      }
    }
    RolloutStep step;
    step.action = action;
    step.mask = feasible_actions(scoremap.width(), scoremap.height(), p);
    step.pose = next;
    step.reward = collect(values, next);
    out.total_reward += step.reward;
    out.steps.push_back(std::move(step));
    p = next;
  }
  return out;
}

double discounted_return(const Rollout& r, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ParameterError("gamma must lie in (0, 1]");
  double g = 0.0;
  double w = 1.0;
  for (const auto& s : r.steps) {
    g += w * s.reward;
    w *= gamma;
  }
  return g;
}

std::string policy_json(const PolicyParams& theta, const FeatureConfig& config) {
  nlohmann::ordered_json j;
  j["actions"] = std::vector<std::string>(kActionLabels.begin(), kActionLabels.end());
  j["feature_config"] = {{"ring_widths", config.ring_widths}, {"octants", 8}, {"bias", true}};
  j["rows"] = theta.rows();
  j["cols"] = theta.cols();
  std::vector<double> flat;
  for (Eigen::Index r = 0; r < theta.rows(); ++r)
    for (Eigen::Index c = 0; c < theta.cols(); ++c) flat.push_back(theta(r, c));
  j["theta"] = flat;
  return j.dump(2) + "\n";
}

PolicyParams parse_policy_json(const std::string& text, FeatureConfig* config) {
  const auto j = nlohmann::json::parse(text);
  FeatureConfig fc;
  fc.ring_widths = j.at("feature_config").at("ring_widths").get<std::vector<int>>();
  const int rows = j.at("rows").get<int>();
  const int cols = j.at("cols").get<int>();
  if (rows != kNumActions || cols != fc.length()) throw ParameterError("policy shape does not match its feature config");
  const auto flat = j.at("theta").get<std::vector<double>>();
  if (flat.size() != std::size_t(rows) * std::size_t(cols)) throw ParameterError("policy theta has the wrong length");
  PolicyParams theta(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) theta(r, c) = flat[std::size_t(r) * std::size_t(cols) + std::size_t(c)];
  if (config) *config = fc;
  return theta;
}

std::string learning_curve_csv(const std::vector<LearningPoint>& curve) {
  std::ostringstream out;
  out << "iteration,mean_reward,baseline\n";
  for (const auto& p : curve) out << p.iteration << ',' << format_real(p.mean_reward) << ',' << format_real(p.baseline) << '\n';
  return out.str();
}

}  // namespace infosample
