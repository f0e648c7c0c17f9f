#include "infosample/local_planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "infosample/csv.hpp"
#include "infosample/random.hpp"

namespace infosample {

int SteeringBins::nearest(double a) const {
  if (M == 0) return 0;
  const double clamped = std::clamp(a, -max_angle, max_angle);
  return int(std::lround(clamped / max_angle * M));
}

Eigen::VectorXd Observation::to_vector() const {
  const Eigen::Index n = ray_depths.size();
  Eigen::VectorXd v(2 * n + 2);
  v << ray_depths, goal_bearing, goal_distance, terrain_scores;
  return v;
}

Observation Observation::from_vector(const Eigen::VectorXd& v, int bins) {
  if (v.size() != 2 * bins + 2) throw ParameterError("observation vector has the wrong length");
  Observation o;
  o.ray_depths = v.head(bins);
  o.goal_bearing = v[bins];
  o.goal_distance = v[bins + 1];
  o.terrain_scores = v.tail(bins);
  return o;
}

Observation Observation::mirrored() const {
  Observation o = *this;
  o.ray_depths = ray_depths.reverse();
  o.terrain_scores = terrain_scores.reverse();
  o.goal_bearing = -goal_bearing;
  return o;
}

Observation observe(const SimWorld& world, const ContinuousPose& pose, double goal_x, double goal_y,
                    const DrivabilityTable& table, const SteeringBins& bins, const SensorConfig& sensor) {
  const int n = bins.count();
  Observation o;
  o.ray_depths.resize(n);
  o.terrain_scores.resize(n);
  for (int i = 0; i < n; ++i) {
    const double a = bins.angle(bins.steering_class(i));
    const double depth = ray_cast(world, pose, a, sensor.max_range);
    o.ray_depths[i] = depth / sensor.max_range;
    // Last free sample before the hit (or the range limit).
    const double t = std::max(0.0, depth - 0.5 * kRayStep);
    const int cx = std::clamp(int(std::floor(pose.px + t * std::cos(pose.heading + a))), 0, world.width() - 1);
    const int cy = std::clamp(int(std::floor(pose.py + t * std::sin(pose.heading + a))), 0, world.height() - 1);
    o.terrain_scores[i] = table.score(world.class_map.at(cx, cy));
  }
  const double dx = goal_x - pose.px, dy = goal_y - pose.py;
  o.goal_bearing = wrap_angle(std::atan2(dy, dx) - pose.heading) / kPi;
  o.goal_distance = std::min(1.0, std::hypot(dx, dy) / sensor.goal_scale);
  return o;
}

Eigen::VectorXd smooth_labels(const SteeringBins& bins, int c, double s) {
  if (c < -bins.M || c > bins.M) throw ParameterError("steering class outside the bin set");
  if (!(s >= 0.0 && s < 1.0)) throw ParameterError("smoothing must lie in [0, 1)");
  Eigen::VectorXd y = Eigen::VectorXd::Zero(bins.count());
  const int i = bins.index(c);
  if (bins.M == 0) {
    y[0] = 1.0;
    return y;
  }
  y[i] = 1.0 - s;
  if (c == -bins.M) {
    y[i + 1] += s;
  } else if (c == bins.M) {
    y[i - 1] += s;
  } else {
    y[i - 1] += 0.5 * s;
    y[i + 1] += 0.5 * s;
  }
  return y;
}

SteeringNet SteeringNet::zeros(int inputs, int hidden, int outputs) {
  return {Eigen::MatrixXd::Zero(hidden, inputs), Eigen::VectorXd::Zero(hidden), Eigen::MatrixXd::Zero(outputs, hidden),
          Eigen::VectorXd::Zero(outputs)};
}

SteeringNet SteeringNet::random(int inputs, int hidden, int outputs, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x11e7));
  SteeringNet net = zeros(inputs, hidden, outputs);
  const double a1 = 1.0 / std::sqrt(double(inputs));
  const double a2 = 1.0 / std::sqrt(double(hidden));
  for (Eigen::Index i = 0; i < net.w1.size(); ++i) net.w1.data()[i] = uniform(rng, -a1, a1);
  for (Eigen::Index i = 0; i < net.w2.size(); ++i) net.w2.data()[i] = uniform(rng, -a2, a2);
  return net;
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

Eigen::VectorXd SteeringNet::flatten() const {
  Eigen::VectorXd p(parameter_count());
  Eigen::Index o = 0;
  auto put_matrix = [&](const Eigen::MatrixXd& m) {
    Eigen::Map<RowMajor>(p.data() + o, m.rows(), m.cols()) = m;
    o += m.size();
  };
  auto put_vector = [&](const Eigen::VectorXd& v) {
    p.segment(o, v.size()) = v;
    o += v.size();
  };
  put_matrix(w1);
  put_vector(b1);
  put_matrix(w2);
  put_vector(b2);
  return p;
}

void SteeringNet::assign(const Eigen::VectorXd& p) {
  if (p.size() != parameter_count()) throw ParameterError("parameter vector has the wrong length");
  Eigen::Index o = 0;
  auto get_matrix = [&](Eigen::MatrixXd& m) {
    m = Eigen::Map<const RowMajor>(p.data() + o, m.rows(), m.cols());
    o += m.size();
  };
  auto get_vector = [&](Eigen::VectorXd& v) {
    v = p.segment(o, v.size());
    o += v.size();
  };
  get_matrix(w1);
  get_vector(b1);
  get_matrix(w2);
  get_vector(b2);
}

bool SteeringNet::finite() const { return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(); }

namespace {

struct Forward {
  Eigen::MatrixXd hidden;    // tanh activations, hidden x B
  Eigen::MatrixXd logits;    // unclipped, outputs x B
  Eigen::MatrixXd log_prob;  // outputs x B
  Eigen::MatrixXd prob;
};

Forward forward(const SteeringNet& net, const Eigen::MatrixXd& x) {
  Forward f;
  f.hidden = ((net.w1 * x).colwise() + net.b1).array().tanh();
  f.logits = (net.w2 * f.hidden).colwise() + net.b2;
  const Eigen::MatrixXd clipped = f.logits.cwiseMax(-kLogitClip).cwiseMin(kLogitClip);
  const Eigen::RowVectorXd top = clipped.colwise().maxCoeff();
  const Eigen::MatrixXd shifted = clipped.rowwise() - top;
  const Eigen::RowVectorXd lse = shifted.array().exp().colwise().sum().log();
  f.log_prob = shifted.rowwise() - lse;
  f.prob = f.log_prob.array().exp();
  return f;
}

}  // namespace

Eigen::VectorXd predict(const SteeringNet& net, const Eigen::VectorXd& x) {
  if (x.size() != net.inputs()) throw ParameterError("observation size does not match the network");
  return forward(net, x).prob.col(0);
}

double prediction_entropy(const Eigen::VectorXd& f) {
  double h = 0.0;
  for (Eigen::Index j = 0; j < f.size(); ++j) {
    if (f[j] > 0.0) h -= f[j] * std::log(f[j]);
  }
  return h;
}

LossAndGradient clone_loss(const SteeringNet& net, const CloneDataset& data, std::span<const std::size_t> batch,
                           double lambda1, double lambda2) {
  if (batch.empty()) throw ParameterError("clone loss needs at least one sample");
  if (!(lambda1 >= 0.0 && lambda2 >= 0.0)) throw ParameterError("loss weights must be nonnegative");
  const Eigen::Index b = Eigen::Index(batch.size());
  Eigen::MatrixXd x(net.inputs(), b);
  Eigen::MatrixXd y(net.outputs(), b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const CloneSample& s = data.at(batch[std::size_t(i)]);
    if (s.observation.size() != net.inputs() || s.label.size() != net.outputs())
      throw ParameterError("sample shape does not match the network");
    x.col(i) = s.observation;
    y.col(i) = s.label;
  }

  const Forward f = forward(net, x);
  const Eigen::RowVectorXd plogp = (f.prob.array() * f.log_prob.array()).colwise().sum();  // -H per sample
  const double cross_entropy = -(y.array() * f.log_prob.array()).sum();
  LossAndGradient out;
  out.loss = cross_entropy + lambda2 * plogp.sum();

  // d/dz of cross entropy: f * sum(y) - y; of -lambda2 H: lambda2 f (log f + H).
  Eigen::MatrixXd dz = f.prob.array().rowwise() * y.colwise().sum().array();
  dz -= y;
  dz.array() += lambda2 * f.prob.array() * (f.log_prob.rowwise() - plogp).array();
  dz = (f.logits.array().abs() <= kLogitClip).select(dz, 0.0);

  SteeringNet g = SteeringNet::zeros(net.inputs(), net.hidden(), net.outputs());
  g.w2 = dz * f.hidden.transpose();
  g.b2 = dz.rowwise().sum();
  const Eigen::MatrixXd da = (net.w2.transpose() * dz).array() * (1.0 - f.hidden.array().square());
  g.w1 = da * x.transpose();
  g.b1 = da.rowwise().sum();

  const Eigen::VectorXd w = net.flatten();
  out.loss += lambda1 * 0.5 * w.squaredNorm();
  out.gradient = g.flatten() + lambda1 * w;
  return out;
}

LossAndGradient clone_loss(const SteeringNet& net, const CloneDataset& data, double lambda1, double lambda2) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t(0));
  return clone_loss(net, data, all, lambda1, lambda2);
}

namespace {

int expert_from_observation(const Observation& obs, const LocalPlannerConfig& cfg) {
  const SteeringBins& bins = cfg.bins;
  const double range = cfg.sensor.max_range;
  const double bearing = obs.goal_bearing * kPi;
  const double goal_dist = obs.goal_distance * cfg.sensor.goal_scale;
  const int pursuit = bins.nearest(bearing);
  const double need = std::min(cfg.expert.safety_range, goal_dist);
  const double ahead = obs.ray_depths[bins.index(pursuit)] * range;
  if (ahead >= need) return pursuit;
  // The only obstruction on the bearing is the waypoint's own cell: press on.
  if (std::abs(bearing) <= bins.max_angle && ahead >= goal_dist - cfg.expert.goal_cell_reach) return pursuit;

  auto best_among = [&](double min_depth) {
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < bins.count(); ++i) {
      const double depth = obs.ray_depths[i] * range;
      if (depth < min_depth) continue;
      const double score = obs.ray_depths[i] + cfg.expert.kappa * obs.terrain_scores[i] -
                           cfg.expert.mu * std::abs(bins.angle(bins.steering_class(i)) - bearing);
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    return best;
  };
  int pick = best_among(cfg.expert.safety_range);
  if (pick < 0) pick = best_among(cfg.unicycle.speed + kRayStep);
  if (pick < 0) {
    Eigen::Index deepest;
    obs.ray_depths.maxCoeff(&deepest);
    pick = int(deepest);
  }
  return bins.steering_class(pick);
}

}  // namespace

int expert_action(const SimWorld& world, const ContinuousPose& pose, GridPose waypoint, const DrivabilityTable& table,
                  const LocalPlannerConfig& config) {
  if (!world.in_bounds(waypoint)) throw ParameterError("waypoint outside the world");
  const Observation obs = observe(world, pose, waypoint.x + 0.5, waypoint.y + 0.5, table, config.bins, config.sensor);
  return expert_from_observation(obs, config);
}

Driver expert_driver(const DrivabilityTable&, const LocalPlannerConfig& config) {
  return [config](const SimWorld&, const Observation& obs, GridPose) { return expert_from_observation(obs, config); };
}

Driver net_driver(const SteeringNet& net, const SteeringBins& bins) {
  return [&net, bins](const SimWorld&, const Observation& obs, GridPose) {
    Eigen::Index best;
    predict(net, obs).maxCoeff(&best);
    return bins.steering_class(int(best));
  };
}

void fit(SteeringNet& net, const CloneDataset& data, const FitConfig& config) {
  if (data.empty()) throw ParameterError("cannot fit an empty dataset");
  if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0))
    throw ParameterError("fit configuration must be positive");
  Rng rng(mix_seed(config.seed, 0xf17));
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t(0));
  Eigen::VectorXd params = net.flatten();
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(params.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[std::size_t(uniform_index(rng, int(i)))]);
    for (std::size_t start = 0; start < n; start += std::size_t(config.batch_size)) {
      const std::size_t len = std::min(std::size_t(config.batch_size), n - start);
      const std::span<const std::size_t> batch(order.data() + start, len);
      // Regularizer weight is shared across batches so one epoch applies it once.
      const double share = double(len) / double(n);
      const LossAndGradient lg = clone_loss(net, data, batch, config.lambda1 * share, config.lambda2);
      velocity = config.momentum * velocity - config.learning_rate * lg.gradient / double(len);
      params += velocity;
      net.assign(params);
    }
    if (!net.finite()) throw DivergenceError("steering net diverged at epoch " + std::to_string(epoch), epoch);
  }
}

NavResult drive(SimWorld world, const std::vector<GridPose>& waypoints, const Driver& driver,
                const DrivabilityTable& table, const LocalPlannerConfig& config, const NavLimits& limits,
                const std::function<void(const SimWorld&, const Observation&, GridPose)>& visit) {
  if (waypoints.empty()) throw ParameterError("navigation needs at least one waypoint");
  NavResult out;
  out.trajectory.start = world.robot;
  FeedbackAccumulator acc;
  std::size_t leg = 0;
  std::vector<double> leg_distances;
  int steps = 0;
  for (;;) {
    auto goal_dist = [&](const ContinuousPose& p) {
      return std::hypot(waypoints[leg].x + 0.5 - p.px, waypoints[leg].y + 0.5 - p.py);
    };
    while (leg < waypoints.size() && goal_dist(world.robot) <= limits.reach_radius) {
      ++leg;
      leg_distances.clear();
    }
    if (leg == waypoints.size()) {
      out.outcome = NavOutcome::Completed;
      break;
    }
    if (steps >= limits.max_steps) break;
    const double d = goal_dist(world.robot);
    leg_distances.push_back(d);
    const std::size_t k = leg_distances.size();
    if (k > std::size_t(limits.stuck_window) &&
        leg_distances[k - 1 - std::size_t(limits.stuck_window)] - d < limits.stuck_progress)
      break;

    const GridPose wp = waypoints[leg];
    const Observation obs = observe(world, world.robot, wp.x + 0.5, wp.y + 0.5, table, config.bins, config.sensor);
    if (visit) visit(world, obs, wp);
    const int c = driver(world, obs, wp);
    const StepResult r = step_unicycle(world, config.bins.angle(c), config.unicycle.speed, config.bins.max_angle);
    acc.add(world.class_map(r.cell_entered), d - goal_dist(r.pose), r.collided);
    out.trajectory.steps.push_back({r.pose, r.collided, r.cell_entered});
    out.collisions += r.collided ? 1 : 0;
    ++steps;
  }
  out.waypoints_reached = int(leg);
  out.feedback = acc.result();
  return out;
}

NavResult navigate(const SteeringNet& net, const SimWorld& world, const std::vector<GridPose>& waypoints,
                   const DrivabilityTable& table, const LocalPlannerConfig& config, const NavLimits& limits) {
  return drive(world, waypoints, net_driver(net, config.bins), table, config, limits);
}

EvalSummary evaluate(const SteeringNet& net, const std::vector<Episode>& episodes, const DrivabilityTable& table,
                     const LocalPlannerConfig& config, const NavLimits& limits) {
  EvalSummary s;
  for (const Episode& e : episodes) {
    const NavResult r = navigate(net, e.world, {e.goal}, table, config, limits);
    const bool reached = r.outcome == NavOutcome::Completed;
    ++s.episodes;
    s.reached += reached ? 1 : 0;
    s.collision_free += r.collisions == 0 ? 1 : 0;
    s.reached_without_collision += (reached && r.collisions == 0) ? 1 : 0;
  }
  return s;
}

CloneTrainResult train_clone(const EpisodeGenerator& generator, const DrivabilityTable& table,
                             const LocalPlannerConfig& config, const CloneTrainConfig& train) {
  if (train.dagger_rounds < 1 || train.episodes_per_round < 1 || train.eval_episodes < 1)
    throw ParameterError("clone training configuration must be positive");
  CloneTrainResult res;
  res.net = SteeringNet::random(observation_length(config.bins), config.hidden, config.bins.count(),
                                mix_seed(train.seed, 0x4e7));
  std::vector<Episode> eval;
  for (int j = 0; j < train.eval_episodes; ++j) eval.push_back(generator(mix_seed(train.seed, 0xe7a1, std::uint64_t(j))));

  const Driver expert = expert_driver(table, config);
  for (int round = 0; round < train.dagger_rounds; ++round) {
    const Driver learner = net_driver(res.net, config.bins);
    const Driver& pilot = round == 0 ? expert : learner;
    auto record = [&](const SimWorld&, const Observation& obs, GridPose) {
      const int label = expert_from_observation(obs, config);
      res.dataset.push_back({obs.to_vector(), smooth_labels(config.bins, label, train.smoothing)});
    };
    for (int e = 0; e < train.episodes_per_round; ++e) {
      const Episode ep = generator(mix_seed(train.seed, std::uint64_t(round), std::uint64_t(e)));
      drive(ep.world, {ep.goal}, pilot, table, config, train.limits, record);
    }
    FitConfig fc = train.fit;
    fc.seed = mix_seed(train.fit.seed, std::uint64_t(round));
    try {
      fit(res.net, res.dataset, fc);
    } catch (const DivergenceError&) {
      throw DivergenceError("steering net diverged in round " + std::to_string(round), round);
    }
    const EvalSummary s = evaluate(res.net, eval, table, config, train.limits);
    res.rounds.push_back({round, res.dataset.size(), double(s.reached_without_collision) / double(s.episodes)});
  }
  return res;
}

std::string steering_net_json(const SteeringNet& net, const SteeringBins& bins) {
  auto layer = [](const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
    std::vector<double> flat(std::size_t(w.size()));
    Eigen::Map<RowMajor>(flat.data(), w.rows(), w.cols()) = w;
    return nlohmann::ordered_json{{"rows", w.rows()},
                                  {"cols", w.cols()},
                                  {"weights", flat},
                                  {"bias", std::vector<double>(b.data(), b.data() + b.size())}};
  };
  nlohmann::ordered_json j;
  j["M"] = bins.M;
  j["max_angle"] = bins.max_angle;
  j["hidden_activation"] = "tanh";
  j["output"] = "softmax";
  j["layers"] = {layer(net.w1, net.b1), layer(net.w2, net.b2)};
  return j.dump(2) + "\n";
}

SteeringNet parse_steering_net_json(const std::string& text, SteeringBins* bins) {
  const auto j = nlohmann::json::parse(text);
  const auto& layers = j.at("layers");
  if (layers.size() != 2) throw ParameterError("steering net must have two layers");
  auto read = [](const nlohmann::json& l, Eigen::MatrixXd& w, Eigen::VectorXd& b) {
    const int rows = l.at("rows").get<int>(), cols = l.at("cols").get<int>();
    const auto flat = l.at("weights").get<std::vector<double>>();
    const auto bias = l.at("bias").get<std::vector<double>>();
    if (flat.size() != std::size_t(rows) * std::size_t(cols) || bias.size() != std::size_t(rows))
      throw ParameterError("layer weights do not match their shape");
    w = Eigen::Map<const RowMajor>(flat.data(), rows, cols);
    b = Eigen::Map<const Eigen::VectorXd>(bias.data(), rows);
  };
  SteeringNet net;
  read(layers[0], net.w1, net.b1);
  read(layers[1], net.w2, net.b2);
  if (net.w2.cols() != net.w1.rows()) throw ParameterError("layer shapes do not chain");
  SteeringBins sb{j.at("M").get<int>(), j.at("max_angle").get<double>()};
  if (net.outputs() != sb.count()) throw ParameterError("output width does not match the steering bins");
  if (bins) *bins = sb;
  return net;
}

std::string dataset_csv(const CloneDataset& data, const SteeringBins& bins) {
  std::ostringstream out;
  const int n = bins.count();
  for (int i = 0; i < n; ++i) out << "ray_" << i << ',';
  out << "goal_bearing,goal_distance";
  for (int i = 0; i < n; ++i) out << ",terrain_" << i;
  for (int i = 0; i < n; ++i) out << ",label_" << i;
  out << '\n';
  for (const auto& s : data) {
    for (Eigen::Index i = 0; i < s.observation.size(); ++i) out << (i ? "," : "") << format_real(s.observation[i]);
    for (Eigen::Index i = 0; i < s.label.size(); ++i) out << ',' << format_real(s.label[i]);
    out << '\n';
  }
  return out.str();
}

CloneDataset read_dataset_csv(const std::string& path, const SteeringBins& bins) {
  const auto rows = read_csv(path);
  const std::size_t obs_len = std::size_t(observation_length(bins));
  const std::size_t width = obs_len + std::size_t(bins.count());
  if (rows.empty() || rows[0].size() != width) throw FormatError(path + ": dataset header does not match the bins");
  CloneDataset data;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != width) throw FormatError(path + ": bad dataset row " + std::to_string(r));
    CloneSample s{Eigen::VectorXd(Eigen::Index(obs_len)), Eigen::VectorXd(bins.count())};
    for (std::size_t i = 0; i < obs_len; ++i) s.observation[Eigen::Index(i)] = std::stod(rows[r][i]);
    for (int i = 0; i < bins.count(); ++i) s.label[i] = std::stod(rows[r][obs_len + std::size_t(i)]);
    data.push_back(std::move(s));
  }
  return data;
}

}  // namespace infosample
