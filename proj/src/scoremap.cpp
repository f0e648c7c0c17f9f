#include "infosample/scoremap.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace infosample {
namespace {

void check_unit(double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw ParameterError("drivability scores must lie in [0, 1]");
}

}  // namespace

DrivabilityTable::DrivabilityTable(Config config) : config_(config) {
  if (!(config_.alpha > 0.0 && config_.alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  if (!(config_.beta >= 0.0)) throw ParameterError("beta must be nonnegative");
  if (!(config_.nominal_speed > 0.0)) throw ParameterError("nominal speed must be positive");
  check_unit(config_.prior);
}

double DrivabilityTable::score(int class_id) const {
  auto it = entries_.find(class_id);
  return it == entries_.end() ? config_.prior : it->second.score;
}

int DrivabilityTable::observations(int class_id) const {
  auto it = entries_.find(class_id);
  return it == entries_.end() ? 0 : it->second.observations;
}

void DrivabilityTable::set(int class_id, double score, int observations) {
  if (class_id < 0) throw ParameterError("negative class id");
  check_unit(score);
  entries_[class_id] = {score, observations};
}

double instantaneous_drivability(const DrivabilityTable::Config& config, const TraversalFeedback& feedback) {
  if (feedback.steps < 1) throw ParameterError("feedback needs at least one step");
  const double d = feedback.progress_rate / config.nominal_speed -
                   config.beta * double(feedback.obstacle_incidents) / double(feedback.steps);
  return std::clamp(d, 0.0, 1.0);
}

DrivabilityTable update_drivability(const DrivabilityTable& table, const TraversalFeedback& feedback) {
  if (!std::isfinite(feedback.progress_rate)) throw ParameterError("progress rate must be finite");
  const double d = instantaneous_drivability(table.config_, feedback);
  DrivabilityTable next = table;
  auto [it, inserted] = next.entries_.try_emplace(feedback.class_id, DrivabilityEntry{table.config_.prior, 0});
  DrivabilityEntry& e = it->second;
  e.score = std::clamp((1.0 - table.config_.alpha) * e.score + table.config_.alpha * d, 0.0, 1.0);
  e.observations += 1;
  return next;
}

ScoreMap render_scoremap(const ClassMap& class_map, const DrivabilityTable& table) {
  return ScoreMap(GridArray<double>(class_map.values().unaryExpr([&](int c) { return table.score(c); })));
}

std::string drivability_json(const DrivabilityTable& table) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json classes = nlohmann::ordered_json::object();
  for (const auto& [id, e] : table.entries()) {
    classes[std::to_string(id)] = {{"score", e.score}, {"observations", e.observations}};
  }
  j["classes"] = classes;
  j["alpha"] = table.config().alpha;
  j["beta"] = table.config().beta;
  j["prior"] = table.config().prior;
  j["nominal_speed"] = table.config().nominal_speed;
  return j.dump(2) + "\n";
}

DrivabilityTable parse_drivability_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  DrivabilityTable::Config cfg;
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.beta = j.value("beta", cfg.beta);
  cfg.prior = j.value("prior", cfg.prior);
  cfg.nominal_speed = j.value("nominal_speed", cfg.nominal_speed);
  DrivabilityTable table(cfg);
  if (j.contains("classes")) {
    for (const auto& [key, v] : j.at("classes").items()) {
      table.set(std::stoi(key), v.at("score").get<double>(), v.value("observations", 0));
    }
  }
  return table;
}

}  // namespace infosample
