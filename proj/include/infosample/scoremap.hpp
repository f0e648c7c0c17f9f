#pragma once

#include <map>
#include <string>

#include "infosample/grid.hpp"
#include "infosample/gridworld.hpp"

namespace infosample {

struct DrivabilityEntry {
  double score = 0.5;
  int observations = 0;
};

/// Learned per-class drivability; classes never observed read as the prior.
class DrivabilityTable {
 public:
  struct Config {
    double alpha = 0.3;          // EMA step
    double beta = 1.0;           // collision weight
    double prior = 0.5;
    double nominal_speed = 0.5;  // cells per step that counts as full progress
  };

  DrivabilityTable() = default;
  explicit DrivabilityTable(Config config);

  const Config& config() const { return config_; }
  double score(int class_id) const;
  int observations(int class_id) const;
  bool has(int class_id) const { return entries_.count(class_id) != 0; }
  const std::map<int, DrivabilityEntry>& entries() const { return entries_; }

  /// Authors an entry directly (manual scoremaps, tests).
  void set(int class_id, double score, int observations = 0);

 private:
  Config config_;
  std::map<int, DrivabilityEntry> entries_;

  friend DrivabilityTable update_drivability(const DrivabilityTable&, const TraversalFeedback&);
};

/// d = clamp(progress_rate / nominal_speed - beta * incidents / steps, 0, 1).
double instantaneous_drivability(const DrivabilityTable::Config& config, const TraversalFeedback& feedback);

/// score <- (1 - alpha) score + alpha d; unseen classes start from the prior.
DrivabilityTable update_drivability(const DrivabilityTable& table, const TraversalFeedback& feedback);

ScoreMap render_scoremap(const ClassMap& class_map, const DrivabilityTable& table);

/// {"classes": {"0": {"score": .., "observations": ..}}, "alpha": .., "beta": .., "prior": .., "nominal_speed": ..}
std::string drivability_json(const DrivabilityTable& table);
DrivabilityTable parse_drivability_json(const std::string& text);

}  // namespace infosample
