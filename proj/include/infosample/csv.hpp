#pragma once

#include <string>
#include <vector>

#include "infosample/grid.hpp"

namespace infosample {

/// Shortest decimal text that parses back to the same double.
std::string format_real(double v);

std::vector<std::vector<std::string>> read_csv(const std::string& path);
void write_text(const std::string& path, const std::string& contents);

/// Score grid as CSV, one row per y, no header.
void write_scoremap_csv(const std::string& path, const ScoreMap& map);
ScoreMap read_scoremap_csv(const std::string& path);

/// Scores times 255, rounded, clamped to [0, 255].
void write_scoremap_pgm(const std::string& path, const ScoreMap& map);

}  // namespace infosample
