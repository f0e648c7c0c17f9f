#pragma once

#include <filesystem>
#include <string>

#include "infosample/gridworld.hpp"

namespace infosample::testing {

inline std::string scratch(const std::string& name) {
  const std::filesystem::path dir(INFOSAMPLE_TEST_TMP);
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

inline ClassMap uniform_classes(int w, int h, int num_classes = 1) {
  return ClassMap(GridArray<int>::Zero(h, w), num_classes);
}

inline GridArray<std::uint8_t> no_obstacles(int w, int h) { return GridArray<std::uint8_t>::Zero(h, w); }

inline SimWorld open_world(int w, int h, ContinuousPose start) {
  return SimWorld(uniform_classes(w, h), no_obstacles(w, h), start);
}

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace infosample::testing
