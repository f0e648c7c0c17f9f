#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "infosample/grid.hpp"

namespace infosample {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // interleaved RGB, row-major

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(std::size_t(w) * std::size_t(h) * 3, 0) {}

  std::array<std::uint8_t, 3> pixel(int x, int y) const {
    const std::size_t i = (std::size_t(y) * std::size_t(width) + std::size_t(x)) * 3;
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set_pixel(int x, int y, std::array<std::uint8_t, 3> rgb) {
    const std::size_t i = (std::size_t(y) * std::size_t(width) + std::size_t(x)) * 3;
    data[i] = rgb[0];
    data[i + 1] = rgb[1];
    data[i + 2] = rgb[2];
  }
};

/// Luma in [0, 1] (Rec. 601 weights).
GridArray<double> to_gray(const RgbImage& image);

/// Reads P3 or P6.
RgbImage read_ppm(const std::string& path);
/// Writes binary P6.
void write_ppm(const std::string& path, const RgbImage& image);

/// Reads P2 or P5 gray levels.
GridArray<int> read_pgm(const std::string& path);
/// Writes plain-text P2.
void write_pgm(const std::string& path, const GridArray<int>& levels, int max_value = 255);

/// One gray level per class id, spread evenly over [0, 255].
GridArray<int> class_levels(const ClassMap& classes);
ClassMap classes_from_levels(const GridArray<int>& levels, int num_classes);

}  // namespace infosample
