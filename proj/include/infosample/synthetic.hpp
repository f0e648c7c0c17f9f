#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "infosample/grid.hpp"
#include "infosample/gridworld.hpp"
#include "infosample/image_io.hpp"

namespace infosample {

/// Sum of a few Gaussian blobs on an empty background, scaled to max 1.
ScoreMap make_clustered_scoremap(int width, int height, std::uint64_t seed, int min_clusters = 3,
                                 int max_clusters = 6);

/// Uniform [0, 1) scores.
ScoreMap make_random_scoremap(int width, int height, std::uint64_t seed);

enum class TextureKind { Grating, Flat, Checkerboard };

struct TextureSpec {
  TextureKind kind = TextureKind::Flat;
  std::array<std::uint8_t, 3> color{128, 128, 128};
  double wavelength = 8.0;    // grating period, pixels
  double orientation = 0.0;   // grating direction, radians
  int checker = 4;            // checkerboard square side, pixels
};

std::array<std::uint8_t, 3> texture_pixel(const TextureSpec& spec, int x, int y);

/// Paints each pixel with the texture of its region; region_of(x, y) indexes `textures`.
template <typename RegionFn>
RgbImage paint_regions(int width, int height, const std::vector<TextureSpec>& textures, RegionFn region_of) {
  RgbImage img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) img.set_pixel(x, y, texture_pixel(textures.at(std::size_t(region_of(x, y))), x, y));
  return img;
}

/// Two-texture scene, one patch per cell: a brown grating over the cell block
/// [x0, x1) x [y0, y1) on a flat green background.
RgbImage make_block_scene(int cells_x, int cells_y, int x0, int y0, int x1, int y1, int patch = 16);

/// A navigation episode: world with the robot placed, plus its goal waypoint.
struct Episode {
  SimWorld world;
  GridPose goal;
};

struct RandomWorldConfig {
  int width = 20;
  int height = 20;
  int min_obstacles = 2;
  int max_obstacles = 5;
  int max_block = 3;        // obstacle rectangles are 1..max_block cells per side
  int num_classes = 3;
  double min_goal_distance = 8.0;
  double max_goal_distance = 14.0;
  int margin = 1;  // border rows/columns where start and goal never lie
  double blocked_goal_rate = 0.0;  // fraction of episodes whose goal cell is an obstacle
};

/// Random rectangles of obstacles, blocky terrain classes, a free start and a
/// free goal with a one-cell obstacle-free margin around both. With
/// probability blocked_goal_rate the goal cell itself is then made an obstacle.
Episode make_random_episode(std::uint64_t seed, const RandomWorldConfig& config = {});

}  // namespace infosample
