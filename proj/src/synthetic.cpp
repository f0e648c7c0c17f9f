#include "infosample/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "infosample/random.hpp"

namespace infosample {

ScoreMap make_clustered_scoremap(int width, int height, std::uint64_t seed, int min_clusters, int max_clusters) {
  Rng rng(mix_seed(seed, 0x5c0e));
  const int n = min_clusters + uniform_index(rng, max_clusters - min_clusters + 1);
  GridArray<double> s = GridArray<double>::Zero(height, width);
  for (int c = 0; c < n; ++c) {
    const double cx = uniform(rng, 0.0, width);
    const double cy = uniform(rng, 0.0, height);
    const double sigma = uniform(rng, 1.5, 3.5);
    const double amp = uniform(rng, 0.5, 1.0);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double d2 = (x + 0.5 - cx) * (x + 0.5 - cx) + (y + 0.5 - cy) * (y + 0.5 - cy);
        s(y, x) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
      }
    }
  }
  s /= s.maxCoeff();
  // Far tails are noise for a planner; drop them so clusters are compact.
  s = s.unaryExpr([](double v) { return v < 0.05 ? 0.0 : v; });
  return ScoreMap(std::move(s));
}

ScoreMap make_random_scoremap(int width, int height, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x7a4d));
  GridArray<double> s(height, width);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = uniform01(rng);
  return ScoreMap(std::move(s));
}

std::array<std::uint8_t, 3> texture_pixel(const TextureSpec& spec, int x, int y) {
  auto scale = [&](double f) {
    return std::array<std::uint8_t, 3>{std::uint8_t(std::lround(spec.color[0] * f)),
                                       std::uint8_t(std::lround(spec.color[1] * f)),
                                       std::uint8_t(std::lround(spec.color[2] * f))};
  };
  switch (spec.kind) {
    case TextureKind::Flat:
      return spec.color;
    case TextureKind::Grating: {
      const double u = x * std::cos(spec.orientation) + y * std::sin(spec.orientation);
      return scale(0.6 + 0.4 * std::cos(2.0 * kPi * u / spec.wavelength));
    }
    case TextureKind::Checkerboard:
      return scale(((x / spec.checker) + (y / spec.checker)) % 2 == 0 ? 1.0 : 0.3);
  }
  return spec.color;
}

namespace {

bool reachable(const GridArray<std::uint8_t>& occ, GridPose a, GridPose b) {
  const int w = int(occ.cols()), h = int(occ.rows());
  GridArray<std::uint8_t> seen = GridArray<std::uint8_t>::Zero(h, w);
  std::deque<GridPose> q{a};
  seen(a.y, a.x) = 1;
  while (!q.empty()) {
    const GridPose p = q.front();
    q.pop_front();
    if (p == b) return true;
    static constexpr int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const GridPose n{p.x + dx[k], p.y + dy[k]};
      if (n.x < 0 || n.y < 0 || n.x >= w || n.y >= h || occ(n.y, n.x) || seen(n.y, n.x)) continue;
      seen(n.y, n.x) = 1;
      q.push_back(n);
    }
  }
  return false;
}

void clear_around(GridArray<std::uint8_t>& occ, GridPose c) {
  for (int y = c.y - 1; y <= c.y + 1; ++y)
    for (int x = c.x - 1; x <= c.x + 1; ++x)
      if (x >= 0 && y >= 0 && x < occ.cols() && y < occ.rows()) occ(y, x) = 0;
}

}  // namespace

Episode make_random_episode(std::uint64_t seed, const RandomWorldConfig& cfg) {
  if (cfg.width < 4 || cfg.height < 4) throw ParameterError("random worlds need at least 4x4 cells");
  if (cfg.margin < 0 || 2 * cfg.margin >= std::min(cfg.width, cfg.height))
    throw ParameterError("margin leaves no room for start and goal");
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(mix_seed(seed, 0xe915, attempt));

    GridPose start, goal;
    double dist = 0.0;
    do {
      const int m = cfg.margin;
      start = {m + uniform_index(rng, cfg.width - 2 * m), m + uniform_index(rng, cfg.height - 2 * m)};
      goal = {m + uniform_index(rng, cfg.width - 2 * m), m + uniform_index(rng, cfg.height - 2 * m)};
      dist = std::hypot(double(goal.x - start.x), double(goal.y - start.y));
    } while (dist < cfg.min_goal_distance || dist > cfg.max_goal_distance);

    GridArray<int> classes(cfg.height, cfg.width);
    const int block = 5;
    GridArray<int> block_class((cfg.height + block - 1) / block, (cfg.width + block - 1) / block);
    for (Eigen::Index i = 0; i < block_class.size(); ++i) block_class.data()[i] = uniform_index(rng, cfg.num_classes);
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) classes(y, x) = block_class(y / block, x / block);

    GridArray<std::uint8_t> occ = GridArray<std::uint8_t>::Zero(cfg.height, cfg.width);
    const int n = cfg.min_obstacles + uniform_index(rng, cfg.max_obstacles - cfg.min_obstacles + 1);
    for (int i = 0; i < n; ++i) {
      const int bw = 1 + uniform_index(rng, cfg.max_block);
      const int bh = 1 + uniform_index(rng, cfg.max_block);
      int ox, oy;
      if (i == 0) {
        // First block sits on the straight line so the goal is not trivially visible.
        const double t = uniform(rng, 0.35, 0.65);
        ox = int(std::lround(start.x + t * (goal.x - start.x))) - bw / 2;
        oy = int(std::lround(start.y + t * (goal.y - start.y))) - bh / 2;
      } else {
        ox = uniform_index(rng, cfg.width);
        oy = uniform_index(rng, cfg.height);
      }
      for (int y = oy; y < oy + bh; ++y)
        for (int x = ox; x < ox + bw; ++x)
          if (x >= 0 && y >= 0 && x < cfg.width && y < cfg.height) occ(y, x) = 1;
    }
    clear_around(occ, start);
    clear_around(occ, goal);
    if (!reachable(occ, start, goal)) continue;
    if (uniform01(rng) < cfg.blocked_goal_rate) occ(goal.y, goal.x) = 1;

    const double bearing = std::atan2(goal.y - start.y, goal.x - start.x);
    const ContinuousPose pose{start.x + 0.5, start.y + 0.5, wrap_angle(bearing + uniform(rng, -kPi / 2, kPi / 2))};
    return {SimWorld(ClassMap(std::move(classes), cfg.num_classes), std::move(occ), pose), goal};
  }
}

RgbImage make_block_scene(int cells_x, int cells_y, int x0, int y0, int x1, int y1, int patch) {
  if (cells_x < 1 || cells_y < 1 || patch < 1) throw ParameterError("scene must be non-empty");
  TextureSpec flat;
  flat.color = {40, 160, 40};
  TextureSpec grating;
  grating.kind = TextureKind::Grating;
  grating.color = {150, 90, 40};
  grating.wavelength = 8.0;
  return paint_regions(cells_x * patch, cells_y * patch, {flat, grating}, [&](int x, int y) {
    const int cx = x / patch, cy = y / patch;
    return cx >= x0 && cx < x1 && cy >= y0 && cy < y1 ? 1 : 0;
  });
}

}  // namespace infosample
