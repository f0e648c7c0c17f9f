#include "infosample/texture.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "infosample/random.hpp"

namespace infosample {
namespace {

struct ValidRange {
  int x0, x1, y0, y1;
};

ValidRange valid_positions(const GridArray<double>& gray, int radius, const PatchRect& patch) {
  if (patch.width <= 0 || patch.height <= 0 || patch.x < 0 || patch.y < 0 || patch.x + patch.width > gray.cols() ||
      patch.y + patch.height > gray.rows())
    throw ParameterError("patch must lie inside the image");
  ValidRange v{patch.x + radius, patch.x + patch.width - radius, patch.y + radius, patch.y + patch.height - radius};
  if (v.x0 >= v.x1 || v.y0 >= v.y1) throw ParameterError("patch too small for kernel");
  return v;
}

template <typename ResponseFn>
EnergyStats response_stats(const ValidRange& v, ResponseFn response) {
  double sum_abs = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int y = v.y0; y < v.y1; ++y) {
    for (int x = v.x0; x < v.x1; ++x) {
      const double r = response(x, y);
      sum_abs += std::abs(r);
      sum += r;
      sum_sq += r * r;
    }
  }
  const double n = double(v.x1 - v.x0) * double(v.y1 - v.y0);
  const double mean = sum / n;
  return {sum_abs / n, std::sqrt(std::max(0.0, sum_sq / n - mean * mean))};
}

}  // namespace

EnergyStats filter_energy(const GridArray<double>& gray, const GaborKernel& kernel, const PatchRect& patch) {
  const ValidRange v = valid_positions(gray, kernel.radius(), patch);
  return response_stats(v, [&](int x, int y) { return convolve_at(gray, kernel, x, y); });
}

EnergyStats quadrature_energy(const GridArray<double>& gray, const GaborKernel& even, const GaborKernel& odd,
                              const PatchRect& patch) {
  if (even.size != odd.size) throw ParameterError("quadrature kernels must share a size");
  const ValidRange v = valid_positions(gray, even.radius(), patch);
  return response_stats(v, [&](int x, int y) {
    return std::hypot(convolve_at(gray, even, x, y), convolve_at(gray, odd, x, y));
  });
}

FilterBank make_filter_bank(const FilterBankConfig& config) {
  if (config.orientations < 1 || config.wavelengths.empty()) throw ParameterError("empty filter bank");
  FilterBank bank;
  bank.orientations = config.orientations;
  bank.scales = int(config.wavelengths.size());
  for (double lambda : config.wavelengths) {
    for (int o = 0; o < config.orientations; ++o) {
      const double theta = o * kPi / config.orientations;
      const double sigma = config.sigma_ratio * lambda;
      bank.pairs.push_back({make_gabor_kernel(config.kernel_size, lambda, theta, sigma, config.aspect_ratio, 0.0),
                            make_gabor_kernel(config.kernel_size, lambda, theta, sigma, config.aspect_ratio, kPi / 2)});
    }
  }
  return bank;
}

void rgb_to_hue_saturation(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8, double& hue, double& saturation) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  saturation = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) {
    hue = 0.0;
    return;
  }
  double h;
  if (mx == r) {
    h = std::fmod((g - b) / delta, 6.0);
  } else if (mx == g) {
    h = (b - r) / delta + 2.0;
  } else {
    h = (r - g) / delta + 4.0;
  }
  h *= 60.0;
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  hue = h;
}

Eigen::VectorXd hue_histogram(const RgbImage& image, const PatchRect& patch, int bins) {
  if (bins < 2) throw ParameterError("hue histogram needs at least two bins");
  if (patch.width <= 0 || patch.height <= 0) throw ParameterError("empty patch");
  if (patch.x < 0 || patch.y < 0 || patch.x + patch.width > image.width || patch.y + patch.height > image.height)
    throw ParameterError("patch must lie inside the image");
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(bins);
  for (int y = patch.y; y < patch.y + patch.height; ++y) {
    for (int x = patch.x; x < patch.x + patch.width; ++x) {
      const auto p = image.pixel(x, y);
      double hue, sat;
      rgb_to_hue_saturation(p[0], p[1], p[2], hue, sat);
      if (sat < kGraySaturation) {
        hist.array() += 1.0 / bins;
      } else {
        hist[std::min(bins - 1, int(hue / 360.0 * bins))] += 1.0;
      }
    }
  }
  return hist / double(patch.width * patch.height);
}

Eigen::VectorXd patch_feature(const RgbImage& image, const GridArray<double>& gray, const PatchRect& patch,
                              const FilterBank& bank, int hue_bins) {
  const Eigen::Index n_gabor = 2 * Eigen::Index(bank.pairs.size());
  Eigen::VectorXd f(n_gabor + hue_bins);
  for (std::size_t i = 0; i < bank.pairs.size(); ++i) {
    const EnergyStats s = quadrature_energy(gray, bank.pairs[i].even, bank.pairs[i].odd, patch);
    f[2 * Eigen::Index(i)] = s.mean_abs;
    f[2 * Eigen::Index(i) + 1] = s.std;
  }
  f.tail(hue_bins) = hue_histogram(image, patch, hue_bins);
  return f;
}

Standardization standardize(const Eigen::MatrixXd& features) {
  Standardization s;
  s.mean = features.colwise().mean().transpose();
  Eigen::MatrixXd centered = features.rowwise() - s.mean.transpose();
  s.std = (centered.colwise().squaredNorm() / double(features.rows())).cwiseSqrt().transpose();
  for (Eigen::Index j = 0; j < s.std.size(); ++j) {
    if (s.std[j] < 1e-12) s.std[j] = 1.0;
  }
  s.standardized = centered.array().rowwise() / s.std.transpose().array();
  return s;
}

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansConfig& config) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw ParameterError("k must be positive");
  if (k > n) throw ParameterError("k exceeds the number of points");
  Rng rng(mix_seed(seed));

  // k-means++ seeding
  Eigen::MatrixXd centroids(k, points.cols());
  centroids.row(0) = points.row(uniform_index(rng, int(n)));
  Eigen::VectorXd d2 = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    if (!(total > 0.0)) throw ParameterError("fewer distinct points than clusters");
    double target = uniform01(rng) * total;
    Eigen::Index pick = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      target -= d2[i];
      if (target < 0.0) break;
    }
    centroids.row(c) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  KMeansResult res;
  std::vector<int> labels(std::size_t(n), -1);
  Eigen::VectorXd dist(n);
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    std::vector<int> next(static_cast<std::size_t>(n));
    double objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best;
      dist[i] = (centroids.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
      next[std::size_t(i)] = int(best);
      objective += dist[i];
    }
    res.objective.push_back(objective);
    res.iterations = iter + 1;
    const bool unchanged = next == labels;
    labels = std::move(next);
    if (unchanged) break;

    // Repair empty clusters with the point farthest from its current centroid.
    std::vector<int> counts(std::size_t(k), 0);
    for (int l : labels) ++counts[std::size_t(l)];
    for (int c = 0; c < k; ++c) {
      if (counts[std::size_t(c)] > 0) continue;
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[std::size_t(labels[std::size_t(i)])] > 1 && (far < 0 || dist[i] > dist[far])) far = i;
      }
      --counts[std::size_t(labels[std::size_t(far)])];
      labels[std::size_t(far)] = c;
      counts[std::size_t(c)] = 1;
      dist[far] = 0.0;
    }

    Eigen::MatrixXd updated = Eigen::MatrixXd::Zero(k, points.cols());
    for (Eigen::Index i = 0; i < n; ++i) updated.row(labels[std::size_t(i)]) += points.row(i);
    for (int c = 0; c < k; ++c) updated.row(c) /= double(counts[std::size_t(c)]);
    const double shift = (updated - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(updated);
    if (shift < config.tolerance) {
      // Final assignment against the settled centroids.
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index best;
        (centroids.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
        labels[std::size_t(i)] = int(best);
      }
      break;
    }
  }
  res.centroids = std::move(centroids);
  res.labels = std::move(labels);
  return res;
}

Eigen::MatrixXd extract_patch_features(const RgbImage& image, int patch_size, const FilterBank& bank, int hue_bins) {
  if (patch_size < bank.kernel_size()) throw ParameterError("patch size must be at least the kernel size");
  const int cx = image.width / patch_size;
  const int cy = image.height / patch_size;
  if (cx < 1 || cy < 1) throw ParameterError("image smaller than one patch");
  const GridArray<double> gray = to_gray(image);
  Eigen::MatrixXd features(Eigen::Index(cx) * cy, 2 * Eigen::Index(bank.pairs.size()) + hue_bins);
  for (int j = 0; j < cy; ++j) {
    for (int i = 0; i < cx; ++i) {
      const PatchRect rect{i * patch_size, j * patch_size, patch_size, patch_size};
      features.row(Eigen::Index(j) * cx + i) = patch_feature(image, gray, rect, bank, hue_bins).transpose();
    }
  }
  return features;
}

Segmentation segment_features(const Eigen::MatrixXd& features, int cells_x, int cells_y, int k, std::uint64_t seed,
                              const KMeansConfig& config) {
  if (features.rows() != Eigen::Index(cells_x) * cells_y) throw ParameterError("feature rows must match cell count");
  if (k > features.rows()) throw ParameterError("k exceeds the number of patches");
  Standardization st = standardize(features);
  KMeansResult km = kmeans(st.standardized, k, seed, config);

  std::vector<int> remap(std::size_t(k), -1);
  int next = 0;
  for (int l : km.labels) {
    if (remap[std::size_t(l)] < 0) remap[std::size_t(l)] = next++;
  }
  for (auto& r : remap) {
    if (r < 0) r = next++;
  }

  GridArray<int> ids(cells_y, cells_x);
  for (std::size_t i = 0; i < km.labels.size(); ++i) ids.data()[i] = remap[std::size_t(km.labels[i])];

  KMeansModel model{k, Eigen::MatrixXd(k, features.cols()), st.mean, st.std};
  for (int c = 0; c < k; ++c) model.centroids.row(remap[std::size_t(c)]) = km.centroids.row(c);
  return {ClassMap(std::move(ids), k), std::move(model)};
}

Segmentation segment(const RgbImage& image, const FilterBank& bank, const SegmentConfig& config) {
  const Eigen::MatrixXd features = extract_patch_features(image, config.patch_size, bank, config.hue_bins);
  return segment_features(features, image.width / config.patch_size, image.height / config.patch_size, config.k,
                          config.seed, config.kmeans);
}

std::string kmeans_model_json(const KMeansModel& model) {
  auto vec = [](const auto& v) {
    std::vector<double> out(std::size_t(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[std::size_t(i)] = v[i];
    return out;
  };
  nlohmann::ordered_json j;
  j["k"] = model.k;
  j["feature_mean"] = vec(model.feature_mean);
  j["feature_std"] = vec(model.feature_std);
  nlohmann::ordered_json c = nlohmann::ordered_json::object();
  for (int i = 0; i < model.k; ++i) c[std::to_string(i)] = vec(Eigen::VectorXd(model.centroids.row(i).transpose()));
  j["centroids"] = c;
  return j.dump(2) + "\n";
}

KMeansModel parse_kmeans_model_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  auto to_vec = [](const nlohmann::json& a) {
    const auto v = a.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size())));
  };
  KMeansModel m;
  m.k = j.at("k").get<int>();
  m.feature_mean = to_vec(j.at("feature_mean"));
  m.feature_std = to_vec(j.at("feature_std"));
  m.centroids.resize(m.k, m.feature_mean.size());
  for (int i = 0; i < m.k; ++i) m.centroids.row(i) = to_vec(j.at("centroids").at(std::to_string(i))).transpose();
  return m;
}

}  // namespace infosample
