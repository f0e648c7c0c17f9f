#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "infosample/grid.hpp"
#include "infosample/image_io.hpp"

namespace infosample {

/// Real Gabor kernel sampled at integer offsets within a disk of radius
/// size / 2, zero outside it, with the mean over the disk subtracted so
/// constant regions produce exactly zero response.
template <typename Scalar>
struct BasicGaborKernel {
  int size = 0;
  double wavelength = 0.0;
  double orientation = 0.0;
  double sigma = 0.0;
  double aspect_ratio = 1.0;
  double phase = 0.0;
  GridArray<Scalar> weights;

  int radius() const { return size / 2; }
};

using GaborKernel = BasicGaborKernel<double>;

/// g(x, y) = exp(-(x'^2 + aspect^2 y'^2) / (2 sigma^2)) cos(2 pi x' / wavelength + phase),
/// x' = x cos(orientation) + y sin(orientation), y' = -x sin(orientation) + y cos(orientation).
template <typename Scalar = double>
BasicGaborKernel<Scalar> make_gabor_kernel(int size, double wavelength, double orientation, double sigma,
                                           double aspect_ratio, double phase) {
  if (size <= 0 || size % 2 == 0) throw ParameterError("Gabor kernel size must be odd and positive");
  if (!(wavelength > 0.0)) throw ParameterError("Gabor wavelength must be positive");
  if (!(sigma > 0.0)) throw ParameterError("Gabor sigma must be positive");

  BasicGaborKernel<Scalar> k{size, wavelength, orientation, sigma, aspect_ratio, phase, GridArray<Scalar>(size, size)};
  const int r = size / 2;
  const double c = std::cos(orientation);
  const double s = std::sin(orientation);
  // A square support would favour the lattice axes over the diagonals.
  const double r2 = 0.25 * double(size) * double(size);
  k.weights.setZero();
  Scalar sum(0);
  int inside = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy > r2) continue;
      const double xr = dx * c + dy * s;
      const double yr = -dx * s + dy * c;
      const double env = std::exp(-(xr * xr + aspect_ratio * aspect_ratio * yr * yr) / (2.0 * sigma * sigma));
      k.weights(dy + r, dx + r) = Scalar(env * std::cos(2.0 * kPi * xr / wavelength + phase));
      sum += k.weights(dy + r, dx + r);
      ++inside;
    }
  }
  const Scalar mean = sum / Scalar(inside);
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= r2) k.weights(dy + r, dx + r) -= mean;
  return k;
}

/// Convolution (kernel flipped) evaluated at image position (cx, cy); the
/// kernel window must lie inside the image.
template <typename Derived, typename Scalar>
Scalar convolve_at(const Eigen::MatrixBase<Derived>& image, const BasicGaborKernel<Scalar>& kernel, int cx, int cy) {
  const int r = kernel.radius();
  return kernel.weights.reverse().cwiseProduct(image.block(cy - r, cx - r, kernel.size, kernel.size)).sum();
}

struct PatchRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

struct EnergyStats {
  double mean_abs = 0.0;
  double std = 0.0;
};

/// Statistics of the convolution response over positions where the kernel
/// fits entirely inside the patch, so a patch's statistics see only its pixels.
EnergyStats filter_energy(const GridArray<double>& gray, const GaborKernel& kernel, const PatchRect& patch);

/// Same, on the quadrature magnitude sqrt(even^2 + odd^2) of a filter pair.
EnergyStats quadrature_energy(const GridArray<double>& gray, const GaborKernel& even, const GaborKernel& odd,
                              const PatchRect& patch);

struct QuadraturePair {
  GaborKernel even;  // phase 0
  GaborKernel odd;   // phase pi/2
};

struct FilterBankConfig {
  int orientations = 6;
  std::vector<double> wavelengths{4.0, 8.0, 16.0};
  double sigma_ratio = 0.56;  // sigma = ratio * wavelength
  double aspect_ratio = 0.5;
  int kernel_size = 11;
};

/// Quadrature pairs ordered scale-major: pair index = scale * orientations + orientation,
/// orientation o at angle o * pi / orientations.
struct FilterBank {
  int orientations = 0;
  int scales = 0;
  std::vector<QuadraturePair> pairs;

  int kernel_size() const { return pairs.empty() ? 0 : pairs.front().even.size; }
};

FilterBank make_filter_bank(const FilterBankConfig& config = {});

/// Fraction of pixels per hue bin; bin b covers hue [b, b+1) * 360/bins degrees.
/// Pixels with HSV saturation below 0.05 spread 1/bins over every bin.
Eigen::VectorXd hue_histogram(const RgbImage& image, const PatchRect& patch, int bins = 12);

inline constexpr double kGraySaturation = 0.05;

/// HSV hue in degrees [0, 360) and saturation in [0, 1].
void rgb_to_hue_saturation(std::uint8_t r, std::uint8_t g, std::uint8_t b, double& hue, double& saturation);

/// [gabor means and stds interleaved per pair (2*O*S), hue histogram (bins)].
Eigen::VectorXd patch_feature(const RgbImage& image, const GridArray<double>& gray, const PatchRect& patch,
                              const FilterBank& bank, int hue_bins = 12);

struct KMeansModel {
  int k = 0;
  Eigen::MatrixXd centroids;  // k x d, standardized space
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_std;
};

struct KMeansResult {
  Eigen::MatrixXd centroids;
  std::vector<int> labels;
  std::vector<double> objective;  // sum of squared distances after each assignment
  int iterations = 0;
};

struct KMeansConfig {
  int max_iterations = 100;
  double tolerance = 1e-6;
};

/// Lloyd iterations from k-means++ seeding. Empty clusters take the point
/// farthest from its centroid. Stops when labels repeat, the largest centroid
/// shift drops below tolerance, or after max_iterations.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansConfig& config = {});

struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // degenerate dimensions get 1
  Eigen::MatrixXd standardized;
};

Standardization standardize(const Eigen::MatrixXd& features);

struct Segmentation {
  ClassMap classes;
  KMeansModel model;
};

struct SegmentConfig {
  int k = 4;
  int patch_size = 16;
  int hue_bins = 12;
  std::uint64_t seed = 7;
  KMeansConfig kmeans;
};

/// One feature row per non-overlapping patch, patches in raster order.
Eigen::MatrixXd extract_patch_features(const RgbImage& image, int patch_size, const FilterBank& bank, int hue_bins);

/// Clusters precomputed patch features into a cells_x by cells_y ClassMap.
/// Class ids are renumbered by first appearance in raster order.
Segmentation segment_features(const Eigen::MatrixXd& features, int cells_x, int cells_y, int k, std::uint64_t seed,
                              const KMeansConfig& config = {});

Segmentation segment(const RgbImage& image, const FilterBank& bank, const SegmentConfig& config);

/// Sidecar: {"k": .., "feature_mean": [..], "feature_std": [..], "centroids": {"0": [..], ..}}.
std::string kmeans_model_json(const KMeansModel& model);
KMeansModel parse_kmeans_model_json(const std::string& text);

}  // namespace infosample
