#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace infosample {

/// Row-major dense grid; rows are y (height), columns are x (width).
template <typename Scalar>
using GridArray = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced non-finite parameters; index is the iteration, epoch or round.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int index) : std::runtime_error(what), index_(index) {}
  int index() const { return index_; }

 private:
  int index_;
};

struct GridPose {
  int x = 0;
  int y = 0;

  friend bool operator==(const GridPose&, const GridPose&) = default;
};

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  double out = w - kPi;
  if (out >= kPi) out -= 2.0 * kPi;
  return out;
}

/// Per-cell nonnegative reward field.
template <typename Scalar>
class BasicScoreMap {
 public:
  BasicScoreMap() = default;
  BasicScoreMap(int width, int height, Scalar fill = Scalar(0))
      : scores_(GridArray<Scalar>::Constant(height, width, fill)) {
    if (width <= 0 || height <= 0) throw ParameterError("score map must be non-empty");
    if (!(fill >= Scalar(0))) throw ParameterError("scores must be nonnegative");
  }
  explicit BasicScoreMap(GridArray<Scalar> scores) : scores_(std::move(scores)) {
    if (scores_.size() == 0) throw ParameterError("score map must be non-empty");
    for (Eigen::Index i = 0; i < scores_.size(); ++i) {
      if (!(scores_.data()[i] >= Scalar(0)) || !std::isfinite(double(scores_.data()[i])))
        throw ParameterError("scores must be finite and nonnegative");
    }
  }

  int width() const { return int(scores_.cols()); }
  int height() const { return int(scores_.rows()); }
  bool contains(GridPose p) const { return p.x >= 0 && p.y >= 0 && p.x < width() && p.y < height(); }

  Scalar operator()(GridPose p) const { return scores_(p.y, p.x); }
  Scalar at(int x, int y) const { return scores_(y, x); }
  void set(GridPose p, Scalar v) {
    if (!(v >= Scalar(0))) throw ParameterError("scores must be nonnegative");
    scores_(p.y, p.x) = v;
  }

  Scalar total() const { return scores_.sum(); }
  const GridArray<Scalar>& values() const { return scores_; }

 private:
  GridArray<Scalar> scores_;
};

using ScoreMap = BasicScoreMap<double>;

/// Texture class id per cell, ids in [0, num_classes).
class ClassMap {
 public:
  ClassMap() = default;
  ClassMap(GridArray<int> classes, int num_classes) : classes_(std::move(classes)), num_classes_(num_classes) {
    if (classes_.size() == 0) throw ParameterError("class map must be non-empty");
    if (num_classes_ < 1) throw ParameterError("class count must be positive");
    for (Eigen::Index i = 0; i < classes_.size(); ++i) {
      int c = classes_.data()[i];
      if (c < 0 || c >= num_classes_) throw ParameterError("class id out of range");
    }
  }

  int width() const { return int(classes_.cols()); }
  int height() const { return int(classes_.rows()); }
  int num_classes() const { return num_classes_; }
  bool contains(GridPose p) const { return p.x >= 0 && p.y >= 0 && p.x < width() && p.y < height(); }
  int operator()(GridPose p) const { return classes_(p.y, p.x); }
  int at(int x, int y) const { return classes_(y, x); }
  const GridArray<int>& values() const { return classes_; }

 private:
  GridArray<int> classes_;
  int num_classes_ = 1;
};

}  // namespace infosample
