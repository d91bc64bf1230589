#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace gwkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// n feature vectors of dimension d, one per row. Entries are finite.
class FeatureBatch {
 public:
  explicit FeatureBatch(Matrix vectors);

  Index size() const { return vectors_.rows(); }
  Index dim() const { return vectors_.cols(); }
  const Matrix& vectors() const { return vectors_; }

 private:
  Matrix vectors_;
};

/// Nonnegative probability masses summing to one (within 1e-9).
class DiscreteDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  /// The point mass [1].
  DiscreteDistribution() : weights_(Vector::Ones(1)) {}
  explicit DiscreteDistribution(Vector weights);

  Index size() const { return weights_.size(); }
  const Vector& weights() const { return weights_; }
  double operator[](Index i) const { return weights_[i]; }

 private:
  Vector weights_;
};

DiscreteDistribution uniformDistribution(Index n);

/// Transport plan with the marginals it was solved for. The plan's row and
/// column sums match those marginals up to the producing solver's tolerance.
struct Coupling {
  Matrix plan;
  DiscreteDistribution rowMarginal;
  DiscreteDistribution colMarginal;

  /// L1 violation of both marginal constraints.
  double marginalViolation() const;
};

Coupling productCoupling(const DiscreteDistribution& mu,
                         const DiscreteDistribution& nu);

/// Pairwise L1 distances of a feature batch: symmetric, zero diagonal.
class IntraCostMatrix {
 public:
  /// Wraps an existing matrix after checking it is square, symmetric within
  /// 1e-12, nonnegative and zero on the diagonal.
  static IntraCostMatrix fromMatrix(Matrix costs);

  Index size() const { return costs_.rows(); }
  const Matrix& costs() const { return costs_; }

 private:
  explicit IntraCostMatrix(Matrix costs) : costs_(std::move(costs)) {}
  friend IntraCostMatrix intraCosts(const FeatureBatch& batch);

  Matrix costs_;
};

IntraCostMatrix intraCosts(const FeatureBatch& batch);

struct SolverConfig {
  /// Entropic regularization. Unset means 0.01 x mean(cost) of the problem.
  std::optional<double> epsilon;
  int maxOuterIters = 200;
  int maxSinkhornIters = 10000;
  double marginalTol = 1e-9;
  /// Force the stabilized log-domain Sinkhorn.
  bool logDomain = false;
  /// Switch to log domain when eps < 0.05 * max(cost) even if logDomain is
  /// false. With both flags off the standard solver reports underflow.
  bool autoLogDomain = true;
  /// GW multi-start: besides the product coupling, start from every anchor
  /// pair (i, j) when n * m does not exceed this bound. 0 disables anchors.
  int maxAnchorStarts = 256;

  void validate() const;
};

/// 8-bit interleaved RGB raster.
class RasterImage {
 public:
  static constexpr int kChannels = 3;

  RasterImage() = default;
  RasterImage(int width, int height, std::uint8_t fill = 0);
  RasterImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool sameShape(const RasterImage& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  std::uint8_t at(int x, int y, int c) const {
    return pixels_[offset(x, y, c)];
  }
  std::uint8_t& at(int x, int y, int c) { return pixels_[offset(x, y, c)]; }

  const std::vector<std::uint8_t>& pixels() const { return pixels_; }
  std::vector<std::uint8_t>& pixels() { return pixels_; }

  bool operator==(const RasterImage&) const = default;

 private:
  std::size_t offset(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Binary per-pixel selection mask.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, std::uint8_t fill = 0);
  Mask(int width, int height, std::vector<std::uint8_t> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint8_t at(int x, int y) const {
    return values_[static_cast<std::size_t>(y) * width_ + x];
  }
  void set(int x, int y, bool on) {
    values_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0;
  }
  const std::vector<std::uint8_t>& values() const { return values_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> values_;
};

/// Signed per-channel offsets in [-255, 255], same layout as RasterImage.
class ResidualImage {
 public:
  ResidualImage() = default;
  ResidualImage(int width, int height, std::int16_t fill = 0);
  ResidualImage(int width, int height, std::vector<std::int16_t> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::int16_t at(int x, int y, int c) const { return values_[offset(x, y, c)]; }
  std::int16_t& at(int x, int y, int c) { return values_[offset(x, y, c)]; }
  const std::vector<std::int16_t>& values() const { return values_; }

  ResidualImage negated() const;

 private:
  std::size_t offset(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * RasterImage::kChannels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::int16_t> values_;
};

}  // namespace gwkit
