#include "gwkit/types.hpp"

#include <cmath>
#include <string>

#include "gwkit/error.hpp"

namespace gwkit {

FeatureBatch::FeatureBatch(Matrix vectors) : vectors_(std::move(vectors)) {
  if (vectors_.rows() < 1 || vectors_.cols() < 1) {
    throw InputError("feature batch must have at least one row and one column");
  }
  for (Index i = 0; i < vectors_.rows(); ++i) {
    for (Index j = 0; j < vectors_.cols(); ++j) {
      if (!std::isfinite(vectors_(i, j))) {
        throw InputError("non-finite feature value at row " + std::to_string(i + 1) +
                         ", column " + std::to_string(j + 1));
      }
    }
  }
}

DiscreteDistribution::DiscreteDistribution(Vector weights)
    : weights_(std::move(weights)) {
  if (weights_.size() < 1) throw InputError("distribution must be non-empty");
  double sum = 0.0;
  for (Index i = 0; i < weights_.size(); ++i) {
    const double w = weights_[i];
    if (!std::isfinite(w) || w < 0.0) {
      throw InputError("distribution weight " + std::to_string(i) +
                       " is negative or non-finite");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw InputError("distribution weights sum to " + std::to_string(sum) +
                     ", expected 1");
  }
}

DiscreteDistribution uniformDistribution(Index n) {
  if (n < 1) throw InputError("uniform distribution needs n >= 1");
  return DiscreteDistribution(Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

double Coupling::marginalViolation() const {
  return (plan.rowwise().sum() - rowMarginal.weights()).lpNorm<1>() +
         (plan.colwise().sum().transpose() - colMarginal.weights()).lpNorm<1>();
}

Coupling productCoupling(const DiscreteDistribution& mu,
                         const DiscreteDistribution& nu) {
  return Coupling{mu.weights() * nu.weights().transpose(), mu, nu};
}

IntraCostMatrix IntraCostMatrix::fromMatrix(Matrix costs) {
  if (costs.rows() < 1 || costs.rows() != costs.cols()) {
    throw InputError("intra-space cost matrix must be square and non-empty");
  }
  for (Index i = 0; i < costs.rows(); ++i) {
    if (costs(i, i) != 0.0) throw InputError("intra-space cost diagonal must be zero");
    for (Index k = 0; k < costs.cols(); ++k) {
      if (!std::isfinite(costs(i, k)) || costs(i, k) < 0.0) {
        throw InputError("intra-space costs must be finite and nonnegative");
      }
      if (std::abs(costs(i, k) - costs(k, i)) > 1e-12) {
        throw InputError("intra-space cost matrix is not symmetric");
      }
    }
  }
  return IntraCostMatrix(std::move(costs));
}

IntraCostMatrix intraCosts(const FeatureBatch& batch) {
  const Matrix& z = batch.vectors();
  const Index n = batch.size();
  Matrix costs = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index k = i + 1; k < n; ++k) {
      const double d = (z.row(i) - z.row(k)).lpNorm<1>();
      costs(i, k) = d;
      costs(k, i) = d;
    }
  }
  return IntraCostMatrix(std::move(costs));
}

void SolverConfig::validate() const {
  if (epsilon && !(*epsilon > 0.0 && std::isfinite(*epsilon))) {
    throw InputError("epsilon must be a positive finite number");
  }
  if (maxOuterIters < 1 || maxSinkhornIters < 1) {
    throw InputError("iteration limits must be at least 1");
  }
  if (!(marginalTol > 0.0)) throw InputError("marginal tolerance must be positive");
  if (maxAnchorStarts < 0) throw InputError("anchor start bound must be nonnegative");
}

namespace {

void checkDims(int width, int height) {
  if (width < 1 || height < 1) throw InputError("image dimensions must be positive");
}

}  // namespace

RasterImage::RasterImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  checkDims(width, height);
  pixels_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  checkDims(width, height);
  if (pixels_.size() != static_cast<std::size_t>(width) * height * kChannels) {
    throw InputError("raster buffer length does not match width x height x 3");
  }
}

Mask::Mask(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  checkDims(width, height);
  if (fill > 1) throw InputError("mask values must be 0 or 1");
  values_.assign(static_cast<std::size_t>(width) * height, fill);
}

Mask::Mask(int width, int height, std::vector<std::uint8_t> values)
    : width_(width), height_(height), values_(std::move(values)) {
  checkDims(width, height);
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    throw InputError("mask buffer length does not match width x height");
  }
  for (const auto v : values_) {
    if (v > 1) throw InputError("mask values must be 0 or 1");
  }
}

ResidualImage::ResidualImage(int width, int height, std::int16_t fill)
    : width_(width), height_(height) {
  checkDims(width, height);
  if (fill < -255 || fill > 255) throw InputError("residual values must lie in [-255, 255]");
  values_.assign(static_cast<std::size_t>(width) * height * RasterImage::kChannels, fill);
}

ResidualImage::ResidualImage(int width, int height, std::vector<std::int16_t> values)
    : width_(width), height_(height), values_(std::move(values)) {
  checkDims(width, height);
  if (values_.size() !=
      static_cast<std::size_t>(width) * height * RasterImage::kChannels) {
    throw InputError("residual buffer length does not match width x height x 3");
  }
  for (const auto v : values_) {
    if (v < -255 || v > 255) throw InputError("residual values must lie in [-255, 255]");
  }
}

ResidualImage ResidualImage::negated() const {
  std::vector<std::int16_t> out(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    out[i] = static_cast<std::int16_t>(-values_[i]);
  }
  return ResidualImage(width_, height_, std::move(out));
}

}  // namespace gwkit
