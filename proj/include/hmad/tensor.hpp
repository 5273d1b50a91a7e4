#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmad {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;
using Vector = std::vector<double>;

std::string to_string(const Shape& shape);

// Dense row-major array of doubles. Feature maps are laid out (C, H, W);
// convolution kernels (K, C, kh, kw).
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, Vector data);

  static Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng);
  static Tensor from_vector(std::span<const double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  // Feature-map accessors; valid for rank-3 tensors.
  std::size_t channels() const { return extent(0); }
  std::size_t height() const { return extent(1); }
  std::size_t width() const { return extent(2); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const Vector& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  // Reinterprets the same data under a new shape of equal element count.
  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  Vector data_;
};

void require_rank(const Tensor& t, std::size_t rank, const char* what);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

enum class PoolMode { avg, max };

// Cross-correlation with zero padding. kernels: (K, C, kh, kw).
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::span<const double> bias,
              std::size_t stride, std::size_t padding);

struct Conv2dGrads {
  Tensor input;
  Tensor kernels;
  Vector bias;
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, std::size_t stride,
                            std::size_t padding, const Tensor& grad_output);

// Per-channel reduction over all spatial sites.
Vector pool_global(const Tensor& input, PoolMode mode);
Tensor pool_global_backward(const Tensor& input, PoolMode mode, std::span<const double> grad);

// Per-site reduction across channels; output is (1, H, W).
Tensor pool_spatial(const Tensor& input, PoolMode mode);
Tensor pool_spatial_backward(const Tensor& input, PoolMode mode, const Tensor& grad);

// weights: (m, n). out[i] = sum_j weights[i][j] * input[j] + bias[i].
Vector linear(std::span<const double> input, const Tensor& weights, std::span<const double> bias);

struct LinearGrads {
  Vector input;
  Tensor weights;
  Vector bias;
};

LinearGrads linear_backward(std::span<const double> input, const Tensor& weights,
                            std::span<const double> grad_output);

double sigmoid(double x);
Tensor sigmoid(const Tensor& input);
Vector sigmoid(std::span<const double> input);
Tensor relu(const Tensor& input);
Vector relu(std::span<const double> input);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// Per-channel gates (length C) applied to a (C, H, W) map.
Tensor broadcast_mul(const Tensor& map, std::span<const double> channel_gates);
// Single-channel (1, H, W) gate map applied to every channel of a (C, H, W) map.
Tensor broadcast_mul(const Tensor& map, const Tensor& spatial_gate);

Tensor concat_channels(const Tensor& a, const Tensor& b);

double sum(const Tensor& t);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace hmad
