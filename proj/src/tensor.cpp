#include "hmad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hmad {

namespace {

std::size_t element_count(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  std::size_t n = 1;
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + to_string(shape));
    n *= e;
  }
  return n;
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : shape_{1}, data_(1, 0.0) {}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
  }
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data_) v = dist(rng);
  return t;
}

Tensor Tensor::from_vector(std::span<const double> values) {
  return Tensor({values.size()}, Vector(values.begin(), values.end()));
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

namespace {

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kernels, kh, kw;
  std::size_t out_h, out_w;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernels, std::size_t stride,
                           std::size_t padding) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernels, 4, "conv2d kernels");
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  ConvGeometry g{input.channels(), input.height(), input.width(), kernels.extent(0),
                 kernels.extent(2), kernels.extent(3), 0, 0};
  if (kernels.extent(1) != g.channels) {
    throw ShapeError("conv2d: input has " + std::to_string(g.channels) +
                     " channels but kernels expect " + std::to_string(kernels.extent(1)));
  }
  const std::size_t ph = g.height + 2 * padding;
  const std::size_t pw = g.width + 2 * padding;
  if (g.kh > ph || g.kw > pw) {
    throw ShapeError("conv2d: kernel " + to_string(kernels.shape()) +
                     " larger than padded input " + to_string(input.shape()));
  }
  g.out_h = (ph - g.kh) / stride + 1;
  g.out_w = (pw - g.kw) / stride + 1;
  return g;
}

}  // namespace

namespace {

// Output index range [lo, hi) whose input coordinate o*stride + tap - pad
// lands inside [0, extent).
std::pair<std::size_t, std::size_t> valid_range(std::size_t out_extent, std::size_t extent,
                                                std::size_t tap, std::size_t stride,
                                                std::size_t pad) {
  std::size_t lo = 0;
  if (tap < pad) lo = (pad - tap + stride - 1) / stride;
  // o*stride + tap - pad <= extent - 1  <=>  o <= (extent - 1 + pad - tap) / stride
  if (extent - 1 + pad < tap) return {0, 0};
  const std::size_t hi = std::min(out_extent, (extent - 1 + pad - tap) / stride + 1);
  return {std::min(lo, hi), hi};
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::span<const double> bias,
              std::size_t stride, std::size_t padding) {
  const auto g = conv_geometry(input, kernels, stride, padding);
  if (bias.size() != g.kernels) {
    throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) + " != kernel count " +
                     std::to_string(g.kernels));
  }
  Tensor out({g.kernels, g.out_h, g.out_w});
  const double* in = input.data().data();
  const double* ker = kernels.data().data();
  double* o = out.data().data();
  const std::size_t plane = g.out_h * g.out_w;

  for (std::size_t k = 0; k < g.kernels; ++k) {
    double* ok = o + k * plane;
    std::fill(ok, ok + plane, bias[k]);
    for (std::size_t c = 0; c < g.channels; ++c) {
      const double* ic = in + c * g.height * g.width;
      const double* kc = ker + (k * g.channels + c) * g.kh * g.kw;
      for (std::size_t i = 0; i < g.kh; ++i) {
        const auto [y_lo, y_hi] = valid_range(g.out_h, g.height, i, stride, padding);
        for (std::size_t j = 0; j < g.kw; ++j) {
          const auto [x_lo, x_hi] = valid_range(g.out_w, g.width, j, stride, padding);
          const double w = kc[i * g.kw + j];
          for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
            const double* row = ic + (oy * stride + i - padding) * g.width + j - padding;
            double* orow = ok + oy * g.out_w;
            for (std::size_t ox = x_lo; ox < x_hi; ++ox) orow[ox] += w * row[ox * stride];
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, std::size_t stride,
                            std::size_t padding, const Tensor& grad_output) {
  const auto g = conv_geometry(input, kernels, stride, padding);
  if (grad_output.shape() != Shape{g.kernels, g.out_h, g.out_w}) {
    throw ShapeError("conv2d_backward: grad_output shape " + to_string(grad_output.shape()));
  }
  Conv2dGrads grads{Tensor(input.shape()), Tensor(kernels.shape()), Vector(g.kernels, 0.0)};
  const std::size_t plane = g.out_h * g.out_w;
  const double* in = input.data().data();
  const double* ker = kernels.data().data();
  const double* go = grad_output.data().data();
  double* gin = grads.input.data().data();
  double* gker = grads.kernels.data().data();

  for (std::size_t k = 0; k < g.kernels; ++k) {
    const double* gk = go + k * plane;
    for (std::size_t i = 0; i < plane; ++i) grads.bias[k] += gk[i];
    for (std::size_t c = 0; c < g.channels; ++c) {
      const double* ic = in + c * g.height * g.width;
      double* gic = gin + c * g.height * g.width;
      const std::size_t kbase = (k * g.channels + c) * g.kh * g.kw;
      for (std::size_t i = 0; i < g.kh; ++i) {
        const auto [y_lo, y_hi] = valid_range(g.out_h, g.height, i, stride, padding);
        for (std::size_t j = 0; j < g.kw; ++j) {
          const auto [x_lo, x_hi] = valid_range(g.out_w, g.width, j, stride, padding);
          const double w = ker[kbase + i * g.kw + j];
          double acc = 0.0;
          for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
            const std::size_t offset = (oy * stride + i - padding) * g.width + j - padding;
            const double* grow = gk + oy * g.out_w;
            for (std::size_t ox = x_lo; ox < x_hi; ++ox) {
              acc += grow[ox] * ic[offset + ox * stride];
              gic[offset + ox * stride] += grow[ox] * w;
            }
          }
          gker[kbase + i * g.kw + j] += acc;
        }
      }
    }
  }
  return grads;
}

Vector pool_global(const Tensor& input, PoolMode mode) {
  require_rank(input, 3, "pool_global");
  const std::size_t C = input.channels();
  const std::size_t n = input.height() * input.width();
  Vector out(C);
  const auto data = input.data();
  for (std::size_t c = 0; c < C; ++c) {
    const auto plane = data.subspan(c * n, n);
    if (mode == PoolMode::avg) {
      out[c] = std::accumulate(plane.begin(), plane.end(), 0.0) / static_cast<double>(n);
    } else {
      out[c] = *std::max_element(plane.begin(), plane.end());
    }
  }
  return out;
}

Tensor pool_global_backward(const Tensor& input, PoolMode mode, std::span<const double> grad) {
  require_rank(input, 3, "pool_global_backward");
  const std::size_t C = input.channels();
  if (grad.size() != C) throw ShapeError("pool_global_backward: gradient length mismatch");
  const std::size_t n = input.height() * input.width();
  Tensor out(input.shape());
  auto od = out.data();
  const auto in = input.data();
  for (std::size_t c = 0; c < C; ++c) {
    if (mode == PoolMode::avg) {
      const double g = grad[c] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) od[c * n + i] = g;
    } else {
      const auto plane = in.subspan(c * n, n);
      const auto arg = static_cast<std::size_t>(
          std::distance(plane.begin(), std::max_element(plane.begin(), plane.end())));
      od[c * n + arg] = grad[c];
    }
  }
  return out;
}

Tensor pool_spatial(const Tensor& input, PoolMode mode) {
  require_rank(input, 3, "pool_spatial");
  const std::size_t C = input.channels();
  const std::size_t n = input.height() * input.width();
  Tensor out({1, input.height(), input.width()});
  const auto in = input.data();
  auto od = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = in[i];
    for (std::size_t c = 1; c < C; ++c) {
      const double v = in[c * n + i];
      acc = mode == PoolMode::avg ? acc + v : std::max(acc, v);
    }
    od[i] = mode == PoolMode::avg ? acc / static_cast<double>(C) : acc;
  }
  return out;
}

Tensor pool_spatial_backward(const Tensor& input, PoolMode mode, const Tensor& grad) {
  require_rank(input, 3, "pool_spatial_backward");
  if (grad.shape() != Shape{1, input.height(), input.width()}) {
    throw ShapeError("pool_spatial_backward: gradient shape " + to_string(grad.shape()));
  }
  const std::size_t C = input.channels();
  const std::size_t n = input.height() * input.width();
  Tensor out(input.shape());
  const auto in = input.data();
  auto od = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    if (mode == PoolMode::avg) {
      for (std::size_t c = 0; c < C; ++c) od[c * n + i] = grad[i] / static_cast<double>(C);
    } else {
      std::size_t arg = 0;
      for (std::size_t c = 1; c < C; ++c) {
        if (in[c * n + i] > in[arg * n + i]) arg = c;
      }
      od[arg * n + i] = grad[i];
    }
  }
  return out;
}

Vector linear(std::span<const double> input, const Tensor& weights, std::span<const double> bias) {
  require_rank(weights, 2, "linear weights");
  const std::size_t m = weights.extent(0);
  const std::size_t n = weights.extent(1);
  if (input.size() != n || bias.size() != m) {
    throw ShapeError("linear: weights " + to_string(weights.shape()) + " with input length " +
                     std::to_string(input.size()) + " and bias length " +
                     std::to_string(bias.size()));
  }
  Vector out(m);
  const auto w = weights.data();
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = bias[i] + dot(w.subspan(i * n, n), input);
  }
  return out;
}

LinearGrads linear_backward(std::span<const double> input, const Tensor& weights,
                            std::span<const double> grad_output) {
  require_rank(weights, 2, "linear_backward weights");
  const std::size_t m = weights.extent(0);
  const std::size_t n = weights.extent(1);
  if (input.size() != n || grad_output.size() != m) {
    throw ShapeError("linear_backward: dimension mismatch");
  }
  LinearGrads g{Vector(n, 0.0), Tensor(weights.shape()),
                Vector(grad_output.begin(), grad_output.end())};
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      g.weights[i * n + j] = grad_output[i] * input[j];
      g.input[j] += weights[i * n + j] * grad_output[i];
    }
  }
  return g;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.data()) v = sigmoid(v);
  return out;
}

Vector sigmoid(std::span<const double> input) {
  Vector out(input.size());
  std::transform(input.begin(), input.end(), out.begin(), [](double v) { return sigmoid(v); });
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.data()) v = std::max(v, 0.0);
  return out;
}

Vector relu(std::span<const double> input) {
  Vector out(input.size());
  std::transform(input.begin(), input.end(), out.begin(), [](double v) { return std::max(v, 0.0); });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += b[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= b[i];
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out = a;
  for (auto& v : out.data()) v *= factor;
  return out;
}

Tensor broadcast_mul(const Tensor& map, std::span<const double> channel_gates) {
  require_rank(map, 3, "broadcast_mul map");
  if (channel_gates.size() != map.channels()) {
    throw ShapeError("broadcast_mul: " + std::to_string(channel_gates.size()) +
                     " gates for map " + to_string(map.shape()));
  }
  Tensor out = map;
  const std::size_t n = map.height() * map.width();
  auto od = out.data();
  for (std::size_t c = 0; c < map.channels(); ++c) {
    for (std::size_t i = 0; i < n; ++i) od[c * n + i] *= channel_gates[c];
  }
  return out;
}

Tensor broadcast_mul(const Tensor& map, const Tensor& spatial_gate) {
  require_rank(map, 3, "broadcast_mul map");
  if (spatial_gate.shape() != Shape{1, map.height(), map.width()}) {
    throw ShapeError("broadcast_mul: gate map " + to_string(spatial_gate.shape()) +
                     " does not fit " + to_string(map.shape()));
  }
  Tensor out = map;
  const std::size_t n = map.height() * map.width();
  auto od = out.data();
  for (std::size_t c = 0; c < map.channels(); ++c) {
    for (std::size_t i = 0; i < n; ++i) od[c * n + i] *= spatial_gate[i];
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank(a, 3, "concat_channels");
  require_rank(b, 3, "concat_channels");
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("concat_channels: spatial mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  Vector data;
  data.reserve(a.size() + b.size());
  data.insert(data.end(), a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Tensor({a.channels() + b.channels(), a.height(), a.width()}, std::move(data));
}

double sum(const Tensor& t) { return std::accumulate(t.data().begin(), t.data().end(), 0.0); }

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace hmad
