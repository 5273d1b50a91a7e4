#include "hmad/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace hmad {

namespace {

Tensor seeded_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Tensor::uniform(std::move(shape), -bound, bound, rng);
}

bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

LinearLayer LinearLayer::seeded(std::size_t out, std::size_t in, std::mt19937_64& rng) {
  return {seeded_uniform({out, in}, in, rng), Tensor({out})};
}

Vector LinearLayer::forward(std::span<const double> input) const {
  return linear(input, weight, bias.data());
}

ConvLayer ConvLayer::seeded(std::size_t out_channels, std::size_t in_channels,
                            std::size_t kernel, std::size_t stride, std::size_t padding,
                            std::mt19937_64& rng) {
  return {seeded_uniform({out_channels, in_channels, kernel, kernel},
                         in_channels * kernel * kernel, rng),
          Tensor({out_channels}), stride, padding};
}

Tensor ConvLayer::forward(const Tensor& input) const {
  return conv2d(input, weight, bias.data(), stride, padding);
}

ChannelAttnParams ChannelAttnParams::seeded(std::size_t channels, std::size_t reduction,
                                            std::mt19937_64& rng) {
  if (reduction == 0 || channels % reduction != 0 || channels / reduction == 0) {
    throw ShapeError("channel attention: reduction " + std::to_string(reduction) +
                     " must divide channel count " + std::to_string(channels));
  }
  const std::size_t hidden = channels / reduction;
  ChannelAttnParams p;
  p.hidden = LinearLayer::seeded(hidden, channels, rng);
  p.output = LinearLayer::seeded(channels, hidden, rng);
  return p;
}

SpatialAttnParams SpatialAttnParams::seeded(std::mt19937_64& rng) {
  return {ConvLayer::seeded(1, 2, kernel_size, 1, kernel_size / 2, rng)};
}

std::size_t global_width(std::size_t channels) { return std::max<std::size_t>(4, channels / 4); }

DistributionParams DistributionParams::seeded(std::size_t channels, std::mt19937_64& rng) {
  const std::size_t d = global_width(channels);
  DistributionParams p;
  p.global = LinearLayer::seeded(d, channels, rng);
  for (auto& b : p.branch) b = LinearLayer::seeded(channels, d, rng);
  return p;
}

FusionParams FusionParams::seeded(const FeatureGeometry& geometry, std::uint64_t seed,
                                  std::size_t reduction) {
  const auto& g = geometry;
  if (g.shallow_height % g.deep_height != 0 || g.shallow_width % g.deep_width != 0 ||
      g.shallow_height / g.deep_height != g.shallow_width / g.deep_width ||
      !is_power_of_two(g.shallow_height / g.deep_height)) {
    throw ShapeError("fusion geometry: shallow " + std::to_string(g.shallow_height) + "x" +
                     std::to_string(g.shallow_width) + " is not a power-of-two multiple of deep " +
                     std::to_string(g.deep_height) + "x" + std::to_string(g.deep_width));
  }
  std::mt19937_64 rng(seed);
  FusionParams p;
  p.geometry = g;
  const std::size_t joint = 2 * g.shallow_channels;
  p.attention.channel = ChannelAttnParams::seeded(joint, reduction, rng);
  p.attention.spatial = SpatialAttnParams::seeded(rng);

  std::size_t ratio = g.shallow_height / g.deep_height;
  std::size_t in = joint;
  do {
    const std::size_t stride = ratio > 1 ? 2 : 1;
    p.rescale.push_back(ConvLayer::seeded(g.deep_channels, in, 3, stride, 1, rng));
    in = g.deep_channels;
    ratio /= 2;
  } while (ratio > 1);

  p.distribution = DistributionParams::seeded(g.deep_channels, rng);
  p.validate();
  return p;
}

void FusionParams::validate() const {
  const auto& g = geometry;
  const std::size_t joint = 2 * g.shallow_channels;
  const auto& ch = attention.channel;
  if (ch.hidden.weight.rank() != 2 || ch.output.weight.rank() != 2 ||
      ch.hidden.in_features() != joint || ch.output.out_features() != joint ||
      ch.output.in_features() != ch.hidden.out_features() ||
      ch.hidden.bias.size() != ch.hidden.out_features() ||
      ch.output.bias.size() != ch.output.out_features()) {
    throw ShapeError("fusion params: channel attention does not match " + std::to_string(joint) +
                     " shallow channels");
  }
  if (attention.spatial.conv.weight.shape() != Shape{1, 2, 7, 7} ||
      attention.spatial.conv.bias.size() != 1) {
    throw ShapeError("fusion params: spatial attention kernel must be 1x2x7x7");
  }
  if (rescale.empty()) throw ShapeError("fusion params: empty rescale stack");
  // Propagate the declared shallow geometry through the stack.
  std::size_t c = joint, h = g.shallow_height, w = g.shallow_width;
  for (const auto& layer : rescale) {
    if (layer.weight.rank() != 4 || layer.weight.extent(1) != c ||
        layer.bias.size() != layer.weight.extent(0) || layer.stride == 0) {
      throw ShapeError("fusion params: rescale layer channel mismatch");
    }
    h = (h + 2 * layer.padding - layer.weight.extent(2)) / layer.stride + 1;
    w = (w + 2 * layer.padding - layer.weight.extent(3)) / layer.stride + 1;
    c = layer.weight.extent(0);
  }
  if (c != g.deep_channels || h != g.deep_height || w != g.deep_width) {
    throw ShapeError("fusion params: rescale stack yields " + std::to_string(c) + "x" +
                     std::to_string(h) + "x" + std::to_string(w) + ", deep geometry is " +
                     std::to_string(g.deep_channels) + "x" + std::to_string(g.deep_height) + "x" +
                     std::to_string(g.deep_width));
  }
  const auto& d = distribution;
  const std::size_t gw = d.global.out_features();
  if (d.global.in_features() != g.deep_channels || d.global.bias.size() != gw) {
    throw ShapeError("fusion params: global FC does not match deep channels");
  }
  for (const auto& b : d.branch) {
    if (b.in_features() != gw || b.out_features() != g.deep_channels ||
        b.bias.size() != g.deep_channels) {
      throw ShapeError("fusion params: branch FC does not match deep channels");
    }
  }
}

Vector channel_attention(const Tensor& features, const ChannelAttnParams& p) {
  require_rank(features, 3, "channel_attention");
  if (features.channels() != p.channels()) {
    throw ShapeError("channel_attention: input has " + std::to_string(features.channels()) +
                     " channels, params expect " + std::to_string(p.channels()));
  }
  auto mlp = [&](const Vector& v) { return p.output.forward(relu(p.hidden.forward(v))); };
  const Vector from_avg = mlp(pool_global(features, PoolMode::avg));
  const Vector from_max = mlp(pool_global(features, PoolMode::max));
  Vector logits(from_avg.size());
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = from_avg[i] + from_max[i];
  return sigmoid(logits);
}

Tensor spatial_attention(const Tensor& features, const SpatialAttnParams& p) {
  require_rank(features, 3, "spatial_attention");
  const Tensor pooled =
      concat_channels(pool_spatial(features, PoolMode::avg), pool_spatial(features, PoolMode::max));
  return sigmoid(p.conv.forward(pooled));
}

Tensor cbam(const Tensor& features, const CbamParams& p) {
  const Tensor refined = broadcast_mul(features, channel_attention(features, p.channel));
  return broadcast_mul(refined, spatial_attention(refined, p.spatial));
}

Tensor rescale_shallow(const Tensor& shallow, const std::vector<ConvLayer>& stack) {
  Tensor x = shallow;
  for (const auto& layer : stack) x = relu(layer.forward(x));
  return x;
}

namespace {

Tensor joint_shallow(const Tensor& rgb_shallow, const Tensor& depth_shallow,
                     const FusionParams& p) {
  require_same_shape(rgb_shallow, depth_shallow, "shallow modalities");
  const auto& g = p.geometry;
  if (rgb_shallow.shape() != Shape{g.shallow_channels, g.shallow_height, g.shallow_width}) {
    throw ShapeError("shallow features " + to_string(rgb_shallow.shape()) +
                     " do not match declared geometry");
  }
  return concat_channels(rgb_shallow, depth_shallow);
}

}  // namespace

Tensor aggregate_shallow(const Tensor& rgb_shallow, const Tensor& depth_shallow,
                         const FusionParams& p) {
  return rescale_shallow(cbam(joint_shallow(rgb_shallow, depth_shallow, p), p.attention),
                         p.rescale);
}

DistributionResult distribute(const Tensor& rgb, const Tensor& depth, const Tensor& shallow,
                              const DistributionParams& p) {
  require_same_shape(rgb, depth, "distribute");
  require_same_shape(rgb, shallow, "distribute");
  require_rank(rgb, 3, "distribute");
  if (rgb.channels() != p.channels()) {
    throw ShapeError("distribute: features have " + std::to_string(rgb.channels()) +
                     " channels, params expect " + std::to_string(p.channels()));
  }
  const std::array<const Tensor*, kBranchCount> inputs = {&rgb, &depth, &shallow};
  DistributionResult r;
  r.global = p.global.forward(pool_global(add(add(rgb, depth), shallow), PoolMode::avg));
  r.fused = Tensor(rgb.shape());
  for (std::size_t i = 0; i < kBranchCount; ++i) {
    r.logits[i] = p.branch[i].forward(r.global);
    r.gates[i] = sigmoid(r.logits[i]);
    r.gated[i] = broadcast_mul(*inputs[i], r.gates[i]);
    r.fused = add(r.fused, r.gated[i]);
  }
  return r;
}

std::string_view mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::full: return "full";
    case FusionMode::no_distribution: return "no_distribution";
    case FusionMode::no_attention: return "no_attention";
    case FusionMode::baseline_add: return "baseline_add";
    case FusionMode::rgb_only: return "rgb_only";
  }
  return "unknown";
}

std::string_view mode_label(FusionMode mode) {
  switch (mode) {
    case FusionMode::full: return "HMAD";
    case FusionMode::no_distribution: return "w/o distribution";
    case FusionMode::no_attention: return "w/o attention";
    case FusionMode::baseline_add: return "baseline";
    case FusionMode::rgb_only: return "rgb_only";
  }
  return "unknown";
}

FusionMode parse_mode(std::string_view name) {
  for (auto m : kAllFusionModes) {
    if (mode_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown fusion mode: " + std::string(name));
}

namespace {

bool uses_shallow(FusionMode mode) {
  return mode == FusionMode::no_distribution || mode == FusionMode::no_attention ||
         mode == FusionMode::full;
}

// F_S as the given mode builds it.
Tensor shallow_branch(const Tensor& rgb_shallow, const Tensor& depth_shallow,
                      const FusionParams& p, FusionMode mode) {
  if (mode == FusionMode::no_attention) {
    return rescale_shallow(joint_shallow(rgb_shallow, depth_shallow, p), p.rescale);
  }
  return aggregate_shallow(rgb_shallow, depth_shallow, p);
}

double inverse_rms(const Tensor& t) {
  const double ms = dot(t.data(), t.data()) / static_cast<double>(t.size());
  return ms > 0.0 ? 1.0 / std::sqrt(ms) : 1.0;
}

}  // namespace

Tensor fuse(const Tensor& rgb_deep, const Tensor& depth_deep, const Tensor& rgb_shallow,
            const Tensor& depth_shallow, const FusionParams& p, FusionMode mode,
            const BranchScales& scales) {
  require_same_shape(rgb_deep, depth_deep, "deep modalities");
  const Tensor rgb = scale(rgb_deep, scales.rgb);
  if (mode == FusionMode::rgb_only) return rgb;
  const Tensor depth = scale(depth_deep, scales.depth);
  if (mode == FusionMode::baseline_add) return add(rgb, depth);
  const Tensor shallow =
      scale(shallow_branch(rgb_shallow, depth_shallow, p, mode), scales.shallow);
  switch (mode) {
    case FusionMode::no_distribution:
      return add(add(rgb, depth), shallow);
    case FusionMode::no_attention:
    case FusionMode::full:
      return distribute(rgb, depth, shallow, p.distribution).fused;
    default:
      break;
  }
  throw std::invalid_argument("fuse: invalid mode");
}

BranchScales unit_branch_scales(const Tensor& rgb_deep, const Tensor& depth_deep,
                                const Tensor& rgb_shallow, const Tensor& depth_shallow,
                                const FusionParams& p, FusionMode mode) {
  BranchScales s;
  s.rgb = inverse_rms(rgb_deep);
  if (mode != FusionMode::rgb_only) s.depth = inverse_rms(depth_deep);
  if (uses_shallow(mode)) s.shallow = inverse_rms(shallow_branch(rgb_shallow, depth_shallow, p, mode));
  return s;
}

}  // namespace hmad
