#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "hmad/tensor.hpp"

namespace hmad {

struct LinearLayer {
  Tensor weight;  // (out, in)
  Tensor bias;    // (out)

  static LinearLayer seeded(std::size_t out, std::size_t in, std::mt19937_64& rng);
  Vector forward(std::span<const double> input) const;
  std::size_t in_features() const { return weight.extent(1); }
  std::size_t out_features() const { return weight.extent(0); }
};

struct ConvLayer {
  Tensor weight;  // (K, C, kh, kw)
  Tensor bias;    // (K)
  std::size_t stride = 1;
  std::size_t padding = 0;

  static ConvLayer seeded(std::size_t out_channels, std::size_t in_channels, std::size_t kernel,
                          std::size_t stride, std::size_t padding, std::mt19937_64& rng);
  Tensor forward(const Tensor& input) const;
};

// Two-layer bottleneck MLP shared by the average- and max-pooled paths.
struct ChannelAttnParams {
  LinearLayer hidden;  // (C/r, C)
  LinearLayer output;  // (C, C/r)

  static ChannelAttnParams seeded(std::size_t channels, std::size_t reduction,
                                  std::mt19937_64& rng);
  std::size_t channels() const { return hidden.in_features(); }
  std::size_t reduction() const { return channels() / hidden.out_features(); }
};

struct SpatialAttnParams {
  ConvLayer conv;  // (1, 2, 7, 7), stride 1, padding 3

  static constexpr std::size_t kernel_size = 7;
  static SpatialAttnParams seeded(std::mt19937_64& rng);
};

struct CbamParams {
  ChannelAttnParams channel;
  SpatialAttnParams spatial;
};

enum class Branch : std::size_t { rgb = 0, depth = 1, shallow = 2 };
inline constexpr std::size_t kBranchCount = 3;

struct DistributionParams {
  LinearLayer global;                          // (d, C)
  std::array<LinearLayer, kBranchCount> branch;  // each (C, d)

  static DistributionParams seeded(std::size_t channels, std::mt19937_64& rng);
  std::size_t channels() const { return global.in_features(); }
  LinearLayer& operator[](Branch b) { return branch[static_cast<std::size_t>(b)]; }
  const LinearLayer& operator[](Branch b) const { return branch[static_cast<std::size_t>(b)]; }
};

// Width of the global descriptor: C/4 floored, at least 4.
std::size_t global_width(std::size_t channels);

struct FeatureGeometry {
  std::size_t shallow_channels = 0;  // per modality
  std::size_t shallow_height = 0;
  std::size_t shallow_width = 0;
  std::size_t deep_channels = 0;
  std::size_t deep_height = 0;
  std::size_t deep_width = 0;

  bool operator==(const FeatureGeometry&) const = default;
};

struct FusionParams {
  FeatureGeometry geometry;
  CbamParams attention;            // over the 2*Cs concatenated shallow channels
  std::vector<ConvLayer> rescale;  // 3x3 convs with ReLU, shallow -> deep geometry
  DistributionParams distribution;

  static constexpr std::size_t default_reduction = 16;

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static FusionParams seeded(const FeatureGeometry& geometry, std::uint64_t seed,
                             std::size_t reduction = default_reduction);

  // Throws ShapeError unless every layer agrees with `geometry`.
  void validate() const;
};

Vector channel_attention(const Tensor& features, const ChannelAttnParams& p);
Tensor spatial_attention(const Tensor& features, const SpatialAttnParams& p);
Tensor cbam(const Tensor& features, const CbamParams& p);

Tensor rescale_shallow(const Tensor& shallow, const std::vector<ConvLayer>& stack);
Tensor aggregate_shallow(const Tensor& rgb_shallow, const Tensor& depth_shallow,
                         const FusionParams& p);

struct DistributionResult {
  std::array<Tensor, kBranchCount> gated;
  Tensor fused;
  Vector global;                                 // F_g
  std::array<Vector, kBranchCount> logits;       // pre-sigmoid branch outputs
  std::array<Vector, kBranchCount> gates;
};

DistributionResult distribute(const Tensor& rgb, const Tensor& depth, const Tensor& shallow,
                              const DistributionParams& p);

enum class FusionMode { full, no_distribution, no_attention, baseline_add, rgb_only };

inline constexpr std::array<FusionMode, 5> kAllFusionModes = {
    FusionMode::baseline_add, FusionMode::no_distribution, FusionMode::no_attention,
    FusionMode::full, FusionMode::rgb_only};

std::string_view mode_name(FusionMode mode);   // flag spelling, e.g. "no_attention"
std::string_view mode_label(FusionMode mode);  // report row label, e.g. "w/o attention"
FusionMode parse_mode(std::string_view name);  // throws std::invalid_argument

// Per-branch multipliers applied to F_R, F_D and F_S before they meet.
struct BranchScales {
  double rgb = 1.0;
  double depth = 1.0;
  double shallow = 1.0;
};

// rgb_only returns the (scaled) RGB deep map; the other modes follow the
// ablation variants.
Tensor fuse(const Tensor& rgb_deep, const Tensor& depth_deep, const Tensor& rgb_shallow,
            const Tensor& depth_shallow, const FusionParams& p, FusionMode mode,
            const BranchScales& scales = {});

// Reciprocal RMS of each branch as fuse(mode) would see it; branches a mode
// does not use keep scale 1.
BranchScales unit_branch_scales(const Tensor& rgb_deep, const Tensor& depth_deep,
                                const Tensor& rgb_shallow, const Tensor& depth_shallow,
                                const FusionParams& p, FusionMode mode);

// ---- analytic gradients (verification only) ----

struct ChannelAttnGrads {
  Tensor input;
  ChannelAttnParams params;
};
ChannelAttnGrads channel_attention_backward(const Tensor& features, const ChannelAttnParams& p,
                                            std::span<const double> grad_gates);

struct SpatialAttnGrads {
  Tensor input;
  SpatialAttnParams params;
};
SpatialAttnGrads spatial_attention_backward(const Tensor& features, const SpatialAttnParams& p,
                                            const Tensor& grad_map);

struct CbamGrads {
  Tensor input;
  CbamParams params;
};
CbamGrads cbam_backward(const Tensor& features, const CbamParams& p, const Tensor& grad_output);

struct DistributionUpstream {
  std::array<Tensor, kBranchCount> gated;
  Tensor fused;
};
struct DistributionGrads {
  std::array<Tensor, kBranchCount> inputs;
  DistributionParams params;
};
DistributionGrads distribute_backward(const Tensor& rgb, const Tensor& depth,
                                      const Tensor& shallow, const DistributionParams& p,
                                      const DistributionUpstream& upstream);

// ---- parameter visitation ----
// `fn(name, tensor)` is called for every learnable tensor, in a fixed order.

template <class P, class Fn>
void visit_params(P& p, const std::string& prefix, Fn&& fn)
  requires std::is_same_v<std::remove_const_t<P>, LinearLayer> ||
           std::is_same_v<std::remove_const_t<P>, ConvLayer>
{
  fn(prefix + "weight", p.weight);
  fn(prefix + "bias", p.bias);
}

template <class P, class Fn>
void visit_params(P& p, const std::string& prefix, Fn&& fn)
  requires std::is_same_v<std::remove_const_t<P>, ChannelAttnParams>
{
  visit_params(p.hidden, prefix + "mlp.hidden.", fn);
  visit_params(p.output, prefix + "mlp.output.", fn);
}

template <class P, class Fn>
void visit_params(P& p, const std::string& prefix, Fn&& fn)
  requires std::is_same_v<std::remove_const_t<P>, SpatialAttnParams>
{
  visit_params(p.conv, prefix + "conv7.", fn);
}

template <class P, class Fn>
void visit_params(P& p, const std::string& prefix, Fn&& fn)
  requires std::is_same_v<std::remove_const_t<P>, CbamParams>
{
  visit_params(p.channel, prefix + "channel.", fn);
  visit_params(p.spatial, prefix + "spatial.", fn);
}

template <class P, class Fn>
void visit_params(P& p, const std::string& prefix, Fn&& fn)
  requires std::is_same_v<std::remove_const_t<P>, DistributionParams>
{
  static constexpr std::array<const char*, kBranchCount> names = {"rgb", "depth", "shallow"};
  visit_params(p.global, prefix + "global.", fn);
  for (std::size_t i = 0; i < kBranchCount; ++i) {
    visit_params(p.branch[i], prefix + "branch." + names[i] + ".", fn);
  }
}

template <class P, class Fn>
void visit_params(P& p, const std::string& prefix, Fn&& fn)
  requires std::is_same_v<std::remove_const_t<P>, FusionParams>
{
  visit_params(p.attention, prefix + "attention.", fn);
  for (std::size_t i = 0; i < p.rescale.size(); ++i) {
    visit_params(p.rescale[i], prefix + "rescale." + std::to_string(i) + ".", fn);
  }
  visit_params(p.distribution, prefix + "distribution.", fn);
}

// Reference to the parameter tensor called `name`; throws if absent.
template <class P>
auto& param_tensor(P& p, const std::string& name) {
  using T = std::conditional_t<std::is_const_v<P>, const Tensor, Tensor>;
  T* found = nullptr;
  visit_params(p, "", [&](const std::string& n, T& t) {
    if (n == name) found = &t;
  });
  if (!found) throw std::invalid_argument("unknown parameter: " + name);
  return *found;
}

template <class P>
std::vector<std::string> param_names(const P& p) {
  std::vector<std::string> names;
  visit_params(p, "", [&](const std::string& n, const Tensor&) { names.push_back(n); });
  return names;
}

}  // namespace hmad
