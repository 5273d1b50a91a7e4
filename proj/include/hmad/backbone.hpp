#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "hmad/fusion.hpp"

namespace hmad {

struct BackboneFeatures {
  Tensor shallow;  // stride 4
  Tensor deep;     // stride 16
};

// Fixed, seeded four-stage stack of 3x3 stride-2 convolutions with ReLU.
// The shallow tap follows stage 2, the deep tap stage 4.
class Backbone {
 public:
  static constexpr std::size_t kStages = 4;
  static constexpr std::size_t kShallowStage = 2;
  static constexpr std::size_t kStride = 16;
  static constexpr std::size_t kShallowStride = 4;

  static Backbone seeded(std::size_t in_channels, const std::array<std::size_t, kStages>& widths,
                         std::uint64_t seed);

  BackboneFeatures extract(const Tensor& image) const;
  std::size_t in_channels() const { return stages_.front().weight.extent(1); }
  std::size_t shallow_channels() const { return stages_[kShallowStage - 1].weight.extent(0); }
  std::size_t deep_channels() const { return stages_.back().weight.extent(0); }

 private:
  std::vector<ConvLayer> stages_;
};

inline constexpr std::array<std::size_t, Backbone::kStages> kDefaultBackboneWidths = {16, 32, 48,
                                                                                      64};

// RGB and depth backbones sharing one layout.
struct FeatureExtractor {
  Backbone rgb;
  Backbone depth;

  static FeatureExtractor seeded(std::uint64_t seed,
                                 const std::array<std::size_t, Backbone::kStages>& widths =
                                     kDefaultBackboneWidths);
  FeatureGeometry geometry(std::size_t image_height, std::size_t image_width) const;
};

}  // namespace hmad
