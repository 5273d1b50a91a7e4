#include "hmad/backbone.hpp"

#include <cmath>
#include <random>

namespace hmad {

Backbone Backbone::seeded(std::size_t in_channels, const std::array<std::size_t, kStages>& widths,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Backbone b;
  std::size_t in = in_channels;
  for (auto w : widths) {
    // He-uniform: keeps activation energy roughly constant through the ReLUs.
    const double bound = std::sqrt(6.0 / static_cast<double>(in * 9));
    b.stages_.push_back({Tensor::uniform({w, in, 3, 3}, -bound, bound, rng), Tensor({w}), 2, 1});
    in = w;
  }
  return b;
}

BackboneFeatures Backbone::extract(const Tensor& image) const {
  require_rank(image, 3, "backbone input");
  if (image.channels() != in_channels()) {
    throw ShapeError("backbone expects " + std::to_string(in_channels()) + " channels, got " +
                     to_string(image.shape()));
  }
  BackboneFeatures out;
  // Pixels live in [0, 1]; centring them makes the first layer respond to
  // contrast rather than to the overall brightness level.
  Tensor x = image;
  for (auto& v : x.data()) v -= 0.5;
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    x = relu(stages_[s].forward(x));
    if (s + 1 == kShallowStage) out.shallow = x;
  }
  out.deep = std::move(x);
  return out;
}

FeatureExtractor FeatureExtractor::seeded(std::uint64_t seed,
                                          const std::array<std::size_t, Backbone::kStages>& widths) {
  return {Backbone::seeded(3, widths, seed ^ 0x5247420000000000ull),
          Backbone::seeded(1, widths, seed ^ 0x4445505400000000ull)};
}

FeatureGeometry FeatureExtractor::geometry(std::size_t image_height,
                                           std::size_t image_width) const {
  auto down = [](std::size_t v, std::size_t times) {
    for (std::size_t i = 0; i < times; ++i) v = (v + 1) / 2;
    return v;
  };
  return {rgb.shallow_channels(),
          down(image_height, Backbone::kShallowStage),
          down(image_width, Backbone::kShallowStage),
          rgb.deep_channels(),
          down(image_height, Backbone::kStages),
          down(image_width, Backbone::kStages)};
}

}  // namespace hmad
