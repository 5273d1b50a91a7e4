#include "hmad/tracker.hpp"

#include <algorithm>
#include <cmath>

#include "hmad/errors.hpp"

namespace hmad {

RGBDFrame DirectoryFrames::frame(std::size_t index) const {
  try {
    return read_frame(directory_, index);
  } catch (const std::exception& e) {
    throw TrackingError(index, e.what());
  }
}

Tensor fused_features(const FeatureExtractor& extractor, const FusionParams& params,
                      const RGBDFrame& frame, FusionMode mode, const BranchScales& scales) {
  const auto rgb = extractor.rgb.extract(frame.rgb);
  const auto depth = extractor.depth.extract(frame.depth);
  return fuse(rgb.deep, depth.deep, rgb.shallow, depth.shallow, params, mode, scales);
}

BranchScales frame_branch_scales(const FeatureExtractor& extractor, const FusionParams& params,
                                 const RGBDFrame& frame, FusionMode mode) {
  const auto rgb = extractor.rgb.extract(frame.rgb);
  const auto depth = extractor.depth.extract(frame.depth);
  return unit_branch_scales(rgb.deep, depth.deep, rgb.shallow, depth.shallow, params, mode);
}

namespace {

// Scale that gives the first fused map unit mean energy per element; reused
// for every later frame so that feature magnitudes stay comparable.
double normalizer(const Tensor& fused) {
  const double energy = dot(fused.data(), fused.data()) / static_cast<double>(fused.size());
  return energy > 0.0 ? 1.0 / std::sqrt(energy) : 1.0;
}

}  // namespace

std::vector<FramePrediction> track_sequence(const FrameSource& frames, const BBox& init_bbox,
                                            const TrackerConfig& config) {
  if (frames.size() == 0) return {};
  if (!(init_bbox.w > 0.0 && init_bbox.h > 0.0)) {
    throw TrackingError(0, "initial box must have positive extent");
  }
  const std::size_t stride = Backbone::kStride;
  const auto extractor = FeatureExtractor::seeded(config.seed);

  RGBDFrame first = frames.frame(0);
  const auto geometry = extractor.geometry(first.rgb.height(), first.rgb.width());
  const FusionParams params =
      config.fusion ? *config.fusion : FusionParams::seeded(geometry, config.seed ^ 0xF5u);
  if (params.geometry != geometry) {
    throw TrackingError(0, "fusion parameters do not match the frame geometry");
  }

  const BranchScales branch = config.normalize_branches
                                  ? frame_branch_scales(extractor, params, first, config.mode)
                                  : BranchScales{};
  Tensor fused = fused_features(extractor, params, first, config.mode, branch);
  const double norm = normalizer(fused);
  fused = scale(fused, norm);

  const double cells_h = static_cast<double>(fused.height());
  const double cells_w = static_cast<double>(fused.width());
  const double s = static_cast<double>(stride);
  BBox region{init_bbox.x / s, init_bbox.y / s, init_bbox.w / s, init_bbox.h / s};
  region.x = std::clamp(region.x, 0.0, cells_w - 1.0);
  region.y = std::clamp(region.y, 0.0, cells_h - 1.0);
  region.w = std::min(region.w, cells_w - region.x);
  region.h = std::min(region.h, cells_h - region.y);

  FilterModel model = init_filter(fused, region, config.lambda, config.label_sigma);
  const CellPoint center{std::clamp(init_bbox.center_y() / s - 0.5, 0.0, cells_h - 1.0),
                         std::clamp(init_bbox.center_x() / s - 0.5, 0.0, cells_w - 1.0)};
  SampleMemory memory(config.memory_capacity, config.add_threshold, config.update_period);
  memory.seed(augment_initial(fused, center, config.initial_samples, config.seed));
  model = refine_filter(model, memory, config.init_iterations);

  std::vector<FramePrediction> out;
  out.reserve(frames.size());
  out.push_back({init_bbox, 1.0});
  TrackState state{init_bbox, 1.0, 0};

  for (std::size_t t = 1; t < frames.size(); ++t) {
    const RGBDFrame frame = frames.frame(t);
    if (frame.rgb.shape() != first.rgb.shape() || frame.depth.shape() != first.depth.shape()) {
      throw TrackingError(t, "frame extent differs from frame 0");
    }
    fused = scale(fused_features(extractor, params, frame, config.mode, branch), norm);
    const Tensor score = predict_score(model, fused);
    state = localize(score, state, stride);
    state.frame_index = t;
    out.push_back({state.bbox, state.confidence});

    const CellPoint found{state.bbox.center_y() / s - 0.5, state.bbox.center_x() / s - 0.5};
    memory.update({std::move(fused), found, 1.0, t}, state.confidence);
    if (t % memory.update_period() == 0) {
      model = refine_filter(model, memory, config.update_iterations);
    }
  }
  return out;
}

}  // namespace hmad
