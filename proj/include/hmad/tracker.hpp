#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hmad/backbone.hpp"
#include "hmad/discriminator.hpp"
#include "hmad/fusion.hpp"
#include "hmad/metrics.hpp"
#include "hmad/synth.hpp"

namespace hmad {

struct TrackerConfig {
  FusionMode mode = FusionMode::full;
  bool normalize_branches = true;  // frame-0 unit-RMS scaling of F_R, F_D, F_S
  std::size_t initial_samples = 15;  // K
  double add_threshold = 0.6;
  std::size_t memory_capacity = 50;  // L
  std::size_t update_period = 20;    // P
  std::size_t init_iterations = 50;
  std::size_t update_iterations = 5;
  double lambda = 0.01;
  double label_sigma = 1.0;
  std::uint64_t seed = 1;
  // Overrides the seeded fusion parameters when set.
  std::optional<FusionParams> fusion;
};

class TrackingError : public std::runtime_error {
 public:
  TrackingError(std::size_t frame, const std::string& message)
      : std::runtime_error("frame " + std::to_string(frame) + ": " + message), frame_(frame) {}
  std::size_t frame_index() const noexcept { return frame_; }

 private:
  std::size_t frame_;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::size_t size() const = 0;
  virtual RGBDFrame frame(std::size_t index) const = 0;
};

class InMemoryFrames final : public FrameSource {
 public:
  explicit InMemoryFrames(const std::vector<RGBDFrame>& frames) : frames_(frames) {}
  std::size_t size() const override { return frames_.size(); }
  RGBDFrame frame(std::size_t index) const override { return frames_.at(index); }

 private:
  const std::vector<RGBDFrame>& frames_;
};

// Decodes frame files lazily from a sequence directory.
class DirectoryFrames final : public FrameSource {
 public:
  DirectoryFrames(std::filesystem::path directory, std::size_t count)
      : directory_(std::move(directory)), count_(count) {}
  std::size_t size() const override { return count_; }
  RGBDFrame frame(std::size_t index) const override;

 private:
  std::filesystem::path directory_;
  std::size_t count_;
};

// Extracts per-modality features and fuses them under `mode`.
Tensor fused_features(const FeatureExtractor& extractor, const FusionParams& params,
                      const RGBDFrame& frame, FusionMode mode, const BranchScales& scales = {});

// Branch scales that give each of the frame's fusion inputs unit RMS.
BranchScales frame_branch_scales(const FeatureExtractor& extractor, const FusionParams& params,
                                 const RGBDFrame& frame, FusionMode mode);

// Runs the full online loop and returns one prediction per frame. Frame 0
// echoes init_bbox with confidence 1.
std::vector<FramePrediction> track_sequence(const FrameSource& frames, const BBox& init_bbox,
                                            const TrackerConfig& config);

}  // namespace hmad
