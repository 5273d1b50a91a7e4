#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hmad/metrics.hpp"
#include "hmad/tensor.hpp"

namespace hmad {

enum class Challenge { plain, distractors, fast_motion, dim_light, occlusion };

std::string_view challenge_name(Challenge c);
Challenge parse_challenge(std::string_view name);  // throws std::invalid_argument

enum class TargetShape { rectangle, ellipse };

// Invalid sequence recipe; field() names the offending field.
class SpecError : public std::invalid_argument {
 public:
  SpecError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct SequenceSpec {
  Challenge challenge = Challenge::plain;
  std::size_t length = 60;
  std::size_t height = 96;
  std::size_t width = 96;

  TargetShape shape = TargetShape::rectangle;
  std::size_t target_w = 24;
  std::size_t target_h = 24;
  double start_x = 36.0;  // top-left, pixels
  double start_y = 36.0;
  double velocity_x = 0.0;  // pixels per frame
  double velocity_y = 0.0;
  double motion_noise = 0.0;  // std of per-frame velocity perturbation
  double max_speed = 3.0;

  std::size_t distractors = 0;
  double distractor_depth_gap = 0.25;  // target depth minus distractor depth

  bool occluder = false;  // vertical bar in front of the target path

  double illumination = 1.0;  // RGB gain in (0, 1]
  double noise_std = 0.02;    // RGB sensor noise
  double depth_noise_std = 0.004;
  double background_depth = 0.2;  // normalized inverse distance
  double depth_contrast = 0.45;   // target minus background depth

  std::uint64_t seed = 0;

  // Seeded recipe for one challenge class. Geometry and motion depend only on
  // the seed, so e.g. plain and dim_light presets share a depth stream.
  static SequenceSpec preset(Challenge challenge, std::uint64_t seed, std::size_t length = 60);

  void validate() const;  // throws SpecError

  std::string to_text() const;  // key=value lines
  static SequenceSpec from_text(std::string_view text);
};

struct RGBDFrame {
  Tensor rgb;    // (3, H, W) in [0, 1]
  Tensor depth;  // (1, H, W) in [0, 1]
};

struct Sequence {
  SequenceSpec spec;
  std::vector<RGBDFrame> frames;
  std::vector<MaybeBox> groundtruth;
};

Sequence generate_sequence(const SequenceSpec& spec);

// Snaps pixel values to the on-disk precision (8-bit RGB, 16-bit depth).
RGBDFrame quantize(const RGBDFrame& frame);

// frame_%06d.ppm (P6, maxval 255), frame_%06d.pgm (P5, maxval 65535),
// groundtruth.txt and spec.txt.
void write_sequence(const Sequence& sequence, const std::filesystem::path& directory);
Sequence read_sequence(const std::filesystem::path& directory);

std::filesystem::path rgb_frame_path(const std::filesystem::path& directory, std::size_t index);
std::filesystem::path depth_frame_path(const std::filesystem::path& directory, std::size_t index);
RGBDFrame read_frame(const std::filesystem::path& directory, std::size_t index);

// Pinned benchmark suite: one "name challenge seed" entry per line.
struct SuiteEntry {
  std::string name;
  Challenge challenge;
  std::uint64_t seed;
};
std::vector<SuiteEntry> read_suite_manifest(const std::filesystem::path& path);

}  // namespace hmad
