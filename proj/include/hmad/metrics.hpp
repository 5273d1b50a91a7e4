#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hmad {

// Axis-aligned box in pixels; (x, y) is the top-left corner.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double center_x() const { return x + w / 2.0; }
  double center_y() const { return y + h / 2.0; }
  double area() const { return w * h; }
  bool operator==(const BBox&) const = default;
};

// std::nullopt marks an absent target / absent prediction.
using MaybeBox = std::optional<BBox>;

struct FramePrediction {
  MaybeBox bbox;
  double confidence = 0.0;  // treated as 0 when bbox is absent
};

// Intersection-over-union; 0 if either box is absent or they do not intersect.
double overlap(const MaybeBox& a, const MaybeBox& b);

double precision(const std::vector<FramePrediction>& preds, const std::vector<MaybeBox>& gts,
                 double tau);
double recall(const std::vector<FramePrediction>& preds, const std::vector<MaybeBox>& gts,
              double tau);
double f_score(double pr, double re);

// Sufficient statistics at one confidence threshold. Pr and Re share the
// overlap sum: a frame contributes a non-zero overlap only when both the
// thresholded prediction and the ground truth are present.
struct ThresholdStats {
  double tau = 0.0;
  double overlap_sum = 0.0;
  std::size_t n_p = 0;  // frames with a non-empty thresholded prediction
  std::size_t n_g = 0;  // frames with a visible target

  double pr() const;  // 0 when n_p == 0
  double re() const;  // 1 when n_g == 0
  double f() const { return f_score(pr(), re()); }
};

ThresholdStats threshold_stats(const std::vector<FramePrediction>& preds,
                               const std::vector<MaybeBox>& gts, double tau);

struct SweepPoint {
  double tau;
  double pr;
  double re;
  double f;
};

struct EvalReport {
  double pr = 0.0;
  double re = 0.0;
  double f = 0.0;
  std::size_t n_p = 0;
  std::size_t n_g = 0;
  std::size_t frames = 0;
  ThresholdStats stats;  // at tau = 0
  std::vector<ThresholdStats> sweep_stats;
  std::vector<SweepPoint> sweep;
  std::optional<SweepPoint> best;  // max-F sweep point

  std::string to_json() const;
};

EvalReport evaluate_sequence(const std::vector<FramePrediction>& preds,
                             const std::vector<MaybeBox>& gts,
                             const std::vector<double>& sweep = {});

// Pools overlap sums and frame counts across sequences. Sweeps are pooled
// per threshold when every report carries the same threshold list.
EvalReport evaluate_dataset(const std::vector<EvalReport>& reports);

// "lo:hi:step" -> lo, lo+step, ..., hi (inclusive, step count rounded).
std::vector<double> parse_sweep(std::string_view text);

// ---- file formats ----

// One "x,y,w,h" line per frame; an empty line marks an absent target.
std::vector<MaybeBox> read_groundtruth(const std::filesystem::path& path);
void write_groundtruth(const std::filesystem::path& path, const std::vector<MaybeBox>& gts);

// One "x,y,w,h,confidence" line per frame with 6-decimal fixed point; an
// empty line marks an absent prediction.
std::vector<FramePrediction> read_predictions(const std::filesystem::path& path);
std::string format_predictions(const std::vector<FramePrediction>& preds);
void write_predictions(const std::filesystem::path& path,
                       const std::vector<FramePrediction>& preds);

}  // namespace hmad
