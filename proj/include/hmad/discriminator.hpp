#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "hmad/metrics.hpp"
#include "hmad/tensor.hpp"

namespace hmad {

// Feature-cell coordinates: integer (r, c) is the centre of cell (r, c), so a
// pixel position p maps to p / stride - 0.5.
struct CellPoint {
  double row = 0.0;
  double col = 0.0;
};

struct FilterModel {
  Tensor filter;  // (1, C, fh, fw)
  double lambda = 0.01;
  double label_sigma = 1.0;

  std::size_t channels() const { return filter.extent(1); }
  std::size_t filter_height() const { return filter.extent(2); }
  std::size_t filter_width() const { return filter.extent(3); }
};

struct TrainingSample {
  Tensor feature;  // fused (C, H, W)
  CellPoint center;
  double weight = 1.0;
  std::size_t age = 0;  // frame index
};

// Bounded, confidence-gated sample store. Samples stay in insertion order.
class SampleMemory {
 public:
  SampleMemory(std::size_t capacity, double add_threshold, std::size_t update_period);

  std::size_t capacity() const { return capacity_; }
  double add_threshold() const { return add_threshold_; }
  std::size_t update_period() const { return update_period_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::deque<TrainingSample>& samples() const { return samples_; }

  // Admits the initial augmented set unconditionally.
  void seed(std::vector<TrainingSample> initial);

  // Returns true if the sample was admitted. Below the threshold nothing
  // changes; at capacity the oldest sample (smallest age, earliest inserted
  // among equals) is evicted first.
  bool update(TrainingSample sample, double confidence);

 private:
  std::size_t capacity_;
  double add_threshold_;
  std::size_t update_period_;
  std::deque<TrainingSample> samples_;
};

SampleMemory update_memory(SampleMemory memory, TrainingSample sample, double confidence);

// Filter extent, in cells, for a target region of the given size in cells.
std::size_t filter_extent(double size_cells, std::size_t feature_extent);

// Mean-pools the target region into an fh x fw filter (each filter tap is the
// area-weighted average of the features under its bin), then scales it to
// unit energy. `region` is in feature-cell units with (x, y) the top-left
// corner and cell (r, c) spanning [c, c+1) x [r, r+1).
FilterModel init_filter(const Tensor& fused, const BBox& region, double lambda = 0.01,
                        double label_sigma = 1.0);

// Dense correlation of the filter with the map, zero-padded so the output is
// (1, H, W). Output (r, c) aligns filter tap (fh-1)/2, (fw-1)/2 with cell (r, c).
Tensor predict_score(const FilterModel& model, const Tensor& fused);

// Transpose of predict_score with respect to the filter.
Tensor correlate_transpose(const Tensor& residual, const Tensor& fused, std::size_t fh,
                           std::size_t fw);

Tensor gaussian_label(std::size_t height, std::size_t width, CellPoint center, double sigma);

// sum_s w_s |score(f, x_s) - y_s|^2 + lambda |f|^2
double filter_objective(const FilterModel& model, const SampleMemory& memory);
Tensor filter_gradient(const FilterModel& model, const SampleMemory& memory);

struct RefineTrace {
  std::vector<double> objective;  // before the first step, then after each step
};

// Steepest descent with exact line search on the quadratic objective.
FilterModel refine_filter(const FilterModel& model, const SampleMemory& memory,
                          std::size_t iterations, RefineTrace* trace = nullptr);

struct TrackState {
  BBox bbox;
  double confidence = 0.0;
  std::size_t frame_index = 0;
};

// Arg-max cell (ties: smallest row, then smallest column) mapped to an image
// centre cell * stride + stride / 2; the box size is carried over from prev.
TrackState localize(const Tensor& score, const TrackState& prev, std::size_t stride);

// Original sample plus K-1 distinct variants drawn from integer shifts within
// +-2 cells and an optional horizontal flip. Variants whose centre would
// leave the map are skipped. Throws if fewer than K variants exist.
std::vector<TrainingSample> augment_initial(const Tensor& fused, CellPoint center, std::size_t k,
                                            std::uint64_t seed);

}  // namespace hmad
