#include "hmad/discriminator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

namespace hmad {

SampleMemory::SampleMemory(std::size_t capacity, double add_threshold, std::size_t update_period)
    : capacity_(capacity), add_threshold_(add_threshold), update_period_(update_period) {
  if (capacity == 0) throw std::invalid_argument("sample memory capacity must be positive");
  if (!(add_threshold >= 0.0 && add_threshold <= 1.0)) {
    throw std::invalid_argument("sample memory threshold must be in [0, 1]");
  }
  if (update_period == 0) throw std::invalid_argument("update period must be positive");
}

void SampleMemory::seed(std::vector<TrainingSample> initial) {
  if (initial.size() > capacity_) {
    throw std::invalid_argument("initial sample set (" + std::to_string(initial.size()) +
                                ") exceeds memory capacity " + std::to_string(capacity_));
  }
  samples_.assign(std::make_move_iterator(initial.begin()), std::make_move_iterator(initial.end()));
}

bool SampleMemory::update(TrainingSample sample, double confidence) {
  if (confidence < add_threshold_) return false;
  if (samples_.size() >= capacity_) {
    // min_element returns the first of equal minima, i.e. the earliest inserted.
    const auto oldest = std::min_element(
        samples_.begin(), samples_.end(),
        [](const TrainingSample& a, const TrainingSample& b) { return a.age < b.age; });
    samples_.erase(oldest);
  }
  samples_.push_back(std::move(sample));
  return true;
}

SampleMemory update_memory(SampleMemory memory, TrainingSample sample, double confidence) {
  memory.update(std::move(sample), confidence);
  return memory;
}

std::size_t filter_extent(double size_cells, std::size_t feature_extent) {
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(size_cells)));
  return std::min(n, feature_extent);
}

FilterModel init_filter(const Tensor& fused, const BBox& region, double lambda,
                        double label_sigma) {
  require_rank(fused, 3, "init_filter");
  const auto C = fused.channels();
  const auto H = fused.height();
  const auto W = fused.width();
  if (!(region.w * region.h >= 1.0)) {
    throw std::invalid_argument("init_filter: target region covers less than one cell");
  }
  constexpr double slack = 1e-9;
  if (region.x < -slack || region.y < -slack ||
      region.x + region.w > static_cast<double>(W) + slack ||
      region.y + region.h > static_cast<double>(H) + slack) {
    throw std::invalid_argument("init_filter: target region outside the feature map");
  }
  if (!(lambda >= 0.0) || !(label_sigma > 0.0)) {
    throw std::invalid_argument("init_filter: lambda must be >= 0 and label_sigma > 0");
  }

  const std::size_t fh = filter_extent(region.h, H);
  const std::size_t fw = filter_extent(region.w, W);
  const double bin_h = region.h / static_cast<double>(fh);
  const double bin_w = region.w / static_cast<double>(fw);

  FilterModel model{Tensor({1, C, fh, fw}), lambda, label_sigma};
  for (std::size_t i = 0; i < fh; ++i) {
    const double y0 = region.y + static_cast<double>(i) * bin_h;
    const double y1 = y0 + bin_h;
    for (std::size_t j = 0; j < fw; ++j) {
      const double x0 = region.x + static_cast<double>(j) * bin_w;
      const double x1 = x0 + bin_w;
      // Area-weighted average of the piecewise-constant feature map.
      const auto r_begin = static_cast<std::size_t>(std::max(0.0, std::floor(y0)));
      const auto r_end = std::min(H, static_cast<std::size_t>(std::ceil(y1)));
      const auto c_begin = static_cast<std::size_t>(std::max(0.0, std::floor(x0)));
      const auto c_end = std::min(W, static_cast<std::size_t>(std::ceil(x1)));
      for (std::size_t r = r_begin; r < r_end; ++r) {
        const double oy = std::min(y1, r + 1.0) - std::max(y0, static_cast<double>(r));
        if (oy <= 0.0) continue;
        for (std::size_t c = c_begin; c < c_end; ++c) {
          const double ox = std::min(x1, c + 1.0) - std::max(x0, static_cast<double>(c));
          if (ox <= 0.0) continue;
          const double a = oy * ox / (bin_h * bin_w);
          for (std::size_t k = 0; k < C; ++k) model.filter.at(0, k, i, j) += a * fused.at(k, r, c);
        }
      }
    }
  }
  const double energy = std::sqrt(dot(model.filter.data(), model.filter.data()));
  if (energy > 0.0) model.filter = scale(model.filter, 1.0 / energy);
  return model;
}

namespace {

void require_filter_fits(const Tensor& filter, const Tensor& fused) {
  require_rank(filter, 4, "filter");
  require_rank(fused, 3, "feature map");
  if (filter.extent(0) != 1 || filter.extent(1) != fused.channels() ||
      filter.extent(2) > fused.height() || filter.extent(3) > fused.width()) {
    throw ShapeError("filter " + to_string(filter.shape()) + " does not fit feature map " +
                     to_string(fused.shape()));
  }
}

}  // namespace

Tensor predict_score(const FilterModel& model, const Tensor& fused) {
  const Tensor& f = model.filter;
  require_filter_fits(f, fused);
  const auto C = fused.channels();
  const auto H = static_cast<long>(fused.height());
  const auto W = static_cast<long>(fused.width());
  const auto fh = static_cast<long>(f.extent(2));
  const auto fw = static_cast<long>(f.extent(3));
  const long oh = (fh - 1) / 2;
  const long ow = (fw - 1) / 2;
  Tensor score({1, fused.height(), fused.width()});
  for (long r = 0; r < H; ++r) {
    for (long c = 0; c < W; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < C; ++k) {
        for (long i = 0; i < fh; ++i) {
          const long y = r + i - oh;
          if (y < 0 || y >= H) continue;
          for (long j = 0; j < fw; ++j) {
            const long x = c + j - ow;
            if (x < 0 || x >= W) continue;
            acc += f.at(0, k, static_cast<std::size_t>(i), static_cast<std::size_t>(j)) *
                   fused.at(k, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
          }
        }
      }
      score[static_cast<std::size_t>(r * W + c)] = acc;
    }
  }
  return score;
}

Tensor correlate_transpose(const Tensor& residual, const Tensor& fused, std::size_t fh,
                           std::size_t fw) {
  require_rank(fused, 3, "correlate_transpose");
  if (residual.shape() != Shape{1, fused.height(), fused.width()}) {
    throw ShapeError("correlate_transpose: residual " + to_string(residual.shape()));
  }
  const auto C = fused.channels();
  const auto H = static_cast<long>(fused.height());
  const auto W = static_cast<long>(fused.width());
  const long oh = (static_cast<long>(fh) - 1) / 2;
  const long ow = (static_cast<long>(fw) - 1) / 2;
  Tensor grad({1, C, fh, fw});
  for (std::size_t k = 0; k < C; ++k) {
    for (long i = 0; i < static_cast<long>(fh); ++i) {
      for (long j = 0; j < static_cast<long>(fw); ++j) {
        double acc = 0.0;
        for (long r = 0; r < H; ++r) {
          const long y = r + i - oh;
          if (y < 0 || y >= H) continue;
          for (long c = 0; c < W; ++c) {
            const long x = c + j - ow;
            if (x < 0 || x >= W) continue;
            acc += residual[static_cast<std::size_t>(r * W + c)] *
                   fused.at(k, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
          }
        }
        grad.at(0, k, static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
      }
    }
  }
  return grad;
}

Tensor gaussian_label(std::size_t height, std::size_t width, CellPoint center, double sigma) {
  Tensor label({1, height, width});
  const double denom = 2.0 * sigma * sigma;
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double dr = static_cast<double>(r) - center.row;
      const double dc = static_cast<double>(c) - center.col;
      label.at(0, r, c) = std::exp(-(dr * dr + dc * dc) / denom);
    }
  }
  return label;
}

namespace {

Tensor residual(const FilterModel& model, const TrainingSample& s) {
  const Tensor score = predict_score(model, s.feature);
  const Tensor label =
      gaussian_label(s.feature.height(), s.feature.width(), s.center, model.label_sigma);
  Tensor r = score;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= label[i];
  return r;
}

}  // namespace

double filter_objective(const FilterModel& model, const SampleMemory& memory) {
  double total = model.lambda * dot(model.filter.data(), model.filter.data());
  for (const auto& s : memory.samples()) {
    const Tensor r = residual(model, s);
    total += s.weight * dot(r.data(), r.data());
  }
  return total;
}

Tensor filter_gradient(const FilterModel& model, const SampleMemory& memory) {
  Tensor grad = scale(model.filter, 2.0 * model.lambda);
  const auto fh = model.filter_height();
  const auto fw = model.filter_width();
  for (const auto& s : memory.samples()) {
    const Tensor back = correlate_transpose(residual(model, s), s.feature, fh, fw);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += 2.0 * s.weight * back[i];
  }
  return grad;
}

FilterModel refine_filter(const FilterModel& model, const SampleMemory& memory,
                          std::size_t iterations, RefineTrace* trace) {
  if (memory.empty()) throw std::invalid_argument("refine_filter: sample memory is empty");
  FilterModel current = model;
  double objective = filter_objective(current, memory);
  if (trace) trace->objective.push_back(objective);
  for (std::size_t it = 0; it < iterations; ++it) {
    const Tensor g = filter_gradient(current, memory);
    const double gg = dot(g.data(), g.data());
    if (gg < 1e-24) break;
    // Curvature along g: the objective is quadratic, so
    // L(f - a g) = L(f) - a |g|^2 + a^2 (sum_s w_s |A_s g|^2 + lambda |g|^2).
    FilterModel direction{g, current.lambda, current.label_sigma};
    double curvature = current.lambda * gg;
    for (const auto& s : memory.samples()) {
      const Tensor ag = predict_score(direction, s.feature);
      curvature += s.weight * dot(ag.data(), ag.data());
    }
    if (!(curvature > 0.0)) break;
    const double step = gg / (2.0 * curvature);
    // Below this the step only shuffles rounding error.
    const double decrease = 0.5 * step * gg;
    if (decrease <= 1e-14 * std::abs(objective)) break;
    objective -= decrease;
    for (std::size_t i = 0; i < g.size(); ++i) current.filter[i] -= step * g[i];
    if (trace) trace->objective.push_back(filter_objective(current, memory));
  }
  return current;
}

TrackState localize(const Tensor& score, const TrackState& prev, std::size_t stride) {
  require_rank(score, 3, "localize");
  if (score.channels() != 1) throw ShapeError("localize: score map must have one channel");
  std::size_t best = 0;
  for (std::size_t i = 1; i < score.size(); ++i) {
    if (score[i] > score[best]) best = i;
  }
  const std::size_t row = best / score.width();
  const std::size_t col = best % score.width();
  const double half = static_cast<double>(stride) / 2.0;
  const double cy = static_cast<double>(row * stride) + half;
  const double cx = static_cast<double>(col * stride) + half;
  TrackState next;
  next.bbox = {cx - prev.bbox.w / 2.0, cy - prev.bbox.h / 2.0, prev.bbox.w, prev.bbox.h};
  next.confidence = sigmoid(score[best]);
  next.frame_index = prev.frame_index + 1;
  return next;
}

namespace {

struct Transform {
  int dr;
  int dc;
  bool flip;
};

Tensor apply(const Tensor& x, const Transform& t) {
  const auto C = x.channels();
  const auto H = static_cast<int>(x.height());
  const auto W = static_cast<int>(x.width());
  Tensor out(x.shape());
  for (std::size_t k = 0; k < C; ++k) {
    for (int r = 0; r < H; ++r) {
      const int sr = r - t.dr;
      if (sr < 0 || sr >= H) continue;
      for (int c = 0; c < W; ++c) {
        const int shifted = c - t.dc;
        if (shifted < 0 || shifted >= W) continue;
        const int sc = t.flip ? W - 1 - shifted : shifted;
        out.at(k, static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
            x.at(k, static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
      }
    }
  }
  return out;
}

}  // namespace

std::vector<TrainingSample> augment_initial(const Tensor& fused, CellPoint center, std::size_t k,
                                            std::uint64_t seed) {
  require_rank(fused, 3, "augment_initial");
  if (k == 0) throw std::invalid_argument("augment_initial: K must be positive");
  const double H = static_cast<double>(fused.height());
  const double W = static_cast<double>(fused.width());
  auto in_bounds = [&](CellPoint p) {
    return p.row >= -0.5 && p.row < H - 0.5 && p.col >= -0.5 && p.col < W - 0.5;
  };
  if (!in_bounds(center)) throw std::invalid_argument("augment_initial: centre outside the map");

  std::vector<Transform> variants;
  for (int flip = 0; flip < 2; ++flip) {
    for (int dr = -2; dr <= 2; ++dr) {
      for (int dc = -2; dc <= 2; ++dc) {
        if (dr == 0 && dc == 0 && flip == 0) continue;
        variants.push_back({dr, dc, flip == 1});
      }
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(variants.begin(), variants.end(), rng);

  std::vector<TrainingSample> samples;
  samples.push_back({fused, center, 1.0, 0});
  for (const auto& t : variants) {
    if (samples.size() == k) break;
    CellPoint moved{center.row + t.dr, (t.flip ? W - 1.0 - center.col : center.col) + t.dc};
    if (!in_bounds(moved)) continue;
    samples.push_back({apply(fused, t), moved, 1.0, 0});
  }
  if (samples.size() < k) {
    throw std::invalid_argument("augment_initial: only " + std::to_string(samples.size()) +
                                " in-bounds variants available, K = " + std::to_string(k));
  }
  return samples;
}

}  // namespace hmad
