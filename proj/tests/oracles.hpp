// Independent reference implementations used as test oracles. They favour
// the most literal formulation over speed and share no code with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

// out[k][y][x] = b[k] + sum_{c,i,j} w[k][c][i][j] * in_padded[c][y*s+i][x*s+j]
inline std::vector<double> conv2d(const std::vector<double>& in, int C, int H, int W,
                                  const std::vector<double>& w, int K, int kh, int kw,
                                  const std::vector<double>& b, int s, int p, int& oh, int& ow) {
  oh = (H + 2 * p - kh) / s + 1;
  ow = (W + 2 * p - kw) / s + 1;
  std::vector<double> out(static_cast<std::size_t>(K * oh * ow));
  for (int k = 0; k < K; ++k)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = b[k];
        for (int c = 0; c < C; ++c)
          for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
              const int iy = y * s + i - p;
              const int ix = x * s + j - p;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += w[((k * C + c) * kh + i) * kw + j] * in[(c * H + iy) * W + ix];
            }
        out[(k * oh + y) * ow + x] = acc;
      }
  return out;
}

// Pixel-count IoU for integer boxes (x, y, w, h): rasterizes both boxes.
inline double raster_iou(int ax, int ay, int aw, int ah, int bx, int by, int bw, int bh) {
  const int x0 = std::min(ax, bx), y0 = std::min(ay, by);
  const int x1 = std::max(ax + aw, bx + bw), y1 = std::max(ay + ah, by + bh);
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const bool in_a = x >= ax && x < ax + aw && y >= ay && y < ay + ah;
      const bool in_b = x >= bx && x < bx + bw && y >= by && y < by + bh;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct Box {
  double x, y, w, h;
};

inline double iou(const std::optional<Box>& a, const std::optional<Box>& b) {
  if (!a || !b) return 0.0;
  const double l = std::max(a->x, b->x), r = std::min(a->x + a->w, b->x + b->w);
  const double t = std::max(a->y, b->y), d = std::min(a->y + a->h, b->y + b->h);
  if (r <= l || d <= t) return 0.0;
  const double inter = (r - l) * (d - t);
  return inter / (a->w * a->h + b->w * b->h - inter);
}

struct PrRe {
  double pr, re, f;
};

// Frame-by-frame long-term precision / recall / F at threshold tau.
inline PrRe brute_force_metrics(const std::vector<std::optional<Box>>& pred,
                                const std::vector<double>& conf,
                                const std::vector<std::optional<Box>>& gt, double tau) {
  double pr_sum = 0.0, re_sum = 0.0;
  int np = 0, ng = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const bool shown = pred[t].has_value() && conf[t] >= tau;
    if (shown) {
      ++np;
      pr_sum += iou(pred[t], gt[t]);
    }
    if (gt[t]) {
      ++ng;
      re_sum += shown ? iou(pred[t], gt[t]) : 0.0;
    }
  }
  const double pr = np == 0 ? 0.0 : pr_sum / np;
  const double re = ng == 0 ? 1.0 : re_sum / ng;
  const double f = pr + re == 0.0 ? 0.0 : 2.0 * pr * re / (pr + re);
  return {pr, re, f};
}

// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    std::swap(A[col], A[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = A[r][col] / A[col][col];
      for (std::size_t c = col; c < n; ++c) A[r][c] -= f * A[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= A[i][c] * x[c];
    x[i] = acc / A[i][i];
  }
  return x;
}

}  // namespace oracle
