#include "hmad/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hmad/errors.hpp"
#include "json.hpp"

namespace hmad {

double overlap(const MaybeBox& a, const MaybeBox& b) {
  if (!a || !b) return 0.0;
  const double ix = std::min(a->x + a->w, b->x + b->w) - std::max(a->x, b->x);
  const double iy = std::min(a->y + a->h, b->y + b->h) - std::max(a->y, b->y);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a->area() + b->area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

namespace {

void require_aligned(std::size_t preds, std::size_t gts) {
  if (preds != gts) {
    throw std::invalid_argument("prediction count " + std::to_string(preds) +
                                " != ground-truth count " + std::to_string(gts));
  }
}

bool kept(const FramePrediction& p, double tau) { return p.bbox && p.confidence >= tau; }

}  // namespace

double ThresholdStats::pr() const {
  return n_p == 0 ? 0.0 : overlap_sum / static_cast<double>(n_p);
}

double ThresholdStats::re() const {
  return n_g == 0 ? 1.0 : overlap_sum / static_cast<double>(n_g);
}

ThresholdStats threshold_stats(const std::vector<FramePrediction>& preds,
                               const std::vector<MaybeBox>& gts, double tau) {
  require_aligned(preds.size(), gts.size());
  ThresholdStats s;
  s.tau = tau;
  for (std::size_t t = 0; t < preds.size(); ++t) {
    const bool has_pred = kept(preds[t], tau);
    if (has_pred) ++s.n_p;
    if (gts[t]) ++s.n_g;
    if (has_pred) s.overlap_sum += overlap(preds[t].bbox, gts[t]);
  }
  return s;
}

double precision(const std::vector<FramePrediction>& preds, const std::vector<MaybeBox>& gts,
                 double tau) {
  return threshold_stats(preds, gts, tau).pr();
}

double recall(const std::vector<FramePrediction>& preds, const std::vector<MaybeBox>& gts,
              double tau) {
  return threshold_stats(preds, gts, tau).re();
}

double f_score(double pr, double re) {
  const double denom = pr + re;
  return denom > 0.0 ? 2.0 * pr * re / denom : 0.0;
}

namespace {

void fill_from_stats(EvalReport& r) {
  r.pr = r.stats.pr();
  r.re = r.stats.re();
  r.f = r.stats.f();
  r.n_p = r.stats.n_p;
  r.n_g = r.stats.n_g;
  r.sweep.clear();
  r.best.reset();
  for (const auto& s : r.sweep_stats) {
    SweepPoint p{s.tau, s.pr(), s.re(), s.f()};
    r.sweep.push_back(p);
    if (!r.best || p.f > r.best->f) r.best = p;
  }
}

}  // namespace

EvalReport evaluate_sequence(const std::vector<FramePrediction>& preds,
                             const std::vector<MaybeBox>& gts, const std::vector<double>& sweep) {
  EvalReport r;
  r.frames = preds.size();
  r.stats = threshold_stats(preds, gts, 0.0);
  for (double tau : sweep) r.sweep_stats.push_back(threshold_stats(preds, gts, tau));
  fill_from_stats(r);
  return r;
}

EvalReport evaluate_dataset(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("evaluate_dataset: no sequence reports");
  EvalReport pooled;
  bool same_sweep = true;
  for (const auto& r : reports) {
    if (r.sweep_stats.size() != reports.front().sweep_stats.size()) {
      same_sweep = false;
      break;
    }
    for (std::size_t i = 0; i < r.sweep_stats.size(); ++i) {
      if (r.sweep_stats[i].tau != reports.front().sweep_stats[i].tau) same_sweep = false;
    }
  }
  if (same_sweep) {
    pooled.sweep_stats = reports.front().sweep_stats;
    for (auto& s : pooled.sweep_stats) s = ThresholdStats{s.tau, 0.0, 0, 0};
  }
  for (const auto& r : reports) {
    pooled.frames += r.frames;
    pooled.stats.overlap_sum += r.stats.overlap_sum;
    pooled.stats.n_p += r.stats.n_p;
    pooled.stats.n_g += r.stats.n_g;
    if (!same_sweep) continue;
    for (std::size_t i = 0; i < r.sweep_stats.size(); ++i) {
      pooled.sweep_stats[i].overlap_sum += r.sweep_stats[i].overlap_sum;
      pooled.sweep_stats[i].n_p += r.sweep_stats[i].n_p;
      pooled.sweep_stats[i].n_g += r.sweep_stats[i].n_g;
    }
  }
  fill_from_stats(pooled);
  return pooled;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["pr"] = pr;
  j["re"] = re;
  j["f"] = f;
  j["n_p"] = n_p;
  j["n_g"] = n_g;
  j["frames"] = frames;
  auto curve = nlohmann::ordered_json::array();
  for (const auto& p : sweep) {
    curve.push_back({{"tau", p.tau}, {"pr", p.pr}, {"re", p.re}, {"f", p.f}});
  }
  j["sweep"] = curve;
  if (best) j["max_f"] = {{"tau", best->tau}, {"pr", best->pr}, {"re", best->re}, {"f", best->f}};
  return j.dump(2);
}

namespace {

double parse_double(std::string_view text, const std::string& context) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw FormatError(context + ": invalid number '" + std::string(text) + "'");
  }
  return v;
}

std::vector<double> split_numbers(std::string_view line, const std::string& context) {
  std::vector<double> values;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    values.push_back(parse_double(line.substr(start, comma - start), context));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return values;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < content.size()) {
    auto nl = content.find('\n', start);
    if (nl == std::string::npos) nl = content.size();
    std::string line = content.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = nl + 1;
  }
  return lines;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t") == std::string::npos;
}

BBox make_box(const std::vector<double>& v, const std::string& context) {
  BBox b{v[0], v[1], v[2], v[3]};
  if (!(b.w > 0.0) || !(b.h > 0.0)) throw FormatError(context + ": box must have w > 0, h > 0");
  return b;
}

std::string line_context(const std::filesystem::path& path, std::size_t index) {
  return path.string() + ":" + std::to_string(index + 1);
}

}  // namespace

std::vector<double> parse_sweep(std::string_view text) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    parts.push_back(parse_double(text.substr(start, colon - start), "sweep"));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  if (parts.size() != 3) throw FormatError("sweep must be lo:hi:step");
  const double lo = parts[0], hi = parts[1], step = parts[2];
  if (!(step > 0.0) || hi < lo) throw FormatError("sweep requires step > 0 and hi >= lo");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> taus(count);
  // Snap to a 1e-12 grid so 0:1:0.05 yields 0.7 rather than 0.7000000000000001.
  for (std::size_t i = 0; i < count; ++i) {
    taus[i] = std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12;
  }
  return taus;
}

std::vector<MaybeBox> read_groundtruth(const std::filesystem::path& path) {
  std::vector<MaybeBox> gts;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) {
      gts.emplace_back(std::nullopt);
      continue;
    }
    const auto ctx = line_context(path, i);
    const auto v = split_numbers(lines[i], ctx);
    if (v.size() != 4) throw FormatError(ctx + ": expected x,y,w,h");
    gts.emplace_back(make_box(v, ctx));
  }
  return gts;
}

void write_groundtruth(const std::filesystem::path& path, const std::vector<MaybeBox>& gts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  char buf[160];
  for (const auto& g : gts) {
    if (g) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f", g->x, g->y, g->w, g->h);
      out << buf;
    }
    out << '\n';
  }
}

std::vector<FramePrediction> read_predictions(const std::filesystem::path& path) {
  std::vector<FramePrediction> preds;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) {
      preds.push_back({std::nullopt, 0.0});
      continue;
    }
    const auto ctx = line_context(path, i);
    const auto v = split_numbers(lines[i], ctx);
    if (v.size() != 5) throw FormatError(ctx + ": expected x,y,w,h,confidence");
    if (v[4] < 0.0 || v[4] > 1.0) throw FormatError(ctx + ": confidence outside [0,1]");
    preds.push_back({make_box(v, ctx), v[4]});
  }
  return preds;
}

std::string format_predictions(const std::vector<FramePrediction>& preds) {
  std::string out;
  char buf[200];
  for (const auto& p : preds) {
    if (p.bbox) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f", p.bbox->x, p.bbox->y, p.bbox->w,
                    p.bbox->h, p.confidence);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<FramePrediction>& preds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << format_predictions(preds);
}

}  // namespace hmad
