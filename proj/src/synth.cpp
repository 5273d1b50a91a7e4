#include "hmad/synth.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "hmad/errors.hpp"
#include "hmad/pnm.hpp"

namespace hmad {

std::string_view challenge_name(Challenge c) {
  switch (c) {
    case Challenge::plain: return "plain";
    case Challenge::distractors: return "distractors";
    case Challenge::fast_motion: return "fast_motion";
    case Challenge::dim_light: return "dim_light";
    case Challenge::occlusion: return "occlusion";
  }
  return "unknown";
}

Challenge parse_challenge(std::string_view name) {
  for (auto c : {Challenge::plain, Challenge::distractors, Challenge::fast_motion,
                 Challenge::dim_light, Challenge::occlusion}) {
    if (challenge_name(c) == name) return c;
  }
  throw std::invalid_argument("unknown challenge: " + std::string(name));
}

namespace {

// Independent random streams so that, e.g., RGB noise never perturbs depth.
enum class Stream : std::uint64_t { layout = 1, motion, texture, rgb_noise, depth_noise };

std::mt19937_64 stream(std::uint64_t seed, Stream s) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s)};
  return std::mt19937_64(seq);
}

}  // namespace

SequenceSpec SequenceSpec::preset(Challenge challenge, std::uint64_t seed, std::size_t length) {
  SequenceSpec s;
  s.challenge = challenge;
  s.seed = seed;
  s.length = length;

  auto rng = stream(seed, Stream::layout);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  s.shape = unit(rng) < 0.5 ? TargetShape::rectangle : TargetShape::ellipse;
  s.target_w = 20 + static_cast<std::size_t>(unit(rng) * 9.0);
  s.target_h = 20 + static_cast<std::size_t>(unit(rng) * 9.0);
  const double span_x = static_cast<double>(s.width - s.target_w) - 2.0;
  const double span_y = static_cast<double>(s.height - s.target_h) - 2.0;
  s.start_x = 1.0 + std::round(span_x * (0.2 + 0.6 * unit(rng)));
  s.start_y = 1.0 + std::round(span_y * (0.2 + 0.6 * unit(rng)));
  const double heading = 2.0 * std::numbers::pi * unit(rng);
  const double speed = 0.8 + 0.8 * unit(rng);
  s.velocity_x = speed * std::cos(heading);
  s.velocity_y = speed * std::sin(heading);
  s.motion_noise = 0.15;
  s.depth_contrast = 0.4 + 0.1 * unit(rng);

  switch (challenge) {
    case Challenge::plain:
      break;
    case Challenge::distractors:
      s.distractors = 3;
      break;
    case Challenge::fast_motion:
      s.velocity_x *= 3.5;
      s.velocity_y *= 3.5;
      s.motion_noise = 1.2;
      s.max_speed = 7.0;
      break;
    case Challenge::dim_light:
      s.illumination = 0.15;
      s.noise_std = 0.05;
      break;
    case Challenge::occlusion:
      s.occluder = true;
      s.start_x = 4.0;
      s.velocity_x = 1.6 + 0.6 * unit(rng);
      s.velocity_y = 0.0;
      s.motion_noise = 0.0;
      break;
  }
  return s;
}

void SequenceSpec::validate() const {
  if (length < 1) throw SpecError("length", "must be >= 1");
  if (height < 16 || width < 16) throw SpecError("height", "image must be at least 16x16");
  if (target_w < 2 || target_w + 2 > width) throw SpecError("target_w", "does not fit the image");
  if (target_h < 2 || target_h + 2 > height) throw SpecError("target_h", "does not fit the image");
  if (start_x < 1.0 || start_x + static_cast<double>(target_w) > static_cast<double>(width) - 1.0) {
    throw SpecError("start_x", "target must start at least 1 pixel inside the image");
  }
  if (start_y < 1.0 ||
      start_y + static_cast<double>(target_h) > static_cast<double>(height) - 1.0) {
    throw SpecError("start_y", "target must start at least 1 pixel inside the image");
  }
  if (!(illumination > 0.0 && illumination <= 1.0)) {
    throw SpecError("illumination", "must be in (0, 1]");
  }
  if (!(noise_std >= 0.0)) throw SpecError("noise_std", "must be non-negative");
  if (!(depth_noise_std >= 0.0)) throw SpecError("depth_noise_std", "must be non-negative");
  if (!(motion_noise >= 0.0)) throw SpecError("motion_noise", "must be non-negative");
  if (!(max_speed > 0.0)) throw SpecError("max_speed", "must be positive");
  if (!(background_depth >= 0.0 && background_depth + depth_contrast <= 1.0)) {
    throw SpecError("depth_contrast", "target depth must stay within [0, 1]");
  }
  if (!(depth_contrast > 0.0)) throw SpecError("depth_contrast", "must be positive");
  if (distractors > 0 && !(distractor_depth_gap > 0.0)) {
    throw SpecError("distractor_depth_gap", "must be positive");
  }
  if (distractors > 6) throw SpecError("distractors", "at most 6 supported");
}

std::string SequenceSpec::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "challenge=" << challenge_name(challenge) << '\n'
     << "length=" << length << '\n'
     << "height=" << height << '\n'
     << "width=" << width << '\n'
     << "shape=" << (shape == TargetShape::rectangle ? "rectangle" : "ellipse") << '\n'
     << "target_w=" << target_w << '\n'
     << "target_h=" << target_h << '\n'
     << "start_x=" << start_x << '\n'
     << "start_y=" << start_y << '\n'
     << "velocity_x=" << velocity_x << '\n'
     << "velocity_y=" << velocity_y << '\n'
     << "motion_noise=" << motion_noise << '\n'
     << "max_speed=" << max_speed << '\n'
     << "distractors=" << distractors << '\n'
     << "distractor_depth_gap=" << distractor_depth_gap << '\n'
     << "occluder=" << (occluder ? 1 : 0) << '\n'
     << "illumination=" << illumination << '\n'
     << "noise_std=" << noise_std << '\n'
     << "depth_noise_std=" << depth_noise_std << '\n'
     << "background_depth=" << background_depth << '\n'
     << "depth_contrast=" << depth_contrast << '\n'
     << "seed=" << seed << '\n';
  return os.str();
}

SequenceSpec SequenceSpec::from_text(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw SpecError(std::string(line), "expected key=value");
    }
    kv[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }

  SequenceSpec s;
  auto number = [&](const char* key, auto& field) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    using T = std::remove_reference_t<decltype(field)>;
    T v{};
    const auto& str = it->second;
    const auto [ptr, ec] = std::from_chars(str.data(), str.data() + str.size(), v);
    if (ec != std::errc() || ptr != str.data() + str.size()) {
      throw SpecError(key, "invalid value '" + str + "'");
    }
    field = v;
    kv.erase(it);
  };
  if (auto it = kv.find("challenge"); it != kv.end()) {
    try {
      s.challenge = parse_challenge(it->second);
    } catch (const std::invalid_argument&) {
      throw SpecError("challenge", "unknown value '" + it->second + "'");
    }
    kv.erase(it);
  }
  if (auto it = kv.find("shape"); it != kv.end()) {
    if (it->second == "rectangle") {
      s.shape = TargetShape::rectangle;
    } else if (it->second == "ellipse") {
      s.shape = TargetShape::ellipse;
    } else {
      throw SpecError("shape", "unknown value '" + it->second + "'");
    }
    kv.erase(it);
  }
  int occluder = s.occluder ? 1 : 0;
  number("length", s.length);
  number("height", s.height);
  number("width", s.width);
  number("target_w", s.target_w);
  number("target_h", s.target_h);
  number("start_x", s.start_x);
  number("start_y", s.start_y);
  number("velocity_x", s.velocity_x);
  number("velocity_y", s.velocity_y);
  number("motion_noise", s.motion_noise);
  number("max_speed", s.max_speed);
  number("distractors", s.distractors);
  number("distractor_depth_gap", s.distractor_depth_gap);
  number("occluder", occluder);
  number("illumination", s.illumination);
  number("noise_std", s.noise_std);
  number("depth_noise_std", s.depth_noise_std);
  number("background_depth", s.background_depth);
  number("depth_contrast", s.depth_contrast);
  number("seed", s.seed);
  s.occluder = occluder != 0;
  if (!kv.empty()) throw SpecError(kv.begin()->first, "unknown key");
  return s;
}

namespace {

struct Color {
  double r, g, b;
};

struct Wave {
  double fx, fy, phase, amplitude;
};

// Static per-sequence appearance.
struct Appearance {
  Color base;
  std::array<std::vector<Wave>, 3> background;
  Color target_a, target_b;
  double target_cell;     // checker cell size, pixels
  double stripe_period;   // diagonal stripe period, pixels
  Color occluder_color;

  static Appearance seeded(std::uint64_t seed) {
    auto rng = stream(seed, Stream::texture);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Appearance a;
    a.base = {0.35 + 0.3 * u(rng), 0.35 + 0.3 * u(rng), 0.35 + 0.3 * u(rng)};
    for (auto& channel : a.background) {
      for (int k = 0; k < 4; ++k) {
        channel.push_back({0.04 + 0.25 * u(rng), 0.04 + 0.25 * u(rng),
                           2.0 * std::numbers::pi * u(rng), 0.05 + 0.05 * u(rng)});
      }
    }
    auto vivid = [&] {
      Color c{u(rng), u(rng), u(rng)};
      return c;
    };
    a.target_a = vivid();
    a.target_b = vivid();
    // Keep the two target colors clearly apart.
    if (std::abs(a.target_a.r - a.target_b.r) + std::abs(a.target_a.g - a.target_b.g) +
            std::abs(a.target_a.b - a.target_b.b) <
        0.9) {
      a.target_b = {1.0 - a.target_a.r, 1.0 - a.target_a.g, 1.0 - a.target_a.b};
    }
    a.target_cell = 4.0 + std::floor(3.0 * u(rng));
    a.stripe_period = 7.0 + 4.0 * u(rng);
    const double grey = 0.25 + 0.2 * u(rng);
    a.occluder_color = {grey, grey, grey};
    return a;
  }

  Color background_at(std::size_t y, std::size_t x) const {
    std::array<double, 3> v{base.r, base.g, base.b};
    for (std::size_t c = 0; c < 3; ++c) {
      for (const auto& w : background[c]) {
        v[c] += w.amplitude * std::sin(w.fx * static_cast<double>(x) +
                                       w.fy * static_cast<double>(y) + w.phase);
      }
    }
    return {v[0], v[1], v[2]};
  }

  // Object texture in object-local pixel coordinates.
  Color object_at(std::size_t ly, std::size_t lx) const {
    const auto cy = static_cast<std::size_t>(static_cast<double>(ly) / target_cell);
    const auto cx = static_cast<std::size_t>(static_cast<double>(lx) / target_cell);
    Color c = ((cy + cx) % 2 == 0) ? target_a : target_b;
    const double stripe = std::fmod(static_cast<double>(lx + ly), stripe_period);
    if (stripe < 1.5) c = {0.5 * c.r, 0.5 * c.g, 0.5 * c.b};
    return c;
  }
};

struct Mover {
  double x, y, vx, vy;
};

struct ObjectPlacement {
  long x0, y0;  // integer top-left
};

bool inside_shape(TargetShape shape, std::size_t ly, std::size_t lx, std::size_t w,
                  std::size_t h) {
  if (shape == TargetShape::rectangle) return true;
  const double dy = (static_cast<double>(ly) + 0.5 - static_cast<double>(h) / 2.0) /
                    (static_cast<double>(h) / 2.0);
  const double dx = (static_cast<double>(lx) + 0.5 - static_cast<double>(w) / 2.0) /
                    (static_cast<double>(w) / 2.0);
  return dx * dx + dy * dy <= 1.0;
}

// Advances one object and reflects it off a 1-pixel inner margin.
void step(Mover& m, double w, double h, double width, double height, double noise,
          double max_speed, std::mt19937_64& rng) {
  std::normal_distribution<double> kick(0.0, 1.0);
  const double kx = kick(rng);
  const double ky = kick(rng);
  m.vx += noise * kx;
  m.vy += noise * ky;
  const double speed = std::hypot(m.vx, m.vy);
  if (speed > max_speed) {
    m.vx *= max_speed / speed;
    m.vy *= max_speed / speed;
  }
  m.x += m.vx;
  m.y += m.vy;
  const double max_x = width - 1.0 - w;
  const double max_y = height - 1.0 - h;
  if (m.x < 1.0) {
    m.x = 2.0 - m.x;
    m.vx = std::abs(m.vx);
  }
  if (m.x > max_x) {
    m.x = 2.0 * max_x - m.x;
    m.vx = -std::abs(m.vx);
  }
  if (m.y < 1.0) {
    m.y = 2.0 - m.y;
    m.vy = std::abs(m.vy);
  }
  if (m.y > max_y) {
    m.y = 2.0 * max_y - m.y;
    m.vy = -std::abs(m.vy);
  }
  m.x = std::clamp(m.x, 1.0, max_x);
  m.y = std::clamp(m.y, 1.0, max_y);
}

bool boxes_apart(double ax, double ay, double bx, double by, double w, double h, double gap) {
  return ax + w + gap <= bx || bx + w + gap <= ax || ay + h + gap <= by || by + h + gap <= ay;
}

}  // namespace

Sequence generate_sequence(const SequenceSpec& spec) {
  spec.validate();
  const auto H = spec.height;
  const auto W = spec.width;
  const double tw = static_cast<double>(spec.target_w);
  const double th = static_cast<double>(spec.target_h);
  const auto appearance = Appearance::seeded(spec.seed);

  auto motion_rng = stream(spec.seed, Stream::motion);
  auto rgb_noise_rng = stream(spec.seed, Stream::rgb_noise);
  auto depth_noise_rng = stream(spec.seed, Stream::depth_noise);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Mover target{spec.start_x, spec.start_y, spec.velocity_x, spec.velocity_y};

  // Distractors start clear of the target and of each other.
  std::vector<Mover> distractors;
  for (std::size_t k = 0; k < spec.distractors; ++k) {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const double x = 1.0 + std::round(unit(motion_rng) * (static_cast<double>(W) - tw - 2.0));
      const double y = 1.0 + std::round(unit(motion_rng) * (static_cast<double>(H) - th - 2.0));
      bool ok = boxes_apart(x, y, std::round(target.x), std::round(target.y), tw, th, 4.0);
      for (const auto& d : distractors) ok = ok && boxes_apart(x, y, d.x, d.y, tw, th, 4.0);
      if (ok) {
        const double heading = 2.0 * std::numbers::pi * unit(motion_rng);
        distractors.push_back({x, y, 0.4 * std::cos(heading), 0.4 * std::sin(heading)});
        break;
      }
    }
    if (distractors.size() != k + 1) {
      throw SpecError("distractors", "cannot place " + std::to_string(spec.distractors) +
                                         " distractors without overlap");
    }
  }

  const double target_depth = spec.background_depth + spec.depth_contrast;
  const double distractor_depth = std::max(0.0, target_depth - spec.distractor_depth_gap);
  const double occluder_depth = std::min(1.0, target_depth + 0.15);
  const long occluder_w = static_cast<long>(spec.target_w) + 8;
  const long occluder_x0 = static_cast<long>(W) / 2 - occluder_w / 2;

  Sequence seq;
  seq.spec = spec;
  seq.frames.reserve(spec.length);

  for (std::size_t t = 0; t < spec.length; ++t) {
    if (t > 0) {
      step(target, tw, th, static_cast<double>(W), static_cast<double>(H), spec.motion_noise,
           spec.max_speed, motion_rng);
      for (auto& d : distractors) {
        step(d, tw, th, static_cast<double>(W), static_cast<double>(H), 0.05, 0.6, motion_rng);
      }
    }

    // Painter's order: background, distractors (farther), target, occluder.
    std::vector<double> clean(3 * H * W);
    std::vector<double> depth(H * W);
    std::vector<char> target_mask(H * W, 0);
    for (std::size_t y = 0; y < H; ++y) {
      const double floor_depth =
          spec.background_depth * (1.0 + 0.3 * static_cast<double>(y) / static_cast<double>(H));
      for (std::size_t x = 0; x < W; ++x) {
        const auto c = appearance.background_at(y, x);
        clean[0 * H * W + y * W + x] = c.r;
        clean[1 * H * W + y * W + x] = c.g;
        clean[2 * H * W + y * W + x] = c.b;
        depth[y * W + x] = floor_depth;
      }
    }
    auto paint_object = [&](double ox, double oy, double d, bool is_target) {
      const long x0 = std::lround(ox);
      const long y0 = std::lround(oy);
      for (std::size_t ly = 0; ly < spec.target_h; ++ly) {
        for (std::size_t lx = 0; lx < spec.target_w; ++lx) {
          const long y = y0 + static_cast<long>(ly);
          const long x = x0 + static_cast<long>(lx);
          if (y < 0 || x < 0 || y >= static_cast<long>(H) || x >= static_cast<long>(W)) continue;
          if (!inside_shape(spec.shape, ly, lx, spec.target_w, spec.target_h)) continue;
          const auto i = static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x);
          const auto c = appearance.object_at(ly, lx);
          clean[i] = c.r;
          clean[H * W + i] = c.g;
          clean[2 * H * W + i] = c.b;
          depth[i] = d;
          if (is_target) target_mask[i] = 1;
        }
      }
    };
    for (const auto& d : distractors) paint_object(d.x, d.y, distractor_depth, false);
    paint_object(target.x, target.y, target_depth, true);
    if (spec.occluder) {
      for (std::size_t y = 0; y < H; ++y) {
        for (long x = occluder_x0; x < occluder_x0 + occluder_w; ++x) {
          if (x < 0 || x >= static_cast<long>(W)) continue;
          const auto i = y * W + static_cast<std::size_t>(x);
          const double shade = ((y / 6) % 2 == 0) ? 1.0 : 0.8;
          clean[i] = appearance.occluder_color.r * shade;
          clean[H * W + i] = appearance.occluder_color.g * shade;
          clean[2 * H * W + i] = appearance.occluder_color.b * shade;
          depth[i] = occluder_depth;
          target_mask[i] = 0;
        }
      }
    }

    // Ground truth: the rendered target box, or the tight box of its visible
    // pixels when partly occluded; absent below a quarter of its area.
    MaybeBox gt;
    std::size_t visible = 0, full = 0;
    long min_x = static_cast<long>(W), min_y = static_cast<long>(H), max_x = -1, max_y = -1;
    const long tx0 = std::lround(target.x);
    const long ty0 = std::lround(target.y);
    for (std::size_t ly = 0; ly < spec.target_h; ++ly) {
      for (std::size_t lx = 0; lx < spec.target_w; ++lx) {
        if (!inside_shape(spec.shape, ly, lx, spec.target_w, spec.target_h)) continue;
        ++full;
        const long y = ty0 + static_cast<long>(ly);
        const long x = tx0 + static_cast<long>(lx);
        if (!target_mask[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)]) continue;
        ++visible;
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
    }
    if (visible == full) {
      gt = BBox{static_cast<double>(tx0), static_cast<double>(ty0), tw, th};
    } else if (4 * visible >= full) {
      gt = BBox{static_cast<double>(min_x), static_cast<double>(min_y),
                static_cast<double>(max_x - min_x + 1), static_cast<double>(max_y - min_y + 1)};
    }

    RGBDFrame frame{Tensor({3, H, W}), Tensor({1, H, W})};
    auto rgb = frame.rgb.data();
    for (std::size_t i = 0; i < rgb.size(); ++i) {
      const double noise = spec.noise_std * gauss(rgb_noise_rng);
      rgb[i] = std::clamp(spec.illumination * std::clamp(clean[i], 0.0, 1.0) + noise, 0.0, 1.0);
    }
    auto dep = frame.depth.data();
    for (std::size_t i = 0; i < dep.size(); ++i) {
      const double noise = spec.depth_noise_std * gauss(depth_noise_rng);
      dep[i] = std::clamp(depth[i] + noise, 0.0, 1.0);
    }
    seq.frames.push_back(std::move(frame));
    seq.groundtruth.push_back(gt);
  }
  return seq;
}

RGBDFrame quantize(const RGBDFrame& frame) {
  RGBDFrame q = frame;
  for (auto& v : q.rgb.data()) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  for (auto& v : q.depth.data()) v = std::round(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0;
  return q;
}

std::filesystem::path rgb_frame_path(const std::filesystem::path& directory, std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%06zu.ppm", index);
  return directory / name;
}

std::filesystem::path depth_frame_path(const std::filesystem::path& directory,
                                       std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%06zu.pgm", index);
  return directory / name;
}

void write_sequence(const Sequence& sequence, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  for (std::size_t t = 0; t < sequence.frames.size(); ++t) {
    const auto& f = sequence.frames[t];
    const std::size_t H = f.rgb.height(), W = f.rgb.width();
    PnmImage rgb{W, H, 3, 255, std::vector<std::uint16_t>(3 * H * W)};
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          rgb.samples[(y * W + x) * 3 + c] = static_cast<std::uint16_t>(
              std::lround(std::clamp(f.rgb.at(c, y, x), 0.0, 1.0) * 255.0));
        }
      }
    }
    write_pnm(rgb_frame_path(directory, t), rgb);
    PnmImage depth{W, H, 1, 65535, std::vector<std::uint16_t>(H * W)};
    for (std::size_t i = 0; i < H * W; ++i) {
      depth.samples[i] =
          static_cast<std::uint16_t>(std::lround(std::clamp(f.depth[i], 0.0, 1.0) * 65535.0));
    }
    write_pnm(depth_frame_path(directory, t), depth);
  }
  write_groundtruth(directory / "groundtruth.txt", sequence.groundtruth);
  std::ofstream spec(directory / "spec.txt", std::ios::binary);
  if (!spec) throw FormatError("cannot write " + (directory / "spec.txt").string());
  spec << sequence.spec.to_text();
}

RGBDFrame read_frame(const std::filesystem::path& directory, std::size_t index) {
  const auto rgb_path = rgb_frame_path(directory, index);
  const auto depth_path = depth_frame_path(directory, index);
  if (!std::filesystem::exists(rgb_path)) {
    throw FormatError("frame " + std::to_string(index) + ": missing RGB file " +
                      rgb_path.string());
  }
  if (!std::filesystem::exists(depth_path)) {
    throw FormatError("frame " + std::to_string(index) + ": missing depth file " +
                      depth_path.string());
  }
  const auto rgb = read_pnm(rgb_path);
  const auto depth = read_pnm(depth_path);
  if (rgb.channels != 3 || depth.channels != 1) {
    throw FormatError("frame " + std::to_string(index) + ": expected P6 color and P5 depth");
  }
  if (rgb.width != depth.width || rgb.height != depth.height) {
    throw FormatError("frame " + std::to_string(index) + ": RGB and depth extents differ");
  }
  const std::size_t H = rgb.height, W = rgb.width;
  RGBDFrame f{Tensor({3, H, W}), Tensor({1, H, W})};
  const double rgb_max = rgb.maxval;
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        f.rgb.at(c, y, x) = rgb.samples[(y * W + x) * 3 + c] / rgb_max;
      }
    }
  }
  const double depth_max = depth.maxval;
  for (std::size_t i = 0; i < H * W; ++i) f.depth[i] = depth.samples[i] / depth_max;
  return f;
}

Sequence read_sequence(const std::filesystem::path& directory) {
  if (!std::filesystem::is_directory(directory)) {
    throw FormatError("not a sequence directory: " + directory.string());
  }
  Sequence seq;
  seq.groundtruth = read_groundtruth(directory / "groundtruth.txt");
  const auto spec_path = directory / "spec.txt";
  if (std::filesystem::exists(spec_path)) {
    std::ifstream in(spec_path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    seq.spec = SequenceSpec::from_text(buf.str());
  }
  std::size_t count = 0;
  while (std::filesystem::exists(rgb_frame_path(directory, count))) ++count;
  if (count != seq.groundtruth.size()) {
    throw FormatError(directory.string() + ": " + std::to_string(count) + " frames but " +
                      std::to_string(seq.groundtruth.size()) + " ground-truth lines");
  }
  seq.frames.reserve(count);
  for (std::size_t t = 0; t < count; ++t) seq.frames.push_back(read_frame(directory, t));
  return seq;
}

std::vector<SuiteEntry> read_suite_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open suite manifest " + path.string());
  std::vector<SuiteEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ls(line);
    std::string name, challenge;
    std::uint64_t seed = 0;
    if (!(ls >> name >> challenge >> seed)) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 'name challenge seed'");
    }
    try {
      entries.push_back({name, parse_challenge(challenge), seed});
    } catch (const std::invalid_argument& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return entries;
}

}  // namespace hmad
