#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "hmad/errors.hpp"
#include "hmad/pnm.hpp"
#include "hmad/synth.hpp"

using namespace hmad;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("hmad_synth_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double variance(std::span<const double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

struct Component {
  long min_x, min_y, max_x, max_y;
  std::size_t pixels;
};

// 4-connected components of pixels where depth == level exactly.
std::vector<Component> components_at(const Tensor& depth, double level) {
  const long H = static_cast<long>(depth.height()), W = static_cast<long>(depth.width());
  std::vector<char> seen(depth.size(), 0);
  std::vector<Component> out;
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      const auto i = static_cast<std::size_t>(y * W + x);
      if (seen[i] || depth[i] != level) continue;
      Component c{x, y, x, y, 0};
      std::vector<std::pair<long, long>> stack{{y, x}};
      seen[i] = 1;
      while (!stack.empty()) {
        const auto [cy, cx] = stack.back();
        stack.pop_back();
        ++c.pixels;
        c.min_x = std::min(c.min_x, cx);
        c.max_x = std::max(c.max_x, cx);
        c.min_y = std::min(c.min_y, cy);
        c.max_y = std::max(c.max_y, cy);
        const long dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const long ny = cy + dy[k], nx = cx + dx[k];
          if (ny < 0 || nx < 0 || ny >= H || nx >= W) continue;
          const auto j = static_cast<std::size_t>(ny * W + nx);
          if (seen[j] || depth[j] != level) continue;
          seen[j] = 1;
          stack.push_back({ny, nx});
        }
      }
      out.push_back(c);
    }
  }
  return out;
}

// Pearson correlation of the RGB patches at two top-left corners, over
// pixels that belong to an object in both.
double patch_correlation(const RGBDFrame& f, long ax, long ay, long bx, long by, long w, long h,
                         double object_depth_a, double object_depth_b) {
  std::vector<double> a, b;
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const auto ia = static_cast<std::size_t>(ay + y), ja = static_cast<std::size_t>(ax + x);
      const auto ib = static_cast<std::size_t>(by + y), jb = static_cast<std::size_t>(bx + x);
      if (f.depth.at(0, ia, ja) != object_depth_a || f.depth.at(0, ib, jb) != object_depth_b) {
        continue;
      }
      for (std::size_t c = 0; c < 3; ++c) {
        a.push_back(f.rgb.at(c, ia, ja));
        b.push_back(f.rgb.at(c, ib, jb));
      }
    }
  }
  REQUIRE(a.size() > 30);
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("challenge names round-trip") {
  for (auto c : {Challenge::plain, Challenge::distractors, Challenge::fast_motion,
                 Challenge::dim_light, Challenge::occlusion}) {
    CHECK(parse_challenge(challenge_name(c)) == c);
  }
  CHECK_THROWS_AS(parse_challenge("foggy"), std::invalid_argument);
}

TEST_CASE("single plain frame has the initial box as ground truth") {
  auto spec = SequenceSpec::preset(Challenge::plain, 3, 1);
  const auto seq = generate_sequence(spec);
  REQUIRE(seq.frames.size() == 1);
  REQUIRE(seq.groundtruth.size() == 1);
  REQUIRE(seq.groundtruth[0]);
  CHECK(seq.groundtruth[0]->x == spec.start_x);
  CHECK(seq.groundtruth[0]->y == spec.start_y);
  CHECK(seq.groundtruth[0]->w == static_cast<double>(spec.target_w));
  CHECK(seq.groundtruth[0]->h == static_cast<double>(spec.target_h));
}

TEST_CASE("frame tensors have the expected shapes and range") {
  const auto seq = generate_sequence(SequenceSpec::preset(Challenge::fast_motion, 5, 8));
  for (const auto& f : seq.frames) {
    CHECK(f.rgb.shape() == Shape{3, 96, 96});
    CHECK(f.depth.shape() == Shape{1, 96, 96});
    for (double v : f.rgb.data()) REQUIRE((v >= 0.0 && v <= 1.0));
    for (double v : f.depth.data()) REQUIRE((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("dim light darkens RGB and leaves depth untouched") {
  auto plain = SequenceSpec::preset(Challenge::plain, 11, 6);
  auto dim = plain;
  dim.challenge = Challenge::dim_light;
  dim.illumination = 0.05;
  dim.noise_std = 0.0;
  const auto a = generate_sequence(plain);
  const auto b = generate_sequence(dim);
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    const auto rgb = b.frames[t].rgb.data();
    const double mean =
        std::accumulate(rgb.begin(), rgb.end(), 0.0) / static_cast<double>(rgb.size());
    CHECK(mean < 0.1);
    const auto da = a.frames[t].depth.data();
    const auto db = b.frames[t].depth.data();
    REQUIRE(da.size() == db.size());
    CHECK(std::equal(da.begin(), da.end(), db.begin()));
  }
}

TEST_CASE("dim light presets share depth with plain presets of the same seed") {
  const auto a = generate_sequence(SequenceSpec::preset(Challenge::plain, 21, 5));
  const auto b = generate_sequence(SequenceSpec::preset(Challenge::dim_light, 21, 5));
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    const auto da = a.frames[t].depth.data();
    const auto db = b.frames[t].depth.data();
    CHECK(std::equal(da.begin(), da.end(), db.begin()));
    CHECK(a.groundtruth[t] == b.groundtruth[t]);
  }
}

TEST_CASE("illumination scales RGB variance by its square without noise") {
  for (double illum : {0.05, 0.15, 0.5}) {
    auto plain = SequenceSpec::preset(Challenge::plain, 4, 3);
    plain.noise_std = 0.0;
    auto dim = plain;
    dim.illumination = illum;
    const auto a = generate_sequence(plain);
    const auto b = generate_sequence(dim);
    for (std::size_t t = 0; t < a.frames.size(); ++t) {
      const double vp = variance(a.frames[t].rgb.data());
      const double vd = variance(b.frames[t].rgb.data());
      CHECK(vd <= illum * illum * vp * (1.0 + 1e-12));
      CHECK(vd == doctest::Approx(illum * illum * vp).epsilon(1e-9));
    }
  }
}

TEST_CASE("distractors are look-alikes at a different depth") {
  for (std::uint64_t seed : {1u, 2u, 9u}) {
    auto spec = SequenceSpec::preset(Challenge::distractors, seed, 1);
    spec.noise_std = 0.0;
    spec.depth_noise_std = 0.0;
    const auto seq = generate_sequence(spec);
    const auto& f = seq.frames[0];
    const double target_depth = spec.background_depth + spec.depth_contrast;
    const double distractor_depth = target_depth - spec.distractor_depth_gap;
    CHECK(target_depth - distractor_depth >= 0.2 - 1e-12);

    const auto objects = components_at(f.depth, distractor_depth);
    REQUIRE(objects.size() == 3);
    const auto targets = components_at(f.depth, target_depth);
    REQUIRE(targets.size() == 1);
    const auto& gt = *seq.groundtruth[0];
    CHECK(targets[0].min_x >= static_cast<long>(gt.x));
    CHECK(targets[0].max_x < static_cast<long>(gt.x + gt.w));

    const long w = static_cast<long>(spec.target_w), h = static_cast<long>(spec.target_h);
    for (const auto& o : objects) {
      // Every distractor is a full, unclipped copy of the target silhouette.
      CHECK(o.pixels == targets[0].pixels);
      CHECK(o.max_x - o.min_x == targets[0].max_x - targets[0].min_x);
      // Object-local origin: offset the bounding box the same way as the target's.
      const long ox = o.min_x - (targets[0].min_x - static_cast<long>(gt.x));
      const long oy = o.min_y - (targets[0].min_y - static_cast<long>(gt.y));
      const double r = patch_correlation(f, static_cast<long>(gt.x), static_cast<long>(gt.y), ox,
                                         oy, w, h, target_depth, distractor_depth);
      CHECK(r > 0.95);
    }
  }
}

TEST_CASE("occlusion hides the target for part of the sequence") {
  const auto seq = generate_sequence(SequenceSpec::preset(Challenge::occlusion, 2, 60));
  std::size_t absent = 0, partial = 0;
  const double w = static_cast<double>(seq.spec.target_w);
  for (const auto& g : seq.groundtruth) {
    if (!g) {
      ++absent;
    } else if (g->w < w) {
      ++partial;
    }
  }
  CHECK(seq.groundtruth[0].has_value());
  CHECK(absent > 0);
  CHECK(partial > 0);
}

TEST_CASE("ground truth stays inside the image") {
  for (auto c : {Challenge::plain, Challenge::distractors, Challenge::fast_motion,
                 Challenge::dim_light, Challenge::occlusion}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto seq = generate_sequence(SequenceSpec::preset(c, seed, 40));
      REQUIRE(seq.groundtruth.size() == seq.frames.size());
      for (const auto& g : seq.groundtruth) {
        if (!g) continue;
        REQUIRE(g->x >= 0.0);
        REQUIRE(g->y >= 0.0);
        REQUIRE(g->x + g->w <= 96.0);
        REQUIRE(g->y + g->h <= 96.0);
      }
    }
  }
}

TEST_CASE("generation is deterministic per seed") {
  const auto spec = SequenceSpec::preset(Challenge::fast_motion, 8, 10);
  const auto a = generate_sequence(spec);
  const auto b = generate_sequence(spec);
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    const auto ra = a.frames[t].rgb.data(), rb = b.frames[t].rgb.data();
    CHECK(std::equal(ra.begin(), ra.end(), rb.begin()));
    CHECK(a.groundtruth[t] == b.groundtruth[t]);
  }
  const auto c = generate_sequence(SequenceSpec::preset(Challenge::fast_motion, 9, 10));
  const auto ra = a.frames[3].rgb.data(), rc = c.frames[3].rgb.data();
  CHECK_FALSE(std::equal(ra.begin(), ra.end(), rc.begin()));
}

TEST_CASE("spec validation names the offending field") {
  auto expect_field = [](SequenceSpec s, const std::string& field) {
    try {
      s.validate();
      FAIL("expected SpecError for " << field);
    } catch (const SpecError& e) {
      CHECK(e.field() == field);
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  SequenceSpec s;
  s.length = 0;
  expect_field(s, "length");
  s = {};
  s.illumination = 0.0;
  expect_field(s, "illumination");
  s = {};
  s.illumination = 1.5;
  expect_field(s, "illumination");
  s = {};
  s.start_x = 90.0;
  expect_field(s, "start_x");
  s = {};
  s.noise_std = -0.1;
  expect_field(s, "noise_std");
  s = {};
  s.depth_contrast = 0.95;
  expect_field(s, "depth_contrast");
  s = {};
  s.distractors = 7;
  expect_field(s, "distractors");
  s = {};
  s.target_w = 200;
  expect_field(s, "target_w");
  CHECK_THROWS_AS(generate_sequence(s), SpecError);
}

TEST_CASE("spec text round-trip and parse errors") {
  const auto spec = SequenceSpec::preset(Challenge::distractors, 12, 17);
  const auto back = SequenceSpec::from_text(spec.to_text());
  CHECK(back.to_text() == spec.to_text());
  CHECK(back.start_x == spec.start_x);
  CHECK(back.velocity_y == spec.velocity_y);
  try {
    SequenceSpec::from_text("length=abc\n");
    FAIL("expected SpecError");
  } catch (const SpecError& e) {
    CHECK(e.field() == "length");
  }
  try {
    SequenceSpec::from_text("colour=red\n");
    FAIL("expected SpecError");
  } catch (const SpecError& e) {
    CHECK(e.field() == "colour");
  }
  CHECK_THROWS_AS(SequenceSpec::from_text("challenge=foggy\n"), SpecError);
}

TEST_CASE("sequence write and read round-trip at file precision") {
  const auto dir = scratch("roundtrip");
  const auto seq = generate_sequence(SequenceSpec::preset(Challenge::distractors, 6, 4));
  write_sequence(seq, dir);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(fs::exists(dir / ("frame_00000" + std::to_string(t) + ".ppm")));
    CHECK(fs::exists(dir / ("frame_00000" + std::to_string(t) + ".pgm")));
  }
  CHECK(fs::exists(dir / "spec.txt"));

  std::ifstream gt(dir / "groundtruth.txt");
  std::size_t lines = 0;
  for (std::string line; std::getline(gt, line);) ++lines;
  CHECK(lines == 4);

  const auto back = read_sequence(dir);
  REQUIRE(back.frames.size() == 4);
  CHECK(back.spec.to_text() == seq.spec.to_text());
  for (std::size_t t = 0; t < 4; ++t) {
    const auto q = quantize(seq.frames[t]);
    const auto a = q.rgb.data(), b = back.frames[t].rgb.data();
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
    const auto da = q.depth.data(), db = back.frames[t].depth.data();
    CHECK(std::equal(da.begin(), da.end(), db.begin()));
    CHECK(back.groundtruth[t] == seq.groundtruth[t]);
  }

  const auto header = [&] {
    std::ifstream in(dir / "frame_000000.pgm", std::ios::binary);
    std::string magic, w, h, maxval;
    in >> magic >> w >> h >> maxval;
    return magic + " " + w + " " + h + " " + maxval;
  }();
  CHECK(header == "P5 96 96 65535");
}

TEST_CASE("missing depth file names the frame") {
  const auto dir = scratch("missing");
  write_sequence(generate_sequence(SequenceSpec::preset(Challenge::plain, 1, 3)), dir);
  fs::remove(dir / "frame_000002.pgm");
  try {
    read_sequence(dir);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("frame 2") != std::string::npos);
    CHECK(msg.find("frame_000002.pgm") != std::string::npos);
  }
}

TEST_CASE("ground truth and frame count must agree") {
  const auto dir = scratch("count");
  write_sequence(generate_sequence(SequenceSpec::preset(Challenge::plain, 1, 3)), dir);
  fs::remove(dir / "frame_000002.ppm");
  fs::remove(dir / "frame_000002.pgm");
  CHECK_THROWS_AS(read_sequence(dir), FormatError);
}

TEST_CASE("pnm round-trip and malformed files") {
  const auto dir = scratch("pnm");
  PnmImage img{3, 2, 1, 65535, {0, 1, 256, 65535, 4096, 7}};
  write_pnm(dir / "a.pgm", img);
  const auto back = read_pnm(dir / "a.pgm");
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  CHECK(back.samples == img.samples);

  PnmImage color{2, 1, 3, 255, {255, 0, 10, 20, 30, 40}};
  write_pnm(dir / "c.ppm", color);
  CHECK(read_pnm(dir / "c.ppm").samples == color.samples);

  auto expect = [&](const std::string& bytes, const std::string& needle) {
    write_bytes(dir / "bad.pnm", bytes);
    try {
      read_pnm(dir / "bad.pnm");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find(needle) != std::string::npos);
      CHECK(msg.find("at byte") != std::string::npos);
    }
  };
  expect("P3\n1 1\n255\n0 0 0\n", "magic");
  expect("P5\n2 2\n255\n\x01\x02", "truncated");
  expect("P5\n1 1\n70000\n\x01\x02", "maxval");
  expect("P5\n# comment\nx 1\n255\n\x01", "width");
  expect("P5\n1 1\n100\n\xff", "exceeds");
  expect("P5\n1 1\n255\n\x01\x02", "trailing");
  CHECK_THROWS_AS(read_pnm(dir / "nope.pgm"), FormatError);
}

TEST_CASE("suite manifest parsing") {
  const auto dir = scratch("manifest");
  write_bytes(dir / "ok.txt", "# pinned\nseq_a plain 3\nseq_b dim_light 4\n");
  const auto entries = read_suite_manifest(dir / "ok.txt");
  REQUIRE(entries.size() == 2);
  CHECK(entries[1].name == "seq_b");
  CHECK(entries[1].challenge == Challenge::dim_light);
  CHECK(entries[1].seed == 4);
  write_bytes(dir / "bad.txt", "seq_a foggy 3\n");
  CHECK_THROWS_AS(read_suite_manifest(dir / "bad.txt"), FormatError);
}
