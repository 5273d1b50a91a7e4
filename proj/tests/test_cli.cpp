#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hmad/cli.hpp"
#include "json.hpp"

using namespace hmad;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "hmad");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("hmad_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"track"}).code == kExitUsage);
  CHECK(run({"eval", "only-one"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("synth-gen is reproducible") {
  const auto dir = scratch("synth");
  const auto a = run({"synth-gen", "--challenge", "occlusion", "--length", "12", "--seed", "5",
                      "--out", (dir / "a").string()});
  const auto b = run({"synth-gen", "--challenge", "occlusion", "--length", "12", "--seed", "5",
                      "--out", (dir / "b").string()});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    const auto name = entry.path().filename();
    CHECK(slurp(entry.path()) == slurp(dir / "b" / name));
    ++files;
  }
  CHECK(files == 2 * 12 + 2);
  CHECK(count_lines(slurp(dir / "a" / "groundtruth.txt")) == 12);
}

TEST_CASE("synth-gen rejects an unknown challenge") {
  const auto dir = scratch("badchallenge");
  const auto r = run({"synth-gen", "--challenge", "foggy", "--out", dir.string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("foggy") != std::string::npos);
}

TEST_CASE("synth-gen reads a recipe and a suite manifest") {
  const auto dir = scratch("recipe");
  write(dir / "recipe.txt", "challenge=dim_light\nlength=3\nillumination=0.1\nseed=4\n");
  const auto r = run(
      {"synth-gen", "--config", (dir / "recipe.txt").string(), "--out", (dir / "seq").string()});
  REQUIRE(r.code == kExitOk);
  CHECK(slurp(dir / "seq" / "spec.txt").find("illumination=0.1") != std::string::npos);
  CHECK(count_lines(slurp(dir / "seq" / "groundtruth.txt")) == 3);

  write(dir / "bad.txt", "illumination=2\n");
  CHECK(run({"synth-gen", "--config", (dir / "bad.txt").string(), "--out", (dir / "bad").string()})
            .code == kExitUsage);

  write(dir / "suite.txt", "one plain 1\ntwo fast_motion 2\n");
  const auto s = run({"synth-gen", "--suite", (dir / "suite.txt").string(), "--length", "4",
                      "--out", (dir / "suite").string()});
  REQUIRE(s.code == kExitOk);
  CHECK(fs::exists(dir / "suite" / "one" / "groundtruth.txt"));
  CHECK(fs::exists(dir / "suite" / "two" / "frame_000003.pgm"));
}

TEST_CASE("track writes one prediction per frame and reports fps") {
  const auto dir = scratch("track");
  REQUIRE(run({"synth-gen", "--challenge", "plain", "--length", "10", "--seed", "3", "--out",
               (dir / "seq").string()})
              .code == kExitOk);
  const auto r = run({"track", (dir / "seq").string(), "--out", (dir / "pred.txt").string()});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("fps=") != std::string::npos);
  CHECK(r.out.find("frames=10") != std::string::npos);
  const auto preds = slurp(dir / "pred.txt");
  CHECK(count_lines(preds) == 10);
  CHECK(preds.substr(0, preds.find('\n')) ==
        slurp(dir / "seq" / "groundtruth.txt").substr(0, preds.find('\n') - 9) + ",1.000000");

  const auto again = run({"track", (dir / "seq").string(), "--out", (dir / "pred2.txt").string()});
  REQUIRE(again.code == kExitOk);
  CHECK(slurp(dir / "pred2.txt") == preds);
}

TEST_CASE("track in rgb_only mode on dim light") {
  const auto dir = scratch("track_dim");
  REQUIRE(run({"synth-gen", "--challenge", "dim_light", "--length", "6", "--out",
               (dir / "seq").string()})
              .code == kExitOk);
  const auto r = run({"track", (dir / "seq").string(), "--mode", "rgb_only", "--out",
                      (dir / "pred.txt").string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("mode=rgb_only") != std::string::npos);
  CHECK(count_lines(slurp(dir / "pred.txt")) == 6);
}

TEST_CASE("track without an initial box fails with exit 1") {
  const auto dir = scratch("track_noinit");
  REQUIRE(
      run({"synth-gen", "--challenge", "plain", "--length", "4", "--out", (dir / "seq").string()})
          .code == kExitOk);
  auto gt = slurp(dir / "seq" / "groundtruth.txt");
  gt = "\n" + gt.substr(gt.find('\n') + 1);
  write(dir / "seq" / "groundtruth.txt", gt);
  const auto r = run({"track", (dir / "seq").string(), "--out", (dir / "pred.txt").string()});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("frame 0") != std::string::npos);

  const auto missing = run({"track", (dir / "nowhere").string(), "--out", (dir / "p").string()});
  CHECK(missing.code == kExitFailure);
}

TEST_CASE("config precedence: flags over file over defaults") {
  const auto dir = scratch("precedence");
  REQUIRE(
      run({"synth-gen", "--challenge", "plain", "--length", "3", "--out", (dir / "seq").string()})
          .code == kExitOk);
  write(dir / "cfg.txt", "# tracker\nmode=no_attention\nlambda=0.02\n");
  const auto file_only = run({"track", (dir / "seq").string(), "--config",
                              (dir / "cfg.txt").string(), "--out", (dir / "p.txt").string()});
  REQUIRE(file_only.code == kExitOk);
  CHECK(file_only.out.find("mode=no_attention") != std::string::npos);
  const auto flag_wins =
      run({"track", (dir / "seq").string(), "--config", (dir / "cfg.txt").string(), "--mode",
           "baseline_add", "--out", (dir / "p.txt").string()});
  REQUIRE(flag_wins.code == kExitOk);
  CHECK(flag_wins.out.find("mode=baseline_add") != std::string::npos);
  const auto defaults = run({"track", (dir / "seq").string(), "--out", (dir / "p.txt").string()});
  CHECK(defaults.out.find("mode=full") != std::string::npos);

  TrackerConfig c;
  apply_config_text(c, "seed=9\nmemory_capacity=20\nnormalize_branches=false\n");
  CHECK(c.seed == 9);
  CHECK(c.memory_capacity == 20);
  CHECK_FALSE(c.normalize_branches);
  CHECK(c.update_period == 20);
}

TEST_CASE("bad config entries are usage errors") {
  const auto dir = scratch("badcfg");
  REQUIRE(
      run({"synth-gen", "--challenge", "plain", "--length", "3", "--out", (dir / "seq").string()})
          .code == kExitOk);
  write(dir / "cfg.txt", "speed=11\n");
  const auto r = run({"track", (dir / "seq").string(), "--config", (dir / "cfg.txt").string(),
                      "--out", (dir / "p.txt").string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("speed") != std::string::npos);
  CHECK(run({"track", (dir / "seq").string(), "--mode", "fancy", "--out", (dir / "p.txt").string()})
            .code == kExitUsage);
  CHECK(run({"track", (dir / "seq").string(), "--config", (dir / "none.txt").string(), "--out",
             (dir / "p.txt").string()})
            .code == kExitUsage);
  TrackerConfig c;
  CHECK_THROWS_AS(apply_config_text(c, "lambda=abc\n"), UsageError);
  CHECK_THROWS_AS(apply_config_text(c, "no equals sign\n"), UsageError);
}

TEST_CASE("eval scores predictions") {
  const auto dir = scratch("eval");
  write(dir / "gt.txt", "0,0,10,10\n20,20,10,10\n");
  write(dir / "perfect.txt", "0,0,10,10,0.9\n20,20,10,10,0.8\n");
  const auto perfect = run({"eval", (dir / "perfect.txt").string(), (dir / "gt.txt").string()});
  REQUIRE(perfect.code == kExitOk);
  const auto j = nlohmann::json::parse(perfect.out);
  CHECK(j["pr"].get<double>() == 1.0);
  CHECK(j["re"].get<double>() == 1.0);
  CHECK(j["f"].get<double>() == 1.0);
  CHECK(j["n_p"].get<int>() == 2);
  CHECK(j["n_g"].get<int>() == 2);
  CHECK(j["sweep"].empty());

  // Half-overlap on frame 0, nothing reported on frame 1: Pr 0.5, Re 0.25, F 1/3.
  write(dir / "half.txt", "0,5,10,10,0.9\n\n");
  write(dir / "gt2.txt", "0,0,10,20\n20,20,10,10\n");
  const auto half = run({"eval", (dir / "half.txt").string(), (dir / "gt2.txt").string(), "--sweep",
                         "0:1:0.05", "--out", (dir / "report.json").string()});
  REQUIRE(half.code == kExitOk);
  const auto h = nlohmann::json::parse(half.out);
  CHECK(h["pr"].get<double>() == doctest::Approx(0.5));
  CHECK(h["re"].get<double>() == doctest::Approx(0.25));
  CHECK(h["f"].get<double>() == doctest::Approx(1.0 / 3.0));
  CHECK(h["sweep"].size() == 21);
  CHECK(nlohmann::json::parse(slurp(dir / "report.json")) == h);
}

TEST_CASE("eval errors") {
  const auto dir = scratch("eval_err");
  std::string gt;
  for (int i = 0; i < 40; ++i) gt += "1,1,5,5\n";
  write(dir / "gt.txt", gt);
  write(dir / "short.txt", "1,1,5,5,1\n1,1,5,5,1\n1,1,5,5,1\n");
  const auto r = run({"eval", (dir / "short.txt").string(), (dir / "gt.txt").string()});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("3") != std::string::npos);
  CHECK(r.err.find("40") != std::string::npos);
  write(dir / "bad.txt", "1,1,5,5,1.5\n");
  CHECK(run({"eval", (dir / "bad.txt").string(), (dir / "gt.txt").string()}).code == kExitFailure);
  CHECK(run({"eval", (dir / "short.txt").string(), (dir / "gt.txt").string(), "--sweep", "1:0:0.1"})
            .code == kExitUsage);
}

TEST_CASE("ablate over a small dataset") {
  const auto dir = scratch("ablate");
  fs::create_directories(dir / "empty");
  const auto empty = run({"ablate", (dir / "empty").string()});
  CHECK(empty.code == kExitFailure);

  write(dir / "suite.txt", "a plain 1\nb dim_light 2\n");
  REQUIRE(run({"synth-gen", "--suite", (dir / "suite.txt").string(), "--length", "6", "--out",
               (dir / "data").string()})
              .code == kExitOk);
  const auto r = run({"ablate", (dir / "data").string(), "--out", (dir / "table.txt").string()});
  REQUIRE(r.code == kExitOk);
  for (const char* label : {"baseline", "w/o distribution", "w/o attention", "HMAD", "Pr", "Re",
                            "F-score", "dim_light", "2 sequences"}) {
    CAPTURE(label);
    CHECK(r.out.find(label) != std::string::npos);
  }
  CHECK(slurp(dir / "table.txt").find("w/o attention") != std::string::npos);
}

TEST_CASE("gradcheck reports every operation") {
  const auto r = run({"gradcheck", "--eps", "1e-5"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("eps=1e-05") != std::string::npos);
  std::size_t pass = 0;
  for (std::size_t at = r.out.find("PASS "); at != std::string::npos;
       at = r.out.find("PASS ", at + 1)) {
    ++pass;
  }
  CHECK(pass == 4);
  for (const char* op : {"channel_attention", "spatial_attention", "cbam", "distribute"}) {
    CHECK(r.out.find(op) != std::string::npos);
  }
  const auto fail = run({"gradcheck", "--self-test-fail"});
  CHECK(fail.code == kExitFailure);
  CHECK(fail.out.find("FAIL") != std::string::npos);
  CHECK(run({"gradcheck", "--eps", "0"}).code == kExitUsage);
}
