#include "hmad/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "hmad/ablation.hpp"
#include "hmad/gradient_suite.hpp"
#include "hmad/param_io.hpp"
#include "hmad/synth.hpp"

namespace hmad {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError(key + ": invalid value '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "no") return false;
  throw UsageError(key + ": invalid boolean '" + text + "'");
}

FusionMode mode_from(const std::string& text) {
  try {
    return parse_mode(text);
  } catch (const std::invalid_argument&) {
    std::string names;
    for (auto m : kAllFusionModes) names += (names.empty() ? "" : ", ") + std::string(mode_name(m));
    throw UsageError("invalid mode '" + text + "' (expected one of " + names + ")");
  }
}

Challenge challenge_from(const std::string& text) {
  try {
    return parse_challenge(text);
  } catch (const std::invalid_argument&) {
    throw UsageError("invalid challenge '" + text +
                     "' (expected plain, distractors, fast_motion, dim_light or occlusion)");
  }
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Tracker flags shared by track and ablate. Unset flags leave the config
// file (or default) value in place.
struct TrackerFlags {
  std::optional<std::string> config;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> initial_samples;
  std::optional<double> add_threshold;
  std::optional<std::size_t> memory_capacity;
  std::optional<std::size_t> update_period;
  std::optional<std::size_t> init_iterations;
  std::optional<std::size_t> update_iterations;
  std::optional<double> lambda;
  std::optional<double> label_sigma;

  void attach(CLI::App& app, bool with_mode) {
    app.add_option("--config", config, "key=value tracker configuration file");
    if (with_mode) app.add_option("--mode", mode, "fusion mode (default full)");
    app.add_option("--seed", seed, "model seed (default 1)");
    app.add_option("--initial-samples", initial_samples, "K, augmented initial samples");
    app.add_option("--add-threshold", add_threshold, "confidence needed to store a sample");
    app.add_option("--memory-capacity", memory_capacity, "L, sample memory size");
    app.add_option("--update-period", update_period, "P, frames between refinements");
    app.add_option("--init-iterations", init_iterations, "refinement steps on frame 0");
    app.add_option("--update-iterations", update_iterations, "refinement steps per update");
    app.add_option("--lambda", lambda, "filter regularization");
    app.add_option("--label-sigma", label_sigma, "label width in feature cells");
  }

  TrackerConfig resolve() const {
    TrackerConfig c;
    if (config) apply_config_file(c, *config);
    if (mode) c.mode = mode_from(*mode);
    if (seed) c.seed = *seed;
    if (initial_samples) c.initial_samples = *initial_samples;
    if (add_threshold) c.add_threshold = *add_threshold;
    if (memory_capacity) c.memory_capacity = *memory_capacity;
    if (update_period) c.update_period = *update_period;
    if (init_iterations) c.init_iterations = *init_iterations;
    if (update_iterations) c.update_iterations = *update_iterations;
    if (lambda) c.lambda = *lambda;
    if (label_sigma) c.label_sigma = *label_sigma;
    if (c.initial_samples == 0 || c.memory_capacity == 0 || c.update_period == 0) {
      throw UsageError("initial_samples, memory_capacity and update_period must be positive");
    }
    if (c.initial_samples > c.memory_capacity) {
      throw UsageError("initial_samples exceeds memory_capacity");
    }
    if (!(c.add_threshold >= 0.0 && c.add_threshold <= 1.0)) {
      throw UsageError("add_threshold must be in [0, 1]");
    }
    if (!(c.lambda >= 0.0) || !(c.label_sigma > 0.0)) {
      throw UsageError("lambda must be >= 0 and label_sigma > 0");
    }
    return c;
  }
};

// ---- synth-gen ----

struct SynthArgs {
  std::optional<std::string> challenge;
  std::optional<std::size_t> length;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> height;
  std::optional<std::size_t> width;
  std::optional<std::string> config;
  std::optional<std::string> suite;
  std::string out;
};

int cmd_synth_gen(const SynthArgs& a, std::ostream& out) {
  if (a.suite) {
    if (a.challenge || a.config) throw UsageError("--suite cannot be combined with --challenge or --config");
    const auto entries = read_suite_manifest(*a.suite);
    for (const auto& e : entries) {
      auto spec = SequenceSpec::preset(e.challenge, e.seed, a.length.value_or(60));
      write_sequence(generate_sequence(spec), fs::path(a.out) / e.name);
    }
    out << "wrote " << entries.size() << " sequences to " << a.out << "\n";
    return kExitOk;
  }
  SequenceSpec spec;
  if (a.config) {
    try {
      spec = SequenceSpec::from_text(read_text_file(*a.config));
    } catch (const SpecError& e) {
      throw UsageError(std::string("--config: ") + e.what());
    }
  } else if (!a.challenge) {
    throw UsageError("synth-gen needs --challenge, --config or --suite");
  }
  if (a.challenge) {
    const Challenge c = challenge_from(*a.challenge);
    spec = SequenceSpec::preset(c, a.seed.value_or(a.config ? spec.seed : 1),
                                a.length.value_or(a.config ? spec.length : 60));
  }
  if (a.seed) spec.seed = *a.seed;
  if (a.length) spec.length = *a.length;
  if (a.height) spec.height = *a.height;
  if (a.width) spec.width = *a.width;
  try {
    spec.validate();
  } catch (const SpecError& e) {
    throw UsageError(e.what());
  }
  write_sequence(generate_sequence(spec), a.out);
  out << "wrote " << spec.length << " frames (" << challenge_name(spec.challenge) << ", seed "
      << spec.seed << ") to " << a.out << "\n";
  return kExitOk;
}

// ---- track ----

int cmd_track(const std::string& dir, const TrackerFlags& flags,
              const std::optional<std::string>& params_path, const std::string& out_path,
              std::ostream& out) {
  TrackerConfig config = flags.resolve();
  const auto gts = read_groundtruth(fs::path(dir) / "groundtruth.txt");
  if (gts.empty() || !gts.front()) {
    throw TrackingError(0, "no initial ground-truth box in " + dir);
  }
  if (params_path) config.fusion = load_fusion_params(*params_path);
  const DirectoryFrames frames(dir, gts.size());

  const auto start = std::chrono::steady_clock::now();
  const auto preds = track_sequence(frames, *gts.front(), config);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_predictions(out_path, preds);
  char line[160];
  std::snprintf(line, sizeof line, "frames=%zu seconds=%.3f fps=%.2f mode=%s\n", preds.size(),
                seconds, seconds > 0.0 ? static_cast<double>(preds.size()) / seconds : 0.0,
                std::string(mode_name(config.mode)).c_str());
  out << line;
  return kExitOk;
}

// ---- eval ----

int cmd_eval(const std::string& pred_path, const std::string& gt_path,
             const std::optional<std::string>& sweep_text,
             const std::optional<std::string>& out_path, std::ostream& out) {
  std::vector<double> sweep;
  if (sweep_text) {
    try {
      sweep = parse_sweep(*sweep_text);
    } catch (const std::exception& e) {
      throw UsageError(std::string("--sweep: ") + e.what());
    }
  }
  const auto preds = read_predictions(pred_path);
  const auto gts = read_groundtruth(gt_path);
  const std::string json = evaluate_sequence(preds, gts, sweep).to_json() + "\n";
  out << json;
  if (out_path) write_text_file(*out_path, json);
  return kExitOk;
}

// ---- ablate ----

std::string challenge_table(const AblationResult& result) {
  std::string text = "F-score by challenge\n";
  char cell[64];
  std::snprintf(cell, sizeof cell, "%-13s", "challenge");
  text += cell;
  for (const auto& row : result.rows) {
    std::snprintf(cell, sizeof cell, "  %16s", std::string(mode_label(row.mode)).c_str());
    text += cell;
  }
  text += "\n";
  for (auto c : {Challenge::plain, Challenge::distractors, Challenge::fast_motion,
                 Challenge::dim_light, Challenge::occlusion}) {
    if (std::find(result.challenges.begin(), result.challenges.end(), c) ==
        result.challenges.end()) {
      continue;
    }
    std::snprintf(cell, sizeof cell, "%-13s", std::string(challenge_name(c)).c_str());
    text += cell;
    for (const auto& row : result.rows) {
      std::snprintf(cell, sizeof cell, "  %16.3f", result.subset(row.mode, c).f);
      text += cell;
    }
    text += "\n";
  }
  return text;
}

int cmd_ablate(const std::string& dataset, const TrackerFlags& flags, std::size_t jobs,
               const std::optional<std::string>& out_path, std::ostream& out) {
  const TrackerConfig config = flags.resolve();
  if (!fs::is_directory(dataset)) throw std::runtime_error("not a directory: " + dataset);
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(dataset)) {
    if (entry.is_directory() && fs::exists(entry.path() / "groundtruth.txt")) {
      dirs.push_back(entry.path());
    }
  }
  if (dirs.empty()) throw std::runtime_error("no sequences found in " + dataset);
  std::sort(dirs.begin(), dirs.end());

  std::vector<Sequence> sequences;
  std::vector<std::string> names;
  for (const auto& d : dirs) {
    sequences.push_back(read_sequence(d));
    names.push_back(d.filename().string());
  }
  const auto start = std::chrono::steady_clock::now();
  const auto result = run_ablation(sequences, names, config, jobs);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::string report = format_ablation_table(result) + "\n" + challenge_table(result);
  out << report;
  char line[96];
  std::snprintf(line, sizeof line, "%zu sequences, seed %llu, %.1f s\n", sequences.size(),
                static_cast<unsigned long long>(config.seed), seconds);
  out << line;
  if (out_path) write_text_file(*out_path, report);
  return kExitOk;
}

// ---- gradcheck ----

int cmd_gradcheck(const GradSuiteOptions& options, std::ostream& out) {
  if (!(options.eps > 0.0)) throw UsageError("--eps must be positive");
  char line[160];
  std::snprintf(line, sizeof line, "gradcheck eps=%g tolerance=%g seed=%llu%s\n", options.eps,
                options.tolerance, static_cast<unsigned long long>(options.seed),
                options.analytic_bias != 0.0 ? " (perturbed analytic gradients)" : "");
  out << line;
  bool all = true;
  for (const auto& r : run_gradient_suite(options)) {
    std::snprintf(line, sizeof line, "%s %-18s max_rel_err=%.3e (%zu tensors)\n",
                  r.passed ? "PASS" : "FAIL", r.op.c_str(), r.max_error, r.targets.size());
    out << line;
    all = all && r.passed;
  }
  return all ? kExitOk : kExitFailure;
}

}  // namespace

void apply_config_text(TrackerConfig& c, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw UsageError(where + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string ctx = where + ": " + key;
    if (key == "mode") {
      c.mode = mode_from(value);
    } else if (key == "seed") {
      c.seed = parse_value<std::uint64_t>(ctx, value);
    } else if (key == "initial_samples") {
      c.initial_samples = parse_value<std::size_t>(ctx, value);
    } else if (key == "add_threshold") {
      c.add_threshold = parse_value<double>(ctx, value);
    } else if (key == "memory_capacity") {
      c.memory_capacity = parse_value<std::size_t>(ctx, value);
    } else if (key == "update_period") {
      c.update_period = parse_value<std::size_t>(ctx, value);
    } else if (key == "init_iterations") {
      c.init_iterations = parse_value<std::size_t>(ctx, value);
    } else if (key == "update_iterations") {
      c.update_iterations = parse_value<std::size_t>(ctx, value);
    } else if (key == "lambda") {
      c.lambda = parse_value<double>(ctx, value);
    } else if (key == "label_sigma") {
      c.label_sigma = parse_value<double>(ctx, value);
    } else if (key == "normalize_branches") {
      c.normalize_branches = parse_bool(ctx, value);
    } else {
      throw UsageError(where + ": unknown key '" + key + "'");
    }
  }
}

void apply_config_file(TrackerConfig& config, const fs::path& path) {
  apply_config_text(config, read_text_file(path), path.string());
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"RGB-D tracking with hierarchical modality aggregation and distribution", "hmad"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth-gen", "generate a synthetic RGB-D sequence");
  synth_cmd->add_option("--challenge", synth.challenge,
                        "plain, distractors, fast_motion, dim_light or occlusion");
  synth_cmd->add_option("--length", synth.length, "frame count (default 60)");
  synth_cmd->add_option("--seed", synth.seed, "sequence seed (default 1)");
  synth_cmd->add_option("--height", synth.height, "image height (default 96)");
  synth_cmd->add_option("--width", synth.width, "image width (default 96)");
  synth_cmd->add_option("--config", synth.config, "key=value sequence recipe (spec.txt format)");
  synth_cmd->add_option("--suite", synth.suite, "manifest of 'name challenge seed' lines");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();

  TrackerFlags track_flags;
  std::string track_dir, track_out;
  std::optional<std::string> track_params;
  auto* track_cmd = app.add_subcommand("track", "track a sequence directory");
  track_cmd->add_option("sequence", track_dir, "sequence directory")->required();
  track_flags.attach(*track_cmd, true);
  track_cmd->add_option("--params", track_params, "fusion parameter container to load");
  track_cmd->add_option("--out", track_out, "prediction file")->required();

  std::string eval_pred, eval_gt;
  std::optional<std::string> eval_sweep, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "score a prediction file");
  eval_cmd->add_option("predictions", eval_pred, "prediction file")->required();
  eval_cmd->add_option("groundtruth", eval_gt, "ground-truth file")->required();
  eval_cmd->add_option("--sweep", eval_sweep, "confidence thresholds lo:hi:step");
  eval_cmd->add_option("--out", eval_out, "also write the JSON report here");

  TrackerFlags ablate_flags;
  std::string ablate_dir;
  std::size_t ablate_jobs = 1;
  std::optional<std::string> ablate_out;
  auto* ablate_cmd = app.add_subcommand("ablate", "run every fusion mode over a dataset");
  ablate_cmd->add_option("dataset", ablate_dir, "directory of sequence directories")->required();
  ablate_flags.attach(*ablate_cmd, false);
  ablate_cmd->add_option("--jobs", ablate_jobs, "worker threads (default 1)")
      ->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--out", ablate_out, "report file");

  GradSuiteOptions grad;
  bool grad_fail = false;
  auto* grad_cmd = app.add_subcommand("gradcheck", "verify fusion gradients numerically");
  grad_cmd->add_option("--eps", grad.eps, "central-difference step (default 1e-5)");
  grad_cmd->add_option("--seed", grad.seed, "instance seed (default 7)");
  grad_cmd->add_flag("--self-test-fail", grad_fail,
                     "perturb the analytic gradients; the run must then fail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth_gen(synth, out);
    if (*track_cmd) return cmd_track(track_dir, track_flags, track_params, track_out, out);
    if (*eval_cmd) return cmd_eval(eval_pred, eval_gt, eval_sweep, eval_out, out);
    if (*ablate_cmd) return cmd_ablate(ablate_dir, ablate_flags, ablate_jobs, ablate_out, out);
    if (*grad_cmd) {
      if (grad_fail) grad.analytic_bias = 1e-2;
      return cmd_gradcheck(grad, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace hmad
