#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hmad/metrics.hpp"
#include "hmad/synth.hpp"
#include "hmad/tracker.hpp"

namespace hmad {

struct AblationRow {
  FusionMode mode;
  EvalReport pooled;
  std::vector<EvalReport> per_sequence;  // aligned with the input sequences
};

struct AblationResult {
  std::vector<std::string> sequence_names;
  std::vector<Challenge> challenges;
  std::vector<AblationRow> rows;  // one per mode, in kAllFusionModes order

  const AblationRow& row(FusionMode mode) const;
  // Pooled report over the sequences of one challenge class.
  EvalReport subset(FusionMode mode, Challenge challenge) const;
};

// Tracks every sequence under every fusion mode with one shared seed. Work is
// spread over `jobs` threads; results do not depend on scheduling.
AblationResult run_ablation(const std::vector<Sequence>& sequences,
                            const std::vector<std::string>& names, const TrackerConfig& base,
                            std::size_t jobs = 1);

// Table of mode x (Pr, Re, F) rows.
std::string format_ablation_table(const AblationResult& result);

// Frames are quantized to the on-disk precision, so results match a suite
// written with synth-gen --suite and read back.
std::vector<Sequence> generate_suite(const std::vector<SuiteEntry>& entries,
                                     std::size_t length = 60);

}  // namespace hmad
