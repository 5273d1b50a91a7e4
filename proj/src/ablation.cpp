#include "hmad/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace hmad {

const AblationRow& AblationResult::row(FusionMode mode) const {
  for (const auto& r : rows) {
    if (r.mode == mode) return r;
  }
  throw std::invalid_argument("ablation result has no row for mode " +
                              std::string(mode_name(mode)));
}

EvalReport AblationResult::subset(FusionMode mode, Challenge challenge) const {
  const auto& r = row(mode);
  std::vector<EvalReport> picked;
  for (std::size_t i = 0; i < challenges.size(); ++i) {
    if (challenges[i] == challenge) picked.push_back(r.per_sequence[i]);
  }
  return evaluate_dataset(picked);
}

AblationResult run_ablation(const std::vector<Sequence>& sequences,
                            const std::vector<std::string>& names, const TrackerConfig& base,
                            std::size_t jobs) {
  if (sequences.empty()) throw std::invalid_argument("ablation: empty dataset");
  if (names.size() != sequences.size()) {
    throw std::invalid_argument("ablation: one name per sequence required");
  }
  const std::size_t n_modes = kAllFusionModes.size();
  const std::size_t n_tasks = n_modes * sequences.size();
  std::vector<EvalReport> reports(n_tasks);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t task = next++; task < n_tasks; task = next++) {
      try {
        const auto& seq = sequences[task % sequences.size()];
        TrackerConfig config = base;
        config.mode = kAllFusionModes[task / sequences.size()];
        if (seq.groundtruth.empty() || !seq.groundtruth.front()) {
          throw TrackingError(0, "sequence has no initial ground-truth box");
        }
        const auto preds =
            track_sequence(InMemoryFrames(seq.frames), *seq.groundtruth.front(), config);
        reports[task] = evaluate_sequence(preds, seq.groundtruth);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, n_tasks);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  AblationResult result;
  result.sequence_names = names;
  for (const auto& s : sequences) result.challenges.push_back(s.spec.challenge);
  for (std::size_t m = 0; m < n_modes; ++m) {
    AblationRow row{kAllFusionModes[m], {}, {}};
    row.per_sequence.assign(reports.begin() + static_cast<std::ptrdiff_t>(m * sequences.size()),
                            reports.begin() +
                                static_cast<std::ptrdiff_t>((m + 1) * sequences.size()));
    row.pooled = evaluate_dataset(row.per_sequence);
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::string format_ablation_table(const AblationResult& result) {
  std::string out = "Variations          Pr     Re     F-score\n";
  char line[128];
  for (const auto& row : result.rows) {
    std::snprintf(line, sizeof line, "%-18s  %.3f  %.3f  %.3f\n",
                  std::string(mode_label(row.mode)).c_str(), row.pooled.pr, row.pooled.re,
                  row.pooled.f);
    out += line;
  }
  return out;
}

std::vector<Sequence> generate_suite(const std::vector<SuiteEntry>& entries, std::size_t length) {
  std::vector<Sequence> suite;
  suite.reserve(entries.size());
  for (const auto& e : entries) {
    Sequence seq = generate_sequence(SequenceSpec::preset(e.challenge, e.seed, length));
    for (auto& frame : seq.frames) frame = quantize(frame);
    suite.push_back(std::move(seq));
  }
  return suite;
}

}  // namespace hmad
