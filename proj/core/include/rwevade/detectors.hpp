#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rwevade/forest.hpp"
#include "rwevade/trace.hpp"

namespace rwevade {

// --- tick-tiered detector ---------------------------------------------------

inline constexpr int kTickCount = 28;

// Fractions of the census a process must have touched for each tick to fire.
struct TickSchedule {
  std::vector<double> fractions;
  // Distinct files needed for tick `tick` (1-based) on a census of n files.
  std::size_t files_required(int tick, std::size_t census_files) const;
};

// 28 geometrically spaced fractions from 0.001 to 1.0.
TickSchedule tick_schedule();

struct Tick {
  int index = 0;                // 1-based tick number
  std::size_t event_index = 0;  // event at which the tick fired
  friend bool operator==(const Tick&, const Tick&) = default;
};

// Ticks that fired, in order. Several ticks may fire on the same event.
std::vector<Tick> locate_ticks(const Trace& trace, const FileCensus& census,
                               const TickSchedule& schedule);

// Tier t looks back 2^(t-1) ticks. A tier applies at tick i only when its
// clamped interval differs from tier t-1's, i.e. t == 1 or i > 2^(t-2).
struct TierSpec {
  int n_tiers = 6;

  int lookback(int tier) const { return 1 << (tier - 1); }
  bool applies(int tier, int tick) const;
};

// Half-open event index range.
struct EventRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool empty() const { return begin >= end; }
  friend bool operator==(const EventRange&, const EventRange&) = default;
};

// Events covered by `tier` at the k-th fired tick (0-based position in ticks).
EventRange tier_interval(std::span<const Tick> ticks, std::size_t position, int tier,
                         const TierSpec& spec);

// How per-extension access fractions are reduced to one coverage value.
enum class CoverageMode : std::uint8_t { max, mean };

std::string_view to_string(CoverageMode mode);
std::optional<CoverageMode> parse_coverage_mode(std::string_view text);

struct FeatureVector6 {
  double n_dl = 0, n_rd = 0, n_wt = 0, n_rn = 0;
  double type_coverage = 0;
  double avg_wt_entropy = 0;

  std::vector<double> values() const {
    return {n_dl, n_rd, n_wt, n_rn, type_coverage, avg_wt_entropy};
  }
  static std::vector<std::string> names();
  friend bool operator==(const FeatureVector6&, const FeatureVector6&) = default;
};

// Fast variants are folded into their base operation for the counts and the
// write-entropy mean.
FeatureVector6 extract_features6(const Trace& trace, EventRange interval, const FileCensus& census,
                                 CoverageMode mode = CoverageMode::max);

// One dataset per tier; rows from every (fired tick, applicable tier) pair.
std::vector<Dataset> build_training_set(std::span<const Trace> traces, const FileCensus& census,
                                        const TierSpec& tiers = {},
                                        const TickSchedule& schedule = tick_schedule(),
                                        CoverageMode mode = CoverageMode::max);

struct DetectionPolicy {
  int k_consecutive = 3;
  double prob_threshold = 0.5;
  std::int64_t window_len_us = 3'000'000;
  std::int64_t window_step_us = 1'000'000;

  void validate() const;
  friend bool operator==(const DetectionPolicy&, const DetectionPolicy&) = default;
};

struct Verdict {
  bool malicious = false;
  // Tiered: 1-based tick number. Windowed: 0-based window index.
  std::optional<std::size_t> first_detection;
  std::vector<double> per_interval_probs;
};

// First position (1-based) completing a run of k consecutive positives.
std::optional<std::size_t> first_k_run(const std::vector<bool>& positives, int k);

struct TieredModels {
  std::vector<Forest> tiers;  // tiers[t-1]
  TierSpec spec;
  TickSchedule schedule = tick_schedule();
  CoverageMode coverage = CoverageMode::max;
};

// A tick is positive when any applicable tier predicts above the threshold;
// per_interval_probs holds that maximum for each fired tick.
Verdict tiered_detect(const Trace& trace, const FileCensus& census, const TieredModels& models,
                      const DetectionPolicy& policy = {});

// --- sliding-window detector ------------------------------------------------

struct FeatureVector8 {
  double n_rd = 0, n_wt = 0, n_op = 0, n_cl = 0;
  double n_frd = 0, n_fwt = 0, n_fop = 0, n_fcl = 0;

  std::vector<double> values() const { return {n_rd, n_wt, n_op, n_cl, n_frd, n_fwt, n_fop, n_fcl}; }
  static std::vector<std::string> names();
  friend bool operator==(const FeatureVector8&, const FeatureVector8&) = default;
};

struct Window {
  std::int64_t start_us = 0;
  EventRange events;
  FeatureVector8 features;
};

// Half-open windows [start, start + len) stepped from ts 0 to the last event.
// Empty windows are skipped; consecutive windows holding the same events are
// reported once.
std::vector<Window> windowed_features(const Trace& trace, const DetectionPolicy& policy = {});

Dataset build_window_training_set(std::span<const Trace> traces, const DetectionPolicy& policy = {});

// Malicious iff any window scores above the threshold.
Verdict windowed_detect(const Trace& trace, const Forest& model, const DetectionPolicy& policy = {});

// --- evaluation ----------------------------------------------------------------

struct Metrics {
  std::size_t n_ransomware = 0;
  std::size_t n_benign = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  double detection_rate = 0.0;  // 0 when there are no ransomware traces
  double fpr = 0.0;             // 0 when there are no benign traces
  double accuracy = 0.0;
};

// Throws std::invalid_argument on empty or mismatched input.
Metrics evaluate(std::span<const Verdict> verdicts, std::span<const Label> labels);

using TraceDetector = std::function<Verdict(const Trace&)>;
Metrics evaluate(const TraceDetector& detector, std::span<const Trace> traces);

struct Partition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Stratified train:test = ratio:1 partition by trace. Each class contributes
// ceil(n / (ratio + 1)) test items, at least one when it has two or more.
Partition split_train_test(std::span<const Label> labels, std::size_t ratio, std::uint64_t seed);

}  // namespace rwevade
