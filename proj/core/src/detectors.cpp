#include "rwevade/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "rwevade/rng.hpp"

namespace rwevade {

std::size_t TickSchedule::files_required(int tick, std::size_t census_files) const {
  const double f = fractions.at(static_cast<std::size_t>(tick - 1));
  const double need = std::ceil(f * static_cast<double>(census_files) - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(need));
}

TickSchedule tick_schedule() {
  TickSchedule s;
  s.fractions.resize(kTickCount);
  for (int i = 1; i <= kTickCount; ++i)
    s.fractions[static_cast<std::size_t>(i - 1)] =
        0.001 * std::pow(1000.0, static_cast<double>(i - 1) / (kTickCount - 1));
  s.fractions.front() = 0.001;
  s.fractions.back() = 1.0;
  return s;
}

std::vector<Tick> locate_ticks(const Trace& trace, const FileCensus& census,
                               const TickSchedule& schedule) {
  std::vector<Tick> ticks;
  const auto n_files = census.file_count();
  if (n_files == 0 || schedule.fractions.empty()) return ticks;
  std::unordered_set<FileId> seen;
  int next = 1;
  const int last = static_cast<int>(schedule.fractions.size());
  for (std::size_t i = 0; i < trace.events.size() && next <= last; ++i) {
    const auto id = trace.events[i].file_id;
    if (id == kNoFile || !seen.insert(id).second) continue;
    while (next <= last && seen.size() >= schedule.files_required(next, n_files))
      ticks.push_back(Tick{next++, i});
  }
  return ticks;
}

bool TierSpec::applies(int tier, int tick) const {
  if (tier < 1 || tier > n_tiers || tick < 1) return false;
  return tier == 1 || tick > (1 << (tier - 2));
}

EventRange tier_interval(std::span<const Tick> ticks, std::size_t position, int tier,
                         const TierSpec& spec) {
  const auto start_pos = static_cast<std::ptrdiff_t>(position) - spec.lookback(tier);
  const std::size_t end = ticks[position].event_index + 1;
  const std::size_t begin =
      start_pos < 0 ? 0 : ticks[static_cast<std::size_t>(start_pos)].event_index + 1;
  return {begin, std::max(begin, end)};
}

std::string_view to_string(CoverageMode mode) { return mode == CoverageMode::mean ? "mean" : "max"; }

std::optional<CoverageMode> parse_coverage_mode(std::string_view text) {
  if (text == "max") return CoverageMode::max;
  if (text == "mean") return CoverageMode::mean;
  return std::nullopt;
}

std::vector<std::string> FeatureVector6::names() {
  return {"n_dl", "n_rd", "n_wt", "n_rn", "type_coverage", "avg_wt_entropy"};
}

std::vector<std::string> FeatureVector8::names() {
  return {"n_rd", "n_wt", "n_op", "n_cl", "n_frd", "n_fwt", "n_fop", "n_fcl"};
}

namespace {

// Accumulates interval features one event at a time, in any order.
class Feature6Accumulator {
 public:
  explicit Feature6Accumulator(const FileCensus& census) : census_(census) {}

  void add(const IrpEvent& ev) {
    switch (base_kind(ev.op)) {
      case OpKind::DL: ++fv_.n_dl; break;
      case OpKind::RD: ++fv_.n_rd; break;
      case OpKind::WT:
        ++fv_.n_wt;
        entropy_sum_ += ev.entropy.value_or(0.0);
        break;
      case OpKind::RN: ++fv_.n_rn; break;
      default: break;
    }
    if (ev.file_id != kNoFile && census_.has_file(ev.file_id) && seen_.insert(ev.file_id).second)
      ++per_ext_[census_.file(ev.file_id).ext];
  }

  FeatureVector6 result(CoverageMode mode) const {
    FeatureVector6 out = fv_;
    out.avg_wt_entropy = fv_.n_wt > 0 ? entropy_sum_ / fv_.n_wt : 0.0;
    double best = 0.0, sum = 0.0;
    for (const auto& [ext, count] : per_ext_) {
      const double frac = static_cast<double>(count) / static_cast<double>(census_.count_with_ext(ext));
      best = std::max(best, frac);
      sum += frac;
    }
    out.type_coverage = mode == CoverageMode::max
                            ? best
                            : (per_ext_.empty() ? 0.0 : sum / static_cast<double>(per_ext_.size()));
    return out;
  }

 private:
  const FileCensus& census_;
  FeatureVector6 fv_;
  double entropy_sum_ = 0.0;
  std::unordered_set<FileId> seen_;
  std::unordered_map<std::string, std::size_t> per_ext_;
};

// Features for every applicable tier at every fired tick. Tier intervals at
// one tick share their end, so a single backward scan from the tick event
// visits each of them in order of increasing length.
std::vector<std::vector<std::optional<FeatureVector6>>> tick_tier_features(
    const Trace& trace, const FileCensus& census, std::span<const Tick> ticks,
    const TierSpec& spec, CoverageMode mode) {
  std::vector<std::vector<std::optional<FeatureVector6>>> out(ticks.size());
  for (std::size_t k = 0; k < ticks.size(); ++k) {
    const int tick = ticks[k].index;
    out[k].resize(static_cast<std::size_t>(spec.n_tiers));
    Feature6Accumulator acc(census);
    std::size_t cursor = ticks[k].event_index + 1;  // events [cursor, end) consumed
    for (int t = 1; t <= spec.n_tiers; ++t) {
      if (!spec.applies(t, tick)) continue;
      const auto range = tier_interval(ticks, k, t, spec);
      while (cursor > range.begin) acc.add(trace.events[--cursor]);
      out[k][static_cast<std::size_t>(t - 1)] = acc.result(mode);
    }
  }
  return out;
}

}  // namespace

FeatureVector6 extract_features6(const Trace& trace, EventRange interval, const FileCensus& census,
                                 CoverageMode mode) {
  Feature6Accumulator acc(census);
  const auto end = std::min(interval.end, trace.events.size());
  for (std::size_t i = interval.begin; i < end; ++i) acc.add(trace.events[i]);
  return acc.result(mode);
}

std::vector<Dataset> build_training_set(std::span<const Trace> traces, const FileCensus& census,
                                        const TierSpec& tiers, const TickSchedule& schedule,
                                        CoverageMode mode) {
  std::vector<Dataset> out(static_cast<std::size_t>(tiers.n_tiers), Dataset(FeatureVector6::names()));
  for (const auto& trace : traces) {
    const auto label = static_cast<std::uint8_t>(trace.label == Label::ransomware ? 1 : 0);
    const auto ticks = locate_ticks(trace, census, schedule);
    const auto feats = tick_tier_features(trace, census, ticks, tiers, mode);
    for (const auto& per_tier : feats)
      for (std::size_t t = 0; t < per_tier.size(); ++t)
        if (per_tier[t]) out[t].add(per_tier[t]->values(), label);
  }
  return out;
}

void DetectionPolicy::validate() const {
  if (k_consecutive < 1) throw std::invalid_argument("k_consecutive must be >= 1");
  if (window_len_us <= 0 || window_step_us <= 0 || window_step_us > window_len_us)
    throw std::invalid_argument("window step must be positive and not exceed the window length");
}

std::optional<std::size_t> first_k_run(const std::vector<bool>& positives, int k) {
  int run = 0;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    run = positives[i] ? run + 1 : 0;
    if (run >= k) return i + 1;
  }
  return std::nullopt;
}

Verdict tiered_detect(const Trace& trace, const FileCensus& census, const TieredModels& models,
                      const DetectionPolicy& policy) {
  policy.validate();
  if (models.tiers.size() < static_cast<std::size_t>(models.spec.n_tiers))
    throw ModelError("tiered detector: missing model for tier " +
                     std::to_string(models.tiers.size() + 1));
  const auto ticks = locate_ticks(trace, census, models.schedule);
  const auto feats = tick_tier_features(trace, census, ticks, models.spec, models.coverage);
  Verdict v;
  std::vector<bool> positive;
  for (const auto& per_tier : feats) {
    double best = 0.0;
    for (std::size_t t = 0; t < per_tier.size(); ++t)
      if (per_tier[t]) best = std::max(best, models.tiers[t].predict(per_tier[t]->values()));
    v.per_interval_probs.push_back(best);
    positive.push_back(best > policy.prob_threshold);
  }
  v.first_detection = first_k_run(positive, policy.k_consecutive);
  v.malicious = v.first_detection.has_value();
  return v;
}

std::vector<Window> windowed_features(const Trace& trace, const DetectionPolicy& policy) {
  policy.validate();
  std::vector<Window> out;
  const auto& ev = trace.events;
  if (ev.empty()) return out;
  // prefix[i][k]: events of kind k among the first i events
  std::vector<std::array<std::uint32_t, kOpKindCount>> prefix(ev.size() + 1);
  prefix[0].fill(0);
  for (std::size_t i = 0; i < ev.size(); ++i) {
    prefix[i + 1] = prefix[i];
    ++prefix[i + 1][static_cast<std::size_t>(ev[i].op)];
  }
  auto count = [&](EventRange r, OpKind op) {
    const auto k = static_cast<std::size_t>(op);
    return static_cast<double>(prefix[r.end][k] - prefix[r.begin][k]);
  };
  auto first_at_or_after = [&](std::int64_t ts, std::size_t from) {
    return static_cast<std::size_t>(
        std::lower_bound(ev.begin() + static_cast<std::ptrdiff_t>(from), ev.end(), ts,
                         [](const IrpEvent& e, std::int64_t t) { return e.ts_us < t; }) -
        ev.begin());
  };
  const auto step = policy.window_step_us;
  const auto len = policy.window_len_us;
  const auto last_ts = ev.back().ts_us;
  std::size_t lo = 0;
  EventRange prev{0, 0};
  for (std::int64_t start = 0; start <= last_ts;) {
    lo = first_at_or_after(start, lo);
    if (lo == ev.size()) break;
    // Jump over stretches where the window cannot reach the next event.
    if (ev[lo].ts_us >= start + len) {
      const auto skip = (ev[lo].ts_us - len) / step + 1;
      start = std::max(start + step, skip * step);
      continue;
    }
    const auto hi = first_at_or_after(start + len, lo);
    const EventRange range{lo, hi};
    if (!(range == prev)) {
      Window w;
      w.start_us = start;
      w.events = range;
      w.features = FeatureVector8{count(range, OpKind::RD),  count(range, OpKind::WT),
                                  count(range, OpKind::OP),  count(range, OpKind::CL),
                                  count(range, OpKind::FRD), count(range, OpKind::FWT),
                                  count(range, OpKind::FOP), count(range, OpKind::FCL)};
      out.push_back(w);
      prev = range;
    }
    start += step;
  }
  return out;
}

Dataset build_window_training_set(std::span<const Trace> traces, const DetectionPolicy& policy) {
  Dataset data(FeatureVector8::names());
  for (const auto& trace : traces) {
    const auto label = static_cast<std::uint8_t>(trace.label == Label::ransomware ? 1 : 0);
    for (const auto& w : windowed_features(trace, policy)) data.add(w.features.values(), label);
  }
  return data;
}

Verdict windowed_detect(const Trace& trace, const Forest& model, const DetectionPolicy& policy) {
  if (model.arity() != FeatureVector8::names().size())
    throw ModelError("windowed detector needs an arity-8 model, got " +
                     std::to_string(model.arity()));
  Verdict v;
  const auto windows = windowed_features(trace, policy);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const double p = model.predict(windows[i].features.values());
    v.per_interval_probs.push_back(p);
    if (!v.first_detection && p > policy.prob_threshold) v.first_detection = i;
  }
  v.malicious = v.first_detection.has_value();
  return v;
}

Metrics evaluate(std::span<const Verdict> verdicts, std::span<const Label> labels) {
  if (verdicts.empty()) throw std::invalid_argument("evaluate: no verdicts");
  if (verdicts.size() != labels.size())
    throw std::invalid_argument("evaluate: verdict and label counts differ");
  Metrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const bool mal = verdicts[i].malicious;
    if (labels[i] == Label::ransomware) {
      ++m.n_ransomware;
      if (mal) ++m.true_positives;
      if (mal) ++correct;
    } else {
      ++m.n_benign;
      if (mal) ++m.false_positives;
      if (!mal) ++correct;
    }
  }
  m.detection_rate =
      m.n_ransomware ? static_cast<double>(m.true_positives) / static_cast<double>(m.n_ransomware) : 0.0;
  m.fpr = m.n_benign ? static_cast<double>(m.false_positives) / static_cast<double>(m.n_benign) : 0.0;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(verdicts.size());
  return m;
}

Metrics evaluate(const TraceDetector& detector, std::span<const Trace> traces) {
  std::vector<Verdict> verdicts;
  std::vector<Label> labels;
  verdicts.reserve(traces.size());
  for (const auto& t : traces) {
    verdicts.push_back(detector(t));
    labels.push_back(t.label);
  }
  return evaluate(verdicts, labels);
}

Partition split_train_test(std::span<const Label> labels, std::size_t ratio, std::uint64_t seed) {
  if (ratio < 1) throw std::invalid_argument("train:test ratio must be >= 1");
  Partition p;
  for (Label cls : {Label::benign, Label::ransomware}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    auto rng = make_rng(seed, 0x73706c6974ull, static_cast<std::uint64_t>(cls));
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n = idx.size();
    const std::size_t n_test = n >= 2 ? (n + ratio) / (ratio + 1) : 0;
    p.test.insert(p.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    p.train.insert(p.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(p.train.begin(), p.train.end());
  std::sort(p.test.begin(), p.test.end());
  return p;
}

}  // namespace rwevade
