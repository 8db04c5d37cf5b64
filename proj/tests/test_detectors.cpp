#include <doctest.h>

#include <cmath>

#include "rwevade/detectors.hpp"
#include "rwevade/synthgen.hpp"
#include "support.hpp"

using namespace rwevade;

namespace {

FileCensus flat_census(std::size_t n, const std::string& ext = ".dat") {
  std::map<FileId, FileInfo> files;
  for (FileId i = 1; i <= n; ++i) files[i] = {ext, 1000, 0};
  return FileCensus(files, {{0, 0}});
}

IrpEvent ev(std::int64_t ts, OpKind op, FileId file, double entropy = -1) {
  IrpEvent e{};
  e.ts_us = ts;
  e.op = op;
  e.file_id = file;
  if (carries_payload(op)) {
    e.offset = 0;
    e.length = 10;
    if (entropy >= 0) e.entropy = entropy;
  }
  return e;
}

Forest constant(double p, std::size_t arity) {
  Forest f;
  f.feature_names.assign(arity, "x");
  TreeNode leaf;
  leaf.prob_malicious = p;
  f.trees.push_back(Tree{{leaf}});
  return f;
}

}  // namespace

TEST_CASE("tick schedule is geometric") {
  auto s = tick_schedule();
  REQUIRE(s.fractions.size() == 28);
  CHECK(s.fractions.front() == doctest::Approx(0.001));
  CHECK(s.fractions.back() == 1.0);
  const double r = std::pow(1000.0, 1.0 / 27.0);
  CHECK(r == doctest::Approx(1.2915).epsilon(1e-4));
  for (std::size_t i = 1; i < s.fractions.size(); ++i) CHECK(s.fractions[i] / s.fractions[i - 1] == doctest::Approx(r));
}

TEST_CASE("locate_ticks") {
  auto schedule = tick_schedule();
  FileCensus c = flat_census(1000);

  Trace none;
  none.events.push_back(ev(0, OpKind::DL, kNoFile));
  CHECK(locate_ticks(none, c, schedule).empty());

  Trace all;
  for (FileId f = 1; f <= 1000; ++f) all.events.push_back(ev(f, OpKind::RD, f, 0.5));
  auto ticks = locate_ticks(all, c, schedule);
  REQUIRE(ticks.size() == 28);
  CHECK(ticks[0].index == 1);
  CHECK(ticks[0].event_index == 0);
  CHECK(ticks.back().event_index == 999);
  for (std::size_t i = 1; i < ticks.size(); ++i) {
    CHECK(ticks[i].index == ticks[i - 1].index + 1);
    CHECK(ticks[i].event_index >= ticks[i - 1].event_index);
  }

  Trace two;  // 0.2% of files
  two.events.push_back(ev(0, OpKind::RD, 1, 0.5));
  two.events.push_back(ev(1, OpKind::RD, 2, 0.5));
  ticks = locate_ticks(two, c, schedule);
  REQUIRE(ticks.size() == 3);
  CHECK(ticks[2].index == 3);
}

TEST_CASE("tier applicability") {
  TierSpec spec;
  CHECK(spec.applies(1, 1));
  CHECK_FALSE(spec.applies(2, 1));
  CHECK(spec.applies(2, 2));
  CHECK_FALSE(spec.applies(3, 2));
  CHECK(spec.applies(3, 3));
  CHECK_FALSE(spec.applies(6, 16));
  CHECK(spec.applies(6, 17));
  CHECK(spec.lookback(6) == 32);
}

TEST_CASE("extract_features6") {
  std::map<FileId, FileInfo> files;
  for (FileId i = 1; i <= 4; ++i) files[i] = {".docx", 10, 0};
  for (FileId i = 5; i <= 104; ++i) files[i] = {".log", 10, 0};
  FileCensus c(files, {{0, 0}});

  Trace t;
  for (int i = 0; i < 5; ++i) t.events.push_back(ev(i, OpKind::WT, 1 + (i % 2), 0.88));
  t.events.push_back(ev(6, OpKind::RD, 5, 0.3));

  CHECK(extract_features6(t, {0, 0}, c) == FeatureVector6{});
  auto f = extract_features6(t, {0, 5}, c);
  CHECK(f.n_wt == 5);
  CHECK(f.avg_wt_entropy == doctest::Approx(0.88));
  auto g = extract_features6(t, {0, 6}, c);
  CHECK(g.type_coverage == doctest::Approx(0.5));
  CHECK(g.n_rd == 1);
  CHECK(extract_features6(t, {0, 6}, c, CoverageMode::mean).type_coverage == doctest::Approx((0.5 + 0.01) / 2));
}

TEST_CASE("feature counts are additive over adjacent intervals") {
  auto cfg = rwtest::small_config();
  FileCensus census = gen_census(cfg);
  for (std::size_t i = 0; i < 5; ++i) {
    Trace t = gen_ransomware_trace(census, cfg, i);
    std::size_t n = t.events.size(), m = n / 3;
    auto a = extract_features6(t, {0, m}, census);
    auto b = extract_features6(t, {m, n}, census);
    auto ab = extract_features6(t, {0, n}, census);
    CHECK(ab.n_dl == a.n_dl + b.n_dl);
    CHECK(ab.n_rd == a.n_rd + b.n_rd);
    CHECK(ab.n_wt == a.n_wt + b.n_wt);
    CHECK(ab.n_rn == a.n_rn + b.n_rn);
    double weighted = (a.avg_wt_entropy * a.n_wt + b.avg_wt_entropy * b.n_wt) / (a.n_wt + b.n_wt);
    CHECK(ab.avg_wt_entropy == doctest::Approx(weighted).epsilon(1e-12));
  }
}

TEST_CASE("build_training_set rows per tier") {
  FileCensus c = flat_census(1000);
  Trace three;  // ticks 1..3
  three.label = Label::ransomware;
  for (FileId f = 1; f <= 2; ++f) three.events.push_back(ev(f, OpKind::RD, f, 0.4));
  auto sets = build_training_set(std::span(&three, 1), c);
  REQUIRE(sets.size() == 6);
  CHECK(sets[0].size() == 3);
  CHECK(sets[1].size() == 2);
  CHECK(sets[2].size() == 1);
  CHECK(sets[3].empty());

  Trace none;
  none.events.push_back(ev(0, OpKind::DL, kNoFile));
  auto empty = build_training_set(std::span(&none, 1), c);
  for (auto& d : empty) CHECK(d.empty());

  Trace all;
  all.label = Label::ransomware;
  for (FileId f = 1; f <= 1000; ++f) all.events.push_back(ev(f, OpKind::WT, f, 0.9));
  CHECK(build_training_set(std::span(&all, 1), c)[0].size() == 28);
}

TEST_CASE("K-consecutive rule") {
  CHECK(first_k_run({true, true, false, true, true, true}, 3) == 6u);
  CHECK_FALSE(first_k_run({true, true}, 3).has_value());
  for (unsigned mask = 0; mask < 1024; ++mask) {
    std::vector<bool> v(10);
    for (int b = 0; b < 10; ++b) v[b] = (mask >> b) & 1;
    CHECK(first_k_run(v, 3) == rwtest::brute_k_run(v, 3));
  }
  // a run of exactly K is broken by flipping any one of its ticks
  std::vector<bool> run{false, true, true, true, false};
  REQUIRE(first_k_run(run, 3));
  for (std::size_t i = 1; i <= 3; ++i) {
    auto flipped = run;
    flipped[i] = false;
    CHECK_FALSE(first_k_run(flipped, 3));
  }
}

TEST_CASE("tiered_detect with constant models") {
  FileCensus c = flat_census(1000);
  Trace all;
  for (FileId f = 1; f <= 1000; ++f) all.events.push_back(ev(f, OpKind::WT, f, 0.9));

  TieredModels zero;
  for (int t = 0; t < 6; ++t) zero.tiers.push_back(constant(0.0, 6));
  Verdict v = tiered_detect(all, c, zero);
  CHECK_FALSE(v.malicious);
  CHECK_FALSE(v.first_detection);
  REQUIRE(v.per_interval_probs.size() == 28);
  for (double p : v.per_interval_probs) CHECK(p == 0.0);

  TieredModels one = zero;
  one.tiers[0] = constant(1.0, 6);
  v = tiered_detect(all, c, one);
  CHECK(v.malicious);
  CHECK(v.first_detection == 3u);

  Trace two;  // only 3 ticks fire
  two.events = {all.events[0], all.events[1]};
  CHECK(tiered_detect(two, c, one).malicious);
  Trace one_file{{all.events[0]}, Label::benign};  // 1 tick < K
  CHECK_FALSE(tiered_detect(one_file, c, one).malicious);

  TieredModels missing;
  missing.tiers.push_back(constant(1.0, 6));
  CHECK_THROWS(tiered_detect(all, c, missing));
}

TEST_CASE("windowed features") {
  DetectionPolicy p;
  Trace quick;
  for (int i = 0; i < 10; ++i) quick.events.push_back(ev(i * 1000, OpKind::RD, 1, 0.5));
  CHECK(windowed_features(quick, p).size() == 1);

  Trace apart;
  for (int i = 0; i < 10; ++i) apart.events.push_back(ev(i, OpKind::RD, 1, 0.5));
  for (int i = 0; i < 10; ++i) apart.events.push_back(ev(10'000'000 + i, OpKind::WT, 1, 0.5));
  for (auto& w : windowed_features(apart, p)) CHECK_FALSE((w.features.n_rd > 0 && w.features.n_wt > 0));

  Trace edge;
  edge.events.push_back(ev(3'000'000, OpKind::FOP, 1));
  auto ws = windowed_features(edge, p);
  REQUIRE_FALSE(ws.empty());
  CHECK(ws.front().start_us == 1'000'000);
  CHECK(ws.front().features.n_fop == 1);

  CHECK(windowed_features(Trace{}, p).empty());
}

TEST_CASE("windowed_detect") {
  Trace empty;
  CHECK_FALSE(windowed_detect(empty, constant(1.0, 8)).malicious);
  Trace t;
  t.events.push_back(ev(0, OpKind::RD, 1, 0.5));
  auto v = windowed_detect(t, constant(1.0, 8));
  CHECK(v.malicious);
  CHECK(v.first_detection == 0u);
  CHECK_THROWS_AS(windowed_detect(t, constant(1.0, 6)), ModelError);
}

TEST_CASE("evaluate and split") {
  std::vector<Verdict> v(4);
  v[0].malicious = true;
  v[0].first_detection = 1;
  std::vector<Label> l{Label::ransomware, Label::benign, Label::benign, Label::benign};
  Metrics m = evaluate(v, l);
  CHECK(m.detection_rate == 1.0);
  CHECK(m.fpr == 0.0);
  CHECK(m.accuracy == 1.0);
  CHECK_THROWS_AS(evaluate(std::span<const Verdict>{}, std::span<const Label>{}), std::invalid_argument);

  std::vector<Label> labels(341, Label::benign);
  labels.insert(labels.end(), 42, Label::ransomware);
  Partition p = split_train_test(labels, 10, 3);
  CHECK(p.train.size() + p.test.size() == labels.size());
  std::size_t test_r = 0;
  for (auto i : p.test) test_r += labels[i] == Label::ransomware;
  CHECK(test_r == 4);  // ceil(42 / 11)
  CHECK(p.test.size() == 31 + 4);
  Partition q = split_train_test(labels, 10, 3);
  CHECK(p.test == q.test);
}

TEST_CASE("policy validation") {
  DetectionPolicy p;
  p.k_consecutive = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.window_step_us = p.window_len_us + 1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
