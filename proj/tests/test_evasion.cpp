#include <doctest.h>

#include <sstream>

#include "rwevade/evasion.hpp"
#include "rwevade/rng.hpp"
#include "rwevade/synthgen.hpp"
#include "support.hpp"

using namespace rwevade;

namespace {

IrpEvent ev(std::int64_t ts, OpKind op, FileId file, DirId dir = 0) {
  IrpEvent e{};
  e.ts_us = ts;
  e.op = op;
  e.file_id = file;
  e.dir_id = dir;
  if (carries_payload(op)) {
    e.offset = 0;
    e.length = 8;
    e.entropy = op == OpKind::WT ? 0.9 : 0.5;
  }
  return e;
}

// Default-size census: with only a few hundred files the per-process file cap
// drops to one file, which leaves too few renames to balance the writes.
struct Fixture {
  GenConfig cfg = [] {
    auto c = rwtest::small_config();
    c.n_files = 3000;
    c.n_dirs = 150;
    return c;
  }();
  FileCensus census = gen_census(cfg);
  std::vector<BenignProfile> profiles;

  Fixture() {
    auto benign = gen_benign(census, cfg);
    profiles = derive_profiles(benign, census);
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("process_split basics") {
  Trace t;
  t.events = {ev(0, OpKind::RD, 1), ev(1, OpKind::RD, 2), ev(2, OpKind::RD, 3), ev(3, OpKind::WT, 1),
              ev(4, OpKind::DL, kNoFile), ev(5, OpKind::DL, kNoFile)};
  auto one = process_split(t, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].events == t.events);

  auto two = process_split(t, 2);
  REQUIRE(two.size() == 2);
  std::set<FileId> p0, p1;
  for (auto& e : two[0].events) {
    if (e.file_id) p0.insert(e.file_id);
    CHECK(e.pid == 0);
  }
  for (auto& e : two[1].events) {
    if (e.file_id) p1.insert(e.file_id);
    CHECK(e.pid == 1);
  }
  CHECK(p0 == std::set<FileId>{1, 3});
  CHECK(p1 == std::set<FileId>{2});
  CHECK(rwtest::check_conservation(t, two).empty());
  CHECK_THROWS_AS(process_split(t, 0), std::invalid_argument);
}

TEST_CASE("functional_split layouts") {
  auto& fx = fixture();
  Trace r = gen_ransomware_trace(fx.census, fx.cfg, 0);
  using enum OpKind;
  std::vector<OpSet> singleton{{DL}, {RD}, {WT}, {RN}};
  std::vector<std::size_t> ones(4, 1);
  auto four = functional_split(r, singleton, ones);
  REQUIRE(four.size() == 4);
  for (std::size_t g = 0; g < 4; ++g) {
    auto counts = count_main_ops(four[g]);
    for (std::size_t k = 0; k < 4; ++k) CHECK((counts[k] > 0) == (k == g));
  }
  CHECK(rwtest::check_conservation(r, four).empty());

  std::vector<OpSet> cerberus{{DL}, {WT}, {RD, RN}};
  std::vector<std::size_t> six(3, 6);
  auto eighteen = functional_split(r, cerberus, six);
  CHECK(eighteen.size() == 18);
  CHECK(rwtest::check_conservation(r, eighteen).empty());

  std::vector<OpSet> overlap{{DL, RD}, {RD, WT, RN}};
  std::vector<std::size_t> two(2, 1);
  CHECK_THROWS_AS(functional_split(r, overlap, two), std::invalid_argument);
  std::vector<OpSet> partial{{DL}, {RD}};
  CHECK_THROWS_AS(functional_split(r, partial, two), std::invalid_argument);
  CHECK_THROWS_AS(functional_split(r, singleton, two), std::invalid_argument);
}

TEST_CASE("conservation over random traces and transforms") {
  auto& fx = fixture();
  Rng rng(2024);
  const auto* profile = find_profile(fx.profiles, OpSet{OpKind::DL, OpKind::RD, OpKind::WT, OpKind::RN});
  REQUIRE(profile);
  using enum OpKind;
  const std::vector<std::vector<OpSet>> layouts{
      {{DL}, {RD}, {WT}, {RN}}, {{DL, RD}, {WT, RN}}, {{DL, RN}, {RD, WT}}, {{DL}, {WT}, {RD, RN}}};
  int failures = 0;
  for (int i = 0; i < 150; ++i) {
    bool ransom = rng() % 3 == 0;
    Trace t = ransom ? gen_ransomware_trace(fx.census, fx.cfg, rng() % 1000) : gen_benign_trace(fx.census, fx.cfg, rng() % 1000);
    int which = static_cast<int>(rng() % (ransom ? 3 : 2));
    std::vector<Trace> out;
    if (which == 0) {
      out = process_split(t, 1 + rng() % 64);
    } else if (which == 1) {
      const auto& g = layouts[rng() % layouts.size()];
      std::vector<std::size_t> n(g.size());
      for (auto& x : n) x = 1 + rng() % 8;
      out = functional_split(t, g, n);
    } else {
      auto plan = mimicry_plan(t, fx.census, *profile, kDefaultRatioTolerance, rng());
      out = mimicry_split(t, plan, fx.census);
    }
    auto err = rwtest::check_conservation(t, out);
    if (!err.empty()) {
      ++failures;
      MESSAGE(err);
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("derive_profiles") {
  FileCensus c({{1, {".x", 10, 0}}, {2, {".x", 10, 0}}}, {{0, 0}});
  Trace t;
  t.events.push_back(ev(0, OpKind::DL, kNoFile));
  for (int i = 0; i < 16; ++i) t.events.push_back(ev(1 + i, OpKind::RD, 1));
  for (int i = 0; i < 13; ++i) t.events.push_back(ev(20 + i, OpKind::WT, 1));
  t.events.push_back(ev(40, OpKind::RN, 2));
  auto p = derive_profiles(std::span(&t, 1), c);
  REQUIRE(p.size() == 1);
  CHECK(p[0].class_ops == OpSet{OpKind::DL, OpKind::RD, OpKind::WT, OpKind::RN});
  CHECK(p[0].ratio == MainOpCounts{1, 16, 13, 1});
  CHECK(p[0].prevalence == 100.0);
  CHECK(p[0].file_access_fraction == 1.0);

  Trace r;
  r.events = {ev(0, OpKind::RD, 1), ev(1, OpKind::RD, 2)};
  auto q = derive_profiles(std::span(&r, 1), c);
  CHECK(q[0].ratio == MainOpCounts{0, 1, 0, 0});
  CHECK_THROWS_AS(derive_profiles({}, c), std::invalid_argument);
}

TEST_CASE("recovered prevalences follow the class mix") {
  auto cfg = GenConfig::defaults();
  cfg.n_files = 600;
  cfg.n_dirs = 30;
  FileCensus census = gen_census(cfg);
  auto benign = gen_benign(census, cfg);
  auto profiles = derive_profiles(benign, census);
  for (const auto& spec : cfg.benign_classes) {
    auto* p = find_profile(profiles, spec.ops);
    double got = p ? p->prevalence : 0.0;
    CHECK_MESSAGE(std::abs(got - spec.prevalence) <= 2.0, spec.ops.to_string());
  }
  auto* top = find_profile(profiles, OpSet{OpKind::DL, OpKind::RD, OpKind::WT, OpKind::RN});
  REQUIRE(top);
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(top->ratio[k] / MainOpCounts{1, 16, 13, 1}[k] - 1) <= 0.15);
}

TEST_CASE("padding arithmetic") {
  MainOpCounts ratio{1, 16, 13, 1};
  auto none = padding_for_ratio({1, 16, 13, 1}, ratio);
  CHECK(none == MainOpCounts{0, 0, 0, 0});
  auto pad = padding_for_ratio({0, 2, 13, 0}, ratio);
  CHECK(pad[1] == 14);
  CHECK(pad[2] == 0);
  MainOpCounts after{pad[0], 2 + pad[1], 13, 1};
  CHECK(ratio_deviation(after, ratio) <= 0.05);

  CHECK(dummy_writes_for_entropy(13, 0.88, kDummyWriteEntropyMax, 0.4825 + 0.05) == 10);
  CHECK(dummy_writes_for_entropy(13, 0.40, 0.0, 0.5) == 0);

  // two classes observed on the 33,625-file testbed
  std::size_t n = min_processes(33625, 0.0022, 33625);
  CHECK(std::abs(double(n) - 470.0) / 470.0 <= 0.05);
  CHECK(min_processes(10, 0.5, 10) == 2);
}

TEST_CASE("mimicry plan and split") {
  auto& fx = fixture();
  using enum OpKind;
  const auto* profile = find_profile(fx.profiles, OpSet{DL, RD, WT, RN});
  REQUIRE(profile);
  Trace r = gen_ransomware_trace(fx.census, fx.cfg, 3);
  auto plan = mimicry_plan(r, fx.census, *profile, 0.05, 9);
  auto out = mimicry_split(r, plan, fx.census);
  REQUIRE(out.size() == plan.n_processes());
  CHECK(rwtest::check_conservation(r, out).empty());

  std::set<FileId> assigned;
  for (std::size_t p = 0; p < out.size(); ++p) {
    auto counts = count_main_ops(out[p]);
    CHECK(ratio_deviation(counts, profile->ratio) <= 0.05 + 1e-9);
    std::set<FileId> files, opened;
    double wsum = 0;
    int wn = 0;
    for (auto& e : out[p].events) {
      if (e.file_id) files.insert(e.file_id);
      if (e.is_dummy) {
        if (e.file_id) CHECK(opened.contains(e.file_id));
        if (is_write(e.op)) CHECK(*e.entropy <= kDummyWriteEntropyMax);
      } else if (e.file_id) {
        opened.insert(e.file_id);
      }
      if (is_write(e.op)) {
        wsum += *e.entropy;
        ++wn;
      }
    }
    CHECK(files.size() <= plan.file_cap);
    if (wn) CHECK(wsum / wn <= profile->wt_entropy + 0.05 + 1e-9);
    for (auto f : plan.per_process[p].files) CHECK(assigned.insert(f).second);
  }

  Trace other = gen_ransomware_trace(fx.census, fx.cfg, 4);
  CHECK_THROWS_AS(mimicry_split(other, plan, fx.census), DataError);

  auto* rd_only = find_profile(fx.profiles, OpSet{RD});
  REQUIRE(rd_only);
  CHECK_THROWS_WITH(mimicry_plan(r, fx.census, *rd_only), "profile cannot host encryption");
}

TEST_CASE("conforming process needs no dummies") {
  FileCensus c({{1, {".x", 10, 0}}}, {{0, 0}});
  Trace t;
  t.label = Label::ransomware;
  t.events.push_back(ev(0, OpKind::DL, kNoFile));
  for (int i = 0; i < 16; ++i) t.events.push_back(ev(1 + i, OpKind::RD, 1));
  for (int i = 0; i < 13; ++i) t.events.push_back(ev(20 + i, OpKind::WT, 1));
  t.events.push_back(ev(40, OpKind::RN, 1));
  BenignProfile p;
  p.class_ops = {OpKind::DL, OpKind::RD, OpKind::WT, OpKind::RN};
  p.ratio = {1, 16, 13, 1};
  p.wt_entropy = 0.95;
  p.rd_entropy = 0.5;
  p.file_access_fraction = 1.0;
  p.prevalence = 100;
  p.n_traces = 1;
  auto plan = mimicry_plan(t, c, p);
  REQUIRE(plan.n_processes() == 1);
  CHECK(plan.per_process[0].dummy == MainOpCounts{0, 0, 0, 0});
  auto out = mimicry_split(t, plan, c);
  REQUIRE(out.size() == 1);
  CHECK(out[0].events.size() == t.events.size());
}

TEST_CASE("plans and profiles round-trip") {
  auto& fx = fixture();
  Trace r = gen_ransomware_trace(fx.census, fx.cfg, 1);
  SplitPlan plan;
  plan.kind = AttackKind::mimicry;
  plan.mimicry = mimicry_plan(r, fx.census, *find_profile(fx.profiles, OpSet::parse("DL,RD,WT,RN")), 0.05, 5);
  std::stringstream s;
  save_plan(plan, s);
  SplitPlan back = load_plan(s);
  CHECK(apply_plan(back, r, fx.census) == apply_plan(plan, r, fx.census));

  SplitPlan fn;
  fn.kind = AttackKind::functional;
  fn.groups = {OpSet::parse("DL"), OpSet::parse("WT"), OpSet::parse("RD,RN")};
  fn.per_group_n = {6, 6, 6};
  CHECK(fn.total_processes() == 18);
  std::stringstream s2;
  save_plan(fn, s2);
  CHECK(load_plan(s2).groups == fn.groups);

  std::stringstream s3;
  save_profiles(fx.profiles, s3);
  auto profiles = load_profiles(s3);
  REQUIRE(profiles.size() == fx.profiles.size());
  CHECK(profiles[0].ratio == fx.profiles[0].ratio);
  CHECK(profiles[0].class_ops == fx.profiles[0].class_ops);
}

TEST_CASE("min-N search") {
  SUBCASE("detector flagging nothing") {
    Trace t;
    t.events = {ev(0, OpKind::WT, 1)};
    auto r = min_n_search([](const Trace&) { return false; }, t, process_split, 64);
    CHECK(r.n == 1u);
  }
  SUBCASE("write-count threshold matches the closed form and a linear scan") {
    for (std::size_t W : {1u, 7u, 64u, 100u, 333u}) {
      for (std::size_t T : {1u, 3u, 10u}) {
        Trace t;
        for (std::size_t f = 0; f < W; ++f) t.events.push_back(ev(std::int64_t(f), OpKind::WT, f + 1));
        auto flags = [T](const Trace& p) { return count_main_ops(p)[2] > double(T); };
        auto r = min_n_search(flags, t, process_split, 1024);
        std::size_t linear = 0;
        for (std::size_t n = 1; n <= 1024 && !linear; ++n) {
          bool any = false;
          for (auto& p : process_split(t, n)) any = any || flags(p);
          if (!any) linear = n;
        }
        CHECK(r.n == linear);
        CHECK(r.n == (W + T - 1) / T);
      }
    }
  }
  SUBCASE("not found") {
    Trace t;
    t.events = {ev(0, OpKind::WT, 1)};
    auto r = min_n_search([](const Trace&) { return true; }, t, process_split, 16);
    CHECK_FALSE(r.n);
  }
  SUBCASE("non-monotone detector still returns an evading n") {
    Trace t;
    for (FileId f = 1; f <= 64; ++f) t.events.push_back(ev(std::int64_t(f), OpKind::WT, f));
    auto flags = [](const Trace& p) {
      auto w = count_main_ops(p)[2];
      return w > 20 || (w > 3 && w < 6);
    };
    auto r = min_n_search(flags, t, process_split, 256);
    REQUIRE(r.n);
    for (auto& p : process_split(t, *r.n)) CHECK_FALSE(flags(p));
  }
}
