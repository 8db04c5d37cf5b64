#include <doctest.h>

#include <sstream>

#include "rwevade/detectors.hpp"
#include "rwevade/evasion.hpp"
#include "rwevade/synthgen.hpp"
#include "support.hpp"

using namespace rwevade;

TEST_CASE("census shape") {
  auto cfg = GenConfig::defaults();
  FileCensus c = gen_census(cfg);
  CHECK(c.file_count() == 3000);
  CHECK(c.dir_count() == 150);
  CHECK(gen_census(cfg) == c);

  cfg.ext_mix = {{".docx", 1.0}};
  FileCensus d = gen_census(cfg);
  CHECK(d.totals().size() == 1);
  CHECK(d.count_with_ext(".docx") == 3000);

  // log-normal sizes around the configured median
  std::vector<std::uint64_t> sizes;
  for (auto& [id, f] : c.files()) sizes.push_back(f.size);
  std::nth_element(sizes.begin(), sizes.begin() + sizes.size() / 2, sizes.end());
  double median = double(sizes[sizes.size() / 2]);
  CHECK(median > 0.8 * 65536);
  CHECK(median < 1.25 * 65536);
}

TEST_CASE("config validation and persistence") {
  auto cfg = GenConfig::defaults();
  cfg.validate();
  std::stringstream s;
  save_config(cfg, s);
  GenConfig back = load_config(s);
  std::stringstream s2;
  save_config(back, s2);
  CHECK(s2.str() == s.str());

  auto bad = cfg;
  bad.ext_mix.begin()->second += 0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.n_dirs = bad.n_files + 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.benign_classes[0].prevalence += 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  std::istringstream partial(R"({"seed": 9, "n_benign": 10})");
  GenConfig p = load_config(partial);
  CHECK(p.seed == 9);
  CHECK(p.n_benign == 10);
  CHECK(p.n_files == cfg.n_files);
}

TEST_CASE("generators are deterministic per index") {
  auto cfg = rwtest::small_config();
  FileCensus c = gen_census(cfg);
  CHECK(gen_benign_trace(c, cfg, 17) == gen_benign_trace(c, cfg, 17));
  CHECK_FALSE(gen_benign_trace(c, cfg, 17) == gen_benign_trace(c, cfg, 18));
  CHECK(gen_ransomware_trace(c, cfg, 2) == gen_ransomware_trace(c, cfg, 2));
  auto all = gen_benign(c, cfg);
  CHECK(all[17] == gen_benign_trace(c, cfg, 17));
}

TEST_CASE("benign traces carry only their class ops") {
  auto cfg = rwtest::small_config();
  FileCensus c = gen_census(cfg);
  for (std::size_t i = 0; i < 200; ++i) {
    Trace t = gen_benign_trace(c, cfg, i);
    CHECK(t.label == Label::benign);
    CHECK(validate_trace(t, c).empty());
    OpSet ops;
    auto counts = count_main_ops(t);
    for (std::size_t k = 0; k < 4; ++k)
      if (counts[k] > 0) ops.insert(kMainOps[k]);
    bool known = false;
    for (auto& cls : cfg.benign_classes) known = known || cls.ops == ops;
    CHECK_MESSAGE(known, ops.to_string());
    // OP/CL bracket every touched file
    std::map<FileId, int> open;
    for (auto& e : t.events) {
      if (base_kind(e.op) == OpKind::OP) ++open[e.file_id];
      if (base_kind(e.op) == OpKind::CL) --open[e.file_id];
    }
    for (auto& [f, n] : open) CHECK(n == 0);
  }
}

TEST_CASE("four-op class follows its ratio") {
  auto cfg = rwtest::small_config();
  cfg.n_files = 3000;
  cfg.n_dirs = 150;
  FileCensus c = gen_census(cfg);
  MainOpCounts sum{};
  int n = 0;
  for (std::size_t i = 0; i < 2000 && n < 60; ++i) {
    auto counts = count_main_ops(gen_benign_trace(c, cfg, i));
    if (!(counts[0] > 0 && counts[1] > 0 && counts[2] > 0 && counts[3] > 0)) continue;
    for (std::size_t k = 0; k < 4; ++k) sum[k] += counts[k];
    ++n;
  }
  REQUIRE(n > 10);
  // pooled over the class; single traces are too small for a tight ratio
  double lo = *std::min_element(sum.begin(), sum.end());
  MainOpCounts want{1, 16, 13, 1};
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(sum[k] / lo / want[k] - 1.0) <= 0.15);
}

TEST_CASE("ransomware sweeps everything") {
  auto cfg = rwtest::small_config();
  FileCensus c = gen_census(cfg);
  double entropy_sum = 0;
  int samples = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    Trace t = gen_ransomware_trace(c, cfg, i);
    CHECK(t.label == Label::ransomware);
    CHECK(validate_trace(t, c).empty());
    CHECK(t.files_in_access_order().size() == c.file_count());
    auto f = extract_features6(t, {0, t.events.size()}, c);
    CHECK(f.type_coverage == 1.0);
    CHECK(extract_features6(t, {0, t.events.size()}, c, CoverageMode::mean).type_coverage == 1.0);
    entropy_sum += f.avg_wt_entropy;
    ++samples;

    // every file fully overwritten
    std::map<FileId, std::uint64_t> covered;
    for (auto& e : t.events)
      if (is_write(e.op)) covered[e.file_id] += *e.length;
    for (auto& [id, info] : c.files()) CHECK(covered[id] >= info.size);

    auto counts = count_main_ops(t);
    for (double x : counts) CHECK(x > 0);
  }
  CHECK(std::abs(entropy_sum / samples - 0.88) <= 0.03);
}
