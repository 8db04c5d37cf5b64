// rwevade: generate traces, train detectors, attack them, report.
//
//   rwevade gen --out runs/a
//   rwevade train --out runs/a --detector tiered
//   rwevade sweep --out runs/a --detector tiered --attack functional:singleton
//   rwevade report --out runs/a
//
// Layout under --out: data/ (corpus), model_<detector>/, results/.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rwevade/harness.hpp"

namespace fs = std::filesystem;
using namespace rwevade;
using json = nlohmann::ordered_json;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::string config;
  fs::path out = "out";
  unsigned jobs = 0;
  bool per_sample = false;
  bool no_timestamps = false;

  unsigned workers() const {
    if (jobs) return jobs;
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
  }
};

Globals g;

void log(const std::string& msg) {
  if (!g.no_timestamps) {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%H:%M:%S ", std::localtime(&now));
    std::cerr << buf;
  }
  std::cerr << msg << '\n';
}

DetectorKind detector_arg(const std::string& s) {
  auto d = parse_detector_kind(s);
  if (!d) throw std::invalid_argument("unknown detector \"" + s + "\"");
  return *d;
}

fs::path model_dir(const std::string& explicit_dir, DetectorKind d) {
  if (!explicit_dir.empty()) return explicit_dir;
  return g.out / ("model_" + std::string(to_string(d)));
}

fs::path data_dir(const std::string& explicit_dir) { return explicit_dir.empty() ? g.out / "data" : fs::path(explicit_dir); }

GenConfig load_gen_config() {
  GenConfig cfg = g.config.empty() ? GenConfig::defaults() : load_config_file(g.config);
  if (g.seed_set || g.config.empty()) cfg.seed = g.seed;
  cfg.validate();
  return cfg;
}

// --- subcommands ---

void cmd_gen(const std::string& dir) {
  GenConfig cfg = load_gen_config();
  const fs::path out = data_dir(dir);
  log("generating " + std::to_string(cfg.n_benign) + " benign and " + std::to_string(cfg.n_ransomware) +
      " ransomware traces over " + std::to_string(cfg.n_files) + " files");
  Corpus corpus = generate_corpus(cfg, g.workers());
  save_corpus(corpus, cfg, out);
  log("wrote " + out.string());
}

struct TrainArgs {
  std::string detector = "tiered";
  std::string data, model;
  int trees = kDefaultTrees;
  std::string coverage = "max";
  std::size_t split_ratio = 10;
};

void cmd_train(const TrainArgs& a) {
  TrainOptions o;
  o.detector = detector_arg(a.detector);
  o.seed = g.seed;
  o.n_trees = a.trees;
  o.split_ratio = a.split_ratio;
  o.jobs = g.workers();
  auto cov = parse_coverage_mode(a.coverage);
  if (!cov) throw std::invalid_argument("unknown coverage mode \"" + a.coverage + "\"");
  o.coverage = *cov;

  Corpus corpus = load_corpus(data_dir(a.data));
  log("training " + a.detector + " on " + std::to_string(corpus.traces.size()) + " traces");
  ModelBundle b = train_bundle(corpus, o);
  const fs::path dir = model_dir(a.model, o.detector);
  save_bundle(b, dir);
  std::printf("detector=%s detection_rate=%.4f fpr=%.4f accuracy=%.4f test_ransomware=%zu test_benign=%zu\n",
              a.detector.c_str(), b.heldout.detection_rate, b.heldout.fpr, b.heldout.accuracy,
              b.heldout.n_ransomware, b.heldout.n_benign);
  log("wrote " + dir.string());
}

void cmd_detect(const std::string& trace_path, const std::string& detector, const std::string& model,
                const std::string& census_path) {
  DetectorKind d = detector_arg(detector);
  ModelBundle b = load_bundle(model_dir(model, d));
  FileCensus census = load_census_file(census_path.empty() ? g.out / "data" / "census.json" : fs::path(census_path));
  Trace t = load_trace_file(trace_path);
  if (auto v = validate_trace(t, census); !v.empty())
    throw DataError("event " + std::to_string(v.front().event_index) + ": " + v.front().message);
  Verdict verdict = b.detect(t, census);
  json j;
  j["malicious"] = verdict.malicious;
  j["first_detection"] = verdict.first_detection ? json(*verdict.first_detection) : json(nullptr);
  j["per_interval_probs"] = verdict.per_interval_probs;
  std::cout << j.dump() << '\n';
}

struct SplitArgs {
  std::string trace, attack = "process", census, plan_out, profiles, plan_in, dir;
  std::size_t n = 2;
  double tolerance = kDefaultRatioTolerance;
};

void cmd_split(const SplitArgs& a) {
  FileCensus census = load_census_file(a.census.empty() ? g.out / "data" / "census.json" : fs::path(a.census));
  Trace t = load_trace_file(a.trace);
  SplitPlan plan;
  if (!a.plan_in.empty()) {
    std::ifstream in(a.plan_in, std::ios::binary);
    if (!in) throw DataError("cannot open " + a.plan_in);
    plan = load_plan(in);
  } else {
    AttackSpec spec = AttackSpec::parse(a.attack);
    plan.kind = spec.kind;
    if (spec.kind == AttackKind::process) {
      plan.n = a.n;
    } else if (spec.kind == AttackKind::functional) {
      plan.groups = spec.groups;
      plan.per_group_n.assign(spec.groups.size(), a.n);
    } else {
      std::vector<BenignProfile> profiles;
      if (!a.profiles.empty()) {
        std::ifstream in(a.profiles, std::ios::binary);
        if (!in) throw DataError("cannot open " + a.profiles);
        profiles = load_profiles(in);
      } else {
        Corpus corpus = load_corpus(g.out / "data");
        std::vector<Trace> benign;
        for (const Trace& x : corpus.traces)
          if (x.label == Label::benign) benign.push_back(x);
        profiles = derive_profiles(benign, census);
      }
      const BenignProfile* p = find_profile(profiles, spec.profile_class);
      if (!p) throw DataError("no benign profile for class " + spec.profile_class.to_string());
      plan.mimicry = mimicry_plan(t, census, *p, a.tolerance, g.seed);
    }
  }
  plan.validate();
  auto parts = apply_plan(plan, t, census);

  const fs::path dir = a.dir.empty() ? g.out / "split" : fs::path(a.dir);
  fs::create_directories(dir);
  {
    std::ofstream out(a.plan_out.empty() ? dir / "plan.json" : fs::path(a.plan_out), std::ios::binary);
    save_plan(plan, out);
  }
  char name[32];
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::snprintf(name, sizeof name, "proc_%05zu.jsonl", i);
    save_trace_file(parts[i], dir / name);
  }
  std::printf("processes=%zu dir=%s\n", parts.size(), dir.string().c_str());
}

struct SweepArgs {
  std::string detector = "tiered", attack = "process", data, model, results, profiles;
  std::vector<std::size_t> ns;
  std::size_t max_n = 1024;
  bool no_min_n = false;
  double tolerance = kDefaultRatioTolerance;
};

void cmd_sweep(const SweepArgs& a) {
  DetectorKind d = detector_arg(a.detector);
  ModelBundle b = load_bundle(model_dir(a.model, d));
  Corpus corpus = load_corpus(data_dir(a.data));
  SweepOptions o;
  o.attack = AttackSpec::parse(a.attack);
  if (!a.ns.empty()) o.ns = a.ns;
  o.per_sample = g.per_sample;
  o.max_n = a.max_n;
  o.search_min_n = !a.no_min_n;
  o.tolerance = a.tolerance;
  o.seed = g.seed;
  o.jobs = g.workers();
  std::vector<BenignProfile> profiles;
  if (!a.profiles.empty()) {
    std::ifstream in(a.profiles, std::ios::binary);
    if (!in) throw DataError("cannot open " + a.profiles);
    profiles = load_profiles(in);
  }
  log("sweeping " + o.attack.label() + " against " + a.detector);
  SweepResult r = run_sweep(b, corpus, o, profiles);
  const fs::path dir = a.results.empty() ? g.out / "results" : fs::path(a.results);
  fs::path path = write_sweep(r, dir, o.per_sample);
  for (const SweepRow& row : r.rows)
    std::printf("n=%zu processes=%zu flagged=%zu detection_rate=%.4f fpr=%.4f\n", row.n, row.processes,
                row.flagged, row.detection_rate, row.fpr);
  log("wrote " + path.string());
}

void cmd_report(const std::string& results) {
  const fs::path dir = results.empty() ? g.out / "results" : fs::path(results);
  ReportSummary s = run_report(dir);
  for (const auto& w : s.warnings) log("warning: " + w);
  for (const auto& f : s.written) std::printf("%s\n", (dir / f).string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-level simulator of behavioral ransomware detectors and multi-process evasion"};
  app.require_subcommand(1);
  auto* seed_opt = app.add_option("--seed", g.seed, "Top-level seed")->capture_default_str();
  app.add_option("--config", g.config, "Generator config JSON")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output root")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads (0: all cores)");
  app.add_flag("--per-sample", g.per_sample, "Detection rate over samples instead of processes");
  app.add_flag("--no-timestamps", g.no_timestamps, "Omit wall-clock times from log lines");
  app.fallthrough();

  std::string gen_dir;
  auto* gen = app.add_subcommand("gen", "Generate census, benign and ransomware traces");
  gen->add_option("--data", gen_dir, "Dataset dir (default <out>/data)");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a detector on a 10:1 split");
  train->add_option("--detector", ta.detector, "tiered | windowed")->capture_default_str();
  train->add_option("--data", ta.data, "Dataset dir");
  train->add_option("--model", ta.model, "Model bundle dir (default <out>/model_<detector>)");
  train->add_option("--trees", ta.trees, "Trees per forest")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--coverage", ta.coverage, "File-type coverage reduction: max | mean")->capture_default_str();
  train->add_option("--split-ratio", ta.split_ratio, "Train:test ratio")->capture_default_str()->check(CLI::PositiveNumber);

  std::string det_trace, det_detector = "tiered", det_model, det_census;
  auto* detect = app.add_subcommand("detect", "Classify one trace");
  detect->add_option("trace", det_trace, "Trace JSONL")->required()->check(CLI::ExistingFile);
  detect->add_option("--detector", det_detector)->capture_default_str();
  detect->add_option("--model", det_model);
  detect->add_option("--census", det_census);

  SplitArgs sa;
  auto* split = app.add_subcommand("split", "Split one trace into attacker processes");
  split->add_option("trace", sa.trace, "Trace JSONL")->required()->check(CLI::ExistingFile);
  split->add_option("--attack", sa.attack, "process | functional[:layout] | mimicry[:ops]")->capture_default_str();
  split->add_option("-n", sa.n, "Processes (per group for functional)")->capture_default_str()->check(CLI::PositiveNumber);
  split->add_option("--census", sa.census);
  split->add_option("--profiles", sa.profiles, "Benign profiles JSON for mimicry");
  split->add_option("--plan", sa.plan_in, "Replay a saved plan")->check(CLI::ExistingFile);
  split->add_option("--plan-out", sa.plan_out);
  split->add_option("--dir", sa.dir, "Output dir (default <out>/split)");
  split->add_option("--tolerance", sa.tolerance)->capture_default_str();

  SweepArgs wa;
  auto* sweep = app.add_subcommand("sweep", "Detection rate against an attack over n");
  sweep->add_option("--detector", wa.detector)->capture_default_str();
  sweep->add_option("--attack", wa.attack)->capture_default_str();
  sweep->add_option("--n", wa.ns, "Values of n, strictly increasing")->delimiter(',');
  sweep->add_option("--max-n", wa.max_n)->capture_default_str();
  sweep->add_flag("--no-min-n", wa.no_min_n, "Skip the per-sample minimum-n search");
  sweep->add_option("--data", wa.data);
  sweep->add_option("--model", wa.model);
  sweep->add_option("--results", wa.results, "Results dir (default <out>/results)");
  sweep->add_option("--profiles", wa.profiles);
  sweep->add_option("--tolerance", wa.tolerance)->capture_default_str();

  std::string rep_dir;
  auto* report = app.add_subcommand("report", "Aggregate sweep CSVs into summary.json and figure CSVs");
  report->add_option("--results", rep_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*gen) cmd_gen(gen_dir);
    else if (*train) cmd_train(ta);
    else if (*detect) cmd_detect(det_trace, det_detector, det_model, det_census);
    else if (*split) cmd_split(sa);
    else if (*sweep) cmd_sweep(wa);
    else if (*report) cmd_report(rep_dir);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
