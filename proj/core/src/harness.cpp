#include "rwevade/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "rwevade/rng.hpp"

namespace rwevade {

namespace fs = std::filesystem;

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kSplitStream = 0x5b1;
constexpr std::uint64_t kForestStream = 0xf0e;
constexpr std::uint64_t kMimicryPlanStream = 0x3a9;

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Callers write results
// into per-index slots, so the outcome does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
  }
  if (error) std::rethrow_exception(error);
}

std::string format_rate(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

json policy_json(const DetectionPolicy& p) {
  return {{"k_consecutive", p.k_consecutive},
          {"prob_threshold", p.prob_threshold},
          {"window_len_us", p.window_len_us},
          {"window_step_us", p.window_step_us}};
}

DetectionPolicy policy_from(const json& j) {
  DetectionPolicy p;
  p.k_consecutive = j.at("k_consecutive").get<int>();
  p.prob_threshold = j.at("prob_threshold").get<double>();
  p.window_len_us = j.at("window_len_us").get<std::int64_t>();
  p.window_step_us = j.at("window_step_us").get<std::int64_t>();
  return p;
}

json metrics_json(const Metrics& m) {
  return {{"n_ransomware", m.n_ransomware}, {"n_benign", m.n_benign},
          {"true_positives", m.true_positives}, {"false_positives", m.false_positives},
          {"detection_rate", m.detection_rate}, {"fpr", m.fpr}, {"accuracy", m.accuracy}};
}

Metrics metrics_from(const json& j) {
  Metrics m;
  m.n_ransomware = j.at("n_ransomware").get<std::size_t>();
  m.n_benign = j.at("n_benign").get<std::size_t>();
  m.true_positives = j.at("true_positives").get<std::size_t>();
  m.false_positives = j.at("false_positives").get<std::size_t>();
  m.detection_rate = j.at("detection_rate").get<double>();
  m.fpr = j.at("fpr").get<double>();
  m.accuracy = j.at("accuracy").get<double>();
  return m;
}

// A forest that never fires, for tiers no training trace reaches.
Forest constant_forest(const Dataset& data, const TreeParams& params, std::uint64_t seed) {
  Forest f;
  f.params = params;
  f.seed = seed;
  f.feature_names = data.feature_names;
  TreeNode leaf;
  leaf.prob_malicious = data.empty() ? 0.0 : static_cast<double>(data.count_label(1)) /
                                                   static_cast<double>(data.size());
  f.trees.push_back(Tree{{leaf}});
  return f;
}

}  // namespace

// --- corpus --------------------------------------------------------------------------------

std::vector<Label> Corpus::labels() const {
  std::vector<Label> out;
  out.reserve(traces.size());
  for (const Trace& t : traces) out.push_back(t.label);
  return out;
}

std::optional<std::size_t> Corpus::find(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

Corpus generate_corpus(const GenConfig& config, unsigned jobs) {
  config.validate();
  Corpus c;
  c.census = gen_census(config);
  const std::size_t nb = config.n_benign, nr = config.n_ransomware;
  c.traces.resize(nb + nr);
  parallel_for(nb + nr, jobs, [&](std::size_t i) {
    c.traces[i] = i < nb ? gen_benign_trace(c.census, config, i)
                         : gen_ransomware_trace(c.census, config, i - nb);
  });
  char buf[32];
  for (std::size_t i = 0; i < nb + nr; ++i) {
    std::snprintf(buf, sizeof buf, "%s_%05zu", i < nb ? "benign" : "ransomware", i < nb ? i : i - nb);
    c.names.emplace_back(buf);
  }
  return c;
}

void save_corpus(const Corpus& corpus, const GenConfig& config, const fs::path& dir) {
  fs::create_directories(dir / "traces");
  save_census_file(corpus.census, dir / "census.json");
  {
    std::ofstream out(dir / "config.json", std::ios::binary);
    save_config(config, out);
  }
  std::string labels = "name,label\n";
  for (std::size_t i = 0; i < corpus.traces.size(); ++i) {
    save_trace_file(corpus.traces[i], dir / "traces" / (corpus.names[i] + ".jsonl"));
    labels += corpus.names[i] + "," + std::string(to_string(corpus.traces[i].label)) + "\n";
  }
  write_file(dir / "labels.csv", labels);
}

Corpus load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  Corpus c;
  c.census = load_census_file(dir / "census.json");
  std::istringstream labels(read_file(dir / "labels.csv"));
  std::string line;
  std::getline(labels, line);  // header
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 2) throw DataError("labels.csv: malformed row \"" + line + "\"");
    auto label = parse_label(cells[1]);
    if (!label) throw DataError("labels.csv: unknown label \"" + cells[1] + "\"");
    Trace t = load_trace_file(dir / "traces" / (cells[0] + ".jsonl"));
    t.label = *label;
    c.names.push_back(cells[0]);
    c.traces.push_back(std::move(t));
  }
  if (c.traces.empty()) throw DataError("dataset is empty: " + dir.string());
  return c;
}

// --- training -----------------------------------------------------------------------------------

std::string_view to_string(DetectorKind kind) { return kind == DetectorKind::tiered ? "tiered" : "windowed"; }

std::optional<DetectorKind> parse_detector_kind(std::string_view text) {
  if (text == "tiered") return DetectorKind::tiered;
  if (text == "windowed") return DetectorKind::windowed;
  return std::nullopt;
}

Verdict ModelBundle::detect(const Trace& trace, const FileCensus& census) const {
  return detector == DetectorKind::tiered ? tiered_detect(trace, census, tiered, policy)
                                          : windowed_detect(trace, window, policy);
}

ModelBundle train_bundle(const Corpus& corpus, const TrainOptions& options) {
  options.policy.validate();
  if (corpus.traces.empty()) throw DataError("dataset is empty");
  const auto labels = corpus.labels();
  const Partition part = split_train_test(labels, options.split_ratio, derive_seed(options.seed, kSplitStream));

  std::vector<Trace> train;
  train.reserve(part.train.size());
  for (std::size_t i : part.train) train.push_back(corpus.traces[i]);
  bool has[2] = {false, false};
  for (const Trace& t : train) has[t.label == Label::ransomware] = true;
  if (!has[0] || !has[1]) throw DataError("single-class training set");

  ModelBundle b;
  b.detector = options.detector;
  b.policy = options.policy;
  b.seed = options.seed;
  b.split_ratio = options.split_ratio;
  for (std::size_t i : part.test) b.test_names.push_back(corpus.names[i]);

  if (options.detector == DetectorKind::tiered) {
    b.tiered.coverage = options.coverage;
    auto sets = build_training_set(train, corpus.census, b.tiered.spec, b.tiered.schedule, options.coverage);
    for (std::size_t t = 0; t < sets.size(); ++t) {
      const auto seed = derive_seed(options.seed, kForestStream, t);
      const bool both = sets[t].count_label(0) > 0 && sets[t].count_label(1) > 0;
      b.tiered.tiers.push_back(both ? train_forest(sets[t], options.params, options.n_trees, seed, options.jobs)
                                    : constant_forest(sets[t], options.params, seed));
    }
  } else {
    auto set = build_window_training_set(train, options.policy);
    const auto seed = derive_seed(options.seed, kForestStream, 0);
    b.window = train_forest(set, options.params, options.n_trees, seed, options.jobs);
  }

  std::vector<Verdict> verdicts(part.test.size());
  std::vector<Label> test_labels;
  for (std::size_t i : part.test) test_labels.push_back(labels[i]);
  parallel_for(part.test.size(), options.jobs,
               [&](std::size_t k) { verdicts[k] = b.detect(corpus.traces[part.test[k]], corpus.census); });
  if (!verdicts.empty()) b.heldout = evaluate(verdicts, test_labels);
  return b;
}

void save_bundle(const ModelBundle& b, const fs::path& dir) {
  fs::create_directories(dir);
  json m;
  m["v"] = 1;
  m["detector"] = std::string(to_string(b.detector));
  m["seed"] = b.seed;
  m["split_ratio"] = b.split_ratio;
  m["policy"] = policy_json(b.policy);
  json models = json::array();
  if (b.detector == DetectorKind::tiered) {
    m["n_tiers"] = b.tiered.spec.n_tiers;
    m["coverage"] = std::string(to_string(b.tiered.coverage));
    m["schedule"] = b.tiered.schedule.fractions;
    for (std::size_t t = 0; t < b.tiered.tiers.size(); ++t) {
      std::string name = "tier_" + std::to_string(t + 1) + ".json";
      save_model_file(b.tiered.tiers[t], dir / name);
      models.push_back(name);
    }
  } else {
    save_model_file(b.window, dir / "window.json");
    models.push_back("window.json");
  }
  m["models"] = std::move(models);
  m["test"] = b.test_names;
  m["heldout"] = metrics_json(b.heldout);
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

ModelBundle load_bundle(const fs::path& dir) {
  json m;
  try {
    m = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw ModelError(std::string("manifest: malformed JSON: ") + e.what());
  }
  ModelBundle b;
  try {
    if (m.value("v", 0) != 1) throw ModelError("manifest: unsupported version");
    auto kind = parse_detector_kind(m.at("detector").get<std::string>());
    if (!kind) throw ModelError("manifest: unknown detector");
    b.detector = *kind;
    b.seed = m.at("seed").get<std::uint64_t>();
    b.split_ratio = m.at("split_ratio").get<std::size_t>();
    b.policy = policy_from(m.at("policy"));
    b.test_names = m.at("test").get<std::vector<std::string>>();
    b.heldout = metrics_from(m.at("heldout"));
    auto models = m.at("models").get<std::vector<std::string>>();
    if (b.detector == DetectorKind::tiered) {
      b.tiered.spec.n_tiers = m.at("n_tiers").get<int>();
      auto cov = parse_coverage_mode(m.at("coverage").get<std::string>());
      if (!cov) throw ModelError("manifest: unknown coverage mode");
      b.tiered.coverage = *cov;
      b.tiered.schedule.fractions = m.at("schedule").get<std::vector<double>>();
      if (models.size() != static_cast<std::size_t>(b.tiered.spec.n_tiers))
        throw ModelError("manifest: expected one model per tier");
      for (const auto& name : models) b.tiered.tiers.push_back(load_model_file(dir / name));
    } else {
      if (models.size() != 1) throw ModelError("manifest: expected one window model");
      b.window = load_model_file(dir / models[0]);
    }
  } catch (const json::exception& e) {
    throw ModelError(std::string("manifest: ") + e.what());
  }
  return b;
}

// --- attacks ------------------------------------------------------------------------------------

std::string AttackSpec::label() const {
  if (kind == AttackKind::functional) return "functional-" + variant;
  return std::string(to_string(kind));
}

AttackSpec AttackSpec::process() { return {}; }

AttackSpec AttackSpec::functional(std::string variant, std::vector<OpSet> groups) {
  AttackSpec a;
  a.kind = AttackKind::functional;
  a.variant = std::move(variant);
  a.groups = std::move(groups);
  return a;
}

AttackSpec AttackSpec::mimicry(OpSet profile_class) {
  AttackSpec a;
  a.kind = AttackKind::mimicry;
  a.profile_class = profile_class;
  return a;
}

AttackSpec AttackSpec::parse(std::string_view text) {
  using enum OpKind;
  auto colon = text.find(':');
  std::string_view head = text.substr(0, colon);
  std::string_view rest = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (head == "process" && rest.empty()) return process();
  if (head == "mimicry") return mimicry(rest.empty() ? OpSet{DL, RD, WT, RN} : OpSet::parse(rest));
  if (head != "functional") throw std::invalid_argument("unknown attack \"" + std::string(text) + "\"");
  if (rest.empty() || rest == "singleton") return functional("singleton", {{DL}, {RD}, {WT}, {RN}});
  if (rest == "dlrd-wtrn") return functional("dlrd-wtrn", {{DL, RD}, {WT, RN}});
  if (rest == "dlrn-rdwt") return functional("dlrn-rdwt", {{DL, RN}, {RD, WT}});
  if (rest == "cerberus") return functional("cerberus", {{DL}, {WT}, {RD, RN}});
  std::vector<OpSet> groups;
  std::string variant;
  std::size_t start = 0;
  while (start <= rest.size()) {
    auto bar = rest.find('|', start);
    auto piece = rest.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start);
    groups.push_back(OpSet::parse(piece));
    std::string name = groups.back().to_string();
    name.erase(std::remove_if(name.begin(), name.end(), [](char ch) { return ch == '{' || ch == '}' || ch == ','; }),
               name.end());
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
    variant += (variant.empty() ? "" : "-") + name;
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return functional(variant, std::move(groups));
}

namespace {

std::vector<Trace> apply_attack(const AttackSpec& attack, const Trace& trace, std::size_t n) {
  if (attack.kind == AttackKind::process) return process_split(trace, n);
  std::vector<std::size_t> per(attack.groups.size(), n);
  return functional_split(trace, attack.groups, per);
}

}  // namespace

SweepRow sweep_cell(const ModelBundle& bundle, const Corpus& corpus, std::span<const Trace> samples,
                    const AttackSpec& attack, std::size_t n, std::span<const BenignProfile> profiles,
                    const SweepOptions& options) {
  struct Cell {
    std::size_t processes = 0, flagged = 0;
  };
  std::vector<Cell> cells(samples.size());
  const BenignProfile* profile = nullptr;
  if (attack.kind == AttackKind::mimicry) {
    profile = find_profile(profiles, attack.profile_class);
    if (!profile) throw DataError("no benign profile for class " + attack.profile_class.to_string());
  }
  parallel_for(samples.size(), options.jobs, [&](std::size_t i) {
    std::vector<Trace> parts;
    if (profile) {
      auto plan = mimicry_plan(samples[i], corpus.census, *profile, options.tolerance,
                               derive_seed(options.seed, kMimicryPlanStream, i));
      parts = mimicry_split(samples[i], plan, corpus.census);
    } else {
      parts = apply_attack(attack, samples[i], n);
    }
    cells[i].processes = parts.size();
    for (const Trace& p : parts)
      if (bundle.detect(p, corpus.census).malicious) ++cells[i].flagged;
  });

  SweepRow row;
  row.n = n;
  row.samples = samples.size();
  for (const Cell& c : cells) {
    row.processes += c.processes;
    row.flagged += c.flagged;
    if (c.flagged > 0) ++row.samples_flagged;
  }
  if (options.per_sample)
    row.detection_rate = row.samples ? static_cast<double>(row.samples_flagged) / static_cast<double>(row.samples) : 0.0;
  else
    row.detection_rate = row.processes ? static_cast<double>(row.flagged) / static_cast<double>(row.processes) : 0.0;
  return row;
}

SweepResult run_sweep(const ModelBundle& bundle, const Corpus& corpus, const SweepOptions& options,
                      std::span<const BenignProfile> profiles) {
  for (std::size_t i = 1; i < options.ns.size(); ++i)
    if (options.ns[i] <= options.ns[i - 1]) throw std::invalid_argument("sweep values must be strictly increasing");
  if (options.attack.kind != AttackKind::mimicry && options.ns.empty())
    throw std::invalid_argument("sweep needs at least one n");

  std::vector<Trace> samples, benign_test;
  std::vector<std::string> sample_names;
  std::set<std::string> test(bundle.test_names.begin(), bundle.test_names.end());
  for (const auto& name : bundle.test_names) {
    auto idx = corpus.find(name);
    if (!idx) throw DataError("model was trained on a different dataset: missing " + name);
    const Trace& t = corpus.traces[*idx];
    if (t.label == Label::ransomware) {
      samples.push_back(t);
      sample_names.push_back(name);
    } else {
      benign_test.push_back(t);
    }
  }
  if (samples.empty()) throw DataError("no held-out ransomware traces to attack");

  std::vector<BenignProfile> derived;
  if (options.attack.kind == AttackKind::mimicry && profiles.empty()) {
    std::vector<Trace> benign_train;
    for (std::size_t i = 0; i < corpus.traces.size(); ++i)
      if (corpus.traces[i].label == Label::benign && !test.contains(corpus.names[i]))
        benign_train.push_back(corpus.traces[i]);
    derived = derive_profiles(benign_train, corpus.census);
    profiles = derived;
  }

  std::vector<char> benign_flags(benign_test.size(), 0);
  parallel_for(benign_test.size(), options.jobs, [&](std::size_t i) {
    benign_flags[i] = bundle.detect(benign_test[i], corpus.census).malicious;
  });
  const double fpr = benign_test.empty()
                         ? 0.0
                         : static_cast<double>(std::count(benign_flags.begin(), benign_flags.end(), 1)) /
                               static_cast<double>(benign_test.size());

  SweepResult result;
  result.detector = std::string(to_string(bundle.detector));
  result.attack = options.attack.label();
  result.seed = options.seed;
  if (options.attack.kind == AttackKind::mimicry) {
    SweepRow row = sweep_cell(bundle, corpus, samples, options.attack, 0, profiles, options);
    row.fpr = fpr;
    result.rows.push_back(row);
    return result;
  }
  for (std::size_t n : options.ns) {
    SweepRow row = sweep_cell(bundle, corpus, samples, options.attack, n, profiles, options);
    row.fpr = fpr;
    result.rows.push_back(row);
  }

  if (options.search_min_n) {
    result.min_n.resize(samples.size());
    parallel_for(samples.size(), options.jobs, [&](std::size_t i) {
      auto flags = [&](const Trace& t) { return bundle.detect(t, corpus.census).malicious; };
      auto split = [&](const Trace& t, std::size_t n) { return apply_attack(options.attack, t, n); };
      MinNResult r = min_n_search(flags, samples[i], split, options.max_n);
      result.min_n[i] = {sample_names[i], r.n, r.probes.size()};
    });
  }
  return result;
}

fs::path write_sweep(const SweepResult& result, const fs::path& dir, bool per_sample) {
  fs::create_directories(dir);
  const std::string stem = result.detector + "_" + result.attack + "_s" + std::to_string(result.seed) +
                           (per_sample ? "_ps" : "");
  std::string csv = "n,processes,flagged,samples,samples_flagged,detection_rate,fpr\n";
  for (const SweepRow& r : result.rows)
    csv += std::to_string(r.n) + "," + std::to_string(r.processes) + "," + std::to_string(r.flagged) + "," +
           std::to_string(r.samples) + "," + std::to_string(r.samples_flagged) + "," +
           format_rate(r.detection_rate) + "," + format_rate(r.fpr) + "\n";
  fs::path path = dir / ("sweep_" + stem + ".csv");
  write_file(path, csv);
  if (!result.min_n.empty()) {
    std::string m = "sample,min_n,probes\n";
    for (const MinNRow& r : result.min_n)
      m += r.sample + "," + (r.n ? std::to_string(*r.n) : std::string("not_found")) + "," +
           std::to_string(r.probes) + "\n";
    write_file(dir / ("minn_" + stem + ".csv"), m);
  }
  return path;
}

// --- report -------------------------------------------------------------------------------------

namespace {

struct CurveKey {
  std::string detector, attack;
  bool per_sample = false;
  auto operator<=>(const CurveKey&) const = default;
};

struct PointStats {
  std::vector<double> rates;
  std::vector<double> processes;  // per sample
};

struct Curve {
  std::set<std::uint64_t> seeds;
  std::map<std::size_t, PointStats> points;
  std::vector<double> min_n;
  std::size_t not_found = 0;
};

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

ReportSummary run_report(const fs::path& dir) {
  ReportSummary summary;
  std::map<CurveKey, Curve> curves;
  static const std::regex name_re(R"(^(sweep|minn)_(tiered|windowed)_(.+)_s(\d+)(_ps)?\.csv$)");

  std::vector<fs::path> files;
  if (fs::is_directory(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  for (const fs::path& path : files) {
    std::smatch m;
    const std::string name = path.filename().string();
    if (!std::regex_match(name, m, name_re)) continue;
    CurveKey key{m[2], m[3], m[5].matched};
    Curve& curve = curves[key];
    curve.seeds.insert(std::stoull(m[4]));
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto cells = split_csv_line(line);
      try {
        if (m[1] == "sweep") {
          if (cells.size() < 7) throw std::invalid_argument("short row");
          PointStats& p = curve.points[std::stoull(cells[0])];
          p.rates.push_back(std::stod(cells[5]));
          double samples = std::stod(cells[3]);
          p.processes.push_back(samples > 0 ? std::stod(cells[1]) / samples : 0.0);
        } else {
          if (cells.size() < 2) throw std::invalid_argument("short row");
          if (cells[1] == "not_found")
            ++curve.not_found;
          else
            curve.min_n.push_back(std::stod(cells[1]));
        }
      } catch (const std::exception&) {
        summary.warnings.push_back(name + ": skipped malformed row \"" + line + "\"");
      }
    }
  }
  if (curves.empty()) summary.warnings.push_back("no sweep results in " + dir.string());

  json out;
  out["v"] = 1;
  json jc = json::array();
  for (const auto& [key, curve] : curves) {
    json c;
    c["detector"] = key.detector;
    c["attack"] = key.attack;
    c["denominator"] = key.per_sample ? "sample" : "process";
    c["seeds"] = std::vector<std::uint64_t>(curve.seeds.begin(), curve.seeds.end());
    json rows = json::array();
    for (const auto& [n, p] : curve.points) {
      rows.push_back({{"n", n},
                      {"processes", mean_of(p.processes)},
                      {"detection_rate_mean", mean_of(p.rates)},
                      {"detection_rate_min", *std::min_element(p.rates.begin(), p.rates.end())},
                      {"detection_rate_max", *std::max_element(p.rates.begin(), p.rates.end())}});
    }
    c["rows"] = std::move(rows);
    if (!curve.min_n.empty() || curve.not_found > 0) {
      json mn;
      mn["found"] = curve.min_n.size();
      mn["not_found"] = curve.not_found;
      if (!curve.min_n.empty()) {
        mn["mean"] = mean_of(curve.min_n);
        mn["min"] = *std::min_element(curve.min_n.begin(), curve.min_n.end());
        mn["max"] = *std::max_element(curve.min_n.begin(), curve.min_n.end());
      }
      c["min_n"] = std::move(mn);
    }
    jc.push_back(std::move(c));
  }

  struct Figure {
    const char* file;
    const char* detector;
    std::vector<std::string> attacks;
  };
  const std::vector<Figure> figures{
      {"fig3.csv", "tiered", {"process"}},
      {"fig4a.csv", "tiered", {"functional-singleton"}},
      {"fig4b.csv", "tiered", {"functional-dlrd-wtrn", "functional-dlrn-rdwt"}},
      {"fig5.csv", "windowed", {"process"}},
      {"fig6a.csv", "windowed", {"functional-singleton"}},
      {"fig6b.csv", "windowed", {"functional-dlrd-wtrn", "functional-dlrn-rdwt"}},
      {"mimicry.csv", "", {"mimicry"}},
  };
  json figs = json::object();
  for (const Figure& fig : figures) {
    std::string csv = "detector,attack,n,processes,seeds,detection_rate_mean,detection_rate_min,detection_rate_max\n";
    bool any = false;
    for (const auto& [key, curve] : curves) {
      if (key.per_sample) continue;
      if (*fig.detector && key.detector != fig.detector) continue;
      if (std::find(fig.attacks.begin(), fig.attacks.end(), key.attack) == fig.attacks.end()) continue;
      for (const auto& [n, p] : curve.points) {
        any = true;
        csv += key.detector + "," + key.attack + "," + std::to_string(n) + "," + format_rate(mean_of(p.processes)) +
               "," + std::to_string(p.rates.size()) + "," + format_rate(mean_of(p.rates)) + "," +
               format_rate(*std::min_element(p.rates.begin(), p.rates.end())) + "," +
               format_rate(*std::max_element(p.rates.begin(), p.rates.end())) + "\n";
      }
    }
    if (!any) {
      if (!curves.empty()) summary.warnings.push_back(std::string(fig.file) + ": no matching sweep");
      continue;
    }
    write_file(dir / fig.file, csv);
    figs[fig.file] = fig.attacks;
    summary.written.emplace_back(fig.file);
  }

  out["warnings"] = summary.warnings;
  out["curves"] = std::move(jc);
  out["figures"] = std::move(figs);
  fs::create_directories(dir);
  write_file(dir / "summary.json", out.dump(2) + "\n");
  summary.written.insert(summary.written.begin(), "summary.json");
  return summary;
}

}  // namespace rwevade
