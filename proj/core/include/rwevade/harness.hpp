#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rwevade/detectors.hpp"
#include "rwevade/evasion.hpp"
#include "rwevade/forest.hpp"
#include "rwevade/synthgen.hpp"
#include "rwevade/trace.hpp"

namespace rwevade {

// A census plus named, labelled traces. On disk: census.json, config.json,
// traces/<name>.jsonl and labels.csv.
struct Corpus {
  FileCensus census;
  std::vector<Trace> traces;
  std::vector<std::string> names;

  std::vector<Label> labels() const;
  std::optional<std::size_t> find(const std::string& name) const;
};

Corpus generate_corpus(const GenConfig& config, unsigned jobs = 1);
void save_corpus(const Corpus& corpus, const GenConfig& config, const std::filesystem::path& dir);
// Throws DataError when the directory or any listed trace is missing.
Corpus load_corpus(const std::filesystem::path& dir);

enum class DetectorKind : std::uint8_t { tiered, windowed };

std::string_view to_string(DetectorKind kind);
std::optional<DetectorKind> parse_detector_kind(std::string_view text);

struct TrainOptions {
  DetectorKind detector = DetectorKind::tiered;
  std::uint64_t seed = 1;
  int n_trees = kDefaultTrees;
  TreeParams params;
  std::size_t split_ratio = 10;
  DetectionPolicy policy;
  CoverageMode coverage = CoverageMode::max;
  unsigned jobs = 1;
};

// A trained detector together with the partition it was evaluated on.
struct ModelBundle {
  DetectorKind detector = DetectorKind::tiered;
  TieredModels tiered;   // tiered only
  Forest window;         // windowed only
  DetectionPolicy policy;
  std::uint64_t seed = 0;
  std::size_t split_ratio = 10;
  std::vector<std::string> test_names;
  Metrics heldout;

  Verdict detect(const Trace& trace, const FileCensus& census) const;
};

// Seeded split_ratio:1 partition by trace, training, and held-out metrics.
// Throws DataError("single-class training set") when the training part lacks
// either label.
ModelBundle train_bundle(const Corpus& corpus, const TrainOptions& options);

// manifest.json plus tier_<t>.json or window.json.
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);
ModelBundle load_bundle(const std::filesystem::path& dir);

// --- sweeps --------------------------------------------------------------------

struct AttackSpec {
  AttackKind kind = AttackKind::process;
  std::string variant;       // names the group layout, e.g. "singleton"
  std::vector<OpSet> groups; // functional
  OpSet profile_class{OpKind::DL, OpKind::RD, OpKind::WT, OpKind::RN};  // mimicry

  std::string label() const;  // "process", "functional-singleton", ...
  static AttackSpec process();
  static AttackSpec functional(std::string variant, std::vector<OpSet> groups);
  static AttackSpec mimicry(OpSet profile_class);
  // "process", "functional:singleton", "functional:combined",
  // "functional:cerberus", "functional:DL|RD,WT|RN", "mimicry[:DL,RD,WT,RN]".
  static AttackSpec parse(std::string_view text);
};

struct SweepOptions {
  AttackSpec attack;
  std::vector<std::size_t> ns{1, 2, 4, 8, 16, 32, 64, 128, 256};  // per group for functional
  bool per_sample = false;
  std::size_t max_n = 1024;
  bool search_min_n = true;
  double tolerance = kDefaultRatioTolerance;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
};

struct SweepRow {
  std::size_t n = 0;          // per-group count; mimicry: 0
  std::size_t processes = 0;  // split processes over all samples
  std::size_t flagged = 0;
  std::size_t samples = 0;
  std::size_t samples_flagged = 0;
  double detection_rate = 0.0;  // by process, or by sample with per_sample
  double fpr = 0.0;             // held-out benign traces, unaffected by the attack
};

struct MinNRow {
  std::string sample;
  std::optional<std::size_t> n;
  std::size_t probes = 0;
};

struct SweepResult {
  std::string detector;
  std::string attack;
  std::uint64_t seed = 0;
  std::vector<SweepRow> rows;
  std::vector<MinNRow> min_n;
};

// Attacks every held-out ransomware trace. Mimicry profiles are derived from
// the training partition's benign traces unless `profiles` is given.
SweepResult run_sweep(const ModelBundle& bundle, const Corpus& corpus, const SweepOptions& options,
                      std::span<const BenignProfile> profiles = {});

// Flag/sample counts for one attack at one n, exposed for single-cell reruns.
SweepRow sweep_cell(const ModelBundle& bundle, const Corpus& corpus, std::span<const Trace> samples,
                    const AttackSpec& attack, std::size_t n, std::span<const BenignProfile> profiles,
                    const SweepOptions& options);

// sweep_<detector>_<attack>_s<seed>.csv and the matching minn_ file.
std::filesystem::path write_sweep(const SweepResult& result, const std::filesystem::path& dir,
                                  bool per_sample);

struct ReportSummary {
  std::vector<std::string> warnings;
  std::vector<std::string> written;  // file names relative to the output dir
};

// Aggregates every sweep CSV in dir (mean and range over seeds) into
// summary.json and per-figure CSVs.
ReportSummary run_report(const std::filesystem::path& dir);

}  // namespace rwevade
