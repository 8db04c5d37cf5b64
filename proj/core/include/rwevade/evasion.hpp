#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rwevade/trace.hpp"

namespace rwevade {

// Op counts in kMainOps order: DL, RD, WT, RN.
using MainOpCounts = std::array<double, 4>;

// Counts fast variants under their base operation.
MainOpCounts count_main_ops(const Trace& trace);

// Split by file: distinct files go round-robin (first-access order) to n
// processes and every event follows its file. Directory listings are dealt
// round-robin by event. Output pids are 0..n-1. Throws std::invalid_argument
// when n < 1.
std::vector<Trace> process_split(const Trace& trace, std::size_t n);

// Routes every event to the group that names its kind (a fast variant falls
// back to the group naming its base kind), then process-splits each group
// with its own count. OP/CL events that no group names follow the nearest
// data operation on the same file: the next one for opens, the previous one
// for closes. Throws std::invalid_argument on overlapping groups, a count
// vector of the wrong length, or a data operation no group covers.
std::vector<Trace> functional_split(const Trace& trace, std::span<const OpSet> groups,
                                    std::span<const std::size_t> per_group_n);

// Behavioral class of benign processes: which main ops they perform and in
// what proportion.
struct BenignProfile {
  OpSet class_ops;
  MainOpCounts ratio{};  // smallest nonzero entry is 1
  double rd_entropy = 0.0;
  double wt_entropy = 0.0;
  double file_access_fraction = 0.0;
  double prevalence = 0.0;  // percent of benign processes in this class
  std::size_t n_traces = 0;

  void validate() const;
};

// Groups benign traces by the set of main ops they perform. Sorted by
// prevalence, highest first. Throws std::invalid_argument on empty input.
std::vector<BenignProfile> derive_profiles(std::span<const Trace> benign, const FileCensus& census);

const BenignProfile* find_profile(std::span<const BenignProfile> profiles, OpSet class_ops);

// Largest relative deviation of the count shares from the ratio shares, over
// ops the ratio uses; infinity if an op outside the ratio occurs.
double ratio_deviation(const MainOpCounts& counts, const MainOpCounts& ratio);

// Dummy DL/RD/WT counts that scale counts up to the ratio. The scale is set
// by the op furthest above the ratio; ops already past their target get none.
MainOpCounts padding_for_ratio(const MainOpCounts& counts, const MainOpCounts& ratio);

// Fewest dummy writes of entropy `dummy_entropy` that bring the mean write
// entropy of `n_real` writes averaging `real_mean` down to `target`.
std::size_t dummy_writes_for_entropy(std::size_t n_real, double real_mean, double dummy_entropy,
                                     double target);

// Smallest process count that keeps every process at or under the file cap.
std::size_t min_processes(std::size_t distinct_files, double file_access_fraction,
                          std::size_t census_files);

struct MimicryProcess {
  std::vector<FileId> files;
  MainOpCounts real{};
  MainOpCounts dummy{};  // RN is never padded
  double real_wt_entropy_sum = 0.0;

  MainOpCounts total() const;
};

struct MimicryPlan {
  BenignProfile profile;
  double tolerance = 0.05;
  std::size_t file_cap = 0;
  std::uint64_t seed = 0;
  std::size_t trace_events = 0;
  std::uint64_t trace_fingerprint = 0;
  std::vector<MimicryProcess> per_process;

  std::size_t n_processes() const { return per_process.size(); }
};

inline constexpr double kDefaultRatioTolerance = 0.05;

// Throws std::invalid_argument("profile cannot host encryption") when the
// profile lacks RD or WT, and DataError when no process count satisfies the
// ratio, entropy and file-cap constraints.
MimicryPlan mimicry_plan(const Trace& ransomware, const FileCensus& census,
                         const BenignProfile& profile, double tolerance = kDefaultRatioTolerance,
                         std::uint64_t seed = 0);

// Materializes the plan: real events keep their timestamps; dummy ops are
// spread evenly over each process's active span and only touch files the
// process has already opened. Throws DataError if the plan was built for a
// different trace.
std::vector<Trace> mimicry_split(const Trace& ransomware, const MimicryPlan& plan,
                                 const FileCensus& census);

// --- replayable plans ---------------------------------------------------------

enum class AttackKind : std::uint8_t { process, functional, mimicry };

std::string_view to_string(AttackKind kind);
std::optional<AttackKind> parse_attack_kind(std::string_view text);

struct SplitPlan {
  AttackKind kind = AttackKind::process;
  std::size_t n = 1;                     // process
  std::vector<OpSet> groups;             // functional
  std::vector<std::size_t> per_group_n;  // functional
  std::optional<MimicryPlan> mimicry;    // mimicry

  void validate() const;
  std::size_t total_processes() const;
};

std::vector<Trace> apply_plan(const SplitPlan& plan, const Trace& trace, const FileCensus& census);

void save_plan(const SplitPlan& plan, std::ostream& out);
SplitPlan load_plan(std::istream& in);

void save_profiles(std::span<const BenignProfile> profiles, std::ostream& out);
std::vector<BenignProfile> load_profiles(std::istream& in);

// --- split-and-query search -----------------------------------------------------

struct MinNProbe {
  std::size_t n = 0;
  std::size_t flagged = 0;
  std::size_t processes = 0;
  double detection_rate() const {
    return processes ? static_cast<double>(flagged) / static_cast<double>(processes) : 0.0;
  }
};

struct MinNResult {
  std::optional<std::size_t> n;  // empty: not found up to max_n
  std::vector<MinNProbe> probes;  // in probe order
};

using FlagFn = std::function<bool(const Trace&)>;
using SplitFn = std::function<std::vector<Trace>(const Trace&, std::size_t)>;

// Doubles n from 1 until no output is flagged (probing max_n last), then
// bisects the bracket. Minimality holds when the detection rate is
// non-increasing in n; otherwise the result is minimal among probed values.
MinNResult min_n_search(const FlagFn& flags, const Trace& trace, const SplitFn& splitter,
                        std::size_t max_n);

}  // namespace rwevade
