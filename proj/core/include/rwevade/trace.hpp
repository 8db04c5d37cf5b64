#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rwevade/errors.hpp"

namespace rwevade {

using FileId = std::uint64_t;
using DirId = std::uint64_t;
using Pid = std::int64_t;

inline constexpr FileId kNoFile = 0;
inline constexpr DirId kRootDir = 0;

// One kind per IRP. The fast-I/O variants are separate kinds and are never
// derived from timing.
enum class OpKind : std::uint8_t {
  DL,  // directory listing
  RD,
  WT,
  RN,
  OP,
  CL,
  FRD,
  FWT,
  FOP,
  FCL,
  CREATE,
  DELETE,
};

inline constexpr std::size_t kOpKindCount = 12;

inline constexpr std::array<OpKind, kOpKindCount> kAllOpKinds{
    OpKind::DL,  OpKind::RD,  OpKind::WT,  OpKind::RN,  OpKind::OP,     OpKind::CL,
    OpKind::FRD, OpKind::FWT, OpKind::FOP, OpKind::FCL, OpKind::CREATE, OpKind::DELETE};

// The four operations behavioral profiles are built from, in table order.
inline constexpr std::array<OpKind, 4> kMainOps{OpKind::DL, OpKind::RD, OpKind::WT, OpKind::RN};

std::string_view to_string(OpKind op);
std::optional<OpKind> parse_op_kind(std::string_view text);

// FRD -> RD, FWT -> WT, FOP -> OP, FCL -> CL; identity otherwise.
OpKind base_kind(OpKind op);
bool is_fast(OpKind op);
// RD/WT and their fast variants carry offset, length and payload entropy.
bool carries_payload(OpKind op);
// OP/CL and their fast variants only bracket file activity.
bool is_bracketing(OpKind op);
inline bool is_write(OpKind op) { return base_kind(op) == OpKind::WT; }

// Index of op in kMainOps after folding fast variants, or -1.
int main_op_index(OpKind op);

// Small value-type set of OpKinds.
class OpSet {
 public:
  constexpr OpSet() = default;
  OpSet(std::initializer_list<OpKind> ops) {
    for (OpKind op : ops) insert(op);
  }

  void insert(OpKind op) { bits_ |= bit(op); }
  bool contains(OpKind op) const { return (bits_ & bit(op)) != 0; }
  bool empty() const { return bits_ == 0; }
  std::size_t size() const;
  bool intersects(OpSet other) const { return (bits_ & other.bits_) != 0; }
  bool includes(OpSet other) const { return (bits_ & other.bits_) == other.bits_; }
  std::vector<OpKind> kinds() const;
  std::uint16_t bits() const { return bits_; }

  // "{DL,RD,WT,RN}"
  std::string to_string() const;
  // Accepts "DL,RD" or "{DL,RD}"; throws std::invalid_argument.
  static OpSet parse(std::string_view text);

  friend bool operator==(OpSet, OpSet) = default;
  friend auto operator<=>(OpSet, OpSet) = default;

 private:
  static constexpr std::uint16_t bit(OpKind op) {
    return static_cast<std::uint16_t>(1u << static_cast<unsigned>(op));
  }
  std::uint16_t bits_ = 0;
};

enum class Label : std::uint8_t { benign, ransomware };

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);

struct IrpEvent {
  std::int64_t ts_us = 0;
  Pid pid = 0;
  OpKind op = OpKind::RD;
  FileId file_id = kNoFile;  // DL targets dir_id instead
  DirId dir_id = kRootDir;
  std::optional<std::uint64_t> offset;
  std::optional<std::uint64_t> length;
  std::optional<double> entropy;  // normalized to [0,1]
  bool preserves_magic = false;
  bool is_dummy = false;

  friend bool operator==(const IrpEvent&, const IrpEvent&) = default;
};

// Dummy writes are low-entropy by construction.
inline constexpr double kDummyWriteEntropyMax = 0.05;

struct Trace {
  std::vector<IrpEvent> events;
  Label label = Label::benign;

  std::set<Pid> pids() const;
  // Distinct non-zero file ids in first-access order.
  std::vector<FileId> files_in_access_order() const;
  // Stable sort by ts_us.
  void sort_events();

  friend bool operator==(const Trace&, const Trace&) = default;
};

struct FileInfo {
  std::string ext;
  std::uint64_t size = 0;
  DirId dir_id = kRootDir;

  friend bool operator==(const FileInfo&, const FileInfo&) = default;
};

// The simulated filesystem. Directory graph is a tree rooted at dir 0 (whose
// parent is itself).
class FileCensus {
 public:
  FileCensus() = default;
  // Throws DataError if any invariant is violated.
  FileCensus(std::map<FileId, FileInfo> files, std::map<DirId, DirId> dir_parents);

  const std::map<FileId, FileInfo>& files() const { return files_; }
  const std::map<DirId, DirId>& dirs() const { return dirs_; }
  const std::map<std::string, std::size_t>& totals() const { return totals_; }

  std::size_t file_count() const { return files_.size(); }
  std::size_t dir_count() const { return dirs_.size(); }
  bool has_file(FileId id) const { return files_.contains(id); }
  bool has_dir(DirId id) const { return dirs_.contains(id); }
  const FileInfo& file(FileId id) const;
  std::size_t count_with_ext(const std::string& ext) const;

  // Recomputes per-extension totals from the file map.
  static std::map<std::string, std::size_t> compute_totals(const std::map<FileId, FileInfo>& files);

  friend bool operator==(const FileCensus&, const FileCensus&) = default;

 private:
  std::map<FileId, FileInfo> files_;
  std::map<DirId, DirId> dirs_;
  std::map<std::string, std::size_t> totals_;
};

struct Violation {
  std::size_t event_index = 0;
  std::string message;
};

// JSONL trace format, optional {"v":1,"label":...} header line.
Trace load_trace(std::istream& in);
void save_trace(const Trace& trace, std::ostream& out);
Trace load_trace_file(const std::filesystem::path& path);
void save_trace_file(const Trace& trace, const std::filesystem::path& path);

FileCensus load_census(std::istream& in);
void save_census(const FileCensus& census, std::ostream& out);
FileCensus load_census_file(const std::filesystem::path& path);
void save_census_file(const FileCensus& census, const std::filesystem::path& path);

// Empty iff every event and trace invariant holds against census.
std::vector<Violation> validate_trace(const Trace& trace, const FileCensus& census);

}  // namespace rwevade
