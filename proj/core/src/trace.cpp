#include "rwevade/trace.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "json.hpp"

namespace rwevade {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::array<std::string_view, kOpKindCount> kOpNames{
    "DL", "RD", "WT", "RN", "OP", "CL", "FRD", "FWT", "FOP", "FCL", "CREATE", "DELETE"};

constexpr int kTraceFormatVersion = 1;
constexpr int kCensusFormatVersion = 1;

std::string trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

template <typename T>
std::optional<T> optional_field(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

bool flag_field(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return false;
  if (!it->is_boolean()) throw std::invalid_argument(std::string(key) + " must be boolean");
  return it->get<bool>();
}

IrpEvent parse_event(const nlohmann::json& obj, std::size_t line) {
  if (!obj.is_object()) throw TraceParseError(line, "expected a JSON object");
  IrpEvent ev;
  try {
    if (!obj.contains("ts_us") || !obj.contains("op"))
      throw TraceParseError(line, "missing required key ts_us or op");
    ev.ts_us = obj.at("ts_us").get<std::int64_t>();
    ev.pid = optional_field<std::int64_t>(obj, "pid").value_or(0);
    auto op_name = obj.at("op").get<std::string>();
    auto op = parse_op_kind(op_name);
    if (!op) throw TraceParseError(line, "unknown op \"" + op_name + "\"");
    ev.op = *op;
    ev.file_id = optional_field<std::uint64_t>(obj, "file_id").value_or(kNoFile);
    ev.dir_id = optional_field<std::uint64_t>(obj, "dir_id").value_or(kRootDir);
    ev.offset = optional_field<std::uint64_t>(obj, "offset");
    ev.length = optional_field<std::uint64_t>(obj, "length");
    ev.entropy = optional_field<double>(obj, "entropy");
    ev.preserves_magic = flag_field(obj, "preserves_magic");
    ev.is_dummy = flag_field(obj, "is_dummy");
  } catch (const TraceParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw TraceParseError(line, std::string("bad field: ") + e.what());
  }
  if (ev.entropy && !(*ev.entropy >= 0.0 && *ev.entropy <= 1.0))
    throw TraceParseError(line, "entropy out of range");
  return ev;
}

ojson event_to_json(const IrpEvent& ev) {
  ojson obj;
  obj["ts_us"] = ev.ts_us;
  obj["pid"] = ev.pid;
  obj["op"] = std::string(to_string(ev.op));
  obj["file_id"] = ev.file_id;
  obj["dir_id"] = ev.dir_id;
  if (ev.offset) obj["offset"] = *ev.offset;
  if (ev.length) obj["length"] = *ev.length;
  if (ev.entropy) obj["entropy"] = *ev.entropy;
  if (ev.preserves_magic) obj["preserves_magic"] = true;
  if (ev.is_dummy) obj["is_dummy"] = true;
  return obj;
}

}  // namespace

std::string_view to_string(OpKind op) { return kOpNames[static_cast<std::size_t>(op)]; }

std::optional<OpKind> parse_op_kind(std::string_view text) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i)
    if (kOpNames[i] == text) return static_cast<OpKind>(i);
  return std::nullopt;
}

OpKind base_kind(OpKind op) {
  switch (op) {
    case OpKind::FRD: return OpKind::RD;
    case OpKind::FWT: return OpKind::WT;
    case OpKind::FOP: return OpKind::OP;
    case OpKind::FCL: return OpKind::CL;
    default: return op;
  }
}

bool is_fast(OpKind op) { return base_kind(op) != op; }

bool carries_payload(OpKind op) {
  auto b = base_kind(op);
  return b == OpKind::RD || b == OpKind::WT;
}

bool is_bracketing(OpKind op) {
  auto b = base_kind(op);
  return b == OpKind::OP || b == OpKind::CL;
}

int main_op_index(OpKind op) {
  switch (base_kind(op)) {
    case OpKind::DL: return 0;
    case OpKind::RD: return 1;
    case OpKind::WT: return 2;
    case OpKind::RN: return 3;
    default: return -1;
  }
}

std::size_t OpSet::size() const {
  std::size_t n = 0;
  for (auto b = bits_; b != 0; b &= static_cast<std::uint16_t>(b - 1)) ++n;
  return n;
}

std::vector<OpKind> OpSet::kinds() const {
  std::vector<OpKind> out;
  for (OpKind op : kAllOpKinds)
    if (contains(op)) out.push_back(op);
  return out;
}

std::string OpSet::to_string() const {
  std::string s = "{";
  bool first = true;
  for (OpKind op : kinds()) {
    if (!first) s += ',';
    s += rwevade::to_string(op);
    first = false;
  }
  return s + "}";
}

OpSet OpSet::parse(std::string_view text) {
  auto body = trim(text);
  if (!body.empty() && body.front() == '{') body.erase(body.begin());
  if (!body.empty() && body.back() == '}') body.pop_back();
  OpSet set;
  std::size_t start = 0;
  while (start <= body.size()) {
    auto end = body.find_first_of(",+", start);
    if (end == std::string::npos) end = body.size();
    auto token = trim(std::string_view(body).substr(start, end - start));
    if (!token.empty()) {
      auto op = parse_op_kind(token);
      if (!op) throw std::invalid_argument("unknown op kind \"" + token + "\"");
      set.insert(*op);
    }
    start = end + 1;
  }
  if (set.empty()) throw std::invalid_argument("empty op set \"" + std::string(text) + "\"");
  return set;
}

std::string_view to_string(Label label) {
  return label == Label::ransomware ? "ransomware" : "benign";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "benign") return Label::benign;
  if (text == "ransomware") return Label::ransomware;
  return std::nullopt;
}

std::set<Pid> Trace::pids() const {
  std::set<Pid> out;
  for (const auto& ev : events) out.insert(ev.pid);
  return out;
}

std::vector<FileId> Trace::files_in_access_order() const {
  std::vector<FileId> order;
  std::unordered_set<FileId> seen;
  for (const auto& ev : events)
    if (ev.file_id != kNoFile && seen.insert(ev.file_id).second) order.push_back(ev.file_id);
  return order;
}

void Trace::sort_events() {
  std::stable_sort(events.begin(), events.end(),
                   [](const IrpEvent& a, const IrpEvent& b) { return a.ts_us < b.ts_us; });
}

FileCensus::FileCensus(std::map<FileId, FileInfo> files, std::map<DirId, DirId> dir_parents)
    : files_(std::move(files)), dirs_(std::move(dir_parents)) {
  if (files_.empty()) throw DataError("census: at least one file required");
  if (files_.contains(kNoFile)) throw DataError("census: file id 0 is reserved");
  auto root = dirs_.find(kRootDir);
  if (root == dirs_.end() || root->second != kRootDir)
    throw DataError("census: directory tree must be rooted at dir 0");
  for (const auto& [id, parent] : dirs_) {
    // Walk to the root; a chain longer than the dir count means a cycle.
    DirId cur = id;
    std::size_t steps = 0;
    while (cur != kRootDir) {
      auto it = dirs_.find(cur);
      if (it == dirs_.end())
        throw DataError("census: dir " + std::to_string(id) + " has unknown ancestor");
      cur = it->second;
      if (++steps > dirs_.size())
        throw DataError("census: cycle through dir " + std::to_string(id));
    }
    (void)parent;
  }
  for (const auto& [id, info] : files_)
    if (!dirs_.contains(info.dir_id))
      throw DataError("census: file " + std::to_string(id) + " in unknown dir");
  totals_ = compute_totals(files_);
}

const FileInfo& FileCensus::file(FileId id) const {
  auto it = files_.find(id);
  if (it == files_.end()) throw DataError("census: unknown file_id " + std::to_string(id));
  return it->second;
}

std::size_t FileCensus::count_with_ext(const std::string& ext) const {
  auto it = totals_.find(ext);
  return it == totals_.end() ? 0 : it->second;
}

std::map<std::string, std::size_t> FileCensus::compute_totals(
    const std::map<FileId, FileInfo>& files) {
  std::map<std::string, std::size_t> totals;
  for (const auto& [id, info] : files) ++totals[info.ext];
  return totals;
}

Trace load_trace(std::istream& in) {
  Trace trace;
  std::string raw;
  std::size_t line_no = 0;
  bool seen_record = false;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw TraceParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!seen_record && obj.is_object() && obj.contains("v") && !obj.contains("op")) {
      seen_record = true;
      if (!obj["v"].is_number_integer() || obj["v"].get<int>() != kTraceFormatVersion)
        throw TraceParseError(line_no, "unsupported trace format version");
      if (auto it = obj.find("label"); it != obj.end()) {
        auto label = it->is_string() ? parse_label(it->get<std::string>()) : std::nullopt;
        if (!label) throw TraceParseError(line_no, "unknown label");
        trace.label = *label;
      }
      continue;
    }
    seen_record = true;
    trace.events.push_back(parse_event(obj, line_no));
  }
  trace.sort_events();
  return trace;
}

void save_trace(const Trace& trace, std::ostream& out) {
  // A zero-event benign trace serializes to nothing: it is what an empty
  // stream loads as.
  if (trace.events.empty() && trace.label == Label::benign) return;
  ojson header;
  header["v"] = kTraceFormatVersion;
  header["label"] = std::string(to_string(trace.label));
  out << header.dump() << '\n';
  for (const auto& ev : trace.events) out << event_to_json(ev).dump() << '\n';
  if (!out) throw DataError("failed writing trace");
}

Trace load_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace " + path.string());
  return load_trace(in);
}

void save_trace_file(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write trace " + path.string());
  save_trace(trace, out);
}

FileCensus load_census(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("census: malformed JSON: ") + e.what());
  }
  try {
    if (doc.value("v", 0) != kCensusFormatVersion)
      throw DataError("census: unsupported format version");
    std::map<FileId, FileInfo> files;
    for (const auto& f : doc.at("files")) {
      auto id = f.at("id").get<FileId>();
      FileInfo info{f.at("ext").get<std::string>(), f.at("size").get<std::uint64_t>(),
                    f.at("dir").get<DirId>()};
      if (!files.emplace(id, std::move(info)).second)
        throw DataError("census: duplicate file id " + std::to_string(id));
    }
    std::map<DirId, DirId> dirs;
    for (const auto& d : doc.at("dirs")) {
      auto id = d.at("id").get<DirId>();
      auto parent = d.at("parent").is_null() ? id : d.at("parent").get<DirId>();
      if (!dirs.emplace(id, parent).second)
        throw DataError("census: duplicate dir id " + std::to_string(id));
    }
    return FileCensus(std::move(files), std::move(dirs));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("census: ") + e.what());
  }
}

void save_census(const FileCensus& census, std::ostream& out) {
  ojson doc;
  doc["v"] = kCensusFormatVersion;
  auto files = ojson::array();
  for (const auto& [id, info] : census.files())
    files.push_back({{"id", id}, {"ext", info.ext}, {"size", info.size}, {"dir", info.dir_id}});
  auto dirs = ojson::array();
  for (const auto& [id, parent] : census.dirs()) {
    ojson d{{"id", id}};
    d["parent"] = id == kRootDir ? ojson(nullptr) : ojson(parent);
    dirs.push_back(std::move(d));
  }
  doc["files"] = std::move(files);
  doc["dirs"] = std::move(dirs);
  out << doc.dump() << '\n';
  if (!out) throw DataError("failed writing census");
}

FileCensus load_census_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open census " + path.string());
  return load_census(in);
}

void save_census_file(const FileCensus& census, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write census " + path.string());
  save_census(census, out);
}

std::vector<Violation> validate_trace(const Trace& trace, const FileCensus& census) {
  std::vector<Violation> out;
  auto flag = [&](std::size_t i, std::string msg) { out.push_back({i, std::move(msg)}); };
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const auto& ev = trace.events[i];
    if (ev.ts_us < 0) flag(i, "negative timestamp");
    if (i > 0 && ev.ts_us < trace.events[i - 1].ts_us) flag(i, "events out of order");
    if (ev.file_id != kNoFile && !census.has_file(ev.file_id)) flag(i, "unknown file_id");
    if (!census.has_dir(ev.dir_id)) flag(i, "unknown dir_id");
    if (ev.op == OpKind::DL && ev.file_id != kNoFile) flag(i, "directory listing with file_id");
    if (ev.op != OpKind::DL && ev.file_id == kNoFile) flag(i, "file operation without file_id");
    if (carries_payload(ev.op)) {
      if (!ev.length || *ev.length < 1) flag(i, "missing length");
    } else if (ev.entropy) {
      flag(i, "entropy on non-payload op");
    }
    if (ev.entropy && !(*ev.entropy >= 0.0 && *ev.entropy <= 1.0))
      flag(i, "entropy out of range");
    if (ev.is_dummy) {
      if (ev.op != OpKind::DL && ev.op != OpKind::RD && ev.op != OpKind::WT)
        flag(i, "dummy op kind");
      if (ev.op == OpKind::WT && (!ev.entropy || *ev.entropy > kDummyWriteEntropyMax))
        flag(i, "dummy write entropy too high");
    }
  }
  return out;
}

}  // namespace rwevade
