#include "rwevade/evasion.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "rwevade/rng.hpp"

namespace rwevade {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kMimicryStream = 0x6d696d6963ULL;
constexpr std::size_t kDL = 0, kRD = 1, kWT = 2, kRN = 3;

std::vector<Trace> empty_outputs(std::size_t n, Label label) {
  std::vector<Trace> out(n);
  for (auto& t : out) t.label = label;
  return out;
}

// Assignment of events to n outputs: files round-robin by first access,
// file-less events round-robin by event. Returns the output index per event.
std::vector<std::size_t> assign_round_robin(const Trace& trace, std::size_t n) {
  std::unordered_map<FileId, std::size_t> owner;
  std::size_t next_file = 0, next_free = 0;
  std::vector<std::size_t> dest(trace.events.size());
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const IrpEvent& e = trace.events[i];
    if (e.file_id == kNoFile) {
      dest[i] = next_free++ % n;
      continue;
    }
    auto [it, fresh] = owner.try_emplace(e.file_id, next_file % n);
    if (fresh) ++next_file;
    dest[i] = it->second;
  }
  return dest;
}

std::uint64_t fingerprint(const Trace& trace) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const IrpEvent& e : trace.events) {
    mix(static_cast<std::uint64_t>(e.ts_us));
    mix(static_cast<std::uint64_t>(e.op));
    mix(e.file_id);
    mix(e.dir_id);
  }
  return h;
}

double total(const MainOpCounts& c) { return c[0] + c[1] + c[2] + c[3]; }

}  // namespace

MainOpCounts count_main_ops(const Trace& trace) {
  MainOpCounts c{};
  for (const IrpEvent& e : trace.events) {
    int k = main_op_index(e.op);
    if (k >= 0) c[static_cast<std::size_t>(k)] += 1.0;
  }
  return c;
}

std::vector<Trace> process_split(const Trace& trace, std::size_t n) {
  if (n < 1) throw std::invalid_argument("process_split: n must be >= 1");
  auto out = empty_outputs(n, trace.label);
  auto dest = assign_round_robin(trace, n);
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    IrpEvent e = trace.events[i];
    e.pid = static_cast<Pid>(dest[i]);
    out[dest[i]].events.push_back(e);
  }
  return out;
}

std::vector<Trace> functional_split(const Trace& trace, std::span<const OpSet> groups,
                                    std::span<const std::size_t> per_group_n) {
  if (groups.empty()) throw std::invalid_argument("functional_split: no groups");
  if (per_group_n.size() != groups.size())
    throw std::invalid_argument("functional_split: per-group counts do not match groups");
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw std::invalid_argument("functional_split: empty group");
    if (per_group_n[g] < 1) throw std::invalid_argument("functional_split: group count must be >= 1");
    for (std::size_t h = 0; h < g; ++h)
      if (groups[g].intersects(groups[h]))
        throw std::invalid_argument("functional_split: overlapping groups " + groups[h].to_string() +
                                    " and " + groups[g].to_string());
  }

  auto route = [&](OpKind op) -> int {
    for (std::size_t g = 0; g < groups.size(); ++g)
      if (groups[g].contains(op)) return static_cast<int>(g);
    if (is_fast(op))
      for (std::size_t g = 0; g < groups.size(); ++g)
        if (groups[g].contains(base_kind(op))) return static_cast<int>(g);
    return -1;
  };

  const auto& ev = trace.events;
  std::vector<int> group(ev.size(), -1);
  std::unordered_map<FileId, std::vector<std::size_t>> by_file;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    group[i] = route(ev[i].op);
    if (group[i] < 0 && !is_bracketing(ev[i].op))
      throw std::invalid_argument(std::string("functional_split: no group covers ") +
                                  std::string(to_string(ev[i].op)));
    if (ev[i].file_id != kNoFile) by_file[ev[i].file_id].push_back(i);
  }

  // Unnamed opens follow the next data op on their file, closes the previous.
  for (auto& [file, idx] : by_file) {
    for (std::size_t p = 0; p < idx.size(); ++p) {
      std::size_t i = idx[p];
      if (group[i] >= 0) continue;
      bool is_open = base_kind(ev[i].op) == OpKind::OP;
      int found = -1;
      auto scan_forward = [&] {
        for (std::size_t q = p + 1; q < idx.size() && found < 0; ++q)
          if (!is_bracketing(ev[idx[q]].op) || route(ev[idx[q]].op) >= 0) found = group[idx[q]];
      };
      auto scan_backward = [&] {
        for (std::size_t q = p; q-- > 0 && found < 0;)
          if (!is_bracketing(ev[idx[q]].op) || route(ev[idx[q]].op) >= 0) found = group[idx[q]];
      };
      if (is_open) {
        scan_forward();
        if (found < 0) scan_backward();
      } else {
        scan_backward();
        if (found < 0) scan_forward();
      }
      group[i] = found < 0 ? 0 : found;
    }
  }

  std::vector<Trace> sub = empty_outputs(groups.size(), trace.label);
  for (std::size_t i = 0; i < ev.size(); ++i) sub[static_cast<std::size_t>(group[i])].events.push_back(ev[i]);

  std::vector<Trace> out;
  Pid offset = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (Trace& t : process_split(sub[g], per_group_n[g])) {
      for (IrpEvent& e : t.events) e.pid += offset;
      out.push_back(std::move(t));
    }
    offset += static_cast<Pid>(per_group_n[g]);
  }
  return out;
}

// --- profiles --------------------------------------------------------------------

void BenignProfile::validate() const {
  bool positive = false;
  for (double w : ratio) {
    if (!std::isfinite(w) || w < 0) throw std::invalid_argument("profile ratio weights must be >= 0");
    positive = positive || w > 0;
  }
  if (!positive) throw std::invalid_argument("profile ratio has no positive weight");
  // a listing-only class touches no files at all
  const bool lists_only = OpSet{OpKind::DL}.includes(class_ops);
  const double lo = lists_only ? 0.0 : std::numeric_limits<double>::min();
  if (!(file_access_fraction >= lo && file_access_fraction <= 1.0))
    throw std::invalid_argument("profile file_access_fraction must be in (0,1]");
  if (rd_entropy < 0 || rd_entropy > 1 || wt_entropy < 0 || wt_entropy > 1)
    throw std::invalid_argument("profile entropy out of range");
}

std::vector<BenignProfile> derive_profiles(std::span<const Trace> benign, const FileCensus& census) {
  if (benign.empty()) throw std::invalid_argument("derive_profiles: no benign traces");
  if (census.file_count() == 0) throw std::invalid_argument("derive_profiles: empty census");

  struct Acc {
    std::size_t n = 0;
    MainOpCounts share_sum{};
    double rd_sum = 0, wt_sum = 0, access_sum = 0;
    std::size_t rd_n = 0, wt_n = 0;
  };
  std::map<OpSet, Acc> classes;
  std::size_t counted = 0;

  for (const Trace& t : benign) {
    MainOpCounts c{};
    double rd_e = 0, wt_e = 0;
    std::size_t rd_n = 0, wt_n = 0;
    std::unordered_set<FileId> files;
    for (const IrpEvent& e : t.events) {
      if (e.file_id != kNoFile) files.insert(e.file_id);
      int k = main_op_index(e.op);
      if (k < 0) continue;
      c[static_cast<std::size_t>(k)] += 1.0;
      if (k == static_cast<int>(kRD) && e.entropy) rd_e += *e.entropy, ++rd_n;
      if (k == static_cast<int>(kWT) && e.entropy) wt_e += *e.entropy, ++wt_n;
    }
    OpSet ops;
    for (std::size_t k = 0; k < 4; ++k)
      if (c[k] > 0) ops.insert(kMainOps[k]);
    if (ops.empty()) continue;
    ++counted;
    Acc& a = classes[ops];
    ++a.n;
    double sum = total(c);
    for (std::size_t k = 0; k < 4; ++k) a.share_sum[k] += c[k] / sum;
    if (rd_n) a.rd_sum += rd_e / static_cast<double>(rd_n), ++a.rd_n;
    if (wt_n) a.wt_sum += wt_e / static_cast<double>(wt_n), ++a.wt_n;
    a.access_sum += static_cast<double>(files.size()) / static_cast<double>(census.file_count());
  }
  if (counted == 0) throw DataError("derive_profiles: no trace performs DL, RD, WT or RN");

  std::vector<BenignProfile> out;
  for (const auto& [ops, a] : classes) {
    BenignProfile p;
    p.class_ops = ops;
    double smallest = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 4; ++k)
      if (a.share_sum[k] > 0) smallest = std::min(smallest, a.share_sum[k]);
    for (std::size_t k = 0; k < 4; ++k) p.ratio[k] = a.share_sum[k] / smallest;
    p.rd_entropy = a.rd_n ? a.rd_sum / static_cast<double>(a.rd_n) : 0.0;
    p.wt_entropy = a.wt_n ? a.wt_sum / static_cast<double>(a.wt_n) : 0.0;
    p.file_access_fraction = a.access_sum / static_cast<double>(a.n);
    p.prevalence = 100.0 * static_cast<double>(a.n) / static_cast<double>(counted);
    p.n_traces = a.n;
    out.push_back(p);
  }
  std::stable_sort(out.begin(), out.end(), [](const BenignProfile& a, const BenignProfile& b) {
    return a.n_traces > b.n_traces;
  });
  return out;
}

const BenignProfile* find_profile(std::span<const BenignProfile> profiles, OpSet class_ops) {
  for (const BenignProfile& p : profiles)
    if (p.class_ops == class_ops) return &p;
  return nullptr;
}

// --- mimicry arithmetic --------------------------------------------------------------

double ratio_deviation(const MainOpCounts& counts, const MainOpCounts& ratio) {
  double c_sum = total(counts), r_sum = total(ratio);
  if (c_sum <= 0) return 0.0;
  if (r_sum <= 0) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    if (ratio[k] <= 0) {
      if (counts[k] > 0) return std::numeric_limits<double>::infinity();
      continue;
    }
    double want = ratio[k] / r_sum;
    worst = std::max(worst, std::abs(counts[k] / c_sum - want) / want);
  }
  return worst;
}

MainOpCounts padding_for_ratio(const MainOpCounts& counts, const MainOpCounts& ratio) {
  double scale = 0.0;
  for (std::size_t k = 0; k < 4; ++k)
    if (ratio[k] > 0) scale = std::max(scale, counts[k] / ratio[k]);
  MainOpCounts pad{};
  for (std::size_t k : {kDL, kRD, kWT}) {
    if (ratio[k] <= 0) continue;
    pad[k] = std::max(0.0, std::round(scale * ratio[k]) - counts[k]);
  }
  return pad;
}

std::size_t dummy_writes_for_entropy(std::size_t n_real, double real_mean, double dummy_entropy,
                                     double target) {
  if (n_real == 0 || real_mean <= target) return 0;
  if (dummy_entropy >= target)
    throw std::invalid_argument("dummy write entropy must be below the target mean");
  double need = static_cast<double>(n_real) * (real_mean - target) / (target - dummy_entropy);
  return static_cast<std::size_t>(std::ceil(need - 1e-9));
}

std::size_t min_processes(std::size_t distinct_files, double file_access_fraction,
                          std::size_t census_files) {
  if (!(file_access_fraction > 0)) throw std::invalid_argument("file_access_fraction must be > 0");
  if (distinct_files == 0) return 1;
  auto cap = static_cast<std::size_t>(
      std::floor(file_access_fraction * static_cast<double>(census_files) + 1e-9));
  cap = std::max<std::size_t>(cap, 1);
  return (distinct_files + cap - 1) / cap;
}

MainOpCounts MimicryProcess::total() const {
  MainOpCounts t{};
  for (std::size_t k = 0; k < 4; ++k) t[k] = real[k] + dummy[k];
  return t;
}

MimicryPlan mimicry_plan(const Trace& ransomware, const FileCensus& census,
                         const BenignProfile& profile, double tolerance, std::uint64_t seed) {
  profile.validate();
  if (!profile.class_ops.contains(OpKind::RD) || !profile.class_ops.contains(OpKind::WT) ||
      profile.ratio[kRD] <= 0 || profile.ratio[kWT] <= 0)
    throw std::invalid_argument("profile cannot host encryption");
  if (!(tolerance >= 0)) throw std::invalid_argument("tolerance must be >= 0");
  if (census.file_count() == 0) throw std::invalid_argument("mimicry_plan: empty census");

  // Per-file op counts so each candidate n costs O(files).
  struct FileOps {
    MainOpCounts c{};
    double wt_entropy = 0;
  };
  std::vector<FileId> files = ransomware.files_in_access_order();
  std::unordered_map<FileId, std::size_t> rank;
  for (std::size_t i = 0; i < files.size(); ++i) rank.emplace(files[i], i);
  std::vector<FileOps> per_file(files.size());
  std::size_t free_dl = 0;
  for (const IrpEvent& e : ransomware.events) {
    int k = main_op_index(e.op);
    if (k >= 0 && profile.ratio[static_cast<std::size_t>(k)] <= 0)
      throw DataError("mimicry_plan: trace performs " + std::string(to_string(base_kind(e.op))) +
                      ", which the profile class " + profile.class_ops.to_string() + " never does");
    if (e.file_id == kNoFile) {
      ++free_dl;
      continue;
    }
    if (k < 0) continue;
    FileOps& f = per_file[rank.at(e.file_id)];
    f.c[static_cast<std::size_t>(k)] += 1.0;
    if (k == static_cast<int>(kWT)) f.wt_entropy += e.entropy.value_or(0.0);
  }

  MimicryPlan plan;
  plan.profile = profile;
  plan.tolerance = tolerance;
  plan.seed = seed;
  plan.trace_events = ransomware.events.size();
  plan.trace_fingerprint = fingerprint(ransomware);
  plan.file_cap = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(profile.file_access_fraction *
                                                 static_cast<double>(census.file_count()) +
                                             1e-9)));

  const double entropy_bound = profile.wt_entropy + tolerance;
  const std::size_t first_n = min_processes(files.size(), profile.file_access_fraction, census.file_count());
  const std::size_t last_n = std::max(first_n, files.size());

  for (std::size_t n = first_n; n <= last_n; ++n) {
    std::vector<MimicryProcess> procs(n);
    for (std::size_t i = 0; i < files.size(); ++i) {
      MimicryProcess& p = procs[i % n];
      p.files.push_back(files[i]);
      for (std::size_t k = 0; k < 4; ++k) p.real[k] += per_file[i].c[k];
      p.real_wt_entropy_sum += per_file[i].wt_entropy;
    }
    for (std::size_t j = 0; j < n; ++j)
      procs[j].real[kDL] += static_cast<double>(free_dl / n + (j < free_dl % n ? 1 : 0));

    bool ok = true;
    for (MimicryProcess& p : procs) {
      p.dummy = padding_for_ratio(p.real, profile.ratio);
      auto n_wt = static_cast<std::size_t>(p.real[kWT]);
      if (n_wt > 0) {
        double mean = p.real_wt_entropy_sum / static_cast<double>(n_wt);
        double worst = (p.real_wt_entropy_sum + kDummyWriteEntropyMax * p.dummy[kWT]) /
                       (static_cast<double>(n_wt) + p.dummy[kWT]);
        if (worst > entropy_bound) {
          if (entropy_bound <= kDummyWriteEntropyMax)
            throw DataError("mimicry_plan: profile write entropy is below what dummy writes can reach");
          double need = static_cast<double>(
              dummy_writes_for_entropy(n_wt, mean, kDummyWriteEntropyMax, entropy_bound));
          p.dummy[kWT] = std::max(p.dummy[kWT], need);
          double scale = (p.real[kWT] + p.dummy[kWT]) / profile.ratio[kWT];
          for (std::size_t k : {kDL, kRD})
            if (profile.ratio[k] > 0)
              p.dummy[k] = std::max(p.dummy[k], std::round(scale * profile.ratio[k]) - p.real[k]);
        }
      }
      if (ratio_deviation(p.total(), profile.ratio) > tolerance + 1e-12) {
        ok = false;
        break;
      }
    }
    if (ok) {
      plan.per_process = std::move(procs);
      return plan;
    }
  }
  throw DataError("mimicry_plan: no process count brings every process within tolerance of " +
                  profile.class_ops.to_string());
}

std::vector<Trace> mimicry_split(const Trace& ransomware, const MimicryPlan& plan,
                                 const FileCensus& census) {
  const std::size_t n = plan.n_processes();
  if (n == 0) throw DataError("mimicry plan has no processes");
  if (ransomware.events.size() != plan.trace_events || fingerprint(ransomware) != plan.trace_fingerprint)
    throw DataError("mimicry plan was built for a different trace");

  std::unordered_map<FileId, std::size_t> owner;
  for (std::size_t j = 0; j < n; ++j)
    for (FileId f : plan.per_process[j].files)
      if (!owner.emplace(f, j).second) throw DataError("mimicry plan assigns a file twice");

  auto real = empty_outputs(n, ransomware.label);
  std::size_t next_free = 0;
  for (const IrpEvent& src : ransomware.events) {
    std::size_t j;
    if (src.file_id == kNoFile) {
      j = next_free++ % n;
    } else {
      auto it = owner.find(src.file_id);
      if (it == owner.end()) throw DataError("mimicry plan was built for a different trace");
      j = it->second;
    }
    IrpEvent e = src;
    e.pid = static_cast<Pid>(j);
    real[j].events.push_back(e);
  }

  std::vector<Trace> out = empty_outputs(n, ransomware.label);
  for (std::size_t j = 0; j < n; ++j) {
    const MimicryProcess& proc = plan.per_process[j];
    const auto& events = real[j].events;
    std::vector<OpKind> kinds;
    kinds.insert(kinds.end(), static_cast<std::size_t>(proc.dummy[kDL]), OpKind::DL);
    kinds.insert(kinds.end(), static_cast<std::size_t>(proc.dummy[kRD]), OpKind::RD);
    kinds.insert(kinds.end(), static_cast<std::size_t>(proc.dummy[kWT]), OpKind::WT);
    if (kinds.empty() || events.empty()) {
      if (!kinds.empty()) throw DataError("mimicry plan pads a process with no real activity");
      out[j] = std::move(real[j]);
      continue;
    }
    Rng rng = make_rng(plan.seed, kMimicryStream, j);
    std::shuffle(kinds.begin(), kinds.end(), rng);

    const std::int64_t t0 = events.front().ts_us, t1 = events.back().ts_us;
    const double span = static_cast<double>(t1 - t0);
    const double m = static_cast<double>(kinds.size());
    std::vector<FileId> touched;
    std::unordered_set<FileId> seen;
    std::size_t cursor = 0;
    std::uniform_int_distribution<std::uint64_t> len_dist(1, 4096);

    std::vector<IrpEvent> dummies;
    dummies.reserve(kinds.size());
    std::int64_t floor_ts = t0;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      auto ts = t0 + static_cast<std::int64_t>(std::floor((static_cast<double>(i) + 0.5) * span / m));
      ts = std::max(ts, floor_ts);
      auto take = [&] {
        if (events[cursor].file_id != kNoFile && seen.insert(events[cursor].file_id).second)
          touched.push_back(events[cursor].file_id);
        ++cursor;
      };
      while (cursor < events.size() && events[cursor].ts_us <= ts) take();
      // file dummies wait until the process has opened something
      if (touched.empty() && kinds[i] != OpKind::DL) {
        while (cursor < events.size() && touched.empty()) take();
        if (touched.empty()) throw DataError("mimicry plan pads a process that touches no files");
        ts = std::max(ts, events[cursor - 1].ts_us);
      }
      floor_ts = ts;
      FileId target = kNoFile;
      if (!touched.empty())
        target = touched[std::uniform_int_distribution<std::size_t>(0, touched.size() - 1)(rng)];
      else if (!proc.files.empty())
        target = proc.files.front();  // DL only needs a directory
      else
        throw DataError("mimicry plan pads a process that touches no files");
      const FileInfo& info = census.file(target);

      IrpEvent d;
      d.ts_us = ts;
      d.pid = static_cast<Pid>(j);
      d.op = kinds[i];
      d.is_dummy = true;
      d.dir_id = info.dir_id;
      if (d.op != OpKind::DL) {
        d.file_id = target;
        std::uint64_t len = len_dist(rng);
        if (info.size > 0) len = std::min(len, info.size);
        std::uint64_t max_off = info.size > len ? info.size - len : 0;
        d.offset = std::uniform_int_distribution<std::uint64_t>(0, max_off)(rng);
        d.length = len;
        if (d.op == OpKind::WT) {
          d.entropy = sample_uniform(rng, 0.0, kDummyWriteEntropyMax);
          d.preserves_magic = *d.offset == 0;
        } else {
          d.entropy = std::clamp(plan.profile.rd_entropy, 0.0, 1.0);
        }
      }
      dummies.push_back(d);
    }

    Trace& t = out[j];
    t.events.reserve(events.size() + dummies.size());
    std::merge(events.begin(), events.end(), dummies.begin(), dummies.end(), std::back_inserter(t.events),
               [](const IrpEvent& a, const IrpEvent& b) { return a.ts_us < b.ts_us; });
  }
  return out;
}

// --- plans ------------------------------------------------------------------------------

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::process: return "process";
    case AttackKind::functional: return "functional";
    case AttackKind::mimicry: return "mimicry";
  }
  return "?";
}

std::optional<AttackKind> parse_attack_kind(std::string_view text) {
  for (AttackKind k : {AttackKind::process, AttackKind::functional, AttackKind::mimicry})
    if (text == to_string(k)) return k;
  return std::nullopt;
}

void SplitPlan::validate() const {
  switch (kind) {
    case AttackKind::process:
      if (n < 1) throw std::invalid_argument("process plan needs n >= 1");
      break;
    case AttackKind::functional:
      if (groups.empty() || groups.size() != per_group_n.size())
        throw std::invalid_argument("functional plan needs one count per group");
      break;
    case AttackKind::mimicry:
      if (!mimicry || mimicry->per_process.empty())
        throw std::invalid_argument("mimicry plan has no processes");
      break;
  }
}

std::size_t SplitPlan::total_processes() const {
  switch (kind) {
    case AttackKind::process: return n;
    case AttackKind::functional: {
      std::size_t s = 0;
      for (std::size_t c : per_group_n) s += c;
      return s;
    }
    case AttackKind::mimicry: return mimicry ? mimicry->n_processes() : 0;
  }
  return 0;
}

std::vector<Trace> apply_plan(const SplitPlan& plan, const Trace& trace, const FileCensus& census) {
  plan.validate();
  switch (plan.kind) {
    case AttackKind::process: return process_split(trace, plan.n);
    case AttackKind::functional: return functional_split(trace, plan.groups, plan.per_group_n);
    case AttackKind::mimicry: return mimicry_split(trace, *plan.mimicry, census);
  }
  return {};
}

namespace {

json counts_json(const MainOpCounts& c) { return json::array({c[0], c[1], c[2], c[3]}); }

MainOpCounts counts_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("expected 4 op counts");
  MainOpCounts c{};
  for (std::size_t k = 0; k < 4; ++k) c[k] = j.at(k).get<double>();
  return c;
}

json profile_json(const BenignProfile& p) {
  json j;
  j["class"] = p.class_ops.to_string();
  j["ratio"] = counts_json(p.ratio);
  j["rd_entropy"] = p.rd_entropy;
  j["wt_entropy"] = p.wt_entropy;
  j["file_access_fraction"] = p.file_access_fraction;
  j["prevalence"] = p.prevalence;
  j["n_traces"] = p.n_traces;
  return j;
}

BenignProfile profile_from(const json& j) {
  BenignProfile p;
  try {
    p.class_ops = OpSet::parse(j.at("class").get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("profile: ") + e.what());
  }
  p.ratio = counts_from(j.at("ratio"));
  p.rd_entropy = j.value("rd_entropy", 0.0);
  p.wt_entropy = j.value("wt_entropy", 0.0);
  p.file_access_fraction = j.at("file_access_fraction").get<double>();
  p.prevalence = j.value("prevalence", 0.0);
  p.n_traces = j.value("n_traces", std::size_t{0});
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return p;
}

json parse_document(std::istream& in, const char* what) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(std::string(what) + ": malformed JSON: " + e.what());
  }
  if (!j.is_object() || j.value("v", 0) != 1) throw DataError(std::string(what) + ": unsupported version");
  return j;
}

}  // namespace

void save_plan(const SplitPlan& plan, std::ostream& out) {
  plan.validate();
  json j;
  j["v"] = 1;
  j["kind"] = std::string(to_string(plan.kind));
  switch (plan.kind) {
    case AttackKind::process: j["n"] = plan.n; break;
    case AttackKind::functional: {
      json groups = json::array();
      for (OpSet g : plan.groups) groups.push_back(g.to_string());
      j["groups"] = groups;
      j["per_group_n"] = plan.per_group_n;
      break;
    }
    case AttackKind::mimicry: {
      const MimicryPlan& m = *plan.mimicry;
      json mj;
      mj["profile"] = profile_json(m.profile);
      mj["tolerance"] = m.tolerance;
      mj["file_cap"] = m.file_cap;
      mj["seed"] = m.seed;
      mj["trace_events"] = m.trace_events;
      mj["trace_fingerprint"] = m.trace_fingerprint;
      json procs = json::array();
      for (const MimicryProcess& p : m.per_process) {
        json pj;
        pj["files"] = p.files;
        pj["real"] = counts_json(p.real);
        pj["dummy"] = counts_json(p.dummy);
        pj["real_wt_entropy_sum"] = p.real_wt_entropy_sum;
        procs.push_back(std::move(pj));
      }
      mj["per_process"] = std::move(procs);
      j["mimicry"] = std::move(mj);
      break;
    }
  }
  out << j.dump(2) << '\n';
}

SplitPlan load_plan(std::istream& in) {
  json j = parse_document(in, "plan");
  SplitPlan plan;
  try {
    auto kind = parse_attack_kind(j.at("kind").get<std::string>());
    if (!kind) throw DataError("plan: unknown kind \"" + j.at("kind").get<std::string>() + "\"");
    plan.kind = *kind;
    switch (plan.kind) {
      case AttackKind::process: plan.n = j.at("n").get<std::size_t>(); break;
      case AttackKind::functional:
        for (const auto& g : j.at("groups")) plan.groups.push_back(OpSet::parse(g.get<std::string>()));
        plan.per_group_n = j.at("per_group_n").get<std::vector<std::size_t>>();
        break;
      case AttackKind::mimicry: {
        const json& mj = j.at("mimicry");
        MimicryPlan m;
        m.profile = profile_from(mj.at("profile"));
        m.tolerance = mj.at("tolerance").get<double>();
        m.file_cap = mj.at("file_cap").get<std::size_t>();
        m.seed = mj.at("seed").get<std::uint64_t>();
        m.trace_events = mj.at("trace_events").get<std::size_t>();
        m.trace_fingerprint = mj.at("trace_fingerprint").get<std::uint64_t>();
        for (const auto& pj : mj.at("per_process")) {
          MimicryProcess p;
          p.files = pj.at("files").get<std::vector<FileId>>();
          p.real = counts_from(pj.at("real"));
          p.dummy = counts_from(pj.at("dummy"));
          p.real_wt_entropy_sum = pj.value("real_wt_entropy_sum", 0.0);
          m.per_process.push_back(std::move(p));
        }
        plan.mimicry = std::move(m);
        break;
      }
    }
    plan.validate();
  } catch (const json::exception& e) {
    throw DataError(std::string("plan: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("plan: ") + e.what());
  }
  return plan;
}

void save_profiles(std::span<const BenignProfile> profiles, std::ostream& out) {
  json j;
  j["v"] = 1;
  json arr = json::array();
  for (const BenignProfile& p : profiles) arr.push_back(profile_json(p));
  j["profiles"] = std::move(arr);
  out << j.dump(2) << '\n';
}

std::vector<BenignProfile> load_profiles(std::istream& in) {
  json j = parse_document(in, "profiles");
  std::vector<BenignProfile> out;
  try {
    for (const auto& pj : j.at("profiles")) out.push_back(profile_from(pj));
  } catch (const json::exception& e) {
    throw DataError(std::string("profiles: ") + e.what());
  }
  return out;
}

// --- min-N search ---------------------------------------------------------------------------

MinNResult min_n_search(const FlagFn& flags, const Trace& trace, const SplitFn& splitter,
                        std::size_t max_n) {
  if (max_n < 1) throw std::invalid_argument("min_n_search: max_n must be >= 1");
  MinNResult result;
  auto probe = [&](std::size_t n) {
    MinNProbe p;
    p.n = n;
    for (const Trace& t : splitter(trace, n)) {
      ++p.processes;
      if (flags(t)) ++p.flagged;
    }
    result.probes.push_back(p);
    return p.flagged == 0;
  };

  std::size_t bad = 0, good = 0;
  for (std::size_t n = 1;; n = std::min(n * 2, max_n)) {
    if (probe(n)) {
      good = n;
      break;
    }
    bad = n;
    if (n == max_n) return result;
  }
  while (good - bad > 1) {
    std::size_t mid = bad + (good - bad) / 2;
    (probe(mid) ? good : bad) = mid;
  }
  result.n = good;
  return result;
}

}  // namespace rwevade
