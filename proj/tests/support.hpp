#pragma once

// Reference implementations and property checkers shared by the unit and
// acceptance tests. Everything here is deliberately naive.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "rwevade/detectors.hpp"
#include "rwevade/entropy.hpp"
#include "rwevade/evasion.hpp"
#include "rwevade/forest.hpp"
#include "rwevade/synthgen.hpp"
#include "rwevade/trace.hpp"

namespace rwtest {

using namespace rwevade;

// -sum p log2 p / 8, straight from the definition.
inline double reference_entropy(const ByteHistogram& h) {
  long double total = 0;
  for (auto c : h) total += static_cast<long double>(c);
  long double H = 0;
  for (auto c : h) {
    if (!c) continue;
    long double p = static_cast<long double>(c) / total;
    H -= p * std::log2(p);
  }
  return static_cast<double>(H / 8.0L);
}

// Best weighted-Gini root split by trying every feature and every midpoint.
struct RootSplit {
  int feature = -1;
  double threshold = 0;
  double impurity = 0;
};

inline std::optional<RootSplit> exhaustive_root_split(const Dataset& d, int min_leaf, bool balance) {
  double n0 = static_cast<double>(d.count_label(0)), n1 = static_cast<double>(d.count_label(1));
  double w[2] = {1.0, 1.0};
  if (balance && n0 > 0 && n1 > 0) {
    w[0] = (n0 + n1) / (2 * n0);
    w[1] = (n0 + n1) / (2 * n1);
  }
  auto gini = [](double a, double b) {
    double s = a + b;
    return s > 0 ? 1.0 - (a / s) * (a / s) - (b / s) * (b / s) : 0.0;
  };
  std::optional<RootSplit> best;
  for (std::size_t f = 0; f < d.arity(); ++f) {
    std::set<double> vals;
    for (auto& r : d.rows) vals.insert(r[f]);
    std::vector<double> v(vals.begin(), vals.end());
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      double thr = v[i] + (v[i + 1] - v[i]) / 2;
      double l[2] = {0, 0}, r[2] = {0, 0};
      int ln = 0, rn = 0;
      for (std::size_t k = 0; k < d.size(); ++k) {
        if (d.rows[k][f] <= thr) {
          l[d.labels[k]] += w[d.labels[k]];
          ++ln;
        } else {
          r[d.labels[k]] += w[d.labels[k]];
          ++rn;
        }
      }
      if (ln < min_leaf || rn < min_leaf) continue;
      double imp = (l[0] + l[1]) * gini(l[0], l[1]) + (r[0] + r[1]) * gini(r[0], r[1]);
      if (!best || imp < best->impurity) best = RootSplit{static_cast<int>(f), thr, imp};
    }
  }
  return best;
}

// Weighted Gini of an arbitrary (feature, threshold) root split.
inline double split_impurity(const Dataset& d, int feature, double thr, bool balance) {
  double n0 = static_cast<double>(d.count_label(0)), n1 = static_cast<double>(d.count_label(1));
  double w[2] = {1.0, 1.0};
  if (balance && n0 > 0 && n1 > 0) {
    w[0] = (n0 + n1) / (2 * n0);
    w[1] = (n0 + n1) / (2 * n1);
  }
  double l[2] = {0, 0}, r[2] = {0, 0};
  for (std::size_t k = 0; k < d.size(); ++k)
    (d.rows[k][static_cast<std::size_t>(feature)] <= thr ? l : r)[d.labels[k]] += w[d.labels[k]];
  auto gini = [](double a, double b) {
    double s = a + b;
    return s > 0 ? 1.0 - (a / s) * (a / s) - (b / s) * (b / s) : 0.0;
  };
  return (l[0] + l[1]) * gini(l[0], l[1]) + (r[0] + r[1]) * gini(r[0], r[1]);
}

// First position (1-based) where the last k entries were all true.
inline std::optional<std::size_t> brute_k_run(const std::vector<bool>& v, int k) {
  for (std::size_t end = 0; end < v.size(); ++end) {
    if (static_cast<int>(end + 1) < k) continue;
    bool all = true;
    for (std::size_t j = end + 1 - static_cast<std::size_t>(k); j <= end; ++j) all = all && v[j];
    if (all) return end + 1;
  }
  return std::nullopt;
}

// --- conservation ------------------------------------------------------------

using EventKey = std::tuple<std::int64_t, int, FileId, DirId, std::optional<std::uint64_t>,
                            std::optional<std::uint64_t>, std::optional<double>, bool>;

inline EventKey key_of(const IrpEvent& e) {
  return {e.ts_us, static_cast<int>(e.op), e.file_id, e.dir_id, e.offset, e.length, e.entropy, e.preserves_magic};
}

// Empty string when the outputs carry exactly the input's events, in per-file
// order, and write the same files. Otherwise a description of the first
// failure.
inline std::string check_conservation(const Trace& input, const std::vector<Trace>& outputs) {
  std::vector<EventKey> want, got;
  for (auto& e : input.events) want.push_back(key_of(e));
  for (auto& t : outputs)
    for (auto& e : t.events)
      if (!e.is_dummy) got.push_back(key_of(e));
  std::sort(want.begin(), want.end());
  std::sort(got.begin(), got.end());
  if (want != got) return "event multiset differs (" + std::to_string(want.size()) + " vs " + std::to_string(got.size()) + ")";

  std::map<FileId, std::vector<EventKey>> in_by_file;
  for (auto& e : input.events)
    if (e.file_id != kNoFile) in_by_file[e.file_id].push_back(key_of(e));
  for (std::size_t p = 0; p < outputs.size(); ++p) {
    std::map<FileId, std::vector<EventKey>> out_by_file;
    for (auto& e : outputs[p].events)
      if (!e.is_dummy && e.file_id != kNoFile) out_by_file[e.file_id].push_back(key_of(e));
    for (auto& [f, seq] : out_by_file) {
      // seq must be a subsequence of the input's events on f
      const auto& ref = in_by_file[f];
      std::size_t j = 0;
      for (auto& k : seq) {
        while (j < ref.size() && ref[j] != k) ++j;
        if (j == ref.size()) return "file " + std::to_string(f) + " reordered in output " + std::to_string(p);
        ++j;
      }
    }
    for (std::size_t i = 1; i < outputs[p].events.size(); ++i)
      if (outputs[p].events[i].ts_us < outputs[p].events[i - 1].ts_us)
        return "output " + std::to_string(p) + " not sorted by time";
  }

  std::set<FileId> w_in, w_out;
  for (auto& e : input.events)
    if (is_write(e.op) && e.file_id != kNoFile) w_in.insert(e.file_id);
  for (auto& t : outputs)
    for (auto& e : t.events)
      if (!e.is_dummy && is_write(e.op) && e.file_id != kNoFile) w_out.insert(e.file_id);
  if (w_in != w_out) return "written-file coverage differs";
  return {};
}

// Small corpus settings that keep unit tests fast.
inline GenConfig small_config(std::uint64_t seed = 7) {
  GenConfig c = GenConfig::defaults();
  c.seed = seed;
  c.n_files = 400;
  c.n_dirs = 20;
  c.n_benign = 300;
  c.n_ransomware = 8;
  return c;
}

}  // namespace rwtest
