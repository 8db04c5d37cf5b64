#include "rwevade/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "rwevade/rng.hpp"

namespace rwevade {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kCensusStream = 0xce45;
constexpr std::uint64_t kBenignStream = 0xbe9;
constexpr std::uint64_t kRansomStream = 0x4a5;

BenignClassSpec cls(std::initializer_list<OpKind> ops, double prevalence, std::array<double, 4> ratio,
                    double rd, double wt, double access_pct) {
  return {OpSet(ops), prevalence, ratio, rd, wt, access_pct / 100.0};
}

struct DirIndex {
  std::vector<DirId> dirs;                       // census order
  std::unordered_map<DirId, std::vector<FileId>> files;
  std::unordered_map<DirId, std::vector<DirId>> children;
};

DirIndex index_census(const FileCensus& census) {
  DirIndex ix;
  for (const auto& [d, parent] : census.dirs()) {
    ix.dirs.push_back(d);
    ix.files[d];
    if (d != parent) ix.children[parent].push_back(d);
  }
  for (const auto& [f, info] : census.files()) ix.files[info.dir_id].push_back(f);
  return ix;
}

OpKind maybe_fast(OpKind op, double share, Rng& rng) {
  if (share <= 0 || std::uniform_real_distribution<double>(0, 1)(rng) >= share) return op;
  switch (op) {
    case OpKind::RD: return OpKind::FRD;
    case OpKind::WT: return OpKind::FWT;
    case OpKind::OP: return OpKind::FOP;
    case OpKind::CL: return OpKind::FCL;
    default: return op;
  }
}

std::size_t lognormal_count(Rng& rng, double base, double mu, double sigma) {
  double v = base * std::exp(std::normal_distribution<double>(mu, sigma)(rng));
  return static_cast<std::size_t>(std::max(1.0, std::round(v)));
}

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("config: ") + what);
}

}  // namespace

std::vector<BenignClassSpec> default_benign_classes() {
  using enum OpKind;
  return {
      cls({DL, RD, WT, RN}, 19.07, {1, 16, 13, 1}, 0.59, 0.46, 0.83),
      cls({DL, RD}, 18.37, {1, 2, 0, 0}, 0.52, 0.0, 0.17),
      cls({RD, WT, RN}, 16.35, {0, 6, 20, 1}, 0.53, 0.28, 0.22),
      cls({RD}, 11.44, {0, 1, 0, 0}, 0.46, 0.0, 0.03),
      cls({DL, RD, WT}, 7.60, {3, 52, 1, 0}, 0.57, 0.77, 0.17),
      cls({RD, RN}, 6.85, {0, 2, 0, 1}, 0.53, 0.0, 0.02),
      cls({RN}, 6.21, {0, 0, 0, 1}, 0.0, 0.0, 0.03),
      cls({RD, WT}, 5.61, {0, 5, 1, 0}, 0.29, 0.57, 1.33),
      cls({DL}, 3.55, {1, 0, 0, 0}, 0.0, 0.0, 0.0),
      cls({WT, RN}, 2.18, {0, 0, 5, 1}, 0.0, 0.47, 0.02),
      cls({DL, RD, RN}, 1.76, {8, 39, 0, 1}, 0.42, 0.0, 0.09),
      cls({WT}, 0.42, {0, 0, 1, 0}, 0.0, 0.42, 0.60),
      cls({DL, RN}, 0.38, {45, 0, 0, 1}, 0.0, 0.0, 0.06),
      cls({DL, WT}, 0.13, {2, 0, 1, 0}, 0.0, 0.51, 0.01),
      cls({DL, WT, RN}, 0.08, {1, 0, 8, 2}, 0.0, 0.39, 0.03),
  };
}

std::vector<BulkSpec> default_bulk_processes() {
  using enum OpKind;
  return {
      // search indexer, antivirus scan
      {OpSet{DL, RD}, 0.012, {1, 20, 0, 0}, 0.55, 0.0, 0.10, 1.0},
      // backup agent reading for upload
      {OpSet{RD}, 0.010, {0, 1, 0, 0}, 0.60, 0.0, 0.10, 1.0},
      // sync client: download to a temp name, then rename
      {OpSet{WT, RN}, 0.008, {0, 0, 2, 1}, 0.0, 0.60, 0.05, 0.8},
      // restore from archive
      {OpSet{WT}, 0.003, {0, 0, 1, 0}, 0.0, 0.85, 0.05, 1.0},
      // photo or music organizer
      {OpSet{DL, RN}, 0.003, {1, 0, 0, 4}, 0.0, 0.0, 0.05, 0.8},
      // archiver or file encryptor run on a few files
      {OpSet{RD, WT, RN}, 0.06, {0, 3, 3, 2}, 0.55, 0.88, 0.001, 0.005},
  };
}

GenConfig GenConfig::defaults() {
  GenConfig c;
  c.ext_mix = {{".docx", 0.14}, {".xlsx", 0.08}, {".pptx", 0.05}, {".pdf", 0.12},
               {".txt", 0.10},  {".jpg", 0.16},  {".png", 0.08},  {".mp3", 0.05},
               {".zip", 0.04},  {".csv", 0.06},  {".html", 0.06}, {".py", 0.06}};
  c.benign_classes = default_benign_classes();
  c.bulk = default_bulk_processes();
  return c;
}

void GenConfig::validate() const {
  check(n_dirs >= 1 && n_files >= n_dirs, "need n_files >= n_dirs >= 1");
  check(!ext_mix.empty(), "ext_mix is empty");
  double ext_sum = 0;
  for (const auto& [ext, p] : ext_mix) {
    check(p >= 0, "ext_mix probabilities must be >= 0");
    ext_sum += p;
  }
  check(std::abs(ext_sum - 1.0) <= 1e-9, "ext_mix must sum to 1");
  check(!benign_classes.empty(), "no benign classes");
  double prev_sum = 0;
  for (const auto& c : benign_classes) {
    check(c.prevalence >= 0, "class prevalence must be >= 0");
    prev_sum += c.prevalence / 100.0;
    for (std::size_t k = 0; k < 4; ++k)
      check((c.ratio[k] > 0) == c.ops.contains(kMainOps[k]), "class ratio must be positive exactly on its ops");
    check(c.rd_entropy >= 0 && c.rd_entropy <= 1 && c.wt_entropy >= 0 && c.wt_entropy <= 1,
          "class entropy out of range");
    check(c.file_access_fraction >= 0 && c.file_access_fraction <= 1, "class file access out of range");
  }
  check(std::abs(prev_sum - 1.0) <= 1e-9, "class prevalences must sum to 100");
  std::map<OpSet, double> bulk_sum;
  for (const auto& b : bulk) {
    check(b.share >= 0, "bulk share must be >= 0");
    bulk_sum[b.ops] += b.share;
    for (std::size_t k = 0; k < 4; ++k)
      check((b.ratio[k] > 0) == b.ops.contains(kMainOps[k]), "bulk ratio must be positive exactly on its ops");
    check(b.rd_entropy >= 0 && b.rd_entropy <= 1 && b.wt_entropy >= 0 && b.wt_entropy <= 1,
          "bulk entropy out of range");
    check(b.min_fraction > 0 && b.min_fraction <= b.max_fraction && b.max_fraction <= 1,
          "bulk fractions must satisfy 0 < min <= max <= 1");
  }
  for (const auto& [ops, share] : bulk_sum) {
    auto it = std::find_if(benign_classes.begin(), benign_classes.end(),
                           [&](const BenignClassSpec& c) { return c.ops == ops; });
    check(it != benign_classes.end(), "bulk process ops match no benign class");
    check(share <= it->prevalence / 100.0 + 1e-9, "bulk shares exceed their class prevalence");
  }
  check(size_median > 0 && size_sigma >= 0, "bad size distribution");
  check(file_budget_noise >= 0 && file_budget_noise < 1, "file_budget_noise must be in [0,1)");
  check(ops_sigma >= 0, "ops_sigma must be >= 0");
  check(entropy_concentration > 0 && trace_entropy_concentration >= 0, "bad entropy concentration");
  check(benign_fast_share >= 0 && benign_fast_share <= 1 && ransomware_fast_share >= 0 &&
            ransomware_fast_share <= 1,
        "fast share must be in [0,1]");
  check(session_us > 0 && per_file_us > 0, "durations must be positive");
  check(ransomware_wt_entropy >= 0 && ransomware_wt_entropy <= 1 && ransomware_rd_entropy >= 0 &&
            ransomware_rd_entropy <= 1,
        "ransomware entropy out of range");
  check(chunk_min >= 1 && max_chunks >= 1, "bad chunking");
  check(ransomware_batch_rename_share >= 0 && ransomware_batch_rename_share <= 1,
        "ransomware_batch_rename_share must be in [0,1]");
}

// --- config IO ---------------------------------------------------------------------

void save_config(const GenConfig& c, std::ostream& out) {
  json j;
  j["v"] = 1;
  j["seed"] = c.seed;
  j["n_files"] = c.n_files;
  j["n_dirs"] = c.n_dirs;
  j["ext_mix"] = c.ext_mix;
  j["size_median"] = c.size_median;
  j["size_sigma"] = c.size_sigma;
  j["n_benign"] = c.n_benign;
  json classes = json::array();
  for (const auto& b : c.benign_classes) {
    classes.push_back({{"ops", b.ops.to_string()},
                       {"prevalence", b.prevalence},
                       {"ratio", b.ratio},
                       {"rd_entropy", b.rd_entropy},
                       {"wt_entropy", b.wt_entropy},
                       {"file_access_fraction", b.file_access_fraction}});
  }
  j["benign_classes"] = std::move(classes);
  json bulk = json::array();
  for (const auto& b : c.bulk) {
    bulk.push_back({{"ops", b.ops.to_string()},
                    {"share", b.share},
                    {"ratio", b.ratio},
                    {"rd_entropy", b.rd_entropy},
                    {"wt_entropy", b.wt_entropy},
                    {"min_fraction", b.min_fraction},
                    {"max_fraction", b.max_fraction}});
  }
  j["bulk"] = std::move(bulk);
  j["file_budget_noise"] = c.file_budget_noise;
  j["ops_mu"] = c.ops_mu;
  j["ops_sigma"] = c.ops_sigma;
  j["entropy_concentration"] = c.entropy_concentration;
  j["trace_entropy_concentration"] = c.trace_entropy_concentration;
  j["benign_fast_share"] = c.benign_fast_share;
  j["session_us"] = c.session_us;
  j["n_ransomware"] = c.n_ransomware;
  j["ransomware_wt_entropy"] = c.ransomware_wt_entropy;
  j["ransomware_rd_entropy"] = c.ransomware_rd_entropy;
  j["ransomware_fast_share"] = c.ransomware_fast_share;
  j["ransomware_batch_rename_share"] = c.ransomware_batch_rename_share;
  j["chunk_min"] = c.chunk_min;
  j["max_chunks"] = c.max_chunks;
  j["per_file_us"] = c.per_file_us;
  out << j.dump(2) << '\n';
}

GenConfig load_config(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("config: expected an object");
  if (j.value("v", 1) != 1) throw DataError("config: unsupported version");

  GenConfig c = GenConfig::defaults();
  try {
    auto get = [&j](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("seed", c.seed);
    get("n_files", c.n_files);
    get("n_dirs", c.n_dirs);
    get("ext_mix", c.ext_mix);
    get("size_median", c.size_median);
    get("size_sigma", c.size_sigma);
    get("n_benign", c.n_benign);
    if (j.contains("benign_classes")) {
      c.benign_classes.clear();
      for (const auto& b : j.at("benign_classes")) {
        BenignClassSpec s;
        s.ops = OpSet::parse(b.at("ops").get<std::string>());
        s.prevalence = b.at("prevalence").get<double>();
        s.ratio = b.at("ratio").get<std::array<double, 4>>();
        s.rd_entropy = b.value("rd_entropy", 0.0);
        s.wt_entropy = b.value("wt_entropy", 0.0);
        s.file_access_fraction = b.at("file_access_fraction").get<double>();
        c.benign_classes.push_back(s);
      }
    }
    if (j.contains("bulk")) {
      c.bulk.clear();
      for (const auto& b : j.at("bulk")) {
        BulkSpec s;
        s.ops = OpSet::parse(b.at("ops").get<std::string>());
        s.share = b.at("share").get<double>();
        s.ratio = b.at("ratio").get<std::array<double, 4>>();
        s.rd_entropy = b.value("rd_entropy", 0.0);
        s.wt_entropy = b.value("wt_entropy", 0.0);
        s.min_fraction = b.at("min_fraction").get<double>();
        s.max_fraction = b.at("max_fraction").get<double>();
        c.bulk.push_back(s);
      }
    }
    get("file_budget_noise", c.file_budget_noise);
    get("ops_mu", c.ops_mu);
    get("ops_sigma", c.ops_sigma);
    get("entropy_concentration", c.entropy_concentration);
    get("trace_entropy_concentration", c.trace_entropy_concentration);
    get("benign_fast_share", c.benign_fast_share);
    get("session_us", c.session_us);
    get("n_ransomware", c.n_ransomware);
    get("ransomware_wt_entropy", c.ransomware_wt_entropy);
    get("ransomware_rd_entropy", c.ransomware_rd_entropy);
    get("ransomware_fast_share", c.ransomware_fast_share);
    get("ransomware_batch_rename_share", c.ransomware_batch_rename_share);
    get("chunk_min", c.chunk_min);
    get("max_chunks", c.max_chunks);
    get("per_file_us", c.per_file_us);
    c.validate();
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return c;
}

GenConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  return load_config(in);
}

// --- census ---------------------------------------------------------------------------

FileCensus gen_census(const GenConfig& config) {
  config.validate();
  Rng rng = make_rng(config.seed, kCensusStream);

  std::map<DirId, DirId> dirs{{kRootDir, kRootDir}};
  for (DirId d = 1; d < config.n_dirs; ++d)
    dirs.emplace(d, std::uniform_int_distribution<DirId>(0, d - 1)(rng));

  // Uneven folder sizes: a few large folders, many small ones.
  std::gamma_distribution<double> weight(0.7, 1.0);
  std::vector<double> dir_weight(config.n_dirs);
  for (double& w : dir_weight) w = weight(rng) + 1e-6;
  std::discrete_distribution<std::size_t> pick_dir(dir_weight.begin(), dir_weight.end());

  std::vector<std::string> exts;
  std::vector<double> ext_p;
  for (const auto& [e, p] : config.ext_mix) exts.push_back(e), ext_p.push_back(p);
  std::discrete_distribution<std::size_t> pick_ext(ext_p.begin(), ext_p.end());
  std::lognormal_distribution<double> size(std::log(config.size_median), config.size_sigma);

  std::map<FileId, FileInfo> files;
  for (FileId f = 1; f <= config.n_files; ++f) {
    FileInfo info;
    info.dir_id = pick_dir(rng);
    info.ext = exts[pick_ext(rng)];
    info.size = static_cast<std::uint64_t>(std::max(1.0, std::round(size(rng))));
    files.emplace(f, std::move(info));
  }
  return FileCensus(std::move(files), std::move(dirs));
}

// --- benign --------------------------------------------------------------------------------

namespace {

// What one benign process does, before events are laid out.
struct ProcessShape {
  OpSet ops;
  std::array<double, 4> ratio{};
  double rd_mean = 0.0;
  double wt_mean = 0.0;
  std::vector<FileId> files;  // distinct files it may touch
  std::size_t units = 1;      // op volume in ratio units
  bool sweep = false;         // visit files in order instead of at random
};

Trace synthesize(const ProcessShape& shape, const FileCensus& census, const DirIndex& ix,
                 const GenConfig& config, Rng& rng) {
  const double ratio_sum = std::accumulate(shape.ratio.begin(), shape.ratio.end(), 0.0);
  std::array<std::size_t, 4> counts{};
  {
    auto remaining = static_cast<std::size_t>(std::round(static_cast<double>(shape.units) * ratio_sum));
    double left = ratio_sum;
    for (std::size_t k = 0; k < 4; ++k) {
      if (shape.ratio[k] <= 0) continue;
      double p = std::min(1.0, shape.ratio[k] / left);
      counts[k] = std::binomial_distribution<std::size_t>(remaining, p)(rng);
      remaining -= counts[k];
      left -= shape.ratio[k];
      counts[k] = std::max<std::size_t>(counts[k], 1);
    }
  }

  struct Logical {
    OpKind op;
    FileId file;
    DirId dir;
    std::size_t order;  // sweep position
  };
  std::vector<Logical> logical;
  std::vector<OpKind> file_ops;
  file_ops.insert(file_ops.end(), counts[1], OpKind::RD);
  file_ops.insert(file_ops.end(), counts[2], OpKind::WT);
  file_ops.insert(file_ops.end(), counts[3], OpKind::RN);
  std::shuffle(file_ops.begin(), file_ops.end(), rng);
  std::vector<FileId> files = shape.files;
  if (file_ops.size() < files.size()) files.resize(file_ops.size());
  for (std::size_t i = 0; i < file_ops.size(); ++i) {
    std::size_t slot = i < files.size() || shape.sweep
                           ? i % files.size()
                           : std::uniform_int_distribution<std::size_t>(0, files.size() - 1)(rng);
    logical.push_back({file_ops[i], files[slot], census.file(files[slot]).dir_id, 2 * slot + 1});
  }
  for (std::size_t i = 0; i < counts[0]; ++i) {
    if (files.empty()) {
      DirId d = ix.dirs[std::uniform_int_distribution<std::size_t>(0, ix.dirs.size() - 1)(rng)];
      logical.push_back({OpKind::DL, kNoFile, d, 0});
    } else {
      std::size_t slot = shape.sweep ? i * files.size() / counts[0] : i % files.size();
      logical.push_back({OpKind::DL, kNoFile, census.file(files[slot]).dir_id, 2 * slot});
    }
  }
  if (shape.sweep)
    std::stable_sort(logical.begin(), logical.end(),
                     [](const Logical& a, const Logical& b) { return a.order < b.order; });
  else
    std::shuffle(logical.begin(), logical.end(), rng);

  std::unordered_map<FileId, std::size_t> last;
  for (std::size_t i = 0; i < logical.size(); ++i)
    if (logical[i].file != kNoFile) last[logical[i].file] = i;

  Trace trace;
  trace.label = Label::benign;
  std::unordered_map<FileId, bool> open;
  auto bracket = [&](OpKind op, FileId f, DirId d) {
    IrpEvent e;
    e.op = maybe_fast(op, config.benign_fast_share, rng);
    e.file_id = f;
    e.dir_id = d;
    trace.events.push_back(e);
  };
  for (std::size_t i = 0; i < logical.size(); ++i) {
    const Logical& l = logical[i];
    if (l.file != kNoFile && !open[l.file]) {
      bracket(OpKind::OP, l.file, l.dir);
      open[l.file] = true;
    }
    IrpEvent e;
    e.op = l.op;
    e.file_id = l.file;
    e.dir_id = l.dir;
    if (l.op == OpKind::RD || l.op == OpKind::WT) {
      std::uint64_t size = census.file(l.file).size;
      std::uint64_t hi = std::min<std::uint64_t>(size, 65536);
      std::uint64_t lo = std::min<std::uint64_t>(size, 512);
      std::uint64_t len = std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
      e.offset = std::uniform_int_distribution<std::uint64_t>(0, size - len)(rng);
      e.length = len;
      bool wt = l.op == OpKind::WT;
      e.entropy = sample_beta(rng, wt ? shape.wt_mean : shape.rd_mean, config.entropy_concentration);
      e.preserves_magic = wt && *e.offset == 0;
      e.op = maybe_fast(l.op, config.benign_fast_share, rng);
    }
    trace.events.push_back(e);
    if (l.file != kNoFile && last[l.file] == i) bracket(OpKind::CL, l.file, l.dir);
  }

  // Poisson arrivals over the session, conditioned on the event count.
  std::vector<std::int64_t> ts(trace.events.size());
  std::uniform_int_distribution<std::int64_t> when(0, config.session_us - 1);
  for (auto& t : ts) t = when(rng);
  std::sort(ts.begin(), ts.end());
  for (std::size_t i = 0; i < ts.size(); ++i) trace.events[i].ts_us = ts[i];
  return trace;
}

double trace_mean(double class_mean, bool present, const GenConfig& config, Rng& rng) {
  if (!present || config.trace_entropy_concentration <= 0) return class_mean;
  return sample_beta(rng, class_mean, config.trace_entropy_concentration);
}

}  // namespace

Trace gen_benign_trace(const FileCensus& census, const GenConfig& config, std::size_t index) {
  Rng rng = make_rng(config.seed, kBenignStream, index);
  const DirIndex ix = index_census(census);
  const auto n_files = census.file_count();
  ProcessShape shape;

  std::vector<double> prevalence;
  for (const auto& c : config.benign_classes) prevalence.push_back(c.prevalence);
  const BenignClassSpec& spec =
      config.benign_classes[std::discrete_distribution<std::size_t>(prevalence.begin(), prevalence.end())(rng)];

  // Sweeping processes are members of their class, so class shares hold.
  double pick = std::uniform_real_distribution<double>(0, 1)(rng) * spec.prevalence / 100.0;
  const BulkSpec* bulk = nullptr;
  for (const BulkSpec& b : config.bulk) {
    if (b.ops != spec.ops) continue;
    if (pick < b.share) {
      bulk = &b;
      break;
    }
    pick -= b.share;
  }

  if (bulk) {
    // A sweep over a contiguous stretch of the tree, in traversal order.
    std::vector<FileId> order;
    std::vector<DirId> stack{kRootDir};
    while (!stack.empty()) {
      DirId d = stack.back();
      stack.pop_back();
      auto kids = ix.children.find(d);
      if (kids != ix.children.end())
        for (auto it = kids->second.rbegin(); it != kids->second.rend(); ++it) stack.push_back(*it);
      const auto& local = ix.files.at(d);
      order.insert(order.end(), local.begin(), local.end());
    }
    double frac = std::uniform_real_distribution<double>(bulk->min_fraction, bulk->max_fraction)(rng);
    auto budget = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::round(frac * static_cast<double>(n_files))), 1, n_files);
    std::size_t start = std::uniform_int_distribution<std::size_t>(0, n_files - 1)(rng);
    for (std::size_t i = 0; i < budget; ++i) shape.files.push_back(order[(start + i) % n_files]);
    shape.ops = bulk->ops;
    shape.ratio = bulk->ratio;
    shape.rd_mean = trace_mean(bulk->rd_entropy, bulk->ops.contains(OpKind::RD), config, rng);
    shape.wt_mean = trace_mean(bulk->wt_entropy, bulk->ops.contains(OpKind::WT), config, rng);
    // One pass: the rarest per-file op happens about once per file.
    double min_file_ratio = 1e300;
    for (std::size_t k = 1; k < 4; ++k)
      if (bulk->ratio[k] > 0) min_file_ratio = std::min(min_file_ratio, bulk->ratio[k]);
    double units = min_file_ratio < 1e300 ? static_cast<double>(budget) / min_file_ratio : 1.0;
    shape.units = static_cast<std::size_t>(std::max(1.0, std::round(units)));
    shape.sweep = true;
    return synthesize(shape, census, ix, config, rng);
  }

  const bool touches_files =
      spec.ops.contains(OpKind::RD) || spec.ops.contains(OpKind::WT) || spec.ops.contains(OpKind::RN);
  std::size_t budget = 0;
  if (touches_files) {
    double jitter = std::uniform_real_distribution<double>(1 - config.file_budget_noise,
                                                           1 + config.file_budget_noise)(rng);
    budget = static_cast<std::size_t>(std::round(spec.file_access_fraction * static_cast<double>(n_files) * jitter));
    budget = std::clamp<std::size_t>(budget, 1, n_files);
  }
  // Op volume in ratio units; a DL-only process lists a handful of folders.
  shape.units = lognormal_count(rng, touches_files ? static_cast<double>(budget) : 3.0, config.ops_mu,
                                config.ops_sigma);

  // Files come from a few folders, the way an application works on a project.
  if (budget > 0) {
    std::vector<DirId> order = ix.dirs;
    std::shuffle(order.begin(), order.end(), rng);
    for (DirId d : order) {
      std::vector<FileId> local = ix.files.at(d);
      std::shuffle(local.begin(), local.end(), rng);
      for (FileId f : local) {
        if (shape.files.size() == budget) break;
        shape.files.push_back(f);
      }
      if (shape.files.size() == budget) break;
    }
  }
  shape.ops = spec.ops;
  shape.ratio = spec.ratio;
  shape.rd_mean = trace_mean(spec.rd_entropy, spec.ops.contains(OpKind::RD), config, rng);
  shape.wt_mean = trace_mean(spec.wt_entropy, spec.ops.contains(OpKind::WT), config, rng);
  return synthesize(shape, census, ix, config, rng);
}

std::vector<Trace> gen_benign(const FileCensus& census, const GenConfig& config) {
  config.validate();
  std::vector<Trace> out;
  out.reserve(config.n_benign);
  for (std::size_t i = 0; i < config.n_benign; ++i) out.push_back(gen_benign_trace(census, config, i));
  return out;
}

// --- ransomware --------------------------------------------------------------------------------

Trace gen_ransomware_trace(const FileCensus& census, const GenConfig& config, std::size_t index) {
  Rng rng = make_rng(config.seed, kRansomStream, index);
  DirIndex ix = index_census(census);

  // Sample-level traits: each sample behaves like a different family.
  double wt_mean = sample_beta(rng, config.ransomware_wt_entropy, 400.0);
  double fast_share = std::clamp(config.ransomware_fast_share +
                                     std::normal_distribution<double>(0, 0.1)(rng),
                                 0.0, 1.0);
  double pace = static_cast<double>(config.per_file_us) *
                std::exp(std::normal_distribution<double>(0, 0.3)(rng));
  std::uint64_t chunk = config.chunk_min << std::uniform_int_distribution<int>(0, 2)(rng);
  const bool batch_rename =
      std::uniform_real_distribution<double>(0, 1)(rng) < config.ransomware_batch_rename_share;

  Trace trace;
  trace.label = Label::ransomware;
  double clock = 0;
  auto emit = [&](IrpEvent e) {
    e.ts_us = static_cast<std::int64_t>(clock);
    trace.events.push_back(std::move(e));
  };

  std::vector<DirId> stack{kRootDir};
  while (!stack.empty()) {
    DirId d = stack.back();
    stack.pop_back();
    std::vector<DirId> kids = ix.children[d];
    std::shuffle(kids.begin(), kids.end(), rng);
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);

    IrpEvent dl;
    dl.op = OpKind::DL;
    dl.dir_id = d;
    emit(dl);
    clock += pace / 4;

    std::vector<FileId> files = ix.files[d];
    std::shuffle(files.begin(), files.end(), rng);
    for (FileId f : files) {
      const std::uint64_t size = census.file(f).size;
      const std::uint64_t step =
          std::max(chunk, (size + static_cast<std::uint64_t>(config.max_chunks) - 1) /
                              static_cast<std::uint64_t>(config.max_chunks));
      const std::uint64_t n_chunks = (size + step - 1) / step;
      const double file_time = pace * std::exp(std::normal_distribution<double>(0, 0.25)(rng));
      const double tick = file_time / static_cast<double>(2 * n_chunks + 3);

      auto base = [&](OpKind op) {
        IrpEvent e;
        e.op = op;
        e.file_id = f;
        e.dir_id = d;
        return e;
      };
      emit(base(maybe_fast(OpKind::OP, fast_share, rng)));
      clock += tick;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::uint64_t c = 0; c < n_chunks; ++c) {
          IrpEvent e = base(maybe_fast(pass == 0 ? OpKind::RD : OpKind::WT, fast_share, rng));
          e.offset = c * step;
          e.length = std::min(step, size - c * step);
          e.entropy = pass == 0 ? sample_beta(rng, config.ransomware_rd_entropy, config.entropy_concentration)
                                : sample_beta(rng, wt_mean, config.entropy_concentration);
          emit(e);
          clock += tick;
        }
      }
      if (!batch_rename) {
        emit(base(OpKind::RN));
        clock += tick;
      }
      emit(base(maybe_fast(OpKind::CL, fast_share, rng)));
      clock += tick;
    }
    if (batch_rename) {
      for (FileId f : files) {
        IrpEvent rn;
        rn.op = OpKind::RN;
        rn.file_id = f;
        rn.dir_id = d;
        emit(rn);
        clock += pace / 20;
      }
    }
  }
  return trace;
}

std::vector<Trace> gen_ransomware(const FileCensus& census, const GenConfig& config) {
  config.validate();
  std::vector<Trace> out;
  out.reserve(config.n_ransomware);
  for (std::size_t i = 0; i < config.n_ransomware; ++i)
    out.push_back(gen_ransomware_trace(census, config, i));
  return out;
}

}  // namespace rwevade
