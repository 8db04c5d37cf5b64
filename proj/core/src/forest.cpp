#include "rwevade/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "json.hpp"
#include "rwevade/rng.hpp"

namespace rwevade {

std::size_t Dataset::count_label(std::uint8_t label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

void Dataset::add(std::vector<double> row, std::uint8_t label) {
  if (row.size() != arity())
    throw std::invalid_argument("dataset row arity " + std::to_string(row.size()) +
                                " != " + std::to_string(arity()));
  if (label > 1) throw std::invalid_argument("label must be 0 or 1");
  rows.push_back(std::move(row));
  labels.push_back(label);
}

void Dataset::append(const Dataset& other) {
  if (other.feature_names != feature_names)
    throw std::invalid_argument("dataset feature names differ");
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

double Tree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                        : n.right);
  }
  return nodes[i].prob_malicious;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

double Forest::predict(std::span<const double> x) const {
  if (x.size() != arity())
    throw ModelError("feature vector arity " + std::to_string(x.size()) + " != model arity " +
                     std::to_string(arity()));
  if (trees.empty()) throw ModelError("forest has no trees");
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  return sum / static_cast<double>(trees.size());
}

namespace {

// Column-major copy of the dataset shared by every tree of a forest.
struct Columns {
  std::vector<std::vector<double>> values;  // [feature][row]
  std::vector<std::uint8_t> labels;

  explicit Columns(const Dataset& data) : values(data.arity()), labels(data.labels) {
    for (std::size_t f = 0; f < data.arity(); ++f) {
      values[f].resize(data.size());
      for (std::size_t r = 0; r < data.size(); ++r) values[f][r] = data.rows[r][f];
    }
  }
};

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();
};

double gini(double w0, double w1) {
  const double w = w0 + w1;
  if (w <= 0.0) return 0.0;
  const double p0 = w0 / w;
  const double p1 = w1 / w;
  return 1.0 - p0 * p0 - p1 * p1;
}

class TreeBuilder {
 public:
  TreeBuilder(const Columns& cols, const TreeParams& params, std::vector<std::uint32_t> rows,
              std::vector<double> weights, std::vector<std::uint32_t> counts, Rng rng)
      : cols_(cols),
        params_(params),
        rows_(std::move(rows)),
        weight_(std::move(weights)),
        count_(std::move(counts)),
        rng_(std::move(rng)) {
    const auto arity = cols_.values.size();
    n_candidates_ = params_.features_per_split > 0
                        ? std::min<std::size_t>(static_cast<std::size_t>(params_.features_per_split), arity)
                        : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(arity))));
    n_candidates_ = std::max<std::size_t>(n_candidates_, 1);
    max_depth_ = params_.max_depth > 0 ? params_.max_depth : std::numeric_limits<int>::max();
    min_leaf_ = static_cast<std::uint64_t>(std::max(params_.min_leaf, 1));
    features_.resize(arity);
    std::iota(features_.begin(), features_.end(), 0);
  }

  Tree build() {
    Tree tree;
    grow(tree, 0, rows_.size(), 0);
    return tree;
  }

 private:
  std::int32_t grow(Tree& tree, std::size_t lo, std::size_t hi, int depth) {
    double w0 = 0.0, w1 = 0.0;
    std::uint64_t n = 0, n1 = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto r = rows_[i];
      (cols_.labels[r] ? w1 : w0) += weight_[r];
      n += count_[r];
      if (cols_.labels[r]) n1 += count_[r];
    }
    const auto id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    // Class weights steer the splits only; a leaf reports the plain fraction
    // of ransomware rows it holds.
    auto make_leaf = [&] {
      tree.nodes[static_cast<std::size_t>(id)].prob_malicious =
          n > 0 ? static_cast<double>(n1) / static_cast<double>(n) : 0.0;
      return id;
    };
    if (depth >= max_depth_ || w0 == 0.0 || w1 == 0.0 || n < 2 * min_leaf_) return make_leaf();

    const auto split = find_split(lo, hi);
    if (split.feature < 0) return make_leaf();

    const auto& col = cols_.values[static_cast<std::size_t>(split.feature)];
    auto mid = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(lo),
                                     rows_.begin() + static_cast<std::ptrdiff_t>(hi),
                                     [&](std::uint32_t r) { return col[r] <= split.threshold; });
    const auto m = static_cast<std::size_t>(mid - rows_.begin());

    auto left = grow(tree, lo, m, depth + 1);
    auto right = grow(tree, m, hi, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  // Candidate features are a random subset examined in index order, so ties
  // resolve to the lowest feature index and then the lowest threshold. If no
  // candidate admits a valid split, further features are drawn one at a time.
  Split find_split(std::size_t lo, std::size_t hi) {
    std::shuffle(features_.begin(), features_.end(), rng_);
    std::vector<int> chosen(features_.begin(),
                            features_.begin() + static_cast<std::ptrdiff_t>(n_candidates_));
    std::sort(chosen.begin(), chosen.end());
    Split best;
    for (int f : chosen) consider(f, lo, hi, best);
    for (std::size_t k = n_candidates_; best.feature < 0 && k < features_.size(); ++k)
      consider(features_[k], lo, hi, best);
    return best;
  }

  void consider(int feature, std::size_t lo, std::size_t hi, Split& best) {
    const auto& col = cols_.values[static_cast<std::size_t>(feature)];
    scratch_.clear();
    double tot0 = 0.0, tot1 = 0.0;
    std::uint64_t tot_n = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto r = rows_[i];
      scratch_.emplace_back(col[r], r);
      (cols_.labels[r] ? tot1 : tot0) += weight_[r];
      tot_n += count_[r];
    }
    std::sort(scratch_.begin(), scratch_.end());
    double l0 = 0.0, l1 = 0.0;
    std::uint64_t ln = 0;
    for (std::size_t i = 0; i + 1 < scratch_.size(); ++i) {
      const auto r = scratch_[i].second;
      (cols_.labels[r] ? l1 : l0) += weight_[r];
      ln += count_[r];
      const double a = scratch_[i].first;
      const double b = scratch_[i + 1].first;
      if (!(a < b)) continue;
      if (ln < min_leaf_ || tot_n - ln < min_leaf_) continue;
      const double r0 = tot0 - l0;
      const double r1 = tot1 - l1;
      const double impurity = (l0 + l1) * gini(l0, l1) + (r0 + r1) * gini(r0, r1);
      if (best.feature < 0 || impurity < best.impurity - 1e-12 * std::max(1.0, best.impurity)) {
        double thr = a + (b - a) / 2.0;
        if (!(thr < b)) thr = a;
        best = Split{feature, thr, impurity};
      }
    }
  }

  const Columns& cols_;
  const TreeParams& params_;
  std::vector<std::uint32_t> rows_;
  std::vector<double> weight_;
  std::vector<std::uint32_t> count_;
  Rng rng_;
  std::size_t n_candidates_ = 1;
  int max_depth_ = 0;
  std::uint64_t min_leaf_ = 1;
  std::vector<int> features_;
  std::vector<std::pair<double, std::uint32_t>> scratch_;
};

std::array<double, 2> class_weights(const Dataset& data, bool balance) {
  if (!balance) return {1.0, 1.0};
  const double n0 = static_cast<double>(data.count_label(0));
  const double n1 = static_cast<double>(data.count_label(1));
  if (n0 == 0.0 || n1 == 0.0) return {1.0, 1.0};
  const double total = n0 + n1;
  return {total / (2.0 * n0), total / (2.0 * n1)};
}

Tree train_one(const Columns& cols, const Dataset& data, const TreeParams& params,
               std::uint64_t tree_seed) {
  const auto n = data.size();
  Rng rng(tree_seed);
  std::vector<std::uint32_t> counts(n, params.bootstrap ? 0u : 1u);
  if (params.bootstrap) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < n; ++i) ++counts[pick(rng)];
  }
  const auto cw = class_weights(data, params.balance_classes);
  std::vector<double> weights(n);
  std::vector<std::uint32_t> active;
  active.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    weights[r] = counts[r] * cw[data.labels[r]];
    if (counts[r] > 0) active.push_back(static_cast<std::uint32_t>(r));
  }
  TreeBuilder builder(cols, params, std::move(active), std::move(weights), std::move(counts),
                      std::move(rng));
  return builder.build();
}

void check_trainable(const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  if (data.arity() == 0) throw std::invalid_argument("dataset has no features");
  if (data.labels.size() != data.rows.size())
    throw std::invalid_argument("dataset labels and rows differ in length");
}

constexpr std::uint64_t kTreeStream = 0x7472656573ull;  // "trees"
constexpr int kModelFormatVersion = 1;

using ojson = nlohmann::ordered_json;

ojson node_to_json(const Tree& tree, std::size_t i) {
  const auto& n = tree.nodes[i];
  if (n.is_leaf()) return ojson{{"leaf", n.prob_malicious}};
  ojson obj;
  obj["feature"] = n.feature;
  obj["threshold"] = n.threshold;
  obj["left"] = node_to_json(tree, static_cast<std::size_t>(n.left));
  obj["right"] = node_to_json(tree, static_cast<std::size_t>(n.right));
  return obj;
}

std::int32_t node_from_json(const nlohmann::json& obj, Tree& tree, std::size_t arity, int depth) {
  if (depth > 4096) throw ModelError("model: tree too deep");
  if (!obj.is_object()) throw ModelError("model: node is not an object");
  const auto id = static_cast<std::int32_t>(tree.nodes.size());
  tree.nodes.push_back(TreeNode{});
  if (auto leaf = obj.find("leaf"); leaf != obj.end()) {
    if (!leaf->is_number()) throw ModelError("model: leaf probability is not a number");
    const double p = leaf->get<double>();
    if (!(p >= 0.0 && p <= 1.0)) throw ModelError("model: leaf probability out of range");
    tree.nodes[static_cast<std::size_t>(id)].prob_malicious = p;
    return id;
  }
  if (!obj.contains("feature") || !obj.contains("threshold") || !obj.contains("left") ||
      !obj.contains("right"))
    throw ModelError("model: malformed split node");
  const int feature = obj["feature"].get<int>();
  if (feature < 0 || static_cast<std::size_t>(feature) >= arity)
    throw ModelError("model: split feature out of range");
  const double threshold = obj["threshold"].get<double>();
  auto left = node_from_json(obj["left"], tree, arity, depth + 1);
  auto right = node_from_json(obj["right"], tree, arity, depth + 1);
  auto& node = tree.nodes[static_cast<std::size_t>(id)];
  node.feature = feature;
  node.threshold = threshold;
  node.left = left;
  node.right = right;
  return id;
}

}  // namespace

Tree train_tree(const Dataset& data, const TreeParams& params, std::uint64_t seed) {
  check_trainable(data);
  Columns cols(data);
  return train_one(cols, data, params, seed);
}

Forest train_forest(const Dataset& data, const TreeParams& params, int n_trees, std::uint64_t seed,
                    unsigned jobs) {
  if (n_trees < 1) throw std::invalid_argument("n_trees must be at least 1");
  check_trainable(data);
  Columns cols(data);
  Forest forest;
  forest.params = params;
  forest.seed = seed;
  forest.feature_names = data.feature_names;
  forest.trees.resize(static_cast<std::size_t>(n_trees));

  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t t = first; t < forest.trees.size(); t += stride)
      forest.trees[t] = train_one(cols, data, params, derive_seed(seed, kTreeStream, t));
  };
  const std::size_t n_jobs = std::clamp<std::size_t>(jobs, 1, forest.trees.size());
  if (n_jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < n_jobs; ++j) pool.emplace_back(work, j, n_jobs);
  }
  return forest;
}

void save_model(const Forest& forest, std::ostream& out) {
  ojson doc;
  doc["v"] = kModelFormatVersion;
  doc["kind"] = "random_forest";
  doc["params"] = {{"max_depth", forest.params.max_depth},
                   {"min_leaf", forest.params.min_leaf},
                   {"features_per_split", forest.params.features_per_split},
                   {"bootstrap", forest.params.bootstrap},
                   {"balance_classes", forest.params.balance_classes}};
  doc["n_trees"] = forest.trees.size();
  doc["seed"] = forest.seed;
  doc["feature_names"] = forest.feature_names;
  auto trees = ojson::array();
  for (const auto& t : forest.trees) trees.push_back(node_to_json(t, 0));
  doc["trees"] = std::move(trees);
  out << doc.dump() << '\n';
  if (!out) throw ModelError("failed writing model");
}

Forest load_model(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError(std::string("model: malformed JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("v")) throw ModelError("model: missing version");
    if (doc["v"] != kModelFormatVersion)
      throw ModelError("model: unsupported version " + doc["v"].dump());
    Forest forest;
    const auto& p = doc.at("params");
    forest.params.max_depth = p.at("max_depth").get<int>();
    forest.params.min_leaf = p.at("min_leaf").get<int>();
    forest.params.features_per_split = p.at("features_per_split").get<int>();
    forest.params.bootstrap = p.at("bootstrap").get<bool>();
    forest.params.balance_classes = p.at("balance_classes").get<bool>();
    forest.seed = doc.at("seed").get<std::uint64_t>();
    forest.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    const auto& trees = doc.at("trees");
    if (!trees.is_array() || trees.size() != doc.at("n_trees").get<std::size_t>())
      throw ModelError("model: tree count mismatch");
    for (const auto& t : trees) {
      Tree tree;
      node_from_json(t, tree, forest.arity(), 0);
      forest.trees.push_back(std::move(tree));
    }
    if (forest.trees.empty()) throw ModelError("model: no trees");
    return forest;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("model: ") + e.what());
  }
}

void save_model_file(const Forest& forest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write model " + path.string());
  save_model(forest, out);
}

Forest load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model " + path.string());
  return load_model(in);
}

}  // namespace rwevade
