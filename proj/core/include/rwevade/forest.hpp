#pragma once

#include <cstdint>
#include <iosfwd>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rwevade/errors.hpp"

namespace rwevade {

// Labelled rows for binary classification: 0 benign, 1 ransomware.
struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> rows;
  std::vector<std::uint8_t> labels;

  Dataset() = default;
  explicit Dataset(std::vector<std::string> names) : feature_names(std::move(names)) {}

  std::size_t arity() const { return feature_names.size(); }
  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  std::size_t count_label(std::uint8_t label) const;

  // Throws std::invalid_argument on arity mismatch or a label other than 0/1.
  void add(std::vector<double> row, std::uint8_t label);
  void append(const Dataset& other);
};

struct TreeParams {
  int max_depth = 16;          // <= 0: unlimited
  int min_leaf = 2;            // minimum rows on each side of a split
  int features_per_split = 0;  // 0: ceil(sqrt(arity))
  bool bootstrap = true;       // off only for memorization tests
  bool balance_classes = true; // weight classes to equal total weight

  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

// Flat node storage; children are indices into Tree::nodes. Rows with
// value <= threshold go left.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double prob_malicious = 0.0;  // leaves only

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  int depth() const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct Forest {
  std::vector<Tree> trees;
  TreeParams params;
  std::uint64_t seed = 0;
  std::vector<std::string> feature_names;

  std::size_t arity() const { return feature_names.size(); }
  // Mean of per-tree leaf probabilities. Throws ModelError on arity mismatch.
  double predict(std::span<const double> x) const;

  friend bool operator==(const Forest&, const Forest&) = default;
};

inline constexpr int kDefaultTrees = 100;

// Greedy CART with weighted Gini impurity. Throws std::invalid_argument on an
// empty dataset.
Tree train_tree(const Dataset& data, const TreeParams& params, std::uint64_t seed);

// Each tree's RNG stream derives from (seed, tree index) only, so `jobs`
// never changes the result.
Forest train_forest(const Dataset& data, const TreeParams& params, int n_trees, std::uint64_t seed,
                    unsigned jobs = 1);

void save_model(const Forest& forest, std::ostream& out);
Forest load_model(std::istream& in);
void save_model_file(const Forest& forest, const std::filesystem::path& path);
Forest load_model_file(const std::filesystem::path& path);

}  // namespace rwevade
