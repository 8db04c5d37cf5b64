#include <doctest.h>

#include <random>
#include <sstream>

#include "rwevade/forest.hpp"
#include "support.hpp"

using namespace rwevade;

namespace {

std::string dump(const Forest& f) {
  std::ostringstream out;
  save_model(f, out);
  return out.str();
}

Dataset xor_data() {
  Dataset d({"a", "b"});
  d.add({0, 0}, 0);
  d.add({1, 1}, 0);
  d.add({0, 1}, 1);
  d.add({1, 0}, 1);
  return d;
}

}  // namespace

TEST_CASE("pure node is a single leaf") {
  Dataset d({"x"});
  for (int i = 0; i < 5; ++i) d.add({double(i)}, 0);
  Tree t = train_tree(d, {}, 1);
  REQUIRE(t.nodes.size() == 1);
  CHECK(t.nodes[0].prob_malicious == 0.0);
}

TEST_CASE("two points split between them") {
  Dataset d({"x"});
  d.add({0}, 0);
  d.add({1}, 1);
  TreeParams p;
  p.min_leaf = 1;
  p.bootstrap = false;
  Tree t = train_tree(d, p, 1);
  REQUIRE(t.nodes.size() == 3);
  CHECK(t.nodes[0].threshold > 0.0);
  CHECK(t.nodes[0].threshold < 1.0);
  double lo[] = {0.0}, hi[] = {1.0};
  CHECK(t.predict(lo) == 0.0);
  CHECK(t.predict(hi) == 1.0);
}

TEST_CASE("XOR is learnt with depth 2 and both features") {
  TreeParams p;
  p.min_leaf = 1;
  p.bootstrap = false;
  p.features_per_split = 2;
  p.max_depth = 2;
  Dataset d = xor_data();
  Tree t = train_tree(d, p, 3);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(t.predict(d.rows[i]) == double(d.labels[i]));

  p.max_depth = 0;
  p.bootstrap = true;
  Dataset big({"a", "b"});
  for (int r = 0; r < 25; ++r) big.append(xor_data());
  Forest f = train_forest(big, p, 50, 9);
  double q[] = {1, 0};
  CHECK(f.predict(q) > 0.5);
}

TEST_CASE("no-bootstrap single tree memorizes") {
  std::mt19937_64 rng(5);
  Dataset d({"a", "b", "c"});
  std::set<std::vector<double>> seen;
  while (d.size() < 200) {
    std::vector<double> r{double(rng() % 1000), double(rng() % 1000), double(rng() % 1000)};
    if (!seen.insert(r).second) continue;
    d.add(r, static_cast<std::uint8_t>(rng() % 2));
  }
  TreeParams p;
  p.min_leaf = 1;
  p.max_depth = 0;
  p.bootstrap = false;
  Forest f = train_forest(d, p, 1, 1);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(f.predict(d.rows[i]) == double(d.labels[i]));
}

TEST_CASE("forest is determined by seed, not by job count") {
  std::mt19937_64 rng(8);
  Dataset d({"a", "b"});
  for (int i = 0; i < 300; ++i) {
    double a = double(rng() % 100), b = double(rng() % 100);
    d.add({a, b}, a + b > 100 ? 1 : 0);
  }
  Forest f1 = train_forest(d, {}, 20, 42, 1);
  Forest f2 = train_forest(d, {}, 20, 42, 4);
  CHECK(f1 == f2);
  CHECK(dump(f1) == dump(f2));
  Forest f3 = train_forest(d, {}, 20, 43, 1);
  CHECK_FALSE(f1 == f3);
  CHECK_THROWS_AS(train_forest(d, {}, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(train_forest(Dataset({"a"}), {}, 1, 1), std::invalid_argument);
}

TEST_CASE("separable data generalizes") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  auto make = [&](int n) {
    Dataset d({"x", "y"});
    while (static_cast<int>(d.size()) < n) {
      double x = u(rng), y = u(rng);
      double m = x - y;
      if (std::abs(m) < 0.02) continue;  // margin
      d.add({x, y}, m > 0 ? 1 : 0);
    }
    return d;
  };
  Dataset train = make(1000), test = make(500);
  Forest f = train_forest(train, {}, 100, 3, 4);
  int ok = 0;
  for (std::size_t i = 0; i < test.size(); ++i) ok += (f.predict(test.rows[i]) > 0.5) == (test.labels[i] == 1);
  CHECK(double(ok) / double(test.size()) >= 0.95);
}

TEST_CASE("root split matches exhaustive search") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t arity = 1 + rng() % 3, rows = 4 + rng() % 47;
    Dataset d(std::vector<std::string>(arity, "f"));
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<double> row;
      for (std::size_t f = 0; f < arity; ++f) row.push_back(double(rng() % 12));
      d.add(row, static_cast<std::uint8_t>(rng() % 2));
    }
    TreeParams p;
    p.bootstrap = false;
    p.features_per_split = static_cast<int>(arity);
    p.max_depth = 1;
    p.min_leaf = 1;
    Tree t = train_tree(d, p, 1);
    auto want = rwtest::exhaustive_root_split(d, 1, true);
    if (!want || d.count_label(0) == 0 || d.count_label(1) == 0) {
      CHECK(t.nodes.size() == 1);
      continue;
    }
    REQUIRE(t.nodes.size() == 3);
    double got = rwtest::split_impurity(d, t.nodes[0].feature, t.nodes[0].threshold, true);
    CHECK(got == doctest::Approx(want->impurity).epsilon(1e-9));
  }
}

TEST_CASE("predict") {
  Forest f;
  f.feature_names = {"a", "b"};
  f.trees.push_back(Tree{{TreeNode{}}});
  double x[] = {3, 4};
  CHECK(f.predict(x) == 0.0);
  TreeNode one;
  one.prob_malicious = 1.0;
  f.trees.push_back(Tree{{one}});
  CHECK(f.predict(x) == 0.5);
  double wrong[] = {1, 2, 3};
  CHECK_THROWS_AS(f.predict(wrong), ModelError);
}

TEST_CASE("model persistence") {
  std::mt19937_64 rng(4);
  Dataset d({"a", "b", "c", "d", "e", "f"});
  for (int i = 0; i < 200; ++i) {
    std::vector<double> r(6);
    for (auto& v : r) v = double(rng() % 50) / 7.0;
    d.add(r, r[0] + r[3] > 7 ? 1 : 0);
  }
  Forest f = train_forest(d, {}, 10, 5);
  std::string text = dump(f);
  std::istringstream in(text);
  Forest g = load_model(in);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> q(6);
    for (auto& v : q) v = double(rng() % 50) / 7.0;
    CHECK(g.predict(q) == f.predict(q));
  }
  CHECK(dump(g) == text);

  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(load_model(truncated), ModelError);

  auto j = text;
  j.replace(j.find("\"v\":1"), 5, "\"v\":9");
  std::istringstream bad_version(j);
  CHECK_THROWS_AS(load_model(bad_version), ModelError);

  std::vector<double> eight(8, 0.0);
  CHECK_THROWS_AS(g.predict(eight), ModelError);
}
