#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "cmr/classifiers.hpp"
#include "cmr/error.hpp"
#include "cmr/rng.hpp"

using namespace cmr;

namespace {

Dataset blobs(std::uint64_t seed, std::size_t per_class) {
  Rng g(seed);
  Dataset d;
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      d.x.push_back({10.0 * c + normal01(g), 10.0 * c + normal01(g)});
      d.y.push_back(c);
    }
  }
  return d;
}

Dataset xor_set(std::uint64_t seed, std::size_t n) {
  Rng g(seed);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = uniform(g, -1, 1);
    const double b = uniform(g, -1, 1);
    if (std::abs(a) < 0.1 || std::abs(b) < 0.1) {
      --i;
      continue;
    }
    d.x.push_back({a, b});
    d.y.push_back((a > 0) != (b > 0) ? 1 : 0);
  }
  return d;
}

Dataset circles(std::uint64_t seed, std::size_t per_class) {
  Rng g(seed);
  Dataset d;
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const double r = (c == 0 ? 1.0 : 3.0) + 0.2 * normal01(g);
      const double t = uniform(g, 0, 2 * std::numbers::pi);
      d.x.push_back({r * std::cos(t), r * std::sin(t)});
      d.y.push_back(c);
    }
  }
  return d;
}

std::vector<RawRow> raw(const Dataset& d) {
  std::vector<RawRow> out;
  for (const auto& row : d.x) out.emplace_back(row.begin(), row.end());
  return out;
}

ClassifierSpec quick(ClassifierKind k) {
  ClassifierSpec s;
  s.kind = k;
  s.seed = 3;
  s.rf_trees = 50;
  s.mlp_hidden = {16, 16};
  s.mlp_lr = 1e-2;
  s.mlp_max_epochs = 400;
  return s;
}

}  // namespace

TEST_CASE("separable blobs") {
  const auto train = blobs(1, 100);
  const auto test = blobs(2, 100);
  CHECK(train_gnb(train)->accuracy(test) >= 0.99);
  CHECK(train_svm_rbf(train, 1.0, std::nullopt)->accuracy(test) >= 0.99);
  CHECK(train_classifier(quick(ClassifierKind::kMLP), train)->accuracy(test) >= 0.99);
  CHECK(train_rf(train, 30, 1)->accuracy(test) >= 0.99);
}

TEST_CASE("SVM dual variables stay in the box") {
  const auto svm = train_svm_rbf(circles(5, 80), 2.0, std::nullopt);
  REQUIRE(!svm->machines.empty());
  for (const auto& m : svm->machines) {
    for (double a : m.alpha) {
      CHECK(a >= 0.0);
      CHECK(a <= 2.0 + 1e-12);
    }
  }
  CHECK(svm->accuracy(circles(6, 100)) >= 0.95);
}

TEST_CASE("XOR") {
  const auto d = xor_set(3, 400);
  CHECK(train_rf(d, 50, 2)->accuracy(d) >= 0.95);
  CHECK(train_classifier(quick(ClassifierKind::kMLP), d)->accuracy(d) >= 0.99);
}

TEST_CASE("degenerate training sets") {
  Dataset one;
  one.x = {{0.0, 0.0}, {4.0, 4.0}};
  one.y = {0, 1};
  const auto gnb = train_gnb(one);
  const std::vector<double> near0{0.5, 0.2};
  const std::vector<double> near1{3.5, 4.1};
  CHECK(gnb->predict(near0) == 0);
  CHECK(gnb->predict(near1) == 1);

  Dataset single;
  single.x = {{1.0}, {1.0}};
  single.y = {1, 1};
  try {
    train_svm_rbf(single, 1.0, std::nullopt);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTraining);
  }

  Dataset dup = blobs(9, 20);
  dup.x.push_back(dup.x.front());
  dup.y.push_back(dup.y.front());
  const auto rf = train_rf(dup, 20, 4);
  CHECK(rf->predict(dup.x.front()) == dup.y.front());
}

TEST_CASE("RF importance ranks the informative feature") {
  Rng g(10);
  Dataset d;
  for (int i = 0; i < 300; ++i) {
    const int y = i % 2;
    d.x.push_back({uniform01(g), y + 0.3 * normal01(g)});
    d.y.push_back(y);
  }
  const auto rf = train_rf(d, 60, 5);
  CHECK(rf->importance_mean[1] > rf->importance_mean[0]);
  CHECK(rf->importance_mean[0] + rf->importance_mean[1] == doctest::Approx(1.0));
  CHECK(rf->importance_stdev.size() == 2);
}

TEST_CASE("training is deterministic") {
  const auto d = xor_set(8, 100);
  const auto a = train_mlp(d, quick(ClassifierKind::kMLP));
  const auto b = train_mlp(d, quick(ClassifierKind::kMLP));
  REQUIRE(a->layers.size() == b->layers.size());
  for (std::size_t i = 0; i < a->layers.size(); ++i) CHECK(a->layers[i].w == b->layers[i].w);
  const auto r1 = train_rf(d, 10, 7);
  const auto r2 = train_rf(d, 10, 7);
  CHECK(r1->importance_mean == r2->importance_mean);
}

TEST_CASE("stratified folds partition the data") {
  std::vector<int> y;
  for (int i = 0; i < 53; ++i) y.push_back(i % 3);
  const auto f = stratified_folds(y, 5, 1);
  REQUIRE(f.size() == y.size());
  for (int c = 0; c < 3; ++c) {
    std::vector<int> per(5, 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK(f[i] >= 0);
      CHECK(f[i] < 5);
      if (y[i] == c) ++per[f[i]];
    }
    CHECK(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()) <= 1);
  }
  try {
    stratified_folds({0, 0, 0, 1, 1}, 5, 0);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kStratification);
  }
}

TEST_CASE("cross-validation") {
  const auto d = blobs(4, 50);
  const auto cv = cross_validate(raw(d), d.y, quick(ClassifierKind::kGNB));
  CHECK(cv.mean == 1.0);
  CHECK(cv.stdev == 0.0);
  CHECK(cv.fold_accuracy.size() == 5);

  // shuffled labels over five classes sit near chance
  Rng g(12);
  std::vector<RawRow> rows;
  std::vector<int> y;
  for (int i = 0; i < 250; ++i) {
    rows.push_back({normal01(g), normal01(g), normal01(g)});
    y.push_back(i % 5);
  }
  shuffle_range(y.begin(), y.end(), g);
  const auto chance = cross_validate(rows, y, quick(ClassifierKind::kGNB));
  CHECK(chance.mean >= 0.1);
  CHECK(chance.mean <= 0.3);
}

TEST_CASE("scaler uses training rows only") {
  std::vector<RawRow> rows{{1.0, std::nullopt}, {3.0, 2.0}, {5.0, 4.0}};
  const auto s = Scaler::fit(rows);
  CHECK(s.mean[0] == 3.0);
  CHECK(s.median[1] == 3.0);
  const auto z = s.apply(RawRow{3.0, std::nullopt});
  CHECK(z[0] == 0.0);
  const auto before = s.mean;
  rows.push_back({100.0, 100.0});
  CHECK(s.mean == before);
  const auto flat = Scaler::fit({{2.0}, {2.0}});
  CHECK(flat.stdev[0] == 1.0);
}

TEST_CASE("classifier selection") {
  const std::vector<NamedScore> table{{"LR", 0.94}, {"RF", 0.96}, {"GNB", 0.96}, {"XGB", 0.93},
                                      {"SVM", 0.95}, {"MLP", 0.97}, {"KNN", 0.91}};
  CHECK(select_classifiers(table) == std::vector<std::string>{"RF", "GNB", "MLP"});
  CHECK(select_classifiers({{"a", 0.97}, {"b", 0.96}, {"c", 0.96}, {"d", 0.95}}) ==
        std::vector<std::string>{"a", "b", "c"});
  CHECK(select_classifiers({{"a", 0.99}, {"b", 0.98}}).size() == 2);
  try {
    select_classifiers({{"a", 0.5}});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSelection);
  }
}

TEST_CASE("names and the other candidates") {
  for (auto k : {ClassifierKind::kGNB, ClassifierKind::kRF, ClassifierKind::kMLP, ClassifierKind::kSVM,
                 ClassifierKind::kLR, ClassifierKind::kKNN}) {
    CHECK(parse_classifier(classifier_name(k)) == k);
  }
  CHECK_THROWS_AS(parse_classifier("XGB"), Error);
  const auto train = blobs(1, 60);
  CHECK(train_classifier(quick(ClassifierKind::kLR), train)->accuracy(blobs(2, 60)) >= 0.99);
  CHECK(train_classifier(quick(ClassifierKind::kKNN), train)->accuracy(blobs(2, 60)) >= 0.99);
}
