#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "mensp/baselines/baseline.hpp"
#include "mensp/baselines/tfidf.hpp"
#include "mensp/errors.hpp"
#include "mensp/eval/metrics.hpp"

using namespace mensp;

namespace {

std::vector<GradeLevel> grades(std::initializer_list<int> v) {
  std::vector<GradeLevel> out;
  for (int x : v) out.push_back(GradeLevel{x});
  return out;
}

struct Toy {
  FeatureMatrix x;
  std::vector<GradeLevel> y;
};

Toy one_per_class() {
  const std::vector<std::string> texts{"the gas sinks to the bottom", "particles spread out across the box",
                                       "random molecular motion and collisions spread particles evenly"};
  const auto model = tfidf_fit(texts);
  return {tfidf_matrix(model, texts), grades({0, 1, 2})};
}

// Three noisy clusters in 4 dimensions.
Toy clusters(std::uint64_t seed, int per_class) {
  Rng rng(seed);
  Toy t;
  for (int i = 0; i < per_class; ++i)
    for (int c = 0; c < 3; ++c) {
      std::vector<double> row(4, 0.0);
      for (auto& v : row) v = 0.1 * rng.uniform01();
      row[static_cast<std::size_t>(c)] += 1.0;
      t.x.push_back(row);
      t.y.push_back(GradeLevel{c});
    }
  return t;
}

}  // namespace

TEST_CASE("tfidf examples") {
  const auto m = tfidf_fit({"a b", "a"});
  CHECK(m.num_documents == 2);
  CHECK(m.idf[m.vocabulary.at("a")] == doctest::Approx(1.0));
  CHECK(m.idf[m.vocabulary.at("b")] == doctest::Approx(1.405465).epsilon(1e-6));
  CHECK(std::abs(m.idf[m.vocabulary.at("b")] - (std::log(1.5) + 1.0)) < 1e-15);

  const auto ab = tfidf_transform(m, "a b").dense();
  const double n = std::sqrt(1.0 + std::pow(std::log(1.5) + 1.0, 2));
  CHECK(ab[m.vocabulary.at("a")] == doctest::Approx(1.0 / n));
  CHECK(ab[m.vocabulary.at("b")] == doctest::Approx((std::log(1.5) + 1.0) / n));

  const auto aa = tfidf_transform(m, "a a").dense();
  CHECK(aa[m.vocabulary.at("a")] == doctest::Approx(1.0));
  CHECK(tfidf_transform(m, "z").norm() == 0.0);
  CHECK(tfidf_transform(m, "z").entries.empty());
  CHECK(m.vocabulary.count("z") == 0);

  const auto single = tfidf_fit({"x y x"});
  for (double v : single.idf) CHECK(v == 1.0);
  CHECK_THROWS_AS(tfidf_fit({"", "  ", "!!"}), DataError);
  CHECK(baseline_tokens("Gas-particles, 2x SPREAD!") == std::vector<std::string>{"gas", "particles", "2x", "spread"});
}

TEST_CASE("tfidf norms and idf ordering") {
  Rng rng(6);
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f", "g"};
  std::vector<std::string> docs;
  for (int i = 0; i < 30; ++i) {
    std::string d;
    for (std::uint64_t n = rng.uniform_below(6); n > 0; --n) d += vocab[rng.uniform_below(vocab.size())] + " ";
    docs.push_back(d);
  }
  docs.push_back("a");
  const auto m = tfidf_fit(docs);
  std::map<std::string, int> df;
  for (const auto& d : docs) {
    auto toks = baseline_tokens(d);
    std::sort(toks.begin(), toks.end());
    toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
    for (const auto& t : toks) ++df[t];
  }
  for (const auto& [t1, d1] : df)
    for (const auto& [t2, d2] : df)
      if (d1 < d2) CHECK(m.idf[m.vocabulary.at(t1)] > m.idf[m.vocabulary.at(t2)]);
  for (int i = 0; i < 50; ++i) {
    std::string d = "zz ";
    const std::uint64_t known = rng.uniform_below(6);
    for (std::uint64_t n = known; n > 0; --n) d += vocab[rng.uniform_below(vocab.size())] + " zz ";
    const double norm = tfidf_transform(m, d).norm();
    if (known > 0)
      CHECK(norm == doctest::Approx(1.0));
    else
      CHECK(norm == 0.0);
  }
}

TEST_CASE("random scores") {
  CHECK(random_score(1, 0, 3).empty());
  const auto s = random_score(7, 30000, 3);
  std::array<int, 3> counts{};
  for (auto g : s) ++counts[static_cast<std::size_t>(g.value)];
  for (int c : counts) CHECK(std::abs(c / 30000.0 - 1.0 / 3.0) < 0.01);
  CHECK(random_score(7, 100, 3) == random_score(7, 100, 3));
  CHECK(random_score(7, 100, 3) != random_score(8, 100, 3));
}

TEST_CASE("random baseline kappa centers on zero") {
  std::vector<GradeLevel> gold;
  for (int i = 0; i < 300; ++i) gold.push_back(GradeLevel{i % 3});
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) sum += cohens_kappa(gold, random_score(seed, 300, 3));
  CHECK(std::abs(sum / 200) < 0.05);
}

TEST_CASE("baselines interpolate one sample per class") {
  const auto toy = one_per_class();
  for (auto kind : {BaselineKind::rfdt, BaselineKind::gbdt, BaselineKind::vote}) {
    CAPTURE(baseline_name(kind));
    const auto model = train_baseline(kind, toy.x, toy.y, 3);
    CHECK(predict_baseline(model, toy.x) == toy.y);
  }
  std::vector<int> y{0, 1, 2};
  const BaselineParams params;
  for (auto member : kVoteMembers) {
    CAPTURE(vote_member_name(member));
    const auto c = fit_vote_member(member, toy.x, y, params, 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(c->predict(toy.x[i]) == y[i]);
  }
}

TEST_CASE("baselines separate clustered data") {
  const auto train = clusters(1, 10), test = clusters(2, 10);
  for (auto kind : {BaselineKind::rfdt, BaselineKind::gbdt, BaselineKind::vote}) {
    CAPTURE(baseline_name(kind));
    const auto model = train_baseline(kind, train.x, train.y, 0);
    CHECK(cohens_kappa(test.y, predict_baseline(model, test.x)) > 0.9);
  }
}

TEST_CASE("single-class training gives a constant predictor") {
  const FeatureMatrix x{{1.0, 0.0}, {0.0, 1.0}};
  const auto y = grades({2, 2});
  for (auto kind : {BaselineKind::rfdt, BaselineKind::gbdt, BaselineKind::vote}) {
    const auto model = train_baseline(kind, x, y, 0);
    CHECK(predict_baseline(model, {{0.5, 0.5}, {9.0, -3.0}}) == grades({2, 2}));
  }
}

TEST_CASE("vote majority and ties") {
  CHECK(majority_vote({1, 1, 1, 2, 2}) == 1);
  CHECK(majority_vote({2, 1, 2, 1, 1}) == 1);
  CHECK(majority_vote({4, 3, 2, 1, 0}) == 0);
  CHECK(majority_vote({2, 2, 1, 1, 3}) == 1);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<int> v(5);
    for (auto& x : v) x = static_cast<int>(rng.uniform_below(4));
    const int expected = majority_vote(v);
    rng.shuffle(v);
    CHECK(majority_vote(v) == expected);
  }
}

TEST_CASE("prediction contract") {
  const auto toy = one_per_class();
  const auto model = train_baseline(BaselineKind::rfdt, toy.x, toy.y, 0);
  CHECK(predict_baseline(model, {}).empty());
  CHECK_THROWS_AS(predict_baseline(model, {{1.0}}), DataError);
  CHECK_THROWS_AS(predict_baseline(train_baseline(BaselineKind::random, toy.x, toy.y, 0), toy.x), ConfigError);
  CHECK_THROWS_AS(train_baseline(BaselineKind::gbdt, toy.x, grades({0, 1}), 0), DataError);
}

TEST_CASE("baseline fitting is seed-deterministic") {
  const auto train = clusters(4, 6), test = clusters(5, 20);
  for (auto kind : {BaselineKind::rfdt, BaselineKind::gbdt, BaselineKind::vote}) {
    const auto a = predict_baseline(train_baseline(kind, train.x, train.y, 12), test.x);
    const auto b = predict_baseline(train_baseline(kind, train.x, train.y, 12), test.x);
    CHECK(a == b);
  }
}
