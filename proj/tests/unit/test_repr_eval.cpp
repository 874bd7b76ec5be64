#include <doctest.h>

#include <cmath>
#include <random>

#include "tripletalign/error.hpp"
#include "tripletalign/repr_eval.hpp"

using namespace tripletalign;

namespace {

EmbeddingMatrix layer2d(std::vector<double> values, LayerKey key = {0, LayerKind::Residual}) {
  return {key, 2, std::move(values)};
}

EvalItem item(std::string id, std::string a, std::string t1, std::string t2, std::uint32_t v1, std::uint32_t v2) {
  JudgmentRecord j{id, v1, v2};
  return {{id, a, t1, t2}, v1 > v2 ? Choice::Target1 : Choice::Target2, agreement(j), v1, v2};
}

LayerResult lr(LayerKey key, double ca) {
  LayerResult r;
  r.layer = key;
  r.ca = ca;
  return r;
}

}  // namespace

TEST_CASE("triplet outcome: identical anchor and target") {
  const auto m = layer2d({1, 0, 1, 0, 0, 1});
  const auto o = triplet_outcome(m, {0, 1, 2}, "t");
  CHECK(o.model_choice == Choice::Target1);
  CHECK(o.sim1 == 1.0);
  CHECK(o.sim2 == 0.0);
  CHECK(o.distance_ratio == 0.0);
  CHECK_FALSE(o.tie);
}

TEST_CASE("triplet outcome: worked example") {
  // anchor (2,1), t1 (1,2), t2 (-1,0)
  const auto m = layer2d({2, 1, 1, 2, -1, 0});
  const auto o = triplet_outcome(m, {0, 1, 2}, "t");
  CHECK(o.sim1 == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(o.sim2 == doctest::Approx(-2.0 / std::sqrt(5.0)).epsilon(1e-15));
  CHECK(o.model_choice == Choice::Target1);
  // (1 - 0.8) / (1 + 2/sqrt(5)), computed by hand
  CHECK(std::fabs(o.distance_ratio - 0.10557280900008412) < 1e-9);
}

TEST_CASE("tie breaks to target1 with ratio 1") {
  const auto m = layer2d({1, 0, 0.8, 0.6, 0.8, -0.6});
  const auto o = triplet_outcome(m, {0, 1, 2}, "t");
  CHECK(o.tie);
  CHECK(o.model_choice == Choice::Target1);
  CHECK(o.distance_ratio == 1.0);
}

TEST_CASE("distance ratio") {
  CHECK(distance_ratio(0.8, 0.8) == 1.0);
  CHECK(distance_ratio(1.0, 1.0) == 1.0);
  CHECK(distance_ratio(1.0, 1.0 - 1e-13) == 1.0);
  CHECK(distance_ratio(1.0, 0.0) == 0.0);
  CHECK(distance_ratio(0.5, -0.5) == doctest::Approx(1.0 / 3.0));
  CHECK(distance_ratio(0.2, 0.6) == distance_ratio(0.6, 0.2));
}

TEST_CASE("degenerate vectors are unevaluable") {
  const auto m = layer2d({0, 0, 1, 0, 0, 1, 1, 1});
  CHECK_THROWS_AS(triplet_outcome(m, {0, 1, 2}, "t"), DegenerateVectorError);
  EvalSet eval{item("a", "z", "x", "y", 3, 1), item("b", "w", "x", "y", 3, 1)};
  const std::vector<TermRows> rows{{0, 1, 2}, {3, 1, 2}};
  const auto out = evaluate_layer(m, eval, rows);
  CHECK_FALSE(out[0].has_value());
  CHECK(out[1].has_value());
  const auto acc = layer_choice_accuracy(out, eval);
  CHECK(acc.n_evaluated == 1);
  CHECK(acc.n_unevaluable == 1);
  CHECK(acc.ca == 1.0);  // (1,1) vs (1,0) and (0,1) ties -> target1 == human
  CHECK(acc.ties == 1);
  const std::vector<TermRows> none{{0, 1, 2}, {0, 1, 2}};
  CHECK_THROWS_AS(layer_choice_accuracy(evaluate_layer(m, eval, none), eval), ValidationError);
}

TEST_CASE("choice accuracy counts agreements") {
  // anchor row 0 closer to row 1 than to row 2
  const auto m = layer2d({1, 0, 1, 0.1, -1, 0});
  EvalSet eval;
  for (int i = 0; i < 4; ++i) eval.push_back(item("ok" + std::to_string(i), "a", "b", "c", 9, 2));
  eval.push_back(item("bad", "a", "b", "c", 1, 5));
  const std::vector<TermRows> rows(5, TermRows{0, 1, 2});
  const auto acc = layer_choice_accuracy(evaluate_layer(m, eval, rows), eval);
  CHECK(acc.ca == 0.8);
  CHECK(acc.n_evaluated == 5);
}

TEST_CASE("resolve_terms lists every missing term") {
  EmbeddingBundle b;
  b.model_id = "m";
  b.terms = {"cat", "rat"};
  EvalSet eval{item("t1", "cat", "rat", "meow", 3, 14), item("t2", "dog", "rat", "cat", 1, 2)};
  CHECK_THROWS_WITH_AS(resolve_terms(b, eval), "repr-eval: bundle 'm' is missing 2 term(s): 'meow' 'dog'",
                       ValidationError);
}

TEST_CASE("pearson and spearman") {
  const std::vector<double> a{0.1, 0.5, 0.9};
  const std::vector<double> c{0.9, 0.5, 0.1};
  CHECK(gamma(a, c, CorrelationMethod::Pearson) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gamma(a, c, CorrelationMethod::Spearman) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> flat{0.3, 0.3, 0.3};
  CHECK_THROWS_AS(gamma(flat, c, CorrelationMethod::Pearson), UndefinedCorrelationError);
  CHECK_THROWS_AS(gamma(a, flat, CorrelationMethod::Spearman), UndefinedCorrelationError);
  CHECK_THROWS_AS(gamma(std::vector<double>{1, 2}, std::vector<double>{1, 2}, CorrelationMethod::Pearson),
                  UndefinedCorrelationError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1}), ValidationError);
  CHECK(pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{4, 3, 2, 1}) == doctest::Approx(-1.0));
}

TEST_CASE("average ranks share ties") {
  CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
  CHECK(average_ranks(std::vector<double>{1, 1, 1}) == std::vector<double>{2, 2, 2});
  // monotone transform leaves spearman unchanged
  const std::vector<double> x{0.3, 0.1, 0.7, 0.2, 0.9};
  const std::vector<double> y{1, 5, 2, 2, 8};
  std::vector<double> x3;
  for (double v : x) x3.push_back(v * v * v);
  CHECK(spearman(x, y) == doctest::Approx(spearman(x3, y)).epsilon(1e-15));
}

TEST_CASE("pearson against textbook formula") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> a(50), c(50);
  for (auto& v : a) v = u(rng);
  for (auto& v : c) v = u(rng);
  // single-pass sums formula
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  const double n = 50;
  for (std::size_t i = 0; i < 50; ++i) {
    const double x = a[i], y = 1.0 - c[i];
    sx += x; sy += y; sxx += x * x; syy += y * y; sxy += x * y;
  }
  const double r = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  CHECK(std::fabs(gamma(a, c, CorrelationMethod::Pearson) - r) < 1e-12);
}

TEST_CASE("total variation") {
  CHECK(total_variation(std::vector<double>{0.5, 0.7, 0.6}) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(total_variation(std::vector<double>{0.4, 0.4, 0.4}) == 0.0);
  CHECK(total_variation(std::vector<double>{0.6, 0.7, 0.5}) == total_variation(std::vector<double>{0.5, 0.7, 0.6}));
  CHECK(total_variation(std::vector<double>{}) == 0.0);
}

TEST_CASE("summarize picks the first best layer") {
  const auto s = summarize_model({lr({0, LayerKind::Residual}, 0.6), lr({1, LayerKind::Residual}, 0.8),
                                  lr({2, LayerKind::Residual}, 0.8)});
  CHECK(s.max_ca == 0.8);
  CHECK(s.best_layer == LayerKey{1, LayerKind::Residual});

  const auto single = summarize_model({lr({0, LayerKind::Mlp}, 0.55)});
  CHECK(single.best_layer == LayerKey{0, LayerKind::Mlp});
  REQUIRE(single.tv_per_kind.size() == 1);
  CHECK(single.tv_per_kind.at(LayerKind::Mlp) == 0.0);

  CHECK_THROWS_AS(summarize_model({}), ValidationError);
}

TEST_CASE("tv is taken within kind only") {
  const auto s = summarize_model({lr({1, LayerKind::Mlp}, 0.9), lr({0, LayerKind::Attention}, 0.5),
                                  lr({0, LayerKind::Mlp}, 0.6), lr({1, LayerKind::Attention}, 0.7)});
  CHECK(s.tv_per_kind.at(LayerKind::Attention) == doctest::Approx(0.2));
  CHECK(s.tv_per_kind.at(LayerKind::Mlp) == doctest::Approx(0.3));
  CHECK(s.layers[0].layer == LayerKey{0, LayerKind::Attention});
  CHECK(s.best_layer == LayerKey{1, LayerKind::Mlp});
}

TEST_CASE("bootstrap interval") {
  const auto m = layer2d({1, 0, 1, 0.1, -1, 0});
  SUBCASE("all agree") {
    EvalSet eval;
    for (int i = 0; i < 20; ++i) eval.push_back(item("t" + std::to_string(i), "a", "b", "c", 5, 1));
    const auto out = evaluate_layer(m, eval, std::vector<TermRows>(eval.size(), {0, 1, 2}));
    CHECK(bootstrap_ci(out, eval) == std::pair{1.0, 1.0});
  }
  SUBCASE("half agree, n = 1000") {
    EvalSet eval;
    for (int i = 0; i < 1000; ++i) {
      eval.push_back(item("t" + std::to_string(i), "a", "b", "c", i % 2 ? 5 : 1, i % 2 ? 1 : 5));
    }
    const auto out = evaluate_layer(m, eval, std::vector<TermRows>(eval.size(), {0, 1, 2}));
    const auto [lo, hi] = bootstrap_ci(out, eval, {1000, 0.95, 3});
    CHECK(lo >= 0.44);
    CHECK(hi <= 0.56);
    CHECK(lo < 0.5);
    CHECK(hi > 0.5);
    CHECK(bootstrap_ci(out, eval, {1000, 0.95, 3}) == std::pair{lo, hi});
    CHECK_THROWS_AS(bootstrap_ci(out, eval, {0, 0.95, 3}), ConfigError);
    CHECK_THROWS_AS(bootstrap_ci(out, eval, {10, 1.0, 3}), ConfigError);
  }
}

TEST_CASE("evaluate_model centering and best-layer choices") {
  EmbeddingBundle b;
  b.model_id = "m";
  b.terms = {"a", "b", "c", "d"};
  // Raw cosine prefers a for anchor d; after centering it prefers c.
  b.layers.push_back({{0, LayerKind::Residual}, 2, {10, 1, 10, 0, 9, 5, -30, -10}});
  EvalSet eval{item("t", "d", "a", "c", 1, 6), item("u", "a", "b", "c", 7, 1), item("v", "b", "a", "c", 5, 2)};

  EvalOptions raw;
  raw.center = false;
  raw.bootstrap.reset();
  EvalOptions centered;
  centered.bootstrap.reset();
  const auto r = evaluate_model(b, eval, raw);
  const auto c = evaluate_model(b, eval, centered);
  CHECK_FALSE(r.centered);
  CHECK(c.centered);
  CHECK(r.summary.layers[0].ca == doctest::Approx(2.0 / 3.0));
  CHECK(c.summary.layers[0].ca == 1.0);
  CHECK(r.best_layer_choices[0] == Choice::Target1);
  CHECK(c.best_layer_choices[0] == Choice::Target2);

  auto pre = center_bundle(b);
  const auto p = evaluate_model(pre, eval, centered);
  CHECK(p.summary.layers[0].ca == c.summary.layers[0].ca);
  CHECK(p.centered);

  CHECK_THROWS_AS(evaluate_model(b, {}, centered), ValidationError);
  auto empty = b;
  empty.layers.clear();
  CHECK_THROWS_AS(evaluate_model(empty, eval, centered), ValidationError);
}

TEST_CASE("evaluate_model reports an all-degenerate layer by name") {
  EmbeddingBundle b;
  b.model_id = "m";
  b.terms = {"a", "b", "c"};
  b.layers.push_back({{0, LayerKind::Attention}, 2, {0, 0, 0, 0, 0, 0}});
  b.layers.push_back({{0, LayerKind::Residual}, 2, {1, 0, 1, 0.1, -1, 0}});
  EvalSet eval{item("t", "a", "b", "c", 3, 1)};
  EvalOptions o;
  o.center = false;
  CHECK_THROWS_WITH_AS(evaluate_model(b, eval, o), doctest::Contains("layer 0.attention"), ValidationError);
}
