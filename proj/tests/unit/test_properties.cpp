#include <doctest.h>

#include "properties.hpp"

using namespace testsupport;

TEST_CASE("repr-eval matches the oracle on random fixtures") {
  oracle::Rng rng(2024);
  for (int i = 0; i < 40; ++i) {
    const auto c = random_case(rng, 120, 16, 6);
    CAPTURE(i);
    CHECK(check_oracle_equivalence(c, true) == "");
    CHECK(check_oracle_equivalence(c, false) == "");
  }
}

TEST_CASE("cosine is scale invariant") {
  oracle::Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    CAPTURE(i);
    CHECK(check_cosine_scale(rng) == "");
  }
}

TEST_CASE("metrics do not depend on triplet order") {
  oracle::Rng rng(12);
  for (int i = 0; i < 40; ++i) {
    const auto c = random_case(rng, 80, 8, 4);
    CAPTURE(i);
    CHECK(check_permutation(rng, c) == "");
  }
}

TEST_CASE("swapping targets flips choices consistently") {
  oracle::Rng rng(13);
  for (int i = 0; i < 40; ++i) {
    const auto c = random_case(rng, 80, 8, 4);
    CAPTURE(i);
    CHECK(check_target_swap(c) == "");
  }
}

TEST_CASE("layer evaluation is independent of thread count") {
  oracle::Rng rng(14);
  const auto c = random_case(rng, 150, 12, 6);
  auto one = plain_options();
  auto many = plain_options();
  many.threads = 4;
  many.bootstrap = BootstrapOptions{200, 0.9, 5};
  one.bootstrap = many.bootstrap;
  const auto a = evaluate_model(c.bundle, c.eval_set, one);
  const auto b = evaluate_model(c.bundle, c.eval_set, many);
  REQUIRE(a.summary.layers.size() == b.summary.layers.size());
  for (std::size_t l = 0; l < a.summary.layers.size(); ++l) {
    CHECK(a.summary.layers[l].ca == b.summary.layers[l].ca);
    CHECK(a.summary.layers[l].ci_lo == b.summary.layers[l].ci_lo);
    CHECK(a.summary.layers[l].ci_hi == b.summary.layers[l].ci_hi);
  }
  CHECK(a.best_layer_choices == b.best_layer_choices);
}
