#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "test_support.hpp"
#include "tripletalign/error.hpp"
#include "tripletalign/oracle.hpp"
#include "tripletalign/repr_eval.hpp"
#include "tripletalign/results_io.hpp"

using namespace tripletalign;
using testsupport::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

EvalOptions no_bootstrap(bool center) {
  EvalOptions o;
  o.center = center;
  o.bootstrap.reset();
  return o;
}

}  // namespace

TEST_CASE("rng is the standard mt19937_64 sequence") {
  oracle::Rng rng(5489);
  for (int i = 0; i < 9999; ++i) rng.next();
  CHECK(rng.next() == 9981545732273789042ull);
  oracle::Rng u(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    const auto k = u.uniform_int(-2, 3);
    CHECK(k >= -2);
    CHECK(k <= 3);
  }
}

TEST_CASE("synthetic bundle shape and determinism") {
  oracle::SynthSpec spec;
  spec.n_terms = 10;
  spec.dim = 4;
  const auto a = oracle::synth_bundle(spec);
  CHECK(a == oracle::synth_bundle(spec));
  REQUIRE(a.layers.size() == 3);
  for (const auto& m : a.layers) {
    CHECK(m.rows() == 10);
    CHECK(m.dim == 4);
    for (double v : m.values) CHECK(static_cast<double>(static_cast<float>(v)) == v);
  }
  CHECK_NOTHROW(validate_bundle(a));
  // last term is a near copy of the first
  const auto& m = a.layers[0];
  for (std::size_t d = 0; d < 4; ++d) CHECK(std::fabs(m.row(0)[d] - m.row(9)[d]) <= 1.1e-3);
  spec.seed = 2;
  CHECK_FALSE(oracle::synth_bundle(spec) == a);
}

TEST_CASE("synthetic judgments") {
  oracle::SynthSpec spec;
  spec.n_triplets = 30;
  spec.n_ties = 2;
  spec.n_unlabeled = 4;
  const auto bundle = oracle::synth_bundle(spec);
  const auto d = oracle::synth_judgments(spec, bundle);
  CHECK(d.triplets.size() == 34);
  CHECK(d.judgments.size() == 30);
  const auto eval = build_eval_set(d);
  CHECK(eval.size() == 28);
  const auto& first = d.triplets.front();
  CHECK(std::set<std::string>{first.target1, first.target2} ==
        std::set<std::string>{bundle.terms.front(), bundle.terms.back()});
  for (const auto& j : d.judgments) {
    CHECK(j.total() >= spec.min_votes);
    CHECK(j.total() <= spec.max_votes);
  }
  CHECK(parse_triplets(to_csv(d)) == d);
}

TEST_CASE("spec validation") {
  oracle::SynthSpec spec;
  spec.n_terms = 2;
  CHECK_THROWS_AS(oracle::validate(spec), ConfigError);
  spec = {};
  spec.dim = 0;
  CHECK_THROWS_AS(oracle::validate(spec), ConfigError);
  spec = {};
  spec.layers.clear();
  CHECK_THROWS_AS(oracle::validate(spec), ConfigError);
  spec = {};
  spec.n_ties = spec.n_triplets + 1;
  CHECK_THROWS_AS(oracle::validate(spec), ConfigError);
  spec = {};
  spec.min_votes = 40;
  CHECK_THROWS_AS(oracle::validate(spec), ConfigError);
  spec = {};
  spec.planted = oracle::PlantedGeometry{{5, LayerKind::Mlp}, 0.0};
  CHECK_THROWS_AS(oracle::validate(spec), ConfigError);
}

TEST_CASE("spec JSON round trip") {
  oracle::SynthSpec spec;
  spec.seed = 99;
  spec.offset = 2.5;
  spec.planted = oracle::PlantedGeometry{{0, LayerKind::Mlp}, 0.25};
  spec.mode = Mode::Instruct;
  const auto j = oracle::to_json(spec);
  CHECK(oracle::to_json(oracle::synth_spec_from_json(j)) == j);
}

TEST_CASE("planted geometry without noise is recovered exactly") {
  oracle::SynthSpec spec;
  spec.n_terms = 40;
  spec.dim = 6;
  spec.n_triplets = 150;
  spec.layers = {{0, LayerKind::Attention}, {0, LayerKind::Mlp}, {0, LayerKind::Residual}, {1, LayerKind::Residual}};
  spec.planted = oracle::PlantedGeometry{{0, LayerKind::Mlp}, 0.0};
  const auto bundle = oracle::synth_bundle(spec);
  const auto eval = build_eval_set(oracle::synth_judgments(spec, bundle));
  const auto result = evaluate_model(bundle, eval, no_bootstrap(true));
  CHECK(result.summary.layers[1].ca == 1.0);
  CHECK(result.summary.best_layer == LayerKey{0, LayerKind::Mlp});
  CHECK(oracle::naive_eval(bundle, eval).layers[1].ca == 1.0);
}

TEST_CASE("hand-computed three triplet case") {
  // Raw vectors a=(1,0) b=(0,1) c=(1,1) d=(-1,0).
  //   x: a; c vs b, votes 4:2, sims 1/sqrt2 and 0, model t1, human t1
  //   y: b; d vs c, votes 6:2, sims 0 and 1/sqrt2, model t2, human t1
  //   z: d; b vs a, votes 7:1, sims 0 and -1, model t1, human t1
  // agreement (1/3, 1/2, 3/4), margin 1-c (1/sqrt2, 1/sqrt2, 1/2)
  // pearson = -4/sqrt(19), spearman = -sqrt(3)/2
  EmbeddingBundle b;
  b.model_id = "hand";
  b.terms = {"a", "b", "c", "d"};
  b.layers.push_back({{0, LayerKind::Residual}, 2, {1, 0, 0, 1, 1, 1, -1, 0}});
  Dataset d;
  d.triplets = {{"x", "a", "c", "b"}, {"y", "b", "d", "c"}, {"z", "d", "b", "a"}};
  d.judgments = {{"x", 4, 2}, {"y", 6, 2}, {"z", 7, 1}};
  const auto eval = build_eval_set(d);
  const double gp = -4.0 / std::sqrt(19.0);
  const double gs = -std::sqrt(3.0) / 2.0;

  const auto fast = evaluate_model(b, eval, no_bootstrap(false)).summary.layers[0];
  const auto slow = oracle::naive_eval(b, eval, false).layers[0];
  CHECK(fast.ca == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(slow.ca == fast.ca);
  CHECK(std::fabs(*fast.gamma_pearson - gp) < 1e-12);
  CHECK(std::fabs(*slow.gamma_pearson - gp) < 1e-12);
  CHECK(std::fabs(*fast.gamma_spearman - gs) < 1e-12);
  CHECK(std::fabs(*slow.gamma_spearman - gs) < 1e-12);
}

TEST_CASE("oracle rejects what repr-eval rejects") {
  EmbeddingBundle b;
  b.terms = {"a", "b", "c"};
  EvalSet eval{{{"x", "a", "b", "c"}, Choice::Target1, 0.5, 3, 1}};
  CHECK_THROWS_AS(oracle::naive_eval(b, eval), ValidationError);
  CHECK_THROWS_AS(evaluate_model(b, eval), ValidationError);
  b.layers.push_back({{0, LayerKind::Residual}, 1, {1, 2, 3}});
  EvalSet unknown{{{"x", "a", "b", "q"}, Choice::Target1, 0.5, 3, 1}};
  CHECK_THROWS_AS(oracle::naive_eval(b, unknown), ValidationError);
  CHECK_THROWS_AS(evaluate_model(b, unknown), ValidationError);
}

TEST_CASE("shipped fixtures regenerate byte for byte") {
  const std::filesystem::path shipped = std::filesystem::path(TA_FIXTURE_DIR) / "synthetic";
  const auto spec = oracle::synth_spec_from_json(nlohmann::json::parse(slurp(shipped / "spec.json")));
  TempDir dir;
  oracle::write_fixtures(spec, dir.path());
  std::size_t compared = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(shipped)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), shipped);
    CAPTURE(rel.string());
    CHECK(slurp(e.path()) == slurp(dir.path() / rel));
    ++compared;
  }
  CHECK(compared >= 5);
}

TEST_CASE("shipped expectations agree with repr-eval") {
  const std::filesystem::path shipped = std::filesystem::path(TA_FIXTURE_DIR) / "synthetic";
  const auto expected = nlohmann::json::parse(slurp(shipped / "expected.json"));
  const auto bundle = read_bundle(shipped / "bundle");
  const auto eval = build_eval_set(load_triplets(shipped / "triplets.csv"));
  for (const bool center : {true, false}) {
    const auto& golden = expected.at(center ? "centered" : "uncentered");
    const auto got = evaluate_model(bundle, eval, no_bootstrap(center)).summary;
    REQUIRE(got.layers.size() == golden.at("layers").size());
    for (std::size_t l = 0; l < got.layers.size(); ++l) {
      const auto& g = golden.at("layers")[l];
      CHECK(std::fabs(got.layers[l].ca - g.at("ca").get<double>()) < 1e-12);
      CHECK(std::fabs(*got.layers[l].gamma_pearson - g.at("gamma_pearson").get<double>()) < 1e-12);
      CHECK(std::fabs(*got.layers[l].gamma_spearman - g.at("gamma_spearman").get<double>()) < 1e-12);
    }
    for (const auto& [kind, tv] : golden.at("tv").items()) {
      CHECK(std::fabs(got.tv_per_kind.at(parse_layer_kind(kind)) - tv.get<double>()) < 1e-12);
    }
  }
}
