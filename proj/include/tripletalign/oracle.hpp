#pragma once

// Brute-force reference implementations and synthetic data generators.
//
// Nothing in here calls into the metric code of repr_eval; only the data
// types are shared. Tests compare the two paths against each other.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "tripletalign/dataset.hpp"
#include "tripletalign/embedding_store.hpp"

namespace tripletalign::oracle {

// MT19937-64 (sequence fixed by the C++ standard) with hand-written
// conversions, so generated fixtures do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

struct PlantedGeometry {
  LayerKey layer;      // generating layer
  double noise = 0.0;  // probability that the human majority is flipped
};

struct SynthSpec {
  std::uint64_t seed = 1;
  std::size_t n_terms = 20;
  std::size_t dim = 8;
  std::vector<LayerKey> layers{{0, LayerKind::Attention}, {0, LayerKind::Mlp}, {0, LayerKind::Residual}};
  std::size_t n_triplets = 50;  // labeled rows, ties included
  std::size_t n_unlabeled = 0;
  std::size_t n_ties = 1;
  std::uint32_t min_votes = 17;
  std::uint32_t max_votes = 30;
  // Norm of a per-layer offset added to every row; a large value makes raw
  // and centered similarities disagree.
  double offset = 0.0;
  std::optional<PlantedGeometry> planted;
  std::string model_id = "synthetic";
  Mode mode = Mode::Pretrained;
};

// Throws ConfigError when n_terms < 3, dim == 0, no layers, duplicate
// layers, min_votes < 2 or min_votes > max_votes, or n_ties > n_triplets.
void validate(const SynthSpec& spec);

// Deterministic finite matrices; the last term is a near-duplicate of the
// first one.
EmbeddingBundle synth_bundle(const SynthSpec& spec);

// Labeled triplets first, then unlabeled ones. The first labeled triplet
// uses the near-duplicate pair as its targets. With a planted geometry the
// human majority is the target closer to the anchor in the (centered)
// generating layer of `bundle`, flipped with probability `noise`.
Dataset synth_judgments(const SynthSpec& spec, const EmbeddingBundle& bundle);

struct NaiveLayer {
  LayerKey layer;
  double ca = 0.0;
  std::size_t n_evaluated = 0;
  std::size_t n_unevaluable = 0;
  std::optional<double> gamma_pearson;
  std::optional<double> gamma_spearman;
};

struct NaiveEvaluation {
  std::vector<NaiveLayer> layers;  // bundle layer order
  std::map<LayerKind, double> tv;
};

// Straight-line recomputation of per-layer choice accuracy, gamma and total
// variation. Throws ValidationError for an empty layer set, a missing term or
// a layer without evaluable triplets.
NaiveEvaluation naive_eval(const EmbeddingBundle& bundle, const EvalSet& eval_set, bool center = true);

nlohmann::json to_json(const NaiveEvaluation& e);
nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

// Writes <dir>/bundle/, <dir>/triplets.csv, <dir>/spec.json and
// <dir>/expected.json (oracle results with centering).
void write_fixtures(const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace tripletalign::oracle
