#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tripletalign/dataset.hpp"
#include "tripletalign/embedding_store.hpp"

namespace tripletalign {

// Decision of one layer on one triplet.
struct ChoiceOutcome {
  std::string triplet_id;
  LayerKey layer;
  double sim1 = 0.0;
  double sim2 = 0.0;
  Choice model_choice = Choice::Target1;
  bool tie = false;             // sim1 == sim2 exactly; choice is then Target1
  double distance_ratio = 1.0;  // min(d1, d2) / max(d1, d2), d = 1 - sim
};

// Row indices of a triplet's terms inside a bundle.
struct TermRows {
  std::size_t anchor;
  std::size_t target1;
  std::size_t target2;
};

// Distance ratio of two cosine similarities. Both distances below 1e-12
// yield 1 (no preference).
double distance_ratio(double sim1, double sim2);

// Throws DegenerateVectorError when any of the three rows has zero norm.
ChoiceOutcome triplet_outcome(const EmbeddingMatrix& layer, const TermRows& rows, const std::string& triplet_id);

// Resolves every eval-set term against the bundle. Throws ValidationError
// listing every missing term.
std::vector<TermRows> resolve_terms(const EmbeddingBundle& bundle, const EvalSet& eval_set);

// Outcomes for one layer, aligned with the eval set; nullopt marks a triplet
// that is unevaluable at this layer (degenerate vector).
using LayerOutcomes = std::vector<std::optional<ChoiceOutcome>>;

LayerOutcomes evaluate_layer(const EmbeddingMatrix& layer, const EvalSet& eval_set, std::span<const TermRows> rows);

struct ChoiceAccuracy {
  double ca = 0.0;
  std::size_t n_evaluated = 0;
  std::size_t n_unevaluable = 0;
  std::size_t ties = 0;
};

// Fraction of evaluable triplets where the layer agrees with the human
// majority. Throws ValidationError when nothing is evaluable or sizes differ.
ChoiceAccuracy layer_choice_accuracy(const LayerOutcomes& outcomes, const EvalSet& eval_set);

enum class CorrelationMethod { Pearson, Spearman };

std::string_view to_string(CorrelationMethod m) noexcept;

double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

// Ranks starting at 1; tied values share the mean of their ranks.
std::vector<double> average_ranks(std::span<const double> x);

// Correlation between human agreement and (1 - distance ratio). Requires
// equal lengths >= 3 and nonzero variance in both inputs; otherwise throws.
double gamma(std::span<const double> agreements, std::span<const double> distance_ratios, CorrelationMethod method);

// Sum of absolute successive differences.
double total_variation(std::span<const double> series);

struct LayerResult {
  LayerKey layer;
  double ca = 0.0;
  std::size_t n_evaluated = 0;
  std::size_t n_unevaluable = 0;
  std::size_t ties = 0;
  std::optional<double> gamma_pearson;  // nullopt when the correlation is undefined
  std::optional<double> gamma_spearman;
  std::optional<double> ci_lo;
  std::optional<double> ci_hi;
};

struct ModelSummary {
  std::string model_id;
  Mode mode = Mode::Pretrained;
  std::vector<LayerResult> layers;  // canonical order
  LayerKey best_layer;
  double max_ca = 0.0;
  std::map<LayerKind, double> tv_per_kind;
};

// Best layer is the first in canonical order attaining the maximum ca; tv is
// taken per kind over that kind's layers in block order.
ModelSummary summarize_model(const std::vector<LayerResult>& layers, std::string model_id = {},
                             Mode mode = Mode::Pretrained);

struct BootstrapOptions {
  std::size_t resamples = 1000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
};

// Percentile bootstrap over evaluable triplets. Requires n_evaluated >= 2.
std::pair<double, double> bootstrap_ci(const LayerOutcomes& outcomes, const EvalSet& eval_set,
                                       const BootstrapOptions& options = {});

struct EvalOptions {
  // Subtract per-layer term means before computing similarities. Ignored for
  // bundles already flagged as centered.
  bool center = true;
  std::size_t threads = 0;  // 0 = hardware concurrency
  std::optional<BootstrapOptions> bootstrap = BootstrapOptions{};
};

struct ModelEvaluation {
  ModelSummary summary;
  bool centered = false;  // whether similarities were computed on centered data
  // Per-triplet model choice at the best layer, aligned with the eval set.
  std::vector<std::optional<Choice>> best_layer_choices;
};

ModelEvaluation evaluate_model(const EmbeddingBundle& bundle, const EvalSet& eval_set, const EvalOptions& options = {});

}  // namespace tripletalign
