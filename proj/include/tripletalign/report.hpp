#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tripletalign/dataset.hpp"
#include "tripletalign/results_io.hpp"

namespace tripletalign {

// One model row of the summary table. Absent values are rendered as "-".
struct SummaryRow {
  std::string model;
  std::optional<double> pretrained;
  std::optional<double> instruct;
  std::optional<double> behavioral;
  std::optional<double> invalid;

  bool operator==(const SummaryRow&) const = default;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;  // sorted by model name
  // Mean of each model's max-layer (or behavioral) ca over present values.
  // The invalid column has no mean.
  SummaryRow means;
};

// Rows are keyed by result name: a pretrained and an instruct result with
// the same name share a row. Only behavioral results of the full prompt
// variant populate the behavioral columns; with exclude_invalid the
// valid-answers-only accuracy is used. Throws ValidationError for two
// results with the same name and mode.
SummaryTable summary_table(const std::vector<ReprResultFile>& repr, const std::vector<BehavResultFile>& behav,
                           bool exclude_invalid = false);

std::string render_summary_csv(const SummaryTable& table);
std::string render_summary_text(const SummaryTable& table);

struct CurveRow {
  int block = 0;
  LayerKind kind = LayerKind::Residual;
  double ca = 0.0;

  bool operator==(const CurveRow&) const = default;
};

// One row per layer in canonical order.
std::vector<CurveRow> layer_curves(const ModelSummary& summary);
std::string render_curves_csv(const std::vector<CurveRow>& rows);
std::vector<CurveRow> parse_curves_csv(const std::string& text);

enum class Unanimity { AllAgree, AllDisagree, Mixed };

std::string_view to_string(Unanimity u) noexcept;

struct ExampleRecord {
  Triplet triplet;
  Choice human;
  double agreement;
  std::vector<std::optional<Choice>> model_choices;  // aligned with MinedExamples::models
  Unanimity unanimity;
};

struct MinedExamples {
  std::vector<std::string> models;
  std::vector<ExampleRecord> all_agree;
  std::vector<ExampleRecord> all_disagree;
  std::vector<ExampleRecord> mixed;
};

// Per-model choices keyed by model name, aligned with the eval set; nullopt
// means the model gave no valid choice for that triplet.
using ModelChoices = std::map<std::string, std::vector<std::optional<Choice>>>;

// Keeps triplets with agreement >= min_agreement and partitions them:
// all_agree when every model picked the human majority, all_disagree when
// every model picked the other target, mixed otherwise. Each list is sorted
// by descending agreement (stable in eval-set order).
MinedExamples mine_examples(const EvalSet& eval_set, const ModelChoices& choices, double min_agreement = 0.8);

std::string render_examples_csv(const std::vector<ExampleRecord>& records, const std::vector<std::string>& models);
std::string render_examples_markdown(const std::vector<ExampleRecord>& records,
                                     const std::vector<std::string>& models, const std::string& title);

struct ScatterRow {
  std::string model;
  Mode mode = Mode::Pretrained;
  LayerKey layer;
  double ca = 0.0;
  std::optional<double> gamma_pearson;
  std::optional<double> gamma_spearman;
};

std::vector<ScatterRow> gamma_scatter(const std::vector<ReprResultFile>& results);
std::string render_scatter_csv(const std::vector<ScatterRow>& rows);

// All behavioral results (every variant) with per-order accuracies.
std::string render_behavioral_csv(const std::vector<BehavResultFile>& results);

}  // namespace tripletalign
