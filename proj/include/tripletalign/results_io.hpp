#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tripletalign/behav_eval.hpp"
#include "tripletalign/repr_eval.hpp"

namespace tripletalign {

// Per-model representational result file.
struct ReprResultFile {
  std::string name;  // report row key; defaults to the bundle's model_id
  ModelEvaluation evaluation;
  // Triplet ids aligned with evaluation.best_layer_choices.
  std::vector<std::string> triplet_ids;
  std::map<std::string, std::string> metadata;
};

// Per-model, per-variant behavioral result file.
struct BehavResultFile {
  std::string name;
  std::string model;
  PromptVariant variant = PromptVariant::Full;
  BehavioralResult result;
  // Same trials with invalid answers excluded from the denominator.
  std::optional<BehavioralResult> result_valid_only;
  // Per-triplet choice when every seed produced the same valid answer.
  std::vector<std::pair<std::string, std::optional<Choice>>> choices;
  std::map<std::string, std::string> metadata;
};

nlohmann::json to_json(const ReprResultFile& r);
ReprResultFile repr_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BehavResultFile& r);
BehavResultFile behav_result_from_json(const nlohmann::json& j);

// Stable, pretty-printed JSON with a trailing newline.
std::string dump_json(const nlohmann::json& j);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

ReprResultFile load_repr_result(const std::filesystem::path& path);
BehavResultFile load_behav_result(const std::filesystem::path& path);

// Consensus choice per triplet across seeds (nullopt if any seed was invalid
// or seeds disagree), in eval-set order.
std::vector<std::pair<std::string, std::optional<Choice>>> consensus_choices(
    const std::vector<BehavioralTrial>& trials, const EvalSet& eval_set);

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

}  // namespace tripletalign
