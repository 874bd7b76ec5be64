#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tripletalign/chat_provider.hpp"
#include "tripletalign/dataset.hpp"

namespace tripletalign {

enum class PromptVariant { Minimal, Partial, Full };

std::string_view to_string(PromptVariant v) noexcept;
PromptVariant parse_prompt_variant(std::string_view s);

// Template text with {A}, {B}, {C} placeholders for the first presented
// target, the second presented target and the anchor.
std::string_view prompt_template(PromptVariant v) noexcept;

enum class PresentedOrder { Original, Swapped };

std::string_view to_string(PresentedOrder o) noexcept;
PresentedOrder parse_presented_order(std::string_view s);

// Deterministic function of (seed, triplet id) with a uniform marginal.
PresentedOrder presented_order(std::int64_t seed, std::string_view triplet_id);

// A single user message; no system message is sent.
std::vector<ChatMessage> build_prompt(const Triplet& triplet, PromptVariant variant, PresentedOrder order);

enum class InvalidReason { NoMatch, AnchorEcho, BudgetExhausted, ProviderError };

std::string_view to_string(InvalidReason r) noexcept;
InvalidReason parse_invalid_reason(std::string_view s);

// Either a target (by original identity) or an invalid answer.
struct ParsedAnswer {
  std::optional<Choice> choice;
  std::optional<InvalidReason> invalid;

  bool valid() const noexcept { return choice.has_value(); }
  static ParsedAnswer target(Choice c) { return {c, std::nullopt}; }
  static ParsedAnswer invalid_because(InvalidReason r) { return {std::nullopt, r}; }
  bool operator==(const ParsedAnswer&) const = default;
};

// Keeps letters, digits, spaces and hyphens between two word characters;
// lowercases ASCII; collapses runs of whitespace; trims. Bytes >= 0x80 are
// kept so non-ASCII letters survive.
std::string normalize_answer(std::string_view raw);

// Exact match of the normalized answer against the normalized targets, then
// the anchor (anchor_echo); anything else is no_match.
ParsedAnswer parse_response(std::string_view raw, const Triplet& triplet, PresentedOrder order);

struct ReasoningDelimiters {
  std::string open = "<think>";
  std::string close = "</think>";
};

struct StrippedResponse {
  std::string text;
  bool unterminated = false;  // an opened reasoning block never closed
};

// Removes the first delimited reasoning block. An unterminated block yields
// empty text.
StrippedResponse strip_reasoning(std::string_view raw, const ReasoningDelimiters& delims);

struct BehavioralTrial {
  std::string model;
  PromptVariant variant = PromptVariant::Full;
  std::string triplet_id;
  std::int64_t seed = 0;
  PresentedOrder presented_order = PresentedOrder::Original;
  std::string raw_response;
  ParsedAnswer parsed;
  std::string error;  // provider error text for provider_error trials

  bool operator==(const BehavioralTrial&) const = default;
};

nlohmann::json to_json(const BehavioralTrial& trial);
BehavioralTrial trial_from_json(const nlohmann::json& j);

// Key used for resuming interrupted runs.
std::string trial_key(std::string_view model, PromptVariant variant, std::string_view triplet_id, std::int64_t seed);
std::string trial_key(const BehavioralTrial& t);

struct TrialConfig {
  std::string model;
  PromptVariant variant = PromptVariant::Full;
  std::vector<std::int64_t> seeds{1, 2, 3};
  double temperature = 0.0;
  int max_tokens = 2000;
  std::optional<ReasoningDelimiters> reasoning;
  std::size_t parallelism = 4;
  int retries = 2;  // retransmissions after the first attempt
  bool send_seed = true;
};

// Throws ConfigError for an empty model name, non-positive budget,
// empty/duplicate seeds, zero parallelism or negative retries.
void validate(const TrialConfig& config);

// One trial per (seed, triplet) in canonical order (seed-major, eval-set
// order within a seed). Trials whose key appears in `completed` are reused
// without calling the provider. `on_trial` is invoked (serialized) for each
// newly produced trial as it completes.
std::vector<BehavioralTrial> run_trials(ChatProvider& provider, const EvalSet& eval_set, const TrialConfig& config,
                                        const std::vector<BehavioralTrial>& completed = {},
                                        const std::function<void(const BehavioralTrial&)>& on_trial = {});

enum class InvalidHandling {
  CountAsWrong,  // denominator = all triplets (default)
  Exclude,       // denominator = valid answers only
};

struct OrderAccuracy {
  double ca = 0.0;
  std::size_t n = 0;
};

struct BehavioralResult {
  double mean_ca = 0.0;
  std::map<std::int64_t, double> per_seed_ca;
  double invalid_fraction = 0.0;
  std::optional<double> both_orders_ca;  // nullopt when no triplet was seen in both orders
  std::size_t both_orders_n = 0;
  std::map<PresentedOrder, OrderAccuracy> per_order;
  std::map<InvalidReason, std::size_t> invalid_reasons;
  std::size_t n = 0;  // triplets
  std::size_t n_trials = 0;
  InvalidHandling invalid_handling = InvalidHandling::CountAsWrong;
};

// Throws ValidationError when some seed lacks a trial for an eval-set
// triplet, or trials reference unknown triplets.
BehavioralResult behavioral_accuracy(const std::vector<BehavioralTrial>& trials, const EvalSet& eval_set,
                                     InvalidHandling handling = InvalidHandling::CountAsWrong);

nlohmann::json to_json(const BehavioralResult& result);
BehavioralResult behavioral_result_from_json(const nlohmann::json& j);

}  // namespace tripletalign
