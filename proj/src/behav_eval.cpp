#include "tripletalign/behav_eval.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include "tripletalign/error.hpp"

namespace tripletalign {

using nlohmann::json;

namespace {

constexpr std::string_view kMinimal = "Which of the words {A} or {B} is closer in meaning with the word {C}?";
constexpr std::string_view kPartial =
    "Which of the words {A} or {B} is closer in meaning with the word {C}? "
    "Answer with exactly one word: either {A} or {B}.";
constexpr std::string_view kFull =
    "Which of the words {A} or {B} is closer in meaning with the word {C}? "
    "Answer with exactly one word: either {A} or {B}. "
    "Do not answer with {C}. Do not answer in a full sentence.";

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

bool is_word_byte(unsigned char ch) {
  return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch >= 0x80;
}

bool is_space(unsigned char ch) {
  return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v';
}

ParsedAnswer classify(const ChatResponse& response, const Triplet& triplet,
                      const TrialConfig& config, std::string_view raw) {
  std::string text(raw);
  if (config.reasoning) {
    auto stripped = strip_reasoning(raw, *config.reasoning);
    if (stripped.unterminated) return ParsedAnswer::invalid_because(InvalidReason::BudgetExhausted);
    text = std::move(stripped.text);
  }
  auto parsed = parse_response(text, triplet, PresentedOrder::Original);
  if (!parsed.valid() && parsed.invalid == InvalidReason::NoMatch && response.finish_reason == "length") {
    parsed.invalid = InvalidReason::BudgetExhausted;
  }
  return parsed;
}

}  // namespace

std::string_view to_string(PromptVariant v) noexcept {
  switch (v) {
    case PromptVariant::Minimal: return "minimal";
    case PromptVariant::Partial: return "partial";
    case PromptVariant::Full: return "full";
  }
  return "full";
}

PromptVariant parse_prompt_variant(std::string_view s) {
  if (s == "minimal") return PromptVariant::Minimal;
  if (s == "partial") return PromptVariant::Partial;
  if (s == "full") return PromptVariant::Full;
  throw ConfigError("behav-eval", "unknown prompt variant '" + std::string(s) + "'");
}

std::string_view prompt_template(PromptVariant v) noexcept {
  switch (v) {
    case PromptVariant::Minimal: return kMinimal;
    case PromptVariant::Partial: return kPartial;
    case PromptVariant::Full: return kFull;
  }
  return kFull;
}

std::string_view to_string(PresentedOrder o) noexcept {
  return o == PresentedOrder::Original ? "original" : "swapped";
}

PresentedOrder parse_presented_order(std::string_view s) {
  if (s == "original") return PresentedOrder::Original;
  if (s == "swapped") return PresentedOrder::Swapped;
  throw ParseError("behav-eval", "unknown presented order '" + std::string(s) + "'");
}

PresentedOrder presented_order(std::int64_t seed, std::string_view triplet_id) {
  const auto h = splitmix64(fnv1a(triplet_id) ^ splitmix64(static_cast<std::uint64_t>(seed)));
  return (h & 1u) ? PresentedOrder::Swapped : PresentedOrder::Original;
}

std::vector<ChatMessage> build_prompt(const Triplet& triplet, PromptVariant variant, PresentedOrder order) {
  const auto& first = order == PresentedOrder::Original ? triplet.target1 : triplet.target2;
  const auto& second = order == PresentedOrder::Original ? triplet.target2 : triplet.target1;
  const auto tmpl = prompt_template(variant);
  std::string text;
  text.reserve(tmpl.size() + 64);
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}') {
      switch (tmpl[i + 1]) {
        case 'A': text += first; i += 2; continue;
        case 'B': text += second; i += 2; continue;
        case 'C': text += triplet.anchor; i += 2; continue;
        default: break;
      }
    }
    text.push_back(tmpl[i]);
  }
  return {ChatMessage{"user", std::move(text)}};
}

std::string_view to_string(InvalidReason r) noexcept {
  switch (r) {
    case InvalidReason::NoMatch: return "no_match";
    case InvalidReason::AnchorEcho: return "anchor_echo";
    case InvalidReason::BudgetExhausted: return "budget_exhausted";
    case InvalidReason::ProviderError: return "provider_error";
  }
  return "no_match";
}

InvalidReason parse_invalid_reason(std::string_view s) {
  if (s == "no_match") return InvalidReason::NoMatch;
  if (s == "anchor_echo") return InvalidReason::AnchorEcho;
  if (s == "budget_exhausted") return InvalidReason::BudgetExhausted;
  if (s == "provider_error") return InvalidReason::ProviderError;
  throw ParseError("behav-eval", "unknown invalid reason '" + std::string(s) + "'");
}

std::string normalize_answer(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto ch = static_cast<unsigned char>(raw[i]);
    if (is_space(ch)) {
      pending_space = !out.empty();
      continue;
    }
    bool keep = is_word_byte(ch);
    if (ch == '-') {
      keep = i > 0 && i + 1 < raw.size() && is_word_byte(static_cast<unsigned char>(raw[i - 1])) &&
             is_word_byte(static_cast<unsigned char>(raw[i + 1]));
    }
    if (!keep) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a') : static_cast<char>(ch));
  }
  return out;
}

ParsedAnswer parse_response(std::string_view raw, const Triplet& triplet, PresentedOrder /*order*/) {
  // Answers name the word itself, so the original target identity follows
  // from the match regardless of the order in which targets were presented.
  const auto answer = normalize_answer(raw);
  const auto t1 = normalize_answer(triplet.target1);
  const auto t2 = normalize_answer(triplet.target2);
  if (!answer.empty() && t1 != t2) {
    if (answer == t1) return ParsedAnswer::target(Choice::Target1);
    if (answer == t2) return ParsedAnswer::target(Choice::Target2);
  }
  if (!answer.empty() && answer == normalize_answer(triplet.anchor)) {
    return ParsedAnswer::invalid_because(InvalidReason::AnchorEcho);
  }
  return ParsedAnswer::invalid_because(InvalidReason::NoMatch);
}

StrippedResponse strip_reasoning(std::string_view raw, const ReasoningDelimiters& delims) {
  if (delims.open.empty() || delims.close.empty()) return {std::string(raw), false};
  const auto open = raw.find(delims.open);
  if (open == std::string_view::npos) {
    // Some chat templates put the opening tag into the prompt, so the
    // response starts inside the block.
    const auto close = raw.find(delims.close);
    if (close == std::string_view::npos) return {std::string(raw), false};
    return {std::string(raw.substr(close + delims.close.size())), false};
  }
  const auto close = raw.find(delims.close, open + delims.open.size());
  if (close == std::string_view::npos) return {std::string(), true};
  std::string out(raw.substr(0, open));
  out += raw.substr(close + delims.close.size());
  return {std::move(out), false};
}

json to_json(const BehavioralTrial& t) {
  json j = {{"model", t.model},
            {"variant", to_string(t.variant)},
            {"triplet_id", t.triplet_id},
            {"seed", t.seed},
            {"presented_order", to_string(t.presented_order)},
            {"raw_response", t.raw_response},
            {"parsed", t.parsed.choice ? std::string(to_string(*t.parsed.choice)) : std::string("invalid")},
            {"invalid_reason", t.parsed.invalid ? json(to_string(*t.parsed.invalid)) : json(nullptr)}};
  if (!t.error.empty()) j["error"] = t.error;
  return j;
}

BehavioralTrial trial_from_json(const json& j) {
  try {
    BehavioralTrial t;
    t.model = j.at("model").get<std::string>();
    t.variant = parse_prompt_variant(j.at("variant").get<std::string>());
    t.triplet_id = j.at("triplet_id").get<std::string>();
    t.seed = j.at("seed").get<std::int64_t>();
    t.presented_order = parse_presented_order(j.at("presented_order").get<std::string>());
    t.raw_response = j.at("raw_response").get<std::string>();
    const auto parsed = j.at("parsed").get<std::string>();
    if (parsed == "target1") {
      t.parsed = ParsedAnswer::target(Choice::Target1);
    } else if (parsed == "target2") {
      t.parsed = ParsedAnswer::target(Choice::Target2);
    } else if (parsed == "invalid") {
      t.parsed = ParsedAnswer::invalid_because(parse_invalid_reason(j.at("invalid_reason").get<std::string>()));
    } else {
      throw ParseError("behav-eval", "unknown parsed value '" + parsed + "'");
    }
    t.error = j.value("error", std::string());
    return t;
  } catch (const json::exception& e) {
    throw ParseError("behav-eval", std::string("malformed trial record: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError("behav-eval", std::string("malformed trial record: ") + e.what());
  }
}

std::string trial_key(std::string_view model, PromptVariant variant, std::string_view triplet_id, std::int64_t seed) {
  std::string key;
  key.append(model).append("\x1f").append(to_string(variant)).append("\x1f").append(triplet_id);
  key.append("\x1f").append(std::to_string(seed));
  return key;
}

std::string trial_key(const BehavioralTrial& t) { return trial_key(t.model, t.variant, t.triplet_id, t.seed); }

void validate(const TrialConfig& config) {
  if (config.model.empty()) throw ConfigError("behav-eval", "model name is empty");
  if (config.max_tokens <= 0) throw ConfigError("behav-eval", "max_tokens must be positive");
  if (config.seeds.empty()) throw ConfigError("behav-eval", "at least one seed is required");
  if (std::set<std::int64_t>(config.seeds.begin(), config.seeds.end()).size() != config.seeds.size()) {
    throw ConfigError("behav-eval", "seeds must be distinct");
  }
  if (config.parallelism == 0) throw ConfigError("behav-eval", "parallelism must be at least 1");
  if (config.retries < 0) throw ConfigError("behav-eval", "retries must be non-negative");
  if (!(config.temperature >= 0.0)) throw ConfigError("behav-eval", "temperature must be non-negative");
  if (config.reasoning && (config.reasoning->open.empty() || config.reasoning->close.empty())) {
    throw ConfigError("behav-eval", "reasoning delimiters must be non-empty");
  }
}

std::vector<BehavioralTrial> run_trials(ChatProvider& provider, const EvalSet& eval_set, const TrialConfig& config,
                                        const std::vector<BehavioralTrial>& completed,
                                        const std::function<void(const BehavioralTrial&)>& on_trial) {
  validate(config);

  std::unordered_map<std::string, const BehavioralTrial*> done;
  for (const auto& t : completed) done.emplace(trial_key(t), &t);

  const auto n = eval_set.size();
  const auto total = n * config.seeds.size();
  std::vector<BehavioralTrial> trials(total);
  std::vector<std::size_t> pending;
  for (std::size_t s = 0; s < config.seeds.size(); ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto seed = config.seeds[s];
      const auto& item = eval_set[i];
      auto& trial = trials[s * n + i];
      if (auto it = done.find(trial_key(config.model, config.variant, item.triplet.id, seed)); it != done.end()) {
        trial = *it->second;
        continue;
      }
      trial.model = config.model;
      trial.variant = config.variant;
      trial.triplet_id = item.triplet.id;
      trial.seed = seed;
      trial.presented_order = presented_order(seed, item.triplet.id);
      pending.push_back(s * n + i);
    }
  }

  std::mutex callback_mutex;
  auto run_one = [&](std::size_t idx) {
    auto& trial = trials[idx];
    const auto& triplet = eval_set[idx % n].triplet;
    ChatRequest request;
    request.model = config.model;
    request.messages = build_prompt(triplet, config.variant, trial.presented_order);
    request.temperature = config.temperature;
    request.max_tokens = config.max_tokens;
    if (config.send_seed) request.seed = trial.seed;

    std::optional<ChatResponse> response;
    for (int attempt = 0; attempt <= config.retries && !response; ++attempt) {
      try {
        response = provider.complete(request);
      } catch (const ProviderError& e) {
        trial.error = e.what();
      }
    }
    if (response) {
      trial.error.clear();
      trial.raw_response = response->content;
      trial.parsed = classify(*response, triplet, config, response->content);
    } else {
      trial.parsed = ParsedAnswer::invalid_because(InvalidReason::ProviderError);
    }
    if (on_trial) {
      std::lock_guard lock(callback_mutex);
      on_trial(trial);
    }
  };

  const auto workers = std::min(config.parallelism, pending.size());
  if (workers <= 1) {
    for (auto idx : pending) run_one(idx);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (auto k = next.fetch_add(1); k < pending.size(); k = next.fetch_add(1)) run_one(pending[k]);
          } catch (...) {
            errors[w] = std::current_exception();
            next.store(pending.size());
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return trials;
}

BehavioralResult behavioral_accuracy(const std::vector<BehavioralTrial>& trials, const EvalSet& eval_set,
                                     InvalidHandling handling) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < eval_set.size(); ++i) index.emplace(eval_set[i].triplet.id, i);

  // seed -> per-triplet trial
  std::map<std::int64_t, std::vector<const BehavioralTrial*>> by_seed;
  for (const auto& t : trials) {
    auto it = index.find(t.triplet_id);
    if (it == index.end()) throw ValidationError("behav-eval", "trial for unknown triplet '" + t.triplet_id + "'");
    auto& slots = by_seed[t.seed];
    if (slots.empty()) slots.resize(eval_set.size(), nullptr);
    if (slots[it->second]) {
      throw ValidationError("behav-eval", "duplicate trial for triplet '" + t.triplet_id + "' seed " +
                                              std::to_string(t.seed));
    }
    slots[it->second] = &t;
  }
  if (by_seed.empty()) throw ValidationError("behav-eval", "no trials");
  if (eval_set.empty()) throw ValidationError("behav-eval", "empty eval set");

  BehavioralResult r;
  r.invalid_handling = handling;
  r.n = eval_set.size();
  std::size_t invalid = 0;
  std::map<PresentedOrder, std::size_t> order_hits;
  for (const auto& [seed, slots] : by_seed) {
    std::size_t hits = 0;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto* t = slots[i];
      if (!t) {
        throw ValidationError("behav-eval", "missing trial for triplet '" + eval_set[i].triplet.id + "' seed " +
                                                std::to_string(seed));
      }
      ++r.n_trials;
      auto& order = r.per_order[t->presented_order];
      ++order.n;
      if (!t->parsed.valid()) {
        ++invalid;
        ++r.invalid_reasons[t->parsed.invalid.value_or(InvalidReason::NoMatch)];
        continue;
      }
      ++valid;
      if (*t->parsed.choice == eval_set[i].human) {
        ++hits;
        ++order_hits[t->presented_order];
      }
    }
    const auto denom = handling == InvalidHandling::CountAsWrong ? slots.size() : valid;
    r.per_seed_ca[seed] = denom == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(denom);
  }
  for (auto& [order, acc] : r.per_order) {
    acc.ca = static_cast<double>(order_hits[order]) / static_cast<double>(acc.n);
  }

  double sum = 0.0;
  for (const auto& [seed, ca] : r.per_seed_ca) sum += ca;
  r.mean_ca = sum / static_cast<double>(r.per_seed_ca.size());
  r.invalid_fraction = static_cast<double>(invalid) / static_cast<double>(r.n_trials);

  std::size_t both_hits = 0;
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    bool seen_original = false;
    bool seen_swapped = false;
    bool all_correct = true;
    for (const auto& [seed, slots] : by_seed) {
      const auto* t = slots[i];
      (t->presented_order == PresentedOrder::Original ? seen_original : seen_swapped) = true;
      if (!t->parsed.valid() || *t->parsed.choice != eval_set[i].human) all_correct = false;
    }
    if (seen_original && seen_swapped) {
      ++r.both_orders_n;
      if (all_correct) ++both_hits;
    }
  }
  if (r.both_orders_n > 0) {
    r.both_orders_ca = static_cast<double>(both_hits) / static_cast<double>(r.both_orders_n);
  }
  return r;
}

json to_json(const BehavioralResult& r) {
  json per_seed = json::object();
  for (const auto& [seed, ca] : r.per_seed_ca) per_seed[std::to_string(seed)] = ca;
  json per_order = json::object();
  for (const auto& [order, acc] : r.per_order) per_order[std::string(to_string(order))] = {{"ca", acc.ca}, {"n", acc.n}};
  json reasons = json::object();
  for (const auto& [reason, count] : r.invalid_reasons) reasons[std::string(to_string(reason))] = count;
  return {{"mean_ca", r.mean_ca},
          {"per_seed_ca", per_seed},
          {"invalid_fraction", r.invalid_fraction},
          {"both_orders_ca", r.both_orders_ca ? json(*r.both_orders_ca) : json(nullptr)},
          {"both_orders_n", r.both_orders_n},
          {"per_order", per_order},
          {"invalid_reasons", reasons},
          {"n", r.n},
          {"n_trials", r.n_trials},
          {"invalid_handling", r.invalid_handling == InvalidHandling::CountAsWrong ? "count_as_wrong" : "exclude"}};
}

BehavioralResult behavioral_result_from_json(const json& j) {
  try {
    BehavioralResult r;
    r.mean_ca = j.at("mean_ca").get<double>();
    for (const auto& [seed, ca] : j.at("per_seed_ca").items()) r.per_seed_ca[std::stoll(seed)] = ca.get<double>();
    r.invalid_fraction = j.at("invalid_fraction").get<double>();
    if (!j.at("both_orders_ca").is_null()) r.both_orders_ca = j.at("both_orders_ca").get<double>();
    r.both_orders_n = j.value("both_orders_n", std::size_t{0});
    if (j.contains("per_order")) {
      for (const auto& [order, acc] : j.at("per_order").items()) {
        r.per_order[parse_presented_order(order)] = {acc.at("ca").get<double>(), acc.at("n").get<std::size_t>()};
      }
    }
    if (j.contains("invalid_reasons")) {
      for (const auto& [reason, count] : j.at("invalid_reasons").items()) {
        r.invalid_reasons[parse_invalid_reason(reason)] = count.get<std::size_t>();
      }
    }
    r.n = j.at("n").get<std::size_t>();
    r.n_trials = j.at("n_trials").get<std::size_t>();
    r.invalid_handling =
        j.value("invalid_handling", std::string("count_as_wrong")) == "exclude" ? InvalidHandling::Exclude
                                                                                : InvalidHandling::CountAsWrong;
    return r;
  } catch (const json::exception& e) {
    throw ParseError("behav-eval", std::string("malformed behavioral result: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError("behav-eval", std::string("malformed behavioral result: ") + e.what());
  }
}

}  // namespace tripletalign
