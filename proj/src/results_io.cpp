#include "tripletalign/results_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "tripletalign/error.hpp"

namespace tripletalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kReprFormat = "tripletalign.repr-result";
constexpr const char* kBehavFormat = "tripletalign.behav-result";

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_double(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

json choice_json(const std::optional<Choice>& c) { return c ? json(to_string(*c)) : json(nullptr); }

std::optional<Choice> choice_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  const auto s = j.get<std::string>();
  if (s == "target1") return Choice::Target1;
  if (s == "target2") return Choice::Target2;
  throw ParseError("report", "unknown choice '" + s + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

json to_json(const ReprResultFile& r) {
  const auto& s = r.evaluation.summary;
  json layers = json::array();
  for (const auto& l : s.layers) {
    layers.push_back({{"block", l.layer.block},
                      {"kind", to_string(l.layer.kind)},
                      {"ca", l.ca},
                      {"n", l.n_evaluated},
                      {"n_unevaluable", l.n_unevaluable},
                      {"ties", l.ties},
                      {"gamma_pearson", opt(l.gamma_pearson)},
                      {"gamma_spearman", opt(l.gamma_spearman)},
                      {"ci_lo", opt(l.ci_lo)},
                      {"ci_hi", opt(l.ci_hi)}});
  }
  json tv = json::object();
  for (const auto& [kind, value] : s.tv_per_kind) tv[std::string(to_string(kind))] = value;

  json choices = json::array();
  for (std::size_t i = 0; i < r.triplet_ids.size(); ++i) {
    choices.push_back({{"triplet_id", r.triplet_ids[i]}, {"choice", choice_json(r.evaluation.best_layer_choices[i])}});
  }
  json out = {{"format", kReprFormat},
              {"version", 1},
              {"name", r.name},
              {"model_id", s.model_id},
              {"mode", to_string(s.mode)},
              {"centered", r.evaluation.centered},
              {"layers", layers},
              {"summary",
               {{"best_block", s.best_layer.block},
                {"best_kind", to_string(s.best_layer.kind)},
                {"max_ca", s.max_ca},
                {"tv", tv}}},
              {"best_layer_choices", choices}};
  if (!r.metadata.empty()) out["metadata"] = r.metadata;
  return out;
}

ReprResultFile repr_result_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kReprFormat) throw ParseError("report", "not a repr result file");
    ReprResultFile r;
    r.name = j.at("name").get<std::string>();
    auto& s = r.evaluation.summary;
    s.model_id = j.at("model_id").get<std::string>();
    s.mode = parse_mode(j.at("mode").get<std::string>());
    r.evaluation.centered = j.at("centered").get<bool>();
    for (const auto& l : j.at("layers")) {
      LayerResult lr;
      lr.layer = {l.at("block").get<int>(), parse_layer_kind(l.at("kind").get<std::string>())};
      lr.ca = l.at("ca").get<double>();
      lr.n_evaluated = l.at("n").get<std::size_t>();
      lr.n_unevaluable = l.at("n_unevaluable").get<std::size_t>();
      lr.ties = l.at("ties").get<std::size_t>();
      lr.gamma_pearson = opt_double(l, "gamma_pearson");
      lr.gamma_spearman = opt_double(l, "gamma_spearman");
      lr.ci_lo = opt_double(l, "ci_lo");
      lr.ci_hi = opt_double(l, "ci_hi");
      s.layers.push_back(lr);
    }
    const auto& sum = j.at("summary");
    s.best_layer = {sum.at("best_block").get<int>(), parse_layer_kind(sum.at("best_kind").get<std::string>())};
    s.max_ca = sum.at("max_ca").get<double>();
    for (const auto& [kind, value] : sum.at("tv").items()) s.tv_per_kind[parse_layer_kind(kind)] = value.get<double>();
    for (const auto& c : j.at("best_layer_choices")) {
      r.triplet_ids.push_back(c.at("triplet_id").get<std::string>());
      r.evaluation.best_layer_choices.push_back(choice_from(c.at("choice")));
    }
    if (j.contains("metadata")) r.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError("report", std::string("malformed repr result: ") + e.what());
  } catch (const ParseError& e) {
    throw ParseError("report", std::string("malformed repr result: ") + e.what());
  }
}

json to_json(const BehavResultFile& r) {
  json choices = json::array();
  for (const auto& [id, c] : r.choices) choices.push_back({{"triplet_id", id}, {"choice", choice_json(c)}});
  json out = {{"format", kBehavFormat},
              {"version", 1},
              {"name", r.name},
              {"model", r.model},
              {"variant", to_string(r.variant)},
              {"result", to_json(r.result)},
              {"result_valid_only", r.result_valid_only ? to_json(*r.result_valid_only) : json(nullptr)},
              {"choices", choices}};
  if (!r.metadata.empty()) out["metadata"] = r.metadata;
  return out;
}

BehavResultFile behav_result_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kBehavFormat) throw ParseError("report", "not a behav result file");
    BehavResultFile r;
    r.name = j.at("name").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.variant = parse_prompt_variant(j.at("variant").get<std::string>());
    r.result = behavioral_result_from_json(j.at("result"));
    if (j.contains("result_valid_only") && !j.at("result_valid_only").is_null()) {
      r.result_valid_only = behavioral_result_from_json(j.at("result_valid_only"));
    }
    for (const auto& c : j.at("choices")) {
      r.choices.emplace_back(c.at("triplet_id").get<std::string>(), choice_from(c.at("choice")));
    }
    if (j.contains("metadata")) r.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError("report", std::string("malformed behav result: ") + e.what());
  } catch (const Error& e) {
    throw ParseError("report", std::string("malformed behav result: ") + e.what());
  }
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("io", "short write to '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("io", "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ReprResultFile load_repr_result(const fs::path& path) {
  try {
    return repr_result_from_json(json::parse(read_text_file(path)));
  } catch (const json::exception& e) {
    throw ParseError("report", path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError("report", path.string() + ": " + e.what());
  }
}

BehavResultFile load_behav_result(const fs::path& path) {
  try {
    return behav_result_from_json(json::parse(read_text_file(path)));
  } catch (const json::exception& e) {
    throw ParseError("report", path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError("report", path.string() + ": " + e.what());
  }
}

std::vector<std::pair<std::string, std::optional<Choice>>> consensus_choices(
    const std::vector<BehavioralTrial>& trials, const EvalSet& eval_set) {
  struct Acc {
    std::optional<Choice> choice;
    bool consistent = true;
    bool seen = false;
  };
  std::unordered_map<std::string_view, Acc> acc;
  for (const auto& t : trials) {
    auto& a = acc[t.triplet_id];
    if (!t.parsed.valid()) {
      a.consistent = false;
    } else if (!a.seen) {
      a.choice = t.parsed.choice;
    } else if (a.choice != t.parsed.choice) {
      a.consistent = false;
    }
    a.seen = true;
  }
  std::vector<std::pair<std::string, std::optional<Choice>>> out;
  out.reserve(eval_set.size());
  for (const auto& item : eval_set) {
    auto it = acc.find(item.triplet.id);
    std::optional<Choice> c;
    if (it != acc.end() && it->second.consistent) c = it->second.choice;
    out.emplace_back(item.triplet.id, c);
  }
  return out;
}

}  // namespace tripletalign
