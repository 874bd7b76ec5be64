#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tripletalign/behav_eval.hpp"
#include "tripletalign/chat_provider.hpp"
#include "tripletalign/cli.hpp"
#include "tripletalign/dataset.hpp"
#include "tripletalign/embedding_store.hpp"
#include "tripletalign/error.hpp"
#include "tripletalign/oracle.hpp"
#include "tripletalign/report.hpp"
#include "tripletalign/repr_eval.hpp"
#include "tripletalign/results_io.hpp"

namespace tripletalign::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kNormalization =
    "keep [A-Za-z0-9], bytes >= 0x80, spaces and hyphens between word characters; ASCII lowercase; "
    "collapse whitespace; trim";

// Everything a run can be configured with; flags and config file both land
// here. Paths are resolved and checked before any work starts.
struct RunConfig {
  std::string dataset;
  std::vector<std::string> bundles;
  std::string endpoint;
  std::string model;
  std::string name;
  std::string variant = "full";
  std::vector<std::int64_t> seeds{1, 2, 3};
  double temperature = 0.0;
  int max_tokens = 2000;
  std::string reasoning_delims;
  std::size_t parallelism = 4;
  bool no_center = false;
  double min_agreement = 0.8;
  std::string out;
  std::string results;
  bool exclude_invalid = false;
  std::string mine_source = "repr";
  std::size_t bootstrap = 1000;
  std::uint64_t bootstrap_seed = 0;
  double confidence = 0.95;
  int timeout = 120;

  // fixtures
  std::string spec;
  std::uint64_t seed = 1;
  std::size_t terms = 20;
  std::size_t dim = 8;
  int blocks = 2;
  std::size_t triplets = 50;
  std::size_t ties = 1;
  std::size_t unlabeled = 0;
  double offset = 0.0;
  std::string planted;
  double noise = 0.0;
  std::string model_id = "synthetic";
  std::string mode = "pretrained";
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError("cli", std::string(what) + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError("cli", std::string(what) + " '" + path + "' does not exist");
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError("cli", std::string(what) + " is required");
  if (!fs::is_directory(path)) throw ConfigError("cli", std::string(what) + " '" + path + "' is not a directory");
}

std::vector<fs::path> list_files(const fs::path& dir, std::string_view suffix, std::string_view exclude = {}) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) return files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (!e.is_regular_file() || !name.ends_with(suffix)) continue;
    if (!exclude.empty() && name.ends_with(exclude)) continue;
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

LayerKey parse_layer_key(const std::string& s) {
  const auto dot = s.find('.');
  if (dot == std::string::npos) throw ConfigError("cli", "layer must look like <block>.<kind>, got '" + s + "'");
  try {
    return {std::stoi(s.substr(0, dot)), parse_layer_kind(s.substr(dot + 1))};
  } catch (const std::logic_error&) {
    throw ConfigError("cli", "invalid layer '" + s + "'");
  } catch (const ParseError& e) {
    throw ConfigError("cli", e.what());
  }
}

// ---------------------------------------------------------------- validate

int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require_file(cfg.dataset, "--dataset");
  for (const auto& b : cfg.bundles) require_dir(b, "--bundle");

  std::vector<std::string> failures;
  Dataset dataset;
  try {
    dataset = load_triplets(cfg.dataset);
  } catch (const Error& e) {
    err << "FAIL " << e.what() << "\n";
    return kValidationFailure;
  }

  EvalSet eval_set;
  try {
    const auto stats = dataset_stats(dataset);
    eval_set = build_eval_set(dataset);
    out << "triplets: " << stats.triplets << "\n"
        << "unique terms: " << stats.unique_terms << "\n"
        << "labeled: " << stats.labeled << "\n"
        << "ties: " << stats.ties << "\n"
        << "N (eval set): " << stats.eval_size << "\n";
    if (!eval_set.empty()) out << "human baseline: " << format_double(human_baseline(eval_set)) << "\n";
  } catch (const Error& e) {
    failures.emplace_back(e.what());
  }

  for (const auto& path : cfg.bundles) {
    auto problems = verify_bundle(path);
    if (problems.empty()) {
      const auto bundle = read_bundle(path);
      const TermIndex index(bundle.terms);
      std::vector<std::string> missing;
      std::set<std::string> seen;
      for (const auto& item : eval_set) {
        for (const auto* term : {&item.triplet.anchor, &item.triplet.target1, &item.triplet.target2}) {
          if (!index.find(*term) && seen.insert(*term).second) missing.push_back(*term);
        }
      }
      for (const auto& m : missing) problems.push_back("eval-set term '" + m + "' missing from bundle");
    }
    if (problems.empty()) {
      out << "bundle " << path << ": ok\n";
    } else {
      for (const auto& p : problems) failures.push_back("bundle " + path + ": " + p);
    }
  }

  for (const auto& f : failures) err << "FAIL " << f << "\n";
  if (!failures.empty()) {
    err << failures.size() << " validation failure(s)\n";
    return kValidationFailure;
  }
  out << "ok\n";
  return kSuccess;
}

// --------------------------------------------------------------- eval-repr

int cmd_eval_repr(const RunConfig& cfg, std::ostream& out, std::ostream& /*err*/) {
  require_file(cfg.dataset, "--dataset");
  if (cfg.bundles.empty()) throw ConfigError("cli", "at least one --bundle is required");
  for (const auto& b : cfg.bundles) require_dir(b, "--bundle");
  if (cfg.out.empty()) throw ConfigError("cli", "--out is required");
  if (!cfg.name.empty() && cfg.bundles.size() > 1) throw ConfigError("cli", "--name needs exactly one --bundle");
  if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0)) throw ConfigError("cli", "--confidence must lie in (0, 1)");

  const auto dataset = load_triplets(cfg.dataset);
  const auto eval_set = build_eval_set(dataset);

  EvalOptions options;
  options.center = !cfg.no_center;
  options.threads = cfg.parallelism;
  if (cfg.bootstrap > 0) {
    options.bootstrap = BootstrapOptions{cfg.bootstrap, cfg.confidence, cfg.bootstrap_seed};
  } else {
    options.bootstrap.reset();
  }

  std::set<fs::path> written;
  for (const auto& path : cfg.bundles) {
    const auto bundle = read_bundle(path);
    ReprResultFile result;
    result.name = cfg.name.empty() ? bundle.model_id : cfg.name;
    result.evaluation = evaluate_model(bundle, eval_set, options);
    for (const auto& item : eval_set) result.triplet_ids.push_back(item.triplet.id);
    result.metadata["centering"] = result.evaluation.centered
                                       ? (bundle.centered ? "pre-centered bundle" : "mean over all bundle terms")
                                       : "none";
    result.metadata["bootstrap"] = options.bootstrap ? std::to_string(options.bootstrap->resamples) +
                                                           " resamples, confidence " +
                                                           format_double(options.bootstrap->confidence) + ", seed " +
                                                           std::to_string(options.bootstrap->seed)
                                                     : "off";
    result.metadata["tie_rule"] = "sim1 == sim2 -> target1";
    result.metadata["eval_size"] = std::to_string(eval_set.size());

    const auto file = fs::path(cfg.out) / "repr" /
                      (file_stem(result.name) + "__" + std::string(to_string(bundle.mode)) + ".json");
    if (!written.insert(file).second) {
      throw ConfigError("cli", "two bundles map to the same result file '" + file.string() + "'");
    }
    write_text_file(file, dump_json(to_json(result)));
    const auto& s = result.evaluation.summary;
    out << result.name << " (" << to_string(s.mode) << "): max ca " << format_double(s.max_ca) << " at layer "
        << to_string(s.best_layer) << " -> " << file.string() << "\n";
  }
  return kSuccess;
}

// -------------------------------------------------------------- eval-behav

std::vector<BehavioralTrial> read_trial_log(const fs::path& path, std::ostream& err) {
  std::vector<BehavioralTrial> trials;
  if (!fs::exists(path)) return trials;
  std::ifstream in(path, std::ios::binary);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      trials.push_back(trial_from_json(json::parse(line)));
    } catch (const std::exception&) {
      // An interrupted writer leaves at most a torn final line.
      err << "warning: ignoring unreadable trial record at " << path.string() << ":" << lineno << "\n";
    }
  }
  return trials;
}

std::string trial_log_text(const std::vector<BehavioralTrial>& trials) {
  std::string text;
  for (const auto& t : trials) text += to_json(t).dump() + "\n";
  return text;
}

int cmd_eval_behav(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require_file(cfg.dataset, "--dataset");
  if (cfg.endpoint.empty()) throw ConfigError("cli", "--endpoint is required");
  if (cfg.out.empty()) throw ConfigError("cli", "--out is required");
  if (cfg.timeout <= 0) throw ConfigError("cli", "--timeout must be positive");

  TrialConfig tc;
  tc.model = cfg.model;
  tc.variant = parse_prompt_variant(cfg.variant);
  tc.seeds = cfg.seeds;
  tc.temperature = cfg.temperature;
  tc.max_tokens = cfg.max_tokens;
  tc.parallelism = cfg.parallelism;
  if (!cfg.reasoning_delims.empty()) {
    const auto comma = cfg.reasoning_delims.find(',');
    if (comma == std::string::npos) throw ConfigError("cli", "--reasoning-delims must be '<open>,<close>'");
    tc.reasoning = ReasoningDelimiters{cfg.reasoning_delims.substr(0, comma), cfg.reasoning_delims.substr(comma + 1)};
  }
  validate(tc);

  const char* key = std::getenv(kApiKeyEnv);
  HttpChatProvider provider({cfg.endpoint, key ? key : "", std::chrono::seconds(cfg.timeout)});

  const auto dataset = load_triplets(cfg.dataset);
  const auto eval_set = build_eval_set(dataset);
  if (eval_set.empty()) throw ValidationError("cli", "dataset has no evaluable triplets");

  const auto name = cfg.name.empty() ? cfg.model : cfg.name;
  const auto stem = file_stem(name) + "__" + std::string(to_string(tc.variant));
  const auto dir = fs::path(cfg.out) / "behav";
  const auto log_path = dir / (stem + ".trials.jsonl");
  fs::create_directories(dir);

  // Provider failures are not treated as completed; they are retried.
  std::vector<BehavioralTrial> completed;
  for (auto& t : read_trial_log(log_path, err)) {
    if (t.parsed.invalid != InvalidReason::ProviderError) completed.push_back(std::move(t));
  }
  write_text_file(log_path, trial_log_text(completed));

  std::size_t fresh = 0;
  {
    std::ofstream log(log_path, std::ios::binary | std::ios::app);
    if (!log) throw Error("cli", "cannot append to '" + log_path.string() + "'");
    auto trials = run_trials(provider, eval_set, tc, completed, [&](const BehavioralTrial& t) {
      log << to_json(t).dump() << "\n";
      log.flush();
      ++fresh;
    });
    log.close();
    write_text_file(log_path, trial_log_text(trials));

    BehavResultFile result;
    result.name = name;
    result.model = tc.model;
    result.variant = tc.variant;
    result.result = behavioral_accuracy(trials, eval_set, InvalidHandling::CountAsWrong);
    result.result_valid_only = behavioral_accuracy(trials, eval_set, InvalidHandling::Exclude);
    result.choices = consensus_choices(trials, eval_set);
    result.metadata["normalization"] = kNormalization;
    result.metadata["temperature"] = format_double(tc.temperature);
    result.metadata["max_tokens"] = std::to_string(tc.max_tokens);
    result.metadata["reasoning_delims"] = tc.reasoning ? tc.reasoning->open + "," + tc.reasoning->close : "";
    result.metadata["prompt_template"] = std::string(prompt_template(tc.variant));

    const auto result_path = dir / (stem + ".json");
    write_text_file(result_path, dump_json(to_json(result)));
    out << name << " (" << to_string(tc.variant) << "): ca " << format_double(result.result.mean_ca) << ", invalid "
        << format_double(result.result.invalid_fraction) << " (" << fresh << " new trial(s), "
        << trials.size() - fresh << " reused) -> " << result_path.string() << "\n";

    const auto failed = static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(), [](const auto& t) {
      return t.parsed.invalid == InvalidReason::ProviderError;
    }));
    if (failed > 0) {
      err << "error: " << failed << " trial(s) failed at the provider; rerun the same command to retry them\n";
      return kRuntimeFailure;
    }
  }
  return kSuccess;
}

// ------------------------------------------------------------------ report

int cmd_report(const RunConfig& cfg, std::ostream& out, std::ostream& /*err*/) {
  require_dir(cfg.results, "--results");
  if (!cfg.dataset.empty()) require_file(cfg.dataset, "--dataset");
  if (cfg.mine_source != "repr" && cfg.mine_source != "behav" && cfg.mine_source != "all") {
    throw ConfigError("cli", "--mine-source must be repr, behav or all");
  }
  const fs::path results(cfg.results);
  const fs::path dest = cfg.out.empty() ? results / "report" : fs::path(cfg.out);

  std::vector<ReprResultFile> repr;
  for (const auto& f : list_files(results / "repr", ".json")) repr.push_back(load_repr_result(f));
  std::vector<BehavResultFile> behav;
  for (const auto& f : list_files(results / "behav", ".json", ".trials.jsonl")) behav.push_back(load_behav_result(f));
  if (repr.empty() && behav.empty()) {
    throw ValidationError("report", "no result files under '" + results.string() + "'");
  }

  const auto table = summary_table(repr, behav, cfg.exclude_invalid);
  write_text_file(dest / "summary.csv", render_summary_csv(table));
  write_text_file(dest / "summary.txt", render_summary_text(table));
  write_text_file(dest / "scatter.csv", render_scatter_csv(gamma_scatter(repr)));
  if (!behav.empty()) write_text_file(dest / "behavioral.csv", render_behavioral_csv(behav));
  for (const auto& r : repr) {
    const auto file = file_stem(r.name) + "__" + std::string(to_string(r.evaluation.summary.mode)) + ".csv";
    write_text_file(dest / "curves" / file, render_curves_csv(layer_curves(r.evaluation.summary)));
  }

  std::string notes =
      "Models (mean): average over models of each model's maximum-over-layers choice accuracy "
      "(behavioral column: mean over seeds of full-prompt accuracy); absent values excluded.\n";
  notes += cfg.exclude_invalid ? "Behavioral accuracy: invalid answers excluded from the denominator.\n"
                               : "Behavioral accuracy: invalid answers counted as wrong.\n";
  notes += "Representational choices use cosine similarity on per-layer centered embeddings "
           "(mean over all terms stored in the bundle) unless a result states otherwise.\n";

  if (!cfg.dataset.empty()) {
    const auto eval_set = build_eval_set(load_triplets(cfg.dataset));
    ModelChoices choices;
    auto align = [&](const std::vector<std::string>& ids, const std::vector<std::optional<Choice>>& picks) {
      std::map<std::string_view, std::optional<Choice>> by_id;
      for (std::size_t i = 0; i < ids.size(); ++i) by_id[ids[i]] = picks[i];
      std::vector<std::optional<Choice>> aligned;
      for (const auto& item : eval_set) {
        auto it = by_id.find(item.triplet.id);
        aligned.push_back(it == by_id.end() ? std::nullopt : it->second);
      }
      return aligned;
    };
    if (cfg.mine_source != "behav") {
      for (const auto& r : repr) {
        const auto label = r.name + " (" + std::string(to_string(r.evaluation.summary.mode)) + ")";
        choices[label] = align(r.triplet_ids, r.evaluation.best_layer_choices);
      }
    }
    if (cfg.mine_source != "repr") {
      for (const auto& b : behav) {
        if (b.variant != PromptVariant::Full) continue;
        std::vector<std::string> ids;
        std::vector<std::optional<Choice>> picks;
        for (const auto& [id, c] : b.choices) {
          ids.push_back(id);
          picks.push_back(c);
        }
        choices[b.name + " (behavioral)"] = align(ids, picks);
      }
    }
    if (!choices.empty()) {
      const auto mined = mine_examples(eval_set, choices, cfg.min_agreement);
      write_text_file(dest / "examples_all_agree.csv", render_examples_csv(mined.all_agree, mined.models));
      write_text_file(dest / "examples_all_disagree.csv", render_examples_csv(mined.all_disagree, mined.models));
      write_text_file(dest / "examples_mixed.csv", render_examples_csv(mined.mixed, mined.models));
      write_text_file(dest / "examples.md",
                      render_examples_markdown(mined.all_agree, mined.models, "All models agree with the human majority") +
                          "\n" +
                          render_examples_markdown(mined.all_disagree, mined.models,
                                                   "All models disagree with the human majority"));
      notes += "Examples: triplets with human agreement >= " + format_double(cfg.min_agreement) +
               "; model choices at each model's best layer (representational) or consistent across seeds "
               "(behavioral).\n";
    }
  }
  write_text_file(dest / "NOTES.txt", notes);

  out << render_summary_text(table);
  out << "report written to " << dest.string() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------- fixtures

int cmd_fixtures(const RunConfig& cfg, std::ostream& out, std::ostream& /*err*/) {
  if (cfg.out.empty()) throw ConfigError("cli", "--out is required");
  oracle::SynthSpec spec;
  if (!cfg.spec.empty()) {
    require_file(cfg.spec, "--spec");
    json j;
    try {
      j = json::parse(read_text_file(cfg.spec));
    } catch (const json::exception& e) {
      throw ConfigError("cli", "--spec: " + std::string(e.what()));
    }
    spec = oracle::synth_spec_from_json(j);
  } else {
    if (cfg.blocks < 1) throw ConfigError("cli", "--blocks must be at least 1");
    spec.seed = cfg.seed;
    spec.n_terms = cfg.terms;
    spec.dim = cfg.dim;
    spec.layers.clear();
    for (int b = 0; b < cfg.blocks; ++b) {
      for (auto kind : {LayerKind::Attention, LayerKind::Mlp, LayerKind::Residual}) spec.layers.push_back({b, kind});
    }
    spec.n_triplets = cfg.triplets;
    spec.n_ties = cfg.ties;
    spec.n_unlabeled = cfg.unlabeled;
    spec.offset = cfg.offset;
    spec.model_id = cfg.model_id;
    try {
      spec.mode = parse_mode(cfg.mode);
    } catch (const ParseError& e) {
      throw ConfigError("cli", e.what());
    }
    if (!cfg.planted.empty()) spec.planted = oracle::PlantedGeometry{parse_layer_key(cfg.planted), cfg.noise};
    oracle::validate(spec);
  }
  oracle::write_fixtures(spec, cfg.out);
  out << "fixtures written to " << cfg.out << "\n";
  return kSuccess;
}

}  // namespace

std::string file_stem(const std::string& name) {
  std::string out;
  for (unsigned char ch : name) {
    const bool ok = std::isalnum(ch) || ch == '.' || ch == '-' || ch == '_';
    out.push_back(ok ? static_cast<char>(ch) : '_');
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Representational and behavioral alignment of language models with human triplet judgments",
               "triplet-align"};
  app.set_config("--config", "", "Config file (TOML/INI); command-line flags take precedence");
  app.require_subcommand(1);

  auto* validate_cmd = app.add_subcommand("validate", "Check a dataset and bundles; print dataset statistics");
  validate_cmd->add_option("--dataset", cfg.dataset, "Triplet CSV")->required();
  validate_cmd->add_option("--bundle", cfg.bundles, "Embedding bundle directory (repeatable)");

  auto* repr_cmd = app.add_subcommand("eval-repr", "Evaluate layer-wise representations");
  repr_cmd->add_option("--dataset", cfg.dataset, "Triplet CSV")->required();
  repr_cmd->add_option("--bundle", cfg.bundles, "Embedding bundle directory (repeatable)")->required();
  repr_cmd->add_option("--out", cfg.out, "Result directory")->required();
  repr_cmd->add_option("--name", cfg.name, "Report row name (default: bundle model_id)");
  repr_cmd->add_flag("--no-center", cfg.no_center, "Use raw embeddings instead of per-layer centered ones");
  repr_cmd->add_option("--bootstrap", cfg.bootstrap, "Bootstrap resamples for ca intervals (0 disables)");
  repr_cmd->add_option("--bootstrap-seed", cfg.bootstrap_seed, "Bootstrap seed");
  repr_cmd->add_option("--confidence", cfg.confidence, "Bootstrap interval confidence");
  repr_cmd->add_option("--parallelism", cfg.parallelism, "Worker threads (0 = all cores)");

  auto* behav_cmd = app.add_subcommand("eval-behav", "Run the prompted triplet task against a chat endpoint");
  behav_cmd->add_option("--dataset", cfg.dataset, "Triplet CSV")->required();
  behav_cmd->add_option("--endpoint", cfg.endpoint, "Chat-completions URL")->required();
  behav_cmd->add_option("--model", cfg.model, "Model name sent to the endpoint")->required();
  behav_cmd->add_option("--name", cfg.name, "Report row name (default: --model)");
  behav_cmd->add_option("--variant", cfg.variant, "Prompt variant")->check(CLI::IsMember({"minimal", "partial", "full"}));
  behav_cmd->add_option("--seeds", cfg.seeds, "Order-randomization seeds")->delimiter(',');
  behav_cmd->add_option("--temperature", cfg.temperature, "Sampling temperature");
  behav_cmd->add_option("--max-tokens", cfg.max_tokens, "Generation budget per trial");
  behav_cmd->add_option("--reasoning-delims", cfg.reasoning_delims, "Reasoning block delimiters '<open>,<close>'");
  behav_cmd->add_option("--parallelism", cfg.parallelism, "Concurrent requests");
  behav_cmd->add_option("--timeout", cfg.timeout, "Per-request timeout in seconds");
  behav_cmd->add_option("--out", cfg.out, "Result directory")->required();

  auto* report_cmd = app.add_subcommand("report", "Render summary tables, curves, scatter data and examples");
  report_cmd->add_option("--results", cfg.results, "Result directory written by eval-repr/eval-behav")->required();
  report_cmd->add_option("--dataset", cfg.dataset, "Triplet CSV (enables example mining)");
  report_cmd->add_option("--out", cfg.out, "Report directory (default: <results>/report)");
  report_cmd->add_option("--min-agreement", cfg.min_agreement, "Minimum human agreement for mined examples");
  report_cmd->add_option("--mine-source", cfg.mine_source, "Choices used for mining: repr, behav or all");
  report_cmd->add_flag("--exclude-invalid", cfg.exclude_invalid,
                       "Behavioral accuracy over valid answers only (non-default)");

  auto* fixtures_cmd = app.add_subcommand("fixtures", "Generate a synthetic bundle, dataset and oracle goldens");
  fixtures_cmd->add_option("--out", cfg.out, "Output directory")->required();
  fixtures_cmd->add_option("--spec", cfg.spec, "Synthetic spec JSON (overrides the flags below)");
  fixtures_cmd->add_option("--seed", cfg.seed, "Generator seed");
  fixtures_cmd->add_option("--terms", cfg.terms, "Number of terms");
  fixtures_cmd->add_option("--dim", cfg.dim, "Embedding dimension");
  fixtures_cmd->add_option("--blocks", cfg.blocks, "Blocks (three layers each)");
  fixtures_cmd->add_option("--triplets", cfg.triplets, "Labeled triplets (ties included)");
  fixtures_cmd->add_option("--ties", cfg.ties, "Tied judgments");
  fixtures_cmd->add_option("--unlabeled", cfg.unlabeled, "Unlabeled triplets");
  fixtures_cmd->add_option("--offset", cfg.offset, "Norm of a shared per-layer offset");
  fixtures_cmd->add_option("--planted", cfg.planted, "Generating layer <block>.<kind> for planted majorities");
  fixtures_cmd->add_option("--noise", cfg.noise, "Flip probability for planted majorities");
  fixtures_cmd->add_option("--model-id", cfg.model_id, "Bundle model_id");
  fixtures_cmd->add_option("--mode", cfg.mode, "Bundle mode")->check(CLI::IsMember({"pretrained", "instruct"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    if (*validate_cmd) return cmd_validate(cfg, out, err);
    if (*repr_cmd) return cmd_eval_repr(cfg, out, err);
    if (*behav_cmd) return cmd_eval_behav(cfg, out, err);
    if (*report_cmd) return cmd_report(cfg, out, err);
    if (*fixtures_cmd) return cmd_fixtures(cfg, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationFailure;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kConfigError;
}

}  // namespace tripletalign::cli
