// Acceptance runner. Prints one PASS/FAIL/SKIP line per criterion.
//
//   acceptance                 run every criterion
//   acceptance --criterion N   run one; exit 0 pass, 1 fail, 77 skip
//
// Criteria needing the human triplet dataset read its path from
// TRIPLET_ALIGN_3TT_CSV (canonical CSV layout). The optional extractor
// target reads a bundle from TRIPLET_ALIGN_EXTRACTED_BUNDLE.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "mock_server.hpp"
#include "parser_fixtures.hpp"
#include "properties.hpp"
#include "test_support.hpp"
#include "tripletalign/behav_eval.hpp"
#include "tripletalign/cli.hpp"
#include "tripletalign/results_io.hpp"

using namespace tripletalign;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome pass(std::string d) { return {Status::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::Fail, std::move(d)}; }
Outcome skip(std::string d) { return {Status::Skip, std::move(d)}; }

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str() + e.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::optional<std::string> env_path(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

// ------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  oracle::Rng rng(20240601);
  int failures = 0;
  std::string first;
  for (int i = 0; i < 100; ++i) {
    const auto c = random_case(rng, 200, 32, 6);
    for (const bool center : {true, false}) {
      const auto why = check_oracle_equivalence(c, center, 1e-12);
      if (!why.empty() && failures++ == 0) first = "spec " + std::to_string(i) + ": " + why;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto detail = "oracle equivalence: 100 random specs, centered and raw, tol 1e-12, " + fmt(secs, 3) +
                      " s (limit 10 s)";
  if (failures) return fail(detail + "; " + std::to_string(failures) + " mismatches, first: " + first);
  if (secs >= 10.0) return fail(detail + "; too slow");
  return pass(detail);
}

Outcome dataset_integrity() {
  const auto csv = env_path("TRIPLET_ALIGN_3TT_CSV");
  if (!csv) return skip("dataset integrity: TRIPLET_ALIGN_3TT_CSV not set (human triplet dataset not available)");
  const auto d = load_triplets(*csv);
  const auto stats = dataset_stats(d);
  const auto eval = build_eval_set(d);
  const double baseline = human_baseline(eval);
  std::string out;
  const int code = run_cli({"validate", "--dataset", *csv}, &out);
  const bool ok = code == 0 && stats.labeled == 2555 && stats.eval_size == 2539 &&
                  std::fabs(baseline - 0.82) <= 0.01 && out.find("N (eval set): 2539") != std::string::npos;
  const auto detail = "dataset integrity: labeled " + std::to_string(stats.labeled) + " (want 2555), N " +
                      std::to_string(stats.eval_size) + " (want 2539), human baseline " + fmt(baseline, 4) +
                      " (want 0.82 +- 0.01)";
  return ok ? pass(detail) : fail(detail);
}

Outcome formula_fixtures() {
  std::vector<std::string> bad;
  if (agreement({"t", 10, 7}) != 3.0 / 17.0) bad.push_back("agreement(10,7)");
  // 0.5, 0.7, 0.6 are not binary fractions; the sum is exact up to one rounding
  const double tv = total_variation(std::vector<double>{0.5, 0.7, 0.6});
  if (std::fabs(tv - 0.3) > 1e-15) bad.push_back("tv = " + fmt(tv, 17));
  const std::vector<double> a{0.1, 0.5, 0.9};
  const std::vector<double> c{0.9, 0.5, 0.1};
  const double gp = gamma(a, c, CorrelationMethod::Pearson);
  const double gs = gamma(a, c, CorrelationMethod::Spearman);
  if (std::fabs(gp - 1.0) > 1e-9 || std::fabs(gs - 1.0) > 1e-9) bad.push_back("gamma on a = 1 - c");
  const EmbeddingMatrix m{{0, LayerKind::Residual}, 2, {2, 1, 1, 2, -1, 0}};
  const auto o = triplet_outcome(m, {0, 1, 2}, "w");
  const double by_hand = (1.0 - 0.8) / (1.0 + 2.0 / std::sqrt(5.0));
  if (std::fabs(o.distance_ratio - by_hand) > 1e-9 || o.model_choice != Choice::Target1) {
    bad.push_back("distance ratio " + fmt(o.distance_ratio, 17));
  }
  const auto detail = "formula fixtures: agreement 3/17 exact, tv 0.3 (tol 1e-15), gamma " + fmt(gp, 17) +
                      " (tol 1e-9), distance ratio " + fmt(o.distance_ratio, 12) + " vs " + fmt(by_hand, 12) +
                      " (tol 1e-9)";
  if (!bad.empty()) {
    std::string why;
    for (const auto& b : bad) why += " " + b;
    return fail(detail + "; failed:" + why);
  }
  return pass(detail);
}

Outcome invariance_suite() {
  oracle::Rng rng(777);
  std::size_t scale = 0, perm = 0, swap = 0;
  std::string first;
  auto note = [&](std::size_t& counter, const std::string& why, const char* what, int i) {
    if (why.empty()) return;
    if (counter++ == 0 && first.empty()) first = std::string(what) + " case " + std::to_string(i) + ": " + why;
  };
  for (int i = 0; i < 1000; ++i) note(scale, check_cosine_scale(rng), "scale", i);
  for (int i = 0; i < 1000; ++i) {
    const auto c = random_case(rng, 60, 8, 4);
    note(perm, check_permutation(rng, c), "permutation", i);
  }
  for (int i = 0; i < 1000; ++i) {
    const auto c = random_case(rng, 60, 8, 4);
    note(swap, check_target_swap(c), "swap", i);
  }
  const auto detail = "invariance suite: 1000 cases each; failures scale " + std::to_string(scale) + ", permutation " +
                      std::to_string(perm) + ", target swap " + std::to_string(swap);
  if (scale + perm + swap) return fail(detail + "; first: " + first);
  return pass(detail);
}

Outcome planted_recovery() {
  auto run = [](double noise, std::size_t n, std::uint64_t seed) {
    oracle::SynthSpec spec;
    spec.seed = seed;
    spec.n_terms = 300;
    spec.dim = 16;
    spec.n_triplets = n;
    spec.n_ties = 0;
    spec.layers = {{0, LayerKind::Attention}, {0, LayerKind::Mlp}, {0, LayerKind::Residual}, {1, LayerKind::Residual}};
    spec.planted = oracle::PlantedGeometry{{1, LayerKind::Residual}, noise};
    const auto bundle = oracle::synth_bundle(spec);
    const auto eval = build_eval_set(oracle::synth_judgments(spec, bundle));
    EvalOptions o;
    o.bootstrap.reset();
    return std::pair{evaluate_model(bundle, eval, o).summary.layers[3].ca, eval.size()};
  };
  const auto [clean, n_clean] = run(0.0, 500, 3);
  const auto [noisy, n_noisy] = run(0.3, 2000, 4);
  const auto detail = "planted geometry: noise 0 -> ca " + fmt(clean, 17) + " (want 1 exactly, n " +
                      std::to_string(n_clean) + "); noise 0.3 -> ca " + fmt(noisy, 6) + " (want [0.66, 0.74], n " +
                      std::to_string(n_noisy) + ")";
  const bool ok = clean == 1.0 && noisy >= 0.66 && noisy <= 0.74 && n_noisy == 2000;
  return ok ? pass(detail) : fail(detail);
}

// Fraction of eval items whose human choice is shown first under `seed`.
double human_first_fraction(const EvalSet& eval, std::int64_t seed) {
  std::size_t hits = 0;
  for (const auto& item : eval) {
    const auto first = presented_order(seed, item.triplet.id) == PresentedOrder::Original ? Choice::Target1
                                                                                         : Choice::Target2;
    if (first == item.human) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(eval.size());
}

// Drops rows whose word set repeats an earlier row, so a prompt determines
// its triplet.
Dataset distinct_word_sets(const Dataset& d) {
  std::set<std::string> seen, kept;
  Dataset out;
  for (const auto& t : d.triplets) {
    const auto key = t.anchor + "|" + std::min(t.target1, t.target2) + "|" + std::max(t.target1, t.target2);
    if (!seen.insert(key).second) continue;
    out.triplets.push_back(t);
    kept.insert(t.id);
  }
  for (const auto& j : d.judgments) {
    if (kept.count(j.triplet_id)) out.judgments.push_back(j);
  }
  return out;
}

Outcome behavioral_protocol() {
  std::vector<std::string> bad;
  std::ostringstream detail;

  oracle::SynthSpec spec;
  spec.n_terms = 80;
  spec.n_triplets = 400;
  spec.n_ties = 5;
  const auto bundle = oracle::synth_bundle(spec);
  const auto dataset = distinct_word_sets(oracle::synth_judgments(spec, bundle));
  const auto eval = build_eval_set(dataset);
  TrialConfig config;
  config.model = "mock";

  // majority mock through the HTTP client and the CLI
  {
    TempDir dir;
    write_text_file(dir / "t.csv", to_csv(dataset));
    MajorityOracle oracle(eval);
    MockChatServer server([&](const nlohmann::json& req, const std::string&) {
      return MockChatServer::completion(oracle.answer(req.at("messages")[0].at("content").get<std::string>()));
    });
    const int code = run_cli({"eval-behav", "--dataset", (dir / "t.csv").string(), "--endpoint", server.url(),
                              "--model", "majority", "--out", dir.path().string()});
    const auto r = load_behav_result(dir / "behav" / "majority__full.json").result;
    detail << "majority ca " << r.mean_ca << " invalid " << r.invalid_fraction;
    if (code != 0 || r.mean_ca != 1.0 || r.invalid_fraction != 0.0) bad.push_back("majority mock");
  }
  {
    ScriptedProvider echo([](const ChatRequest& q) { return reply(prompt_words(user_text(q))->anchor); });
    const auto r = behavioral_accuracy(run_trials(echo, eval, config), eval);
    detail << "; anchor-echo ca " << r.mean_ca << " invalid " << r.invalid_fraction;
    if (r.mean_ca != 0.0 || r.invalid_fraction != 1.0) bad.push_back("anchor-echo mock");
  }
  ScriptedProvider first_word([](const ChatRequest& q) { return reply(prompt_words(user_text(q))->first); });
  {
    const auto r = behavioral_accuracy(run_trials(first_word, eval, config), eval);
    double worst = 0.0;
    for (const auto& [seed, ca] : r.per_seed_ca) worst = std::max(worst, std::fabs(ca - human_first_fraction(eval, seed)));
    detail << "; first-word synthetic max |ca - first-position fraction| " << worst << " (tol 0.03)";
    if (worst > 0.03) bad.push_back("first-word mock on synthetic data");
  }
  if (const auto csv = env_path("TRIPLET_ALIGN_3TT_CSV")) {
    const auto real = build_eval_set(load_triplets(*csv));
    const auto r = behavioral_accuracy(run_trials(first_word, real, config), real);
    double worst = 0.0;
    for (const auto& [seed, ca] : r.per_seed_ca) worst = std::max(worst, std::fabs(ca - human_first_fraction(real, seed)));
    std::size_t t1 = 0;
    for (const auto& item : real) t1 += item.human == Choice::Target1;
    const double original = static_cast<double>(t1) / static_cast<double>(real.size());
    detail << "; first-word real data max deviation " << worst << " (tol 0.03), human choice listed first "
           << original << " (about 0.70)";
    if (worst > 0.03 || std::fabs(original - 0.70) > 0.03) bad.push_back("first-word mock on real data");
  } else {
    detail << "; real-data first-word check skipped (TRIPLET_ALIGN_3TT_CSV not set)";
  }
  {
    const auto fixtures = parser_fixtures();
    std::size_t ok = 0;
    for (const auto& f : fixtures) ok += parse_response(f.raw, f.triplet, PresentedOrder::Original) == f.expected;
    detail << "; parser fixtures " << ok << "/" << fixtures.size();
    if (ok != fixtures.size() || fixtures.size() < 20) bad.push_back("parser fixtures");
  }
  const auto text = "behavioral protocol: " + detail.str();
  if (!bad.empty()) return fail(text + "; failed: " + bad.front());
  return pass(text);
}

Outcome determinism() {
  std::vector<std::string> bad;
  TempDir dir;
  oracle::SynthSpec spec;
  spec.n_terms = 60;
  spec.n_triplets = 150;
  spec.offset = 2.0;
  spec.layers = {{0, LayerKind::Attention}, {0, LayerKind::Mlp}, {0, LayerKind::Residual},
                 {1, LayerKind::Attention}, {1, LayerKind::Mlp}, {1, LayerKind::Residual}};
  oracle::write_fixtures(spec, dir / "fx");
  const auto csv = (dir / "fx" / "triplets.csv").string();
  const auto bundle = (dir / "fx" / "bundle").string();

  for (const auto* p : {"1", "4", "0"}) {
    if (run_cli({"eval-repr", "--dataset", csv, "--bundle", bundle, "--out", (dir / (std::string("r") + p)).string(),
                 "--parallelism", p}) != 0) {
      bad.push_back("eval-repr failed");
    }
  }
  const auto ref = slurp(dir / "r1" / "repr" / "synthetic__pretrained.json");
  const bool repr_same = !ref.empty() && ref == slurp(dir / "r4" / "repr" / "synthetic__pretrained.json") &&
                         ref == slurp(dir / "r0" / "repr" / "synthetic__pretrained.json");
  if (!repr_same) bad.push_back("eval-repr output differs between runs");

  // A mock mixing right, wrong and invalid answers.
  std::atomic<int> budget{1 << 30};
  MockChatServer server([&](const nlohmann::json& req, const std::string&) {
    if (budget-- <= 0) return MockChatServer::Reply{503, "down"};
    const auto text = req.at("messages")[0].at("content").get<std::string>();
    const auto w = prompt_words(text);
    const auto h = std::hash<std::string>{}(text + std::to_string(req.at("seed").get<int>()));
    return MockChatServer::completion(h % 5 == 0 ? w->anchor : h % 2 ? w->first : w->second);
  });
  const std::vector<std::string> base{"eval-behav", "--dataset", csv, "--endpoint", server.url(), "--model", "mixed",
                                      "--parallelism", "4"};
  auto with_out = [&](const fs::path& out) {
    auto a = base;
    a.insert(a.end(), {"--out", out.string()});
    return a;
  };
  if (run_cli(with_out(dir / "b_full")) != 0) bad.push_back("uninterrupted eval-behav failed");
  const auto log = slurp(dir / "b_full" / "behav" / "mixed__full.trials.jsonl");
  const auto result = slurp(dir / "b_full" / "behav" / "mixed__full.json");

  // interruption 1: torn log file
  std::istringstream lines(log);
  std::string kept, line;
  for (int i = 0; i < 100 && std::getline(lines, line); ++i) kept += line + "\n";
  std::getline(lines, line);
  kept += line.substr(0, line.size() / 3);
  write_text_file(dir / "b_torn" / "behav" / "mixed__full.trials.jsonl", kept);
  if (run_cli(with_out(dir / "b_torn")) != 0) bad.push_back("resume after torn log failed");
  const bool torn_same = slurp(dir / "b_torn" / "behav" / "mixed__full.trials.jsonl") == log &&
                         slurp(dir / "b_torn" / "behav" / "mixed__full.json") == result;

  // interruption 2: endpoint goes down mid-run
  budget = 200;
  const int down_code = run_cli(with_out(dir / "b_down"));
  budget = 1 << 30;
  if (run_cli(with_out(dir / "b_down")) != 0) bad.push_back("resume after provider outage failed");
  const bool down_same = down_code == cli::kRuntimeFailure &&
                         slurp(dir / "b_down" / "behav" / "mixed__full.trials.jsonl") == log &&
                         slurp(dir / "b_down" / "behav" / "mixed__full.json") == result;
  if (!torn_same) bad.push_back("resumed run after torn log differs");
  if (!down_same) bad.push_back("resumed run after provider outage differs");

  const auto detail = std::string("determinism: eval-repr byte-identical across 3 runs ") + (repr_same ? "yes" : "no") +
                      "; resumed eval-behav identical (torn log " + (torn_same ? "yes" : "no") +
                      ", provider outage " + (down_same ? "yes" : "no") + ")";
  if (!bad.empty()) return fail(detail + "; " + bad.front());
  return pass(detail);
}

Outcome model_level() {
  const auto bundle = env_path("TRIPLET_ALIGN_EXTRACTED_BUNDLE");
  const auto csv = env_path("TRIPLET_ALIGN_3TT_CSV");
  if (!bundle || !csv) {
    return skip("model-level numbers: covered by criteria 1-7; optional extractor target needs "
                "TRIPLET_ALIGN_EXTRACTED_BUNDLE and TRIPLET_ALIGN_3TT_CSV");
  }
  TempDir dir;
  if (run_cli({"eval-repr", "--dataset", *csv, "--bundle", *bundle, "--out", dir.path().string(), "--bootstrap",
               "0"}) != 0) {
    return fail("model-level numbers: eval-repr failed on the extracted bundle");
  }
  for (const auto& e : fs::directory_iterator(dir / "repr")) {
    const auto r = load_repr_result(e.path());
    const double ca = r.evaluation.summary.max_ca;
    const auto detail = "model-level numbers: " + r.name + " max-layer ca " + fmt(ca, 4) + " (want [0.70, 0.85])";
    return ca >= 0.70 && ca <= 0.85 ? pass(detail) : fail(detail);
  }
  return fail("model-level numbers: no result written");
}

const std::vector<std::pair<int, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<int, std::function<Outcome()>>> all{
      {1, oracle_equivalence}, {2, dataset_integrity}, {3, formula_fixtures}, {4, invariance_suite},
      {5, planted_recovery},   {6, behavioral_protocol}, {7, determinism},     {8, model_level}};
  return all;
}

Outcome guarded(const std::function<Outcome()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return fail(std::string("unexpected error: ") + e.what());
  }
}

const char* label(Status s) {
  switch (s) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    case Status::Skip: return "SKIP";
  }
  return "FAIL";
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--criterion N]\n";
      return 2;
    }
  }
  bool any_fail = false;
  bool all_skip = true;
  for (const auto& [n, fn] : criteria()) {
    if (only && n != only) continue;
    const auto o = guarded(fn);
    std::cout << "criterion " << n << ": " << label(o.status) << "  " << o.detail << std::endl;
    any_fail |= o.status == Status::Fail;
    all_skip &= o.status == Status::Skip;
  }
  if (any_fail) return 1;
  if (only && all_skip) return 77;
  return 0;
}
