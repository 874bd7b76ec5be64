#include "tripletalign/repr_eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <thread>

#include "tripletalign/error.hpp"

namespace tripletalign {

namespace {

constexpr double kCoincidentDistance = 1e-12;

__extension__ using u128 = unsigned __int128;

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>((static_cast<u128>(rng()) * n) >> 64);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (auto i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
}

}  // namespace

double distance_ratio(double sim1, double sim2) {
  const double d1 = 1.0 - sim1;
  const double d2 = 1.0 - sim2;
  const double lo = std::min(d1, d2);
  const double hi = std::max(d1, d2);
  if (hi < kCoincidentDistance) return 1.0;
  return std::clamp(lo / hi, 0.0, 1.0);
}

ChoiceOutcome triplet_outcome(const EmbeddingMatrix& layer, const TermRows& rows, const std::string& triplet_id) {
  const auto anchor = layer.row(rows.anchor);
  ChoiceOutcome out;
  out.triplet_id = triplet_id;
  out.layer = layer.layer;
  out.sim1 = cosine(anchor, layer.row(rows.target1));
  out.sim2 = cosine(anchor, layer.row(rows.target2));
  out.tie = out.sim1 == out.sim2;
  out.model_choice = out.sim1 >= out.sim2 ? Choice::Target1 : Choice::Target2;
  out.distance_ratio = distance_ratio(out.sim1, out.sim2);
  return out;
}

std::vector<TermRows> resolve_terms(const EmbeddingBundle& bundle, const EvalSet& eval_set) {
  const TermIndex index(bundle.terms);
  std::vector<TermRows> rows;
  rows.reserve(eval_set.size());
  std::vector<std::string> missing;
  auto find = [&](const std::string& term) -> std::size_t {
    if (auto i = index.find(term)) return *i;
    if (std::find(missing.begin(), missing.end(), term) == missing.end()) missing.push_back(term);
    return 0;
  };
  for (const auto& item : eval_set) {
    const auto& t = item.triplet;
    rows.push_back({find(t.anchor), find(t.target1), find(t.target2)});
  }
  if (!missing.empty()) {
    std::string msg = "bundle '" + bundle.model_id + "' is missing " + std::to_string(missing.size()) + " term(s):";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw ValidationError("repr-eval", msg);
  }
  return rows;
}

LayerOutcomes evaluate_layer(const EmbeddingMatrix& layer, const EvalSet& eval_set, std::span<const TermRows> rows) {
  if (rows.size() != eval_set.size()) throw ValidationError("repr-eval", "term rows do not match eval set");
  LayerOutcomes out(eval_set.size());
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    try {
      out[i] = triplet_outcome(layer, rows[i], eval_set[i].triplet.id);
    } catch (const DegenerateVectorError&) {
      out[i] = std::nullopt;
    }
  }
  return out;
}

ChoiceAccuracy layer_choice_accuracy(const LayerOutcomes& outcomes, const EvalSet& eval_set) {
  if (outcomes.size() != eval_set.size()) throw ValidationError("repr-eval", "outcomes do not cover the eval set");
  ChoiceAccuracy acc;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i]) {
      ++acc.n_unevaluable;
      continue;
    }
    ++acc.n_evaluated;
    if (outcomes[i]->tie) ++acc.ties;
    if (outcomes[i]->model_choice == eval_set[i].human) ++agree;
  }
  if (acc.n_evaluated == 0) throw ValidationError("repr-eval", "no evaluable triplets");
  acc.ca = static_cast<double>(agree) / static_cast<double>(acc.n_evaluated);
  return acc;
}

std::string_view to_string(CorrelationMethod m) noexcept {
  return m == CorrelationMethod::Pearson ? "pearson" : "spearman";
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("repr-eval", "correlation of vectors with different lengths");
  if (x.size() < 2) throw UndefinedCorrelationError("correlation needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelationError("correlation with zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("repr-eval", "correlation of vectors with different lengths");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

double gamma(std::span<const double> agreements, std::span<const double> distance_ratios, CorrelationMethod method) {
  if (agreements.size() != distance_ratios.size()) {
    throw ValidationError("repr-eval", "gamma inputs have different lengths");
  }
  if (agreements.size() < 3) throw UndefinedCorrelationError("gamma needs at least 3 triplets");
  std::vector<double> margin(distance_ratios.size());
  std::transform(distance_ratios.begin(), distance_ratios.end(), margin.begin(), [](double c) { return 1.0 - c; });
  return method == CorrelationMethod::Pearson ? pearson(agreements, margin) : spearman(agreements, margin);
}

double total_variation(std::span<const double> series) {
  double tv = 0.0;
  for (std::size_t i = 1; i < series.size(); ++i) tv += std::abs(series[i] - series[i - 1]);
  return tv;
}

ModelSummary summarize_model(const std::vector<LayerResult>& layers, std::string model_id, Mode mode) {
  if (layers.empty()) throw ValidationError("repr-eval", "cannot summarize a model without layer results");
  ModelSummary s;
  s.model_id = std::move(model_id);
  s.mode = mode;
  s.layers = layers;
  std::stable_sort(s.layers.begin(), s.layers.end(),
                   [](const LayerResult& a, const LayerResult& b) { return a.layer < b.layer; });

  s.best_layer = s.layers.front().layer;
  s.max_ca = s.layers.front().ca;
  for (const auto& l : s.layers) {
    if (l.ca > s.max_ca) {
      s.max_ca = l.ca;
      s.best_layer = l.layer;
    }
  }

  std::map<LayerKind, std::vector<double>> series;
  for (const auto& l : s.layers) series[l.layer.kind].push_back(l.ca);
  for (const auto& [kind, values] : series) s.tv_per_kind[kind] = total_variation(values);
  return s;
}

std::pair<double, double> bootstrap_ci(const LayerOutcomes& outcomes, const EvalSet& eval_set,
                                       const BootstrapOptions& options) {
  if (outcomes.size() != eval_set.size()) throw ValidationError("repr-eval", "outcomes do not cover the eval set");
  if (options.resamples == 0) throw ConfigError("repr-eval", "bootstrap needs at least one resample");
  if (!(options.confidence > 0.0 && options.confidence < 1.0)) {
    throw ConfigError("repr-eval", "bootstrap confidence must lie in (0, 1)");
  }
  std::vector<unsigned char> correct;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i]) correct.push_back(outcomes[i]->model_choice == eval_set[i].human ? 1 : 0);
  }
  if (correct.size() < 2) throw ValidationError("repr-eval", "bootstrap needs at least two evaluable triplets");

  std::mt19937_64 rng(options.seed);
  const auto n = correct.size();
  std::vector<double> stats(options.resamples);
  for (auto& stat : stats) {
    std::size_t hits = 0;
    for (std::size_t k = 0; k < n; ++k) hits += correct[uniform_index(rng, n)];
    stat = static_cast<double>(hits) / static_cast<double>(n);
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - options.confidence) / 2.0;
  return {quantile_sorted(stats, alpha), quantile_sorted(stats, 1.0 - alpha)};
}

ModelEvaluation evaluate_model(const EmbeddingBundle& bundle, const EvalSet& eval_set, const EvalOptions& options) {
  if (bundle.layers.empty()) throw ValidationError("repr-eval", "bundle '" + bundle.model_id + "' has no layers");
  if (eval_set.empty()) throw ValidationError("repr-eval", "empty eval set");
  const auto rows = resolve_terms(bundle, eval_set);
  const bool center = options.center && !bundle.centered;

  std::vector<double> agreements(eval_set.size());
  for (std::size_t i = 0; i < eval_set.size(); ++i) agreements[i] = eval_set[i].agreement;

  const auto n_layers = bundle.layers.size();
  std::vector<LayerResult> results(n_layers);
  std::vector<LayerOutcomes> outcomes(n_layers);
  std::vector<std::exception_ptr> errors(n_layers);

  parallel_for(n_layers, options.threads, [&](std::size_t l) {
    try {
      const auto& raw = bundle.layers[l];
      const auto layer = center ? center_layer(raw) : raw;
      outcomes[l] = evaluate_layer(layer, eval_set, rows);
      const auto acc = layer_choice_accuracy(outcomes[l], eval_set);

      LayerResult r;
      r.layer = raw.layer;
      r.ca = acc.ca;
      r.n_evaluated = acc.n_evaluated;
      r.n_unevaluable = acc.n_unevaluable;
      r.ties = acc.ties;

      std::vector<double> a;
      std::vector<double> c;
      for (std::size_t i = 0; i < eval_set.size(); ++i) {
        if (!outcomes[l][i]) continue;
        a.push_back(agreements[i]);
        c.push_back(outcomes[l][i]->distance_ratio);
      }
      try {
        r.gamma_pearson = gamma(a, c, CorrelationMethod::Pearson);
        r.gamma_spearman = gamma(a, c, CorrelationMethod::Spearman);
      } catch (const UndefinedCorrelationError&) {
        r.gamma_pearson.reset();
        r.gamma_spearman.reset();
      }
      if (options.bootstrap && acc.n_evaluated >= 2) {
        const auto [lo, hi] = bootstrap_ci(outcomes[l], eval_set, *options.bootstrap);
        r.ci_lo = lo;
        r.ci_hi = hi;
      }
      results[l] = std::move(r);
    } catch (...) {
      errors[l] = std::current_exception();
    }
  });
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (!errors[l]) continue;
    try {
      std::rethrow_exception(errors[l]);
    } catch (const Error& e) {
      throw ValidationError("repr-eval", "layer " + to_string(bundle.layers[l].layer) + ": " + e.what());
    }
  }

  ModelEvaluation out;
  out.summary = summarize_model(results, bundle.model_id, bundle.mode);
  out.centered = center || bundle.centered;
  std::size_t best = 0;
  while (bundle.layers[best].layer != out.summary.best_layer) ++best;
  out.best_layer_choices.reserve(eval_set.size());
  for (const auto& o : outcomes[best]) {
    out.best_layer_choices.push_back(o ? std::optional<Choice>(o->model_choice) : std::nullopt);
  }
  return out;
}

}  // namespace tripletalign
