#include "tripletalign/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "tripletalign/error.hpp"

namespace tripletalign::oracle {

using nlohmann::json;

namespace {

constexpr std::uint64_t kJudgmentStream = 0x6A09E667F3BCC909ull;

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// Own copies of the primitives, written out longhand.

std::vector<std::vector<double>> rows_of(const EmbeddingMatrix& m, bool center) {
  const std::size_t n = m.values.size() / m.dim;
  std::vector<std::vector<double>> rows(n, std::vector<double>(m.dim));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < m.dim; ++d) rows[i][d] = m.values[i * m.dim + d];
  }
  if (!center) return rows;
  for (std::size_t d = 0; d < m.dim; ++d) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += rows[i][d];
    const double mean = total / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) rows[i][d] -= mean;
  }
  return rows;
}

std::optional<double> naive_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return std::nullopt;
  double c = ab / (std::sqrt(aa) * std::sqrt(bb));
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return c;
}

// Rank by counting: 1 + (#smaller) + (#equal - 1) / 2.
std::vector<double> naive_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t smaller = 0;
    std::size_t equal = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) ++smaller;
      if (x[j] == x[i]) ++equal;
    }
    r[i] = 1.0 + static_cast<double>(smaller) + (static_cast<double>(equal) - 1.0) / 2.0;
  }
  return r;
}

std::optional<double> naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 3) return std::nullopt;
  double sx = 0.0;
  double sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);
  double cov = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  if (vx == 0.0 || vy == 0.0) return std::nullopt;
  double r = cov / std::sqrt(vx * vy);
  if (r > 1.0) r = 1.0;
  if (r < -1.0) r = -1.0;
  return r;
}

std::vector<double> sym_uniform_row(Rng& rng, std::size_t dim, double scale) {
  std::vector<double> v(dim);
  for (auto& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

}  // namespace

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1u;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return lo + static_cast<std::int64_t>(x % span);
}

void validate(const SynthSpec& spec) {
  if (spec.n_terms < 3) throw ConfigError("oracle", "n_terms must be at least 3");
  if (spec.dim == 0) throw ConfigError("oracle", "dim must be at least 1");
  if (spec.layers.empty()) throw ConfigError("oracle", "at least one layer is required");
  if (std::set<LayerKey>(spec.layers.begin(), spec.layers.end()).size() != spec.layers.size()) {
    throw ConfigError("oracle", "duplicate layer keys");
  }
  if (spec.min_votes < 2 || spec.min_votes > spec.max_votes) throw ConfigError("oracle", "invalid vote range");
  if (spec.n_ties > spec.n_triplets) throw ConfigError("oracle", "more ties than labeled triplets");
  if (spec.planted && std::find(spec.layers.begin(), spec.layers.end(), spec.planted->layer) == spec.layers.end()) {
    throw ConfigError("oracle", "planted layer is not part of the spec");
  }
  if (spec.planted && !(spec.planted->noise >= 0.0 && spec.planted->noise <= 1.0)) {
    throw ConfigError("oracle", "planted noise must lie in [0, 1]");
  }
}

EmbeddingBundle synth_bundle(const SynthSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  EmbeddingBundle b;
  b.model_id = spec.model_id;
  b.mode = spec.mode;
  b.metadata["generator"] = "tripletalign.oracle/mt19937_64";
  for (std::size_t i = 0; i < spec.n_terms; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "w%04zu", i);
    b.terms.emplace_back(name);
  }

  auto layers = spec.layers;
  std::sort(layers.begin(), layers.end());
  for (const auto& key : layers) {
    EmbeddingMatrix m{key, spec.dim, std::vector<double>(spec.n_terms * spec.dim)};
    std::vector<double> offset(spec.dim, 0.0);
    if (spec.offset > 0.0) {
      offset = sym_uniform_row(rng, spec.dim, 1.0);
      double norm = 0.0;
      for (double v : offset) norm += v * v;
      norm = std::sqrt(norm);
      for (auto& v : offset) v *= spec.offset / norm;
    }
    for (std::size_t i = 0; i + 1 < spec.n_terms; ++i) {
      const auto row = sym_uniform_row(rng, spec.dim, 1.0);
      for (std::size_t d = 0; d < spec.dim; ++d) m.values[i * spec.dim + d] = to_f32(row[d] + offset[d]);
    }
    const auto jitter = sym_uniform_row(rng, spec.dim, 1e-3);
    const auto last = spec.n_terms - 1;
    for (std::size_t d = 0; d < spec.dim; ++d) m.values[last * spec.dim + d] = to_f32(m.values[d] + jitter[d]);
    b.layers.push_back(std::move(m));
  }
  return b;
}

Dataset synth_judgments(const SynthSpec& spec, const EmbeddingBundle& bundle) {
  validate(spec);
  if (bundle.terms.size() != spec.n_terms) throw ConfigError("oracle", "bundle does not match spec");
  Rng rng(spec.seed ^ kJudgmentStream);
  const auto n_terms = static_cast<std::int64_t>(spec.n_terms);

  std::optional<std::vector<std::vector<double>>> planted_rows;
  if (spec.planted) planted_rows = rows_of(bundle.layer(spec.planted->layer), true);

  Dataset ds;
  const auto total_rows = spec.n_triplets + spec.n_unlabeled;
  const std::size_t tie_stride = spec.n_ties == 0 ? 0 : std::max<std::size_t>(1, spec.n_triplets / spec.n_ties);
  std::size_t ties_placed = 0;

  for (std::size_t k = 0; k < total_rows; ++k) {
    std::size_t a = 0;
    std::size_t t1 = 0;
    std::size_t t2 = 0;
    if (k == 0) {
      t1 = 0;
      t2 = spec.n_terms - 1;
      do {
        a = static_cast<std::size_t>(rng.uniform_int(0, n_terms - 1));
      } while (a == t1 || a == t2);
    } else {
      a = static_cast<std::size_t>(rng.uniform_int(0, n_terms - 1));
      do {
        t1 = static_cast<std::size_t>(rng.uniform_int(0, n_terms - 1));
      } while (t1 == a);
      do {
        t2 = static_cast<std::size_t>(rng.uniform_int(0, n_terms - 1));
      } while (t2 == a || t2 == t1);
    }
    char id[32];
    std::snprintf(id, sizeof(id), "s%05zu", k);
    ds.triplets.push_back({id, bundle.terms[a], bundle.terms[t1], bundle.terms[t2]});
    if (k >= spec.n_triplets) continue;

    auto total = static_cast<std::uint32_t>(rng.uniform_int(spec.min_votes, spec.max_votes));
    const bool tie = tie_stride != 0 && ties_placed < spec.n_ties && k % tie_stride == tie_stride - 1;
    if (tie) {
      ++ties_placed;
      const auto half = std::max<std::uint32_t>(1, total / 2);
      ds.judgments.push_back({id, half, half});
      continue;
    }
    const std::uint32_t floor_half = total / 2;
    const auto majority_votes =
        static_cast<std::uint32_t>(rng.uniform_int(floor_half + 1, static_cast<std::int64_t>(total)));
    bool first_wins = false;
    if (planted_rows) {
      const auto& rows = *planted_rows;
      const auto s1 = naive_cosine(rows[a], rows[t1]);
      const auto s2 = naive_cosine(rows[a], rows[t2]);
      first_wins = s1 && s2 ? *s1 >= *s2 : true;
      if (rng.bernoulli(spec.planted->noise)) first_wins = !first_wins;
    } else {
      first_wins = rng.bernoulli(0.5);
    }
    const auto minority_votes = total - majority_votes;
    ds.judgments.push_back(first_wins ? JudgmentRecord{id, majority_votes, minority_votes}
                                      : JudgmentRecord{id, minority_votes, majority_votes});
  }
  return ds;
}

NaiveEvaluation naive_eval(const EmbeddingBundle& bundle, const EvalSet& eval_set, bool center) {
  if (bundle.layers.empty()) throw ValidationError("oracle", "bundle has no layers");
  if (eval_set.empty()) throw ValidationError("oracle", "empty eval set");

  auto find_term = [&](const std::string& term) {
    for (std::size_t i = 0; i < bundle.terms.size(); ++i) {
      if (bundle.terms[i] == term) return i;
    }
    throw ValidationError("oracle", "unknown term '" + term + "'");
  };
  std::vector<std::size_t> ia;
  std::vector<std::size_t> i1;
  std::vector<std::size_t> i2;
  for (const auto& item : eval_set) {
    ia.push_back(find_term(item.triplet.anchor));
    i1.push_back(find_term(item.triplet.target1));
    i2.push_back(find_term(item.triplet.target2));
  }

  NaiveEvaluation out;
  const bool do_center = center && !bundle.centered;
  for (const auto& m : bundle.layers) {
    const auto rows = rows_of(m, do_center);
    NaiveLayer layer;
    layer.layer = m.layer;
    std::size_t correct = 0;
    std::vector<double> a;
    std::vector<double> margin;
    for (std::size_t k = 0; k < eval_set.size(); ++k) {
      const auto s1 = naive_cosine(rows[ia[k]], rows[i1[k]]);
      const auto s2 = naive_cosine(rows[ia[k]], rows[i2[k]]);
      if (!s1 || !s2) {
        ++layer.n_unevaluable;
        continue;
      }
      ++layer.n_evaluated;
      const Choice pick = *s1 >= *s2 ? Choice::Target1 : Choice::Target2;
      if (pick == eval_set[k].human) ++correct;

      const double d1 = 1.0 - *s1;
      const double d2 = 1.0 - *s2;
      double c = 1.0;
      if (!(d1 < 1e-12 && d2 < 1e-12)) c = (d1 < d2 ? d1 : d2) / (d1 < d2 ? d2 : d1);
      a.push_back(eval_set[k].agreement);
      margin.push_back(1.0 - c);
    }
    if (layer.n_evaluated == 0) throw ValidationError("oracle", "no evaluable triplets at " + to_string(m.layer));
    layer.ca = static_cast<double>(correct) / static_cast<double>(layer.n_evaluated);
    layer.gamma_pearson = naive_pearson(a, margin);
    if (layer.gamma_pearson) layer.gamma_spearman = naive_pearson(naive_ranks(a), naive_ranks(margin));
    out.layers.push_back(layer);
  }

  for (auto kind : {LayerKind::Attention, LayerKind::Mlp, LayerKind::Residual}) {
    std::vector<std::pair<int, double>> series;
    for (const auto& l : out.layers) {
      if (l.layer.kind == kind) series.emplace_back(l.layer.block, l.ca);
    }
    if (series.empty()) continue;
    std::sort(series.begin(), series.end());
    double tv = 0.0;
    for (std::size_t i = 1; i < series.size(); ++i) {
      const double diff = series[i].second - series[i - 1].second;
      tv += diff < 0 ? -diff : diff;
    }
    out.tv[kind] = tv;
  }
  return out;
}

json to_json(const NaiveEvaluation& e) {
  json layers = json::array();
  for (const auto& l : e.layers) {
    layers.push_back({{"block", l.layer.block},
                      {"kind", to_string(l.layer.kind)},
                      {"ca", l.ca},
                      {"n", l.n_evaluated},
                      {"n_unevaluable", l.n_unevaluable},
                      {"gamma_pearson", l.gamma_pearson ? json(*l.gamma_pearson) : json(nullptr)},
                      {"gamma_spearman", l.gamma_spearman ? json(*l.gamma_spearman) : json(nullptr)}});
  }
  json tv = json::object();
  for (const auto& [kind, v] : e.tv) tv[std::string(to_string(kind))] = v;
  return {{"layers", layers}, {"tv", tv}};
}

json to_json(const SynthSpec& s) {
  json layers = json::array();
  for (const auto& l : s.layers) layers.push_back({{"block", l.block}, {"kind", to_string(l.kind)}});
  json j = {{"seed", s.seed},           {"n_terms", s.n_terms},     {"dim", s.dim},
            {"layers", layers},         {"n_triplets", s.n_triplets}, {"n_unlabeled", s.n_unlabeled},
            {"n_ties", s.n_ties},       {"min_votes", s.min_votes}, {"max_votes", s.max_votes},
            {"offset", s.offset},       {"model_id", s.model_id},   {"mode", to_string(s.mode)}};
  if (s.planted) {
    j["planted"] = {{"block", s.planted->layer.block},
                    {"kind", to_string(s.planted->layer.kind)},
                    {"noise", s.planted->noise}};
  }
  return j;
}

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec s;
  try {
    s.seed = j.value("seed", s.seed);
    s.n_terms = j.value("n_terms", s.n_terms);
    s.dim = j.value("dim", s.dim);
    if (j.contains("layers")) {
      s.layers.clear();
      for (const auto& l : j.at("layers")) {
        s.layers.push_back({l.at("block").get<int>(), parse_layer_kind(l.at("kind").get<std::string>())});
      }
    }
    s.n_triplets = j.value("n_triplets", s.n_triplets);
    s.n_unlabeled = j.value("n_unlabeled", s.n_unlabeled);
    s.n_ties = j.value("n_ties", s.n_ties);
    s.min_votes = j.value("min_votes", s.min_votes);
    s.max_votes = j.value("max_votes", s.max_votes);
    s.offset = j.value("offset", s.offset);
    s.model_id = j.value("model_id", s.model_id);
    if (j.contains("mode")) s.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("planted") && !j.at("planted").is_null()) {
      const auto& p = j.at("planted");
      s.planted = PlantedGeometry{{p.at("block").get<int>(), parse_layer_kind(p.at("kind").get<std::string>())},
                                  p.value("noise", 0.0)};
    }
  } catch (const json::exception& e) {
    throw ConfigError("oracle", std::string("malformed synth spec: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError("oracle", std::string("malformed synth spec: ") + e.what());
  }
  validate(s);
  return s;
}

void write_fixtures(const SynthSpec& spec, const std::filesystem::path& dir) {
  const auto bundle = synth_bundle(spec);
  const auto dataset = synth_judgments(spec, bundle);
  const auto eval_set = build_eval_set(dataset);

  std::filesystem::create_directories(dir);
  write_bundle(bundle, dir / "bundle");
  {
    std::ofstream out(dir / "triplets.csv", std::ios::binary | std::ios::trunc);
    write_triplets(out, dataset);
  }
  const auto stats = dataset_stats(dataset);
  json expected = {{"dataset",
                    {{"triplets", stats.triplets},
                     {"unique_terms", stats.unique_terms},
                     {"labeled", stats.labeled},
                     {"ties", stats.ties},
                     {"eval_size", stats.eval_size}}},
                   {"centered", to_json(naive_eval(bundle, eval_set, true))},
                   {"uncentered", to_json(naive_eval(bundle, eval_set, false))}};
  {
    std::ofstream out(dir / "expected.json", std::ios::binary | std::ios::trunc);
    out << expected.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "spec.json", std::ios::binary | std::ios::trunc);
    out << to_json(spec).dump(2) << "\n";
  }
}

}  // namespace tripletalign::oracle
