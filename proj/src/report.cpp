#include "tripletalign/report.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "tripletalign/error.hpp"

namespace tripletalign {

namespace {

constexpr const char* kAbsent = "-";

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string csv_value(const std::optional<double>& v) { return v ? format_double(*v) : std::string(kAbsent); }

std::string fixed2(const std::optional<double>& v) {
  if (!v) return kAbsent;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v);
  return buf;
}

std::string md_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    if (ch == '|') out += '\\';
    out += ch;
  }
  return out;
}

std::optional<double> mean_of(const std::vector<SummaryRow>& rows, std::optional<double> SummaryRow::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.*field) {
      sum += *(r.*field);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::string choice_label(const std::optional<Choice>& c) { return c ? std::string(to_string(*c)) : std::string(kAbsent); }

std::string choice_word(const Triplet& t, const std::optional<Choice>& c) { return c ? t.target(*c) : kAbsent; }

}  // namespace

SummaryTable summary_table(const std::vector<ReprResultFile>& repr, const std::vector<BehavResultFile>& behav,
                           bool exclude_invalid) {
  std::map<std::string, SummaryRow> rows;
  auto row = [&](const std::string& name) -> SummaryRow& {
    auto& r = rows[name];
    r.model = name;
    return r;
  };
  for (const auto& r : repr) {
    auto& target = r.evaluation.summary.mode == Mode::Pretrained ? row(r.name).pretrained : row(r.name).instruct;
    if (target) {
      throw ValidationError("report", "two " + std::string(to_string(r.evaluation.summary.mode)) +
                                          " results named '" + r.name + "'");
    }
    target = r.evaluation.summary.max_ca;
  }
  for (const auto& b : behav) {
    if (b.variant != PromptVariant::Full) continue;
    auto& target = row(b.name);
    if (target.behavioral) throw ValidationError("report", "two behavioral results named '" + b.name + "'");
    if (exclude_invalid && !b.result_valid_only) {
      throw ValidationError("report", "behavioral result '" + b.name + "' has no valid-only accuracy");
    }
    target.behavioral = exclude_invalid ? b.result_valid_only->mean_ca : b.result.mean_ca;
    target.invalid = b.result.invalid_fraction;
  }

  SummaryTable table;
  for (auto& [name, r] : rows) table.rows.push_back(std::move(r));
  table.means.model = "Models (mean)";
  table.means.pretrained = mean_of(table.rows, &SummaryRow::pretrained);
  table.means.instruct = mean_of(table.rows, &SummaryRow::instruct);
  table.means.behavioral = mean_of(table.rows, &SummaryRow::behavioral);
  return table;
}

std::string render_summary_csv(const SummaryTable& table) {
  std::ostringstream out;
  out << "model,pretrained,instruct,behavioral,invalid\n";
  auto line = [&](const SummaryRow& r) {
    out << csv_field(r.model) << ',' << csv_value(r.pretrained) << ',' << csv_value(r.instruct) << ','
        << csv_value(r.behavioral) << ',' << csv_value(r.invalid) << '\n';
  };
  for (const auto& r : table.rows) line(r);
  line(table.means);
  return out.str();
}

std::string render_summary_text(const SummaryTable& table) {
  std::size_t width = 5;
  for (const auto& r : table.rows) width = std::max(width, r.model.size());
  width = std::max(width, table.means.model.size());

  std::ostringstream out;
  auto cell = [&](const std::string& s) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%8s", s.c_str());
    out << buf;
  };
  auto line = [&](const SummaryRow& r) {
    out << r.model << std::string(width - r.model.size(), ' ');
    cell(fixed2(r.pretrained));
    cell(fixed2(r.instruct));
    cell(fixed2(r.behavioral));
    cell(fixed2(r.invalid));
    out << '\n';
  };
  out << "Model" << std::string(width - 5, ' ');
  for (const char* h : {"Pretr.", "I.T.", "Behav.", "Invalid"}) cell(h);
  out << '\n' << std::string(width + 32, '-') << '\n';
  for (const auto& r : table.rows) line(r);
  out << std::string(width + 32, '-') << '\n';
  line(table.means);
  return out.str();
}

std::vector<CurveRow> layer_curves(const ModelSummary& summary) {
  std::vector<CurveRow> rows;
  rows.reserve(summary.layers.size());
  for (const auto& l : summary.layers) rows.push_back({l.layer.block, l.layer.kind, l.ca});
  std::stable_sort(rows.begin(), rows.end(), [](const CurveRow& a, const CurveRow& b) {
    return LayerKey{a.block, a.kind} < LayerKey{b.block, b.kind};
  });
  return rows;
}

std::string render_curves_csv(const std::vector<CurveRow>& rows) {
  std::ostringstream out;
  out << "block,kind,ca\n";
  for (const auto& r : rows) out << r.block << ',' << to_string(r.kind) << ',' << format_double(r.ca) << '\n';
  return out.str();
}

std::vector<CurveRow> parse_curves_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<CurveRow> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != "block,kind,ca") throw ParseError("report", "curves: unexpected header '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw ParseError("report", "curves: line " + std::to_string(lineno) + ": expected 3 fields");
    }
    try {
      rows.push_back({std::stoi(line.substr(0, c1)), parse_layer_kind(line.substr(c1 + 1, c2 - c1 - 1)),
                      std::stod(line.substr(c2 + 1))});
    } catch (const std::logic_error&) {
      throw ParseError("report", "curves: line " + std::to_string(lineno) + ": invalid number");
    }
  }
  return rows;
}

std::string_view to_string(Unanimity u) noexcept {
  switch (u) {
    case Unanimity::AllAgree: return "all_agree";
    case Unanimity::AllDisagree: return "all_disagree";
    case Unanimity::Mixed: return "mixed";
  }
  return "mixed";
}

MinedExamples mine_examples(const EvalSet& eval_set, const ModelChoices& choices, double min_agreement) {
  if (choices.empty()) throw ValidationError("report", "example mining needs at least one model");
  MinedExamples out;
  for (const auto& [model, list] : choices) {
    if (list.size() != eval_set.size()) {
      throw ValidationError("report", "choices of '" + model + "' do not cover the eval set");
    }
    out.models.push_back(model);
  }

  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    const auto& item = eval_set[i];
    if (item.agreement < min_agreement) continue;
    ExampleRecord rec{item.triplet, item.human, item.agreement, {}, Unanimity::Mixed};
    bool all_agree = true;
    bool all_disagree = true;
    for (const auto& [model, list] : choices) {
      const auto& c = list[i];
      rec.model_choices.push_back(c);
      if (c != item.human) all_agree = false;
      if (c != other(item.human)) all_disagree = false;
    }
    rec.unanimity = all_agree ? Unanimity::AllAgree : all_disagree ? Unanimity::AllDisagree : Unanimity::Mixed;
    auto& bucket = all_agree ? out.all_agree : all_disagree ? out.all_disagree : out.mixed;
    bucket.push_back(std::move(rec));
  }
  auto by_agreement = [](const ExampleRecord& a, const ExampleRecord& b) { return a.agreement > b.agreement; };
  std::stable_sort(out.all_agree.begin(), out.all_agree.end(), by_agreement);
  std::stable_sort(out.all_disagree.begin(), out.all_disagree.end(), by_agreement);
  std::stable_sort(out.mixed.begin(), out.mixed.end(), by_agreement);
  return out;
}

std::string render_examples_csv(const std::vector<ExampleRecord>& records, const std::vector<std::string>& models) {
  std::ostringstream out;
  out << "id,anchor,target1,target2,human,agreement,unanimity";
  for (const auto& m : models) out << ',' << csv_field(m);
  out << '\n';
  for (const auto& r : records) {
    out << csv_field(r.triplet.id) << ',' << csv_field(r.triplet.anchor) << ',' << csv_field(r.triplet.target1) << ','
        << csv_field(r.triplet.target2) << ',' << to_string(r.human) << ',' << format_double(r.agreement) << ','
        << to_string(r.unanimity);
    for (const auto& c : r.model_choices) out << ',' << choice_label(c);
    out << '\n';
  }
  return out.str();
}

std::string render_examples_markdown(const std::vector<ExampleRecord>& records,
                                     const std::vector<std::string>& models, const std::string& title) {
  std::ostringstream out;
  out << "## " << title << "\n\n";
  if (records.empty()) {
    out << "_No triplets._\n";
    return out.str();
  }
  out << "| Anchor | Target 1 | Target 2 | Human | Agreement |";
  for (const auto& m : models) out << ' ' << md_escape(m) << " |";
  out << "\n|---|---|---|---|---|";
  for (std::size_t i = 0; i < models.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& r : records) {
    char agree[16];
    std::snprintf(agree, sizeof(agree), "%.2f", r.agreement);
    out << "| " << md_escape(r.triplet.anchor) << " | " << md_escape(r.triplet.target1) << " | "
        << md_escape(r.triplet.target2) << " | " << md_escape(r.triplet.target(r.human)) << " | " << agree << " |";
    for (const auto& c : r.model_choices) out << ' ' << md_escape(choice_word(r.triplet, c)) << " |";
    out << '\n';
  }
  return out.str();
}

std::vector<ScatterRow> gamma_scatter(const std::vector<ReprResultFile>& results) {
  std::vector<ScatterRow> rows;
  for (const auto& r : results) {
    for (const auto& l : r.evaluation.summary.layers) {
      rows.push_back({r.name, r.evaluation.summary.mode, l.layer, l.ca, l.gamma_pearson, l.gamma_spearman});
    }
  }
  return rows;
}

std::string render_scatter_csv(const std::vector<ScatterRow>& rows) {
  std::ostringstream out;
  out << "model,mode,block,kind,ca,gamma_pearson,gamma_spearman\n";
  for (const auto& r : rows) {
    out << csv_field(r.model) << ',' << to_string(r.mode) << ',' << r.layer.block << ',' << to_string(r.layer.kind)
        << ',' << format_double(r.ca) << ',' << csv_value(r.gamma_pearson) << ',' << csv_value(r.gamma_spearman)
        << '\n';
  }
  return out.str();
}

std::string render_behavioral_csv(const std::vector<BehavResultFile>& results) {
  std::ostringstream out;
  out << "model,variant,mean_ca,invalid_fraction,both_orders_ca,original_ca,swapped_ca,n,n_trials\n";
  for (const auto& b : results) {
    const auto& r = b.result;
    auto order_ca = [&](PresentedOrder o) -> std::optional<double> {
      auto it = r.per_order.find(o);
      if (it == r.per_order.end()) return std::nullopt;
      return it->second.ca;
    };
    out << csv_field(b.name) << ',' << to_string(b.variant) << ',' << format_double(r.mean_ca) << ','
        << format_double(r.invalid_fraction) << ',' << csv_value(r.both_orders_ca) << ','
        << csv_value(order_ca(PresentedOrder::Original)) << ',' << csv_value(order_ca(PresentedOrder::Swapped)) << ','
        << r.n << ',' << r.n_trials << '\n';
  }
  return out.str();
}

}  // namespace tripletalign
