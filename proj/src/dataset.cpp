#include "tripletalign/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "tripletalign/error.hpp"

namespace tripletalign {

namespace {

constexpr std::string_view kHeader[] = {"id", "anchor", "target1", "target2", "votes1", "votes2"};

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw ParseError("dataset", "line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Splits one CSV record. Quoted fields may contain commas and doubled quotes;
// embedded newlines are not supported (terms are single words).
std::vector<std::string> split_record(std::string_view line, std::size_t lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      if (!trim(cur).empty()) fail(lineno, "unexpected quote inside unquoted field");
      cur.clear();
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(was_quoted ? cur : std::string(trim(cur)));
      cur.clear();
      was_quoted = false;
    } else {
      if (was_quoted && ch != ' ' && ch != '\t' && ch != '\r') fail(lineno, "text after closing quote");
      if (!was_quoted) cur.push_back(ch);
    }
  }
  if (quoted) fail(lineno, "unterminated quoted field");
  fields.push_back(was_quoted ? cur : std::string(trim(cur)));
  return fields;
}

std::uint32_t parse_count(const std::string& field, std::size_t lineno, const char* column) {
  std::uint32_t value = 0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) fail(lineno, std::string("invalid ") + column + " '" + field + "'");
  return value;
}

bool needs_quoting(std::string_view s) {
  return s.find_first_of(",\"\r\n") != std::string_view::npos || s != trim(s);
}

void write_field(std::ostream& out, std::string_view s) {
  if (!needs_quoting(s)) {
    out << s;
    return;
  }
  out << '"';
  for (char ch : s) {
    if (ch == '"') out << '"';
    out << ch;
  }
  out << '"';
}

}  // namespace

std::string_view to_string(Choice c) noexcept {
  return c == Choice::Target1 ? "target1" : "target2";
}

std::string_view to_string(HumanChoice c) noexcept {
  switch (c) {
    case HumanChoice::Target1: return "target1";
    case HumanChoice::Target2: return "target2";
    case HumanChoice::Tie: return "tie";
  }
  return "tie";
}

Dataset parse_triplets(std::istream& in) {
  Dataset out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_record(line, lineno);

    if (!header_seen) {
      if (fields.size() != 6 || !std::equal(fields.begin(), fields.end(), std::begin(kHeader))) {
        fail(lineno, "expected header 'id,anchor,target1,target2,votes1,votes2'");
      }
      header_seen = true;
      continue;
    }

    if (fields.size() != 4 && fields.size() != 6) {
      fail(lineno, "expected 4 or 6 fields, got " + std::to_string(fields.size()));
    }
    Triplet t{fields[0], fields[1], fields[2], fields[3]};
    if (t.id.empty()) fail(lineno, "empty id");
    for (const auto* term : {&t.anchor, &t.target1, &t.target2}) {
      if (term->empty()) fail(lineno, "empty term");
    }
    if (t.anchor == t.target1 || t.anchor == t.target2) fail(lineno, "anchor equals target");
    if (t.target1 == t.target2) fail(lineno, "target1 equals target2");
    if (!ids.insert(t.id).second) fail(lineno, "duplicate id '" + t.id + "'");

    if (fields.size() == 6) {
      const bool has1 = !fields[4].empty();
      const bool has2 = !fields[5].empty();
      if (has1 != has2) fail(lineno, "only one vote column present");
      if (has1) {
        JudgmentRecord j{t.id, parse_count(fields[4], lineno, "votes1"), parse_count(fields[5], lineno, "votes2")};
        if (j.total() == 0) fail(lineno, "labeled row with zero votes");
        out.judgments.push_back(std::move(j));
      }
    }
    out.triplets.push_back(std::move(t));
  }
  if (!header_seen) fail(lineno == 0 ? 1 : lineno, "missing header");
  return out;
}

Dataset parse_triplets(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_triplets(in);
}

Dataset load_triplets(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("dataset", "cannot open '" + path.string() + "'");
  try {
    return parse_triplets(in);
  } catch (const ParseError& e) {
    throw ParseError("dataset", path.string() + ": " + std::string(e.what()).substr(9));
  }
}

void write_triplets(std::ostream& out, const Dataset& dataset) {
  std::unordered_map<std::string_view, const JudgmentRecord*> by_id;
  for (const auto& j : dataset.judgments) by_id[j.triplet_id] = &j;

  out << "id,anchor,target1,target2,votes1,votes2\n";
  for (const auto& t : dataset.triplets) {
    write_field(out, t.id);
    out << ',';
    write_field(out, t.anchor);
    out << ',';
    write_field(out, t.target1);
    out << ',';
    write_field(out, t.target2);
    out << ',';
    if (auto it = by_id.find(t.id); it != by_id.end()) {
      out << it->second->votes1 << ',' << it->second->votes2;
    } else {
      out << ',';
    }
    out << '\n';
  }
}

std::string to_csv(const Dataset& dataset) {
  std::ostringstream out;
  write_triplets(out, dataset);
  return out.str();
}

HumanChoice majority(const JudgmentRecord& j) {
  if (j.total() == 0) throw ValidationError("dataset", "triplet '" + j.triplet_id + "' has zero votes");
  if (j.votes1 > j.votes2) return HumanChoice::Target1;
  if (j.votes2 > j.votes1) return HumanChoice::Target2;
  return HumanChoice::Tie;
}

double agreement(const JudgmentRecord& j) {
  if (j.total() == 0) throw ValidationError("dataset", "triplet '" + j.triplet_id + "' has zero votes");
  const auto diff = j.votes1 > j.votes2 ? j.votes1 - j.votes2 : j.votes2 - j.votes1;
  return static_cast<double>(diff) / static_cast<double>(j.total());
}

EvalSet build_eval_set(const Dataset& dataset) {
  std::unordered_map<std::string_view, const JudgmentRecord*> by_id;
  for (const auto& j : dataset.judgments) {
    if (!by_id.emplace(j.triplet_id, &j).second) {
      throw ValidationError("dataset", "multiple judgments for triplet '" + j.triplet_id + "'");
    }
  }
  std::unordered_set<std::string_view> known;
  for (const auto& t : dataset.triplets) known.insert(t.id);
  for (const auto& j : dataset.judgments) {
    if (!known.contains(j.triplet_id)) {
      throw ValidationError("dataset", "judgment references unknown triplet '" + j.triplet_id + "'");
    }
  }

  EvalSet out;
  for (const auto& t : dataset.triplets) {
    auto it = by_id.find(t.id);
    if (it == by_id.end()) continue;
    const auto& j = *it->second;
    const auto m = majority(j);
    if (m == HumanChoice::Tie) continue;
    out.push_back({t, m == HumanChoice::Target1 ? Choice::Target1 : Choice::Target2, agreement(j), j.votes1, j.votes2});
  }
  return out;
}

double human_baseline(const EvalSet& eval_set) {
  if (eval_set.empty()) throw ValidationError("dataset", "human baseline of an empty eval set");
  double sum = 0.0;
  for (const auto& item : eval_set) {
    const double total = static_cast<double>(item.votes1) + static_cast<double>(item.votes2);
    sum += static_cast<double>(std::max(item.votes1, item.votes2)) / total;
  }
  return sum / static_cast<double>(eval_set.size());
}

DatasetStats dataset_stats(const Dataset& dataset) {
  DatasetStats s;
  s.triplets = dataset.triplets.size();
  std::unordered_set<std::string_view> terms;
  for (const auto& t : dataset.triplets) {
    terms.insert(t.anchor);
    terms.insert(t.target1);
    terms.insert(t.target2);
  }
  s.unique_terms = terms.size();
  s.labeled = dataset.judgments.size();
  for (const auto& j : dataset.judgments) {
    if (majority(j) == HumanChoice::Tie) ++s.ties;
  }
  s.eval_size = s.labeled - s.ties;
  return s;
}

std::vector<std::string> enumerate_terms(const Dataset& dataset, bool eval_only) {
  std::unordered_set<std::string_view> eval_ids;
  if (eval_only) {
    for (const auto& j : dataset.judgments) {
      if (majority(j) != HumanChoice::Tie) eval_ids.insert(j.triplet_id);
    }
  }
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& t : dataset.triplets) {
    if (eval_only && !eval_ids.contains(t.id)) continue;
    for (const auto* term : {&t.anchor, &t.target1, &t.target2}) {
      if (seen.insert(*term).second) out.push_back(*term);
    }
  }
  return out;
}

}  // namespace tripletalign
