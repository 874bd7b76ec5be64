#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tripletalign {

// Which of the two targets of a triplet. Used for both human majorities and
// model decisions; a human tie is represented separately by HumanChoice.
enum class Choice { Target1, Target2 };

enum class HumanChoice { Target1, Target2, Tie };

constexpr Choice other(Choice c) noexcept {
  return c == Choice::Target1 ? Choice::Target2 : Choice::Target1;
}

std::string_view to_string(Choice c) noexcept;
std::string_view to_string(HumanChoice c) noexcept;

struct Triplet {
  std::string id;
  std::string anchor;
  std::string target1;
  std::string target2;

  const std::string& target(Choice c) const noexcept { return c == Choice::Target1 ? target1 : target2; }
  bool operator==(const Triplet&) const = default;
};

struct JudgmentRecord {
  std::string triplet_id;
  std::uint32_t votes1 = 0;
  std::uint32_t votes2 = 0;

  std::uint32_t total() const noexcept { return votes1 + votes2; }
  bool operator==(const JudgmentRecord&) const = default;
};

// A parsed triplet file: every row yields a Triplet, labeled rows also yield a
// JudgmentRecord (in row order).
struct Dataset {
  std::vector<Triplet> triplets;
  std::vector<JudgmentRecord> judgments;

  bool operator==(const Dataset&) const = default;
};

// Canonical CSV: header `id,anchor,target1,target2,votes1,votes2`. Vote
// columns may be absent or empty for unlabeled rows. Standard double-quote
// quoting is accepted. Errors carry the 1-based line number.
Dataset parse_triplets(std::istream& in);
Dataset parse_triplets(std::string_view text);
Dataset load_triplets(const std::filesystem::path& path);

// Writes the canonical CSV. parse_triplets(write_triplets(d)) == d.
void write_triplets(std::ostream& out, const Dataset& dataset);
std::string to_csv(const Dataset& dataset);

HumanChoice majority(const JudgmentRecord& j);

// |votes1 - votes2| / (votes1 + votes2)
double agreement(const JudgmentRecord& j);

struct EvalItem {
  Triplet triplet;
  Choice human;
  double agreement;
  std::uint32_t votes1;
  std::uint32_t votes2;
};

// Labeled, non-tie triplets in dataset row order.
using EvalSet = std::vector<EvalItem>;

EvalSet build_eval_set(const Dataset& dataset);

// Mean over triplets of max(votes1, votes2) / (votes1 + votes2), i.e. the
// average fraction of raters agreeing with the majority.
double human_baseline(const EvalSet& eval_set);

struct DatasetStats {
  std::size_t triplets = 0;
  std::size_t unique_terms = 0;
  std::size_t labeled = 0;
  std::size_t ties = 0;
  std::size_t eval_size = 0;

  bool operator==(const DatasetStats&) const = default;
};

DatasetStats dataset_stats(const Dataset& dataset);

// Unique terms in first-occurrence order (anchor, target1, target2 per row).
// With eval_only, only triplets that are part of the eval set contribute.
std::vector<std::string> enumerate_terms(const Dataset& dataset, bool eval_only = true);

}  // namespace tripletalign
