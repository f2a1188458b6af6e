#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mensp {

/// A rubric grade in [0, G-1].
struct GradeLevel {
  int value = 0;
  auto operator<=>(const GradeLevel&) const = default;
};

struct AssessmentItem {
  std::string item_id;
  std::string prompt_text;
  int num_levels = 0;
  std::optional<std::string> complexity_label;
};

struct LabeledResponse {
  std::string response_id;
  std::string item_id;
  std::string text;
  GradeLevel gold;

  bool operator==(const LabeledResponse&) const = default;
};

/// Exactly one authored exemplar per grade level; the last one is the perfect response.
class ExemplarSet {
 public:
  /// Validates completeness (levels 0..G-1, G >= 2) and non-empty texts.
  static ExemplarSet create(std::string item_id, const std::map<int, std::string>& by_level,
                            std::string prompt_text = {},
                            std::optional<std::string> complexity_label = std::nullopt);

  const std::string& item_id() const { return item_id_; }
  int num_levels() const { return static_cast<int>(texts_.size()); }
  GradeLevel perfect_level() const { return GradeLevel{num_levels() - 1}; }
  const std::string& text(GradeLevel level) const { return texts_.at(static_cast<std::size_t>(level.value)); }
  const std::vector<std::string>& texts() const { return texts_; }

  AssessmentItem item() const;

 private:
  std::string item_id_;
  std::string prompt_text_;
  std::optional<std::string> complexity_label_;
  std::vector<std::string> texts_;
};

struct DatasetSplit {
  std::vector<LabeledResponse> train;
  std::vector<LabeledResponse> test;
  std::uint64_t seed = 0;
  int shots_per_level = 0;
};

/// Reads a JSON-lines response file (`response_id`, `text`, `gold` per line).
/// Blank lines are skipped; errors name the 1-based line number.
std::vector<LabeledResponse> load_responses(const std::filesystem::path& path,
                                            const AssessmentItem& item);

/// Same, from an in-memory buffer; `source` is used in messages.
std::vector<LabeledResponse> parse_responses(const std::string& contents, const AssessmentItem& item,
                                             const std::string& source = "<memory>");

std::string serialize_responses(const std::vector<LabeledResponse>& responses);

ExemplarSet load_exemplars(const std::filesystem::path& path);
ExemplarSet parse_exemplars(const std::string& contents, const std::string& source = "<memory>");
std::string serialize_exemplars(const ExemplarSet& exemplars);

/// Draws exactly k responses per grade level present in the pool into the
/// training side; everything else is test. Each level's members are shuffled
/// by one seeded generator (levels visited in ascending order) and the first
/// k are taken, so the train side for k is a subset of the train side for any
/// larger k under the same seed. Both sides keep pool order.
DatasetSplit few_shot_split(const std::vector<LabeledResponse>& pool, int k, std::uint64_t seed);

/// Grade levels present in the pool, ascending, with their member counts.
std::map<GradeLevel, int> level_counts(const std::vector<LabeledResponse>& responses);

}  // namespace mensp
