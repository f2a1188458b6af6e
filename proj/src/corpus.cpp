#include "mensp/corpus.hpp"

#include "json.hpp"
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "mensp/errors.hpp"
#include "mensp/util.hpp"

namespace mensp {

using nlohmann::json;

ExemplarSet ExemplarSet::create(std::string item_id, const std::map<int, std::string>& by_level,
                                std::string prompt_text,
                                std::optional<std::string> complexity_label) {
  if (item_id.empty()) throw DataError("exemplar set has an empty item_id");
  if (by_level.size() < 2)
    throw DataError("item '" + item_id + "' needs at least 2 grade levels, got " +
                    std::to_string(by_level.size()));
  ExemplarSet set;
  set.item_id_ = std::move(item_id);
  set.prompt_text_ = std::move(prompt_text);
  set.complexity_label_ = std::move(complexity_label);
  const int g = static_cast<int>(by_level.size());
  for (int level = 0; level < g; ++level) {
    auto it = by_level.find(level);
    if (it == by_level.end())
      throw DataError("item '" + set.item_id_ + "' is missing exemplar level " + std::to_string(level));
    if (is_blank(it->second))
      throw DataError("item '" + set.item_id_ + "' has an empty exemplar at level " +
                      std::to_string(level));
    set.texts_.push_back(it->second);
  }
  return set;
}

AssessmentItem ExemplarSet::item() const {
  return AssessmentItem{item_id_, prompt_text_, num_levels(), complexity_label_};
}

namespace {

std::string at_line(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

LabeledResponse parse_record(const std::string& line, const AssessmentItem& item,
                             const std::string& where) {
  json record;
  try {
    record = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(where + "malformed record: " + e.what());
  }
  if (!record.is_object()) throw DataError(where + "malformed record: expected a JSON object");
  for (const auto& [key, _] : record.items())
    if (key != "response_id" && key != "text" && key != "gold")
      throw DataError(where + "malformed record: unknown field '" + key + "'");
  auto need = [&](const char* field) -> const json& {
    auto it = record.find(field);
    if (it == record.end()) throw DataError(where + "malformed record: missing field '" + field + "'");
    return *it;
  };
  const json& id = need("response_id");
  const json& text = need("text");
  const json& gold = need("gold");
  if (!id.is_string() || id.get<std::string>().empty())
    throw DataError(where + "malformed record: response_id must be a non-empty string");
  if (!text.is_string()) throw DataError(where + "malformed record: text must be a string");
  if (!gold.is_number_integer()) throw DataError(where + "malformed record: gold must be an integer");
  const auto g = gold.get<long long>();
  if (g < 0 || g >= item.num_levels)
    throw DataError(where + "gold " + std::to_string(g) + " out of range for item '" + item.item_id +
                    "' with " + std::to_string(item.num_levels) + " levels");
  return LabeledResponse{id.get<std::string>(), item.item_id, text.get<std::string>(),
                         GradeLevel{static_cast<int>(g)}};
}

}  // namespace

std::vector<LabeledResponse> parse_responses(const std::string& contents, const AssessmentItem& item,
                                             const std::string& source) {
  std::vector<LabeledResponse> out;
  std::unordered_set<std::string> seen;
  std::istringstream in(contents);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    const std::string where = at_line(source, line_no);
    LabeledResponse r = parse_record(line, item, where);
    if (!seen.insert(r.response_id).second)
      throw DataError(where + "duplicate response_id '" + r.response_id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LabeledResponse> load_responses(const std::filesystem::path& path,
                                            const AssessmentItem& item) {
  return parse_responses(read_text_file(path), item, path.string());
}

std::string serialize_responses(const std::vector<LabeledResponse>& responses) {
  std::string out;
  for (const auto& r : responses) {
    json record = {{"response_id", r.response_id}, {"text", r.text}, {"gold", r.gold.value}};
    out += record.dump();
    out += '\n';
  }
  return out;
}

ExemplarSet parse_exemplars(const std::string& contents, const std::string& source) {
  json doc;
  try {
    doc = json::parse(contents);
  } catch (const json::parse_error& e) {
    throw DataError(source + ": malformed exemplar document: " + e.what());
  }
  if (!doc.is_object()) throw DataError(source + ": exemplar document must be a JSON object");
  for (const auto& [key, _] : doc.items())
    if (key != "item_id" && key != "levels" && key != "prompt_text" && key != "complexity_label")
      throw DataError(source + ": unknown field '" + key + "'");
  if (!doc.contains("item_id") || !doc["item_id"].is_string())
    throw DataError(source + ": item_id must be a string");
  if (!doc.contains("levels") || !doc["levels"].is_array())
    throw DataError(source + ": levels must be an array");

  const std::string item_id = doc["item_id"].get<std::string>();
  std::map<int, std::string> by_level;
  for (const auto& entry : doc["levels"]) {
    if (!entry.is_object() || !entry.contains("level") || !entry["level"].is_number_integer() ||
        !entry.contains("text") || !entry["text"].is_string())
      throw DataError(source + ": each level needs an integer 'level' and a string 'text'");
    const int level = entry["level"].get<int>();
    if (level < 0) throw DataError(source + ": negative exemplar level " + std::to_string(level));
    if (!by_level.emplace(level, entry["text"].get<std::string>()).second)
      throw DataError(source + ": duplicate exemplar level " + std::to_string(level));
  }
  // Levels must be exactly 0..G-1 where G is the highest declared level + 1.
  const int g = by_level.empty() ? 0 : by_level.rbegin()->first + 1;
  for (int level = 0; level < g; ++level)
    if (!by_level.count(level))
      throw DataError(source + ": item '" + item_id + "' is missing exemplar level " +
                      std::to_string(level));
  std::optional<std::string> complexity;
  if (doc.contains("complexity_label") && doc["complexity_label"].is_string())
    complexity = doc["complexity_label"].get<std::string>();
  std::string prompt;
  if (doc.contains("prompt_text") && doc["prompt_text"].is_string())
    prompt = doc["prompt_text"].get<std::string>();
  try {
    return ExemplarSet::create(item_id, by_level, prompt, complexity);
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
}

ExemplarSet load_exemplars(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("exemplar file not found: " + path.string());
  return parse_exemplars(read_text_file(path), path.string());
}

std::string serialize_exemplars(const ExemplarSet& exemplars) {
  json levels = json::array();
  for (int g = 0; g < exemplars.num_levels(); ++g)
    levels.push_back({{"level", g}, {"text", exemplars.text(GradeLevel{g})}});
  const AssessmentItem item = exemplars.item();
  json doc = {{"item_id", exemplars.item_id()}, {"levels", levels}};
  if (!item.prompt_text.empty()) doc["prompt_text"] = item.prompt_text;
  if (item.complexity_label) doc["complexity_label"] = *item.complexity_label;
  return doc.dump(2) + "\n";
}

std::map<GradeLevel, int> level_counts(const std::vector<LabeledResponse>& responses) {
  std::map<GradeLevel, int> counts;
  for (const auto& r : responses) ++counts[r.gold];
  return counts;
}

DatasetSplit few_shot_split(const std::vector<LabeledResponse>& pool, int k, std::uint64_t seed) {
  if (k < 0) throw std::invalid_argument("few_shot_split: k must be >= 0");
  std::map<GradeLevel, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < pool.size(); ++i) members[pool[i].gold].push_back(i);
  for (const auto& [level, idx] : members)
    if (static_cast<int>(idx.size()) < k)
      throw DataError("insufficient samples at grade level " + std::to_string(level.value) + ": need " +
                      std::to_string(k) + ", have " + std::to_string(idx.size()));

  Rng rng(seed);
  std::vector<bool> in_train(pool.size(), false);
  for (auto& [level, idx] : members) {
    rng.shuffle(idx);
    for (int i = 0; i < k; ++i) in_train[idx[static_cast<std::size_t>(i)]] = true;
  }
  DatasetSplit split;
  split.seed = seed;
  split.shots_per_level = k;
  for (std::size_t i = 0; i < pool.size(); ++i)
    (in_train[i] ? split.train : split.test).push_back(pool[i]);
  return split;
}

}  // namespace mensp
