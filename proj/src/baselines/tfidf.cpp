#include "mensp/baselines/tfidf.hpp"

#include <cctype>
#include <cmath>
#include <set>

#include "mensp/errors.hpp"

namespace mensp {

std::vector<std::string> baseline_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<double> SparseVector::dense() const {
  std::vector<double> out(dim, 0.0);
  for (const auto& [i, v] : entries) out[i] = v;
  return out;
}

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.second * e.second;
  return std::sqrt(s);
}

TfidfModel tfidf_fit(const std::vector<std::string>& train_texts) {
  std::map<std::string, std::size_t> df;
  for (const auto& text : train_texts) {
    const auto tokens = baseline_tokens(text);
    for (const auto& t : std::set<std::string>(tokens.begin(), tokens.end())) ++df[t];
  }
  if (df.empty()) throw DataError("TF-IDF needs at least one training text with a word in it");
  TfidfModel m;
  m.num_documents = train_texts.size();
  const double d = static_cast<double>(train_texts.size());
  for (const auto& [token, count] : df) {
    m.vocabulary.emplace(token, m.idf.size());
    m.idf.push_back(std::log((1.0 + d) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return m;
}

SparseVector tfidf_transform(const TfidfModel& model, std::string_view text) {
  std::map<std::size_t, double> counts;
  for (const auto& t : baseline_tokens(text)) {
    auto it = model.vocabulary.find(t);
    if (it != model.vocabulary.end()) counts[it->second] += 1.0;
  }
  SparseVector v;
  v.dim = model.dim();
  for (const auto& [col, c] : counts) v.entries.emplace_back(col, c * model.idf[col]);
  const double n = v.norm();
  if (n > 0.0)
    for (auto& e : v.entries) e.second /= n;
  return v;
}

FeatureMatrix tfidf_matrix(const TfidfModel& model, const std::vector<std::string>& texts) {
  FeatureMatrix out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(tfidf_transform(model, t).dense());
  return out;
}

}  // namespace mensp
