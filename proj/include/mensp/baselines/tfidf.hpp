#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mensp {

using FeatureMatrix = std::vector<std::vector<double>>;

/// Lowercased runs of ASCII letters and digits; every other byte separates.
std::vector<std::string> baseline_tokens(std::string_view text);

struct TfidfModel {
  std::map<std::string, std::size_t> vocabulary;
  std::vector<double> idf;
  std::size_t num_documents = 0;

  std::size_t dim() const { return idf.size(); }
};

struct SparseVector {
  std::size_t dim = 0;
  /// Sorted by column.
  std::vector<std::pair<std::size_t, double>> entries;

  std::vector<double> dense() const;
  double norm() const;
};

/// Vocabulary from the training texts; idf(t) = ln((1 + D) / (1 + df(t))) + 1.
/// Throws DataError when no text has a token.
TfidfModel tfidf_fit(const std::vector<std::string>& train_texts);

/// Raw counts times idf, L2-normalized. Unknown tokens are ignored; a text
/// with no known token maps to the zero vector.
SparseVector tfidf_transform(const TfidfModel& model, std::string_view text);

FeatureMatrix tfidf_matrix(const TfidfModel& model, const std::vector<std::string>& texts);

}  // namespace mensp
