#pragma once

// Two-stage scoring: an embedding-cosine pre-filter assigns grade 0 to
// responses far from the perfect exemplar, and everything else goes to the
// exemplar whose pairing with the response gets the highest NSP probability.

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mensp/corpus.hpp"
#include "mensp/encoder/backend.hpp"
#include "mensp/errors.hpp"

namespace mensp {

/// Cosine similarity in double precision, clamped to [-1, 1].
/// Throws DegenerateEmbedding on a zero-norm argument and DataError on a
/// dimension mismatch.
double cosine(std::span<const double> x, std::span<const double> y);
double cosine(const Embedding& x, const Embedding& y);

/// Mean over g < G-1 of cos(z_g, z_{G-1}); `embeddings` is indexed by level.
double threshold_from_embeddings(const std::vector<Embedding>& embeddings);

double compute_threshold(const Encoder& backend, const ExemplarSet& exemplars);

/// Highest probability wins; ties go to the lowest grade.
GradeLevel argmax_lowest(const std::map<GradeLevel, double>& probabilities);

enum class Stage { zero_identified, matched };

struct ScoreResult {
  GradeLevel grade;
  Stage stage = Stage::matched;
  /// Empty when zero-identified.
  std::map<GradeLevel, double> nsp_probabilities;
  /// Absent for empty or degenerate responses.
  std::optional<double> cosine_to_perfect;
  std::vector<std::string> flags;
};

inline constexpr const char* kFlagEmptyResponse = "empty-response";
inline constexpr const char* kFlagDegenerateEmbedding = "degenerate-embedding";

std::string stage_name(Stage stage);

struct ScorerOptions {
  bool include_zero_in_matching = true;
};

/// Immutable after construction. Exemplar embeddings and the threshold are
/// computed once from the backend; a scorer built over a fine-tuned backend
/// recomputes both.
class MenspScorer {
 public:
  MenspScorer(std::shared_ptr<const Encoder> backend, ExemplarSet exemplars, ScorerOptions options = {});

  double theta() const { return theta_; }
  const std::vector<Embedding>& exemplar_embeddings() const { return exemplar_embeddings_; }
  const ExemplarSet& exemplars() const { return exemplars_; }
  const Encoder& backend() const { return *backend_; }
  const ScorerOptions& options() const { return options_; }

  double cosine_to_perfect(std::string_view response) const;

  /// True iff cos(z_R, z_{G-1}) < theta. Empty and degenerate responses count as zero.
  bool is_zero(std::string_view response) const;

  std::pair<GradeLevel, std::map<GradeLevel, double>> match_exemplars(std::string_view response) const;

  ScoreResult score(std::string_view response) const;

 private:
  std::shared_ptr<const Encoder> backend_;
  ExemplarSet exemplars_;
  ScorerOptions options_;
  std::vector<Embedding> exemplar_embeddings_;
  double theta_ = 0.0;
};

struct ScoreOutcome {
  std::optional<ScoreResult> result;
  std::optional<ErrorKind> error_kind;
  std::string error;

  bool ok() const { return result.has_value(); }
};

/// Scores every response independently; failures land in their own slot.
/// Runs on `threads` workers (0 = hardware concurrency) when the backend
/// declares itself concurrent-safe, serially otherwise. Output order always
/// matches input order.
std::vector<ScoreOutcome> batch_score(const MenspScorer& scorer, const std::vector<std::string>& responses,
                                      unsigned threads = 0);

/// One JSON object (no trailing newline).
std::string score_result_json(const ScoreResult& result, const std::string& response_id);
std::string score_error_json(const ScoreOutcome& outcome, const std::string& response_id);

}  // namespace mensp
