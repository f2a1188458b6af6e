#include "mensp/scorer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "json.hpp"
#include "mensp/simd/kernels.hpp"
#include "mensp/util.hpp"

namespace mensp {

double cosine(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DataError("cosine of vectors with different dimensions (" + std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()) + ")");
  const double nx = std::sqrt(simd::dot(x, x));
  const double ny = std::sqrt(simd::dot(y, y));
  if (!(nx > 0.0) || !(ny > 0.0)) throw DegenerateEmbedding("zero-norm embedding in cosine similarity");
  const double c = simd::dot(x, y) / (nx * ny);
  return std::clamp(c, -1.0, 1.0);
}

double cosine(const Embedding& x, const Embedding& y) { return cosine(x.values, y.values); }

double threshold_from_embeddings(const std::vector<Embedding>& embeddings) {
  if (embeddings.size() < 2) throw DataError("threshold needs at least two exemplar levels");
  const auto& perfect = embeddings.back();
  double sum = 0.0;
  for (std::size_t g = 0; g + 1 < embeddings.size(); ++g) sum += cosine(embeddings[g], perfect);
  return sum / static_cast<double>(embeddings.size() - 1);
}

double compute_threshold(const Encoder& backend, const ExemplarSet& exemplars) {
  std::vector<Embedding> z;
  for (const auto& text : exemplars.texts()) z.push_back(backend.embed(text));
  return threshold_from_embeddings(z);
}

GradeLevel argmax_lowest(const std::map<GradeLevel, double>& probabilities) {
  if (probabilities.empty()) throw DataError("no candidate levels to match against");
  auto best = probabilities.begin();
  for (auto it = probabilities.begin(); it != probabilities.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

std::string stage_name(Stage stage) { return stage == Stage::zero_identified ? "zero-identified" : "matched"; }

MenspScorer::MenspScorer(std::shared_ptr<const Encoder> backend, ExemplarSet exemplars, ScorerOptions options)
    : backend_(std::move(backend)), exemplars_(std::move(exemplars)), options_(options) {
  if (!backend_) throw ConfigError("scorer needs a backend");
  for (const auto& text : exemplars_.texts()) exemplar_embeddings_.push_back(backend_->embed(text));
  try {
    theta_ = threshold_from_embeddings(exemplar_embeddings_);
  } catch (const DegenerateEmbedding& e) {
    throw DegenerateEmbedding("exemplar set '" + exemplars_.item_id() + "' has a zero-norm exemplar embedding");
  }
}

double MenspScorer::cosine_to_perfect(std::string_view response) const {
  return cosine(backend_->embed(response), exemplar_embeddings_.back());
}

bool MenspScorer::is_zero(std::string_view response) const {
  if (is_blank(response)) return true;
  try {
    return cosine_to_perfect(response) < theta_;
  } catch (const DegenerateEmbedding&) {
    return true;
  }
}

std::pair<GradeLevel, std::map<GradeLevel, double>> MenspScorer::match_exemplars(std::string_view response) const {
  std::map<GradeLevel, double> probs;
  const int first = options_.include_zero_in_matching ? 0 : 1;
  for (int g = first; g < exemplars_.num_levels(); ++g) {
    const double p = backend_->nsp_probability(response, exemplars_.text(GradeLevel{g}));
    if (!(p >= 0.0 && p <= 1.0)) throw BackendError("backend returned an NSP probability outside [0, 1]");
    probs.emplace(GradeLevel{g}, p);
  }
  return {argmax_lowest(probs), std::move(probs)};
}

ScoreResult MenspScorer::score(std::string_view response) const {
  ScoreResult r;
  if (is_blank(response)) {
    r.grade = GradeLevel{0};
    r.stage = Stage::zero_identified;
    r.flags.push_back(kFlagEmptyResponse);
    return r;
  }
  double c = 0.0;
  try {
    c = cosine_to_perfect(response);
  } catch (const DegenerateEmbedding&) {
    r.grade = GradeLevel{0};
    r.stage = Stage::zero_identified;
    r.flags.push_back(kFlagDegenerateEmbedding);
    return r;
  }
  r.cosine_to_perfect = c;
  if (c < theta_) {
    r.grade = GradeLevel{0};
    r.stage = Stage::zero_identified;
    return r;
  }
  auto [grade, probs] = match_exemplars(response);
  r.grade = grade;
  r.stage = Stage::matched;
  r.nsp_probabilities = std::move(probs);
  return r;
}

std::vector<ScoreOutcome> batch_score(const MenspScorer& scorer, const std::vector<std::string>& responses,
                                      unsigned threads) {
  std::vector<ScoreOutcome> out(responses.size());
  auto run_one = [&](std::size_t i) {
    try {
      out[i].result = scorer.score(responses[i]);
    } catch (const Error& e) {
      out[i].error_kind = e.kind();
      out[i].error = e.what();
    } catch (const std::exception& e) {
      out[i].error_kind = ErrorKind::backend;
      out[i].error = e.what();
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  if (!scorer.backend().capabilities().concurrent_safe) threads = 1;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, responses.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < responses.size(); ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < responses.size(); i = next++) run_one(i);
    });
  for (auto& th : pool) th.join();
  return out;
}

namespace {

std::string kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::backend: return "backend";
  }
  return "unknown";
}

}  // namespace

std::string score_result_json(const ScoreResult& result, const std::string& response_id) {
  nlohmann::ordered_json j;
  j["response_id"] = response_id;
  j["grade"] = result.grade.value;
  j["stage"] = stage_name(result.stage);
  j["cosine_to_perfect"] = result.cosine_to_perfect ? nlohmann::ordered_json(*result.cosine_to_perfect) : nullptr;
  j["nsp_probabilities"] = nlohmann::ordered_json::object();
  for (const auto& [g, p] : result.nsp_probabilities) j["nsp_probabilities"][std::to_string(g.value)] = p;
  j["flags"] = result.flags;
  return j.dump();
}

std::string score_error_json(const ScoreOutcome& outcome, const std::string& response_id) {
  nlohmann::ordered_json j;
  j["response_id"] = response_id;
  j["error_kind"] = kind_name(outcome.error_kind.value_or(ErrorKind::backend));
  j["error"] = outcome.error;
  return j.dump();
}

}  // namespace mensp
