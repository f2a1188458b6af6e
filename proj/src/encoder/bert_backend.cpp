#include "mensp/encoder/bert_backend.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "mensp/errors.hpp"
#include "mensp/util.hpp"

namespace mensp {

namespace {

std::string weights_digest(const bert::Params& p) {
  std::uint64_t h = fnv1a64("");
  p.for_each([&](const std::string& name, const std::vector<float>& buf, const auto&) {
    h = fnv1a64(name, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(buf.data()), buf.size() * sizeof(float)), h);
  });
  return hex64(h);
}

}  // namespace

BertEncoder::BertEncoder(bert::Params params, WordPieceTokenizer tokenizer, int max_sequence_length,
                         Pooling pooling)
    : params_(std::move(params)), tokenizer_(std::move(tokenizer)), pooling_(pooling) {
  params_.config.validate();
  if (tokenizer_.vocab_size() != static_cast<std::size_t>(params_.config.vocab_size))
    throw BackendError("vocabulary has " + std::to_string(tokenizer_.vocab_size()) + " entries but the model expects " +
                       std::to_string(params_.config.vocab_size));
  const int limit = std::min(max_sequence_length, params_.config.max_position_embeddings);
  if (limit < 8) throw ConfigError("max_sequence_length must be at least 8");
  caps_.kind = BackendKind::pretrained_checkpoint;
  caps_.concurrent_safe = true;
  caps_.trainable = true;
  caps_.max_sequence_length = limit;
  caps_.embedding_dim = params_.config.hidden_size;
  caps_.identifier = "bert:h=" + std::to_string(params_.config.hidden_size) +
                     ",layers=" + std::to_string(params_.config.num_layers) + ",L=" + std::to_string(limit) +
                     ",pooling=" + (pooling_ == Pooling::pooled ? "pooled" : "mean") +
                     ",weights=" + weights_digest(params_);
}

std::shared_ptr<const BertEncoder> BertEncoder::load(const std::filesystem::path& dir, int max_sequence_length,
                                                     Pooling pooling) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw BackendError("checkpoint directory not found: " + dir.string());
  for (const char* needed : {"config.json", "vocab.txt", "model.safetensors"})
    if (!fs::exists(dir / needed)) throw BackendError("checkpoint " + dir.string() + " lacks " + needed);

  std::string config_text;
  try {
    config_text = read_text_file(dir / "config.json");
  } catch (const DataError& e) {
    throw BackendError(e.what());
  }
  const auto config = bert::Config::from_json_text(config_text);

  bool lowercase = true;
  if (fs::exists(dir / "tokenizer_config.json")) {
    try {
      const auto doc = nlohmann::json::parse(read_text_file(dir / "tokenizer_config.json"));
      if (doc.contains("do_lower_case") && doc["do_lower_case"].is_boolean())
        lowercase = doc["do_lower_case"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError("malformed tokenizer_config.json: " + std::string(e.what()));
    }
  }
  auto tokenizer = WordPieceTokenizer::from_vocab_file(dir / "vocab.txt", lowercase);
  auto params = bert::Params::from_tensors(read_safetensors(dir / "model.safetensors"), config);
  return std::make_shared<const BertEncoder>(std::move(params), std::move(tokenizer), max_sequence_length, pooling);
}

EncodedPair BertEncoder::build_pair_input(std::string_view response, std::string_view exemplar) const {
  const auto a = tokenizer_.encode(response);
  const auto b = tokenizer_.encode(exemplar);
  const auto budget = static_cast<std::size_t>(caps_.max_sequence_length) - 3;
  const auto [na, nb] = truncate_longest_first(a.size(), b.size(), budget);
  EncodedPair pair;
  pair.first_length = na;
  pair.second_length = nb;
  pair.trailing_separator = true;
  pair.token_ids.reserve(na + nb + 3);
  pair.token_ids.push_back(tokenizer_.cls_id());
  pair.token_ids.insert(pair.token_ids.end(), a.begin(), a.begin() + static_cast<std::ptrdiff_t>(na));
  pair.token_ids.push_back(tokenizer_.sep_id());
  pair.token_ids.insert(pair.token_ids.end(), b.begin(), b.begin() + static_cast<std::ptrdiff_t>(nb));
  pair.token_ids.push_back(tokenizer_.sep_id());
  pair.segment_ids.assign(na + 2, 0);
  pair.segment_ids.resize(pair.token_ids.size(), 1);
  return pair;
}

EncodedPair BertEncoder::encode_single(std::string_view text) const {
  auto ids = tokenizer_.encode(text);
  const auto budget = static_cast<std::size_t>(caps_.max_sequence_length) - 2;
  if (ids.size() > budget) ids.resize(budget);
  EncodedPair single;
  single.first_length = ids.size();
  single.token_ids.push_back(tokenizer_.cls_id());
  single.token_ids.insert(single.token_ids.end(), ids.begin(), ids.end());
  single.token_ids.push_back(tokenizer_.sep_id());
  single.segment_ids.assign(single.token_ids.size(), 0);
  return single;
}

std::array<float, 2> BertEncoder::pair_logits(const EncodedPair& pair) const {
  bert::Activations act;
  bert::forward_encoder(params_, pair.token_ids, pair.segment_ids, act);
  const std::size_t h = static_cast<std::size_t>(params_.config.hidden_size);
  const auto pooled = bert::pool(params_, std::span<const float>(act.hidden.data(), h));
  return bert::nsp_logits(params_, pooled);
}

double BertEncoder::nsp_probability(std::string_view text_a, std::string_view text_b) const {
  const double p = bert::is_next_probability(pair_logits(build_pair_input(text_a, text_b)));
  if (!std::isfinite(p)) throw BackendError("NSP head produced a non-finite probability");
  return p;
}

Embedding BertEncoder::embed(std::string_view text) const {
  const auto single = encode_single(text);
  bert::Activations act;
  bert::forward_encoder(params_, single.token_ids, single.segment_ids, act);
  const std::size_t h = static_cast<std::size_t>(params_.config.hidden_size);
  Embedding e;
  if (pooling_ == Pooling::pooled) {
    const auto pooled = bert::pool(params_, std::span<const float>(act.hidden.data(), h));
    e.values.assign(pooled.begin(), pooled.end());
  } else {
    e.values.assign(h, 0.0);
    for (std::size_t t = 0; t < act.length; ++t)
      for (std::size_t i = 0; i < h; ++i) e.values[i] += act.hidden[t * h + i];
    for (auto& v : e.values) v /= static_cast<double>(act.length);
  }
  for (double v : e.values)
    if (!std::isfinite(v)) throw BackendError("encoder produced a non-finite embedding");
  return e;
}

std::shared_ptr<const BertEncoder> BertEncoder::with_params(bert::Params params) const {
  return std::make_shared<const BertEncoder>(std::move(params), tokenizer_, caps_.max_sequence_length, pooling_);
}

void BertEncoder::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw BackendError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  write_file_atomic(dir / "config.json", params_.config.to_json_text());
  std::string vocab;
  for (const auto& t : tokenizer_.vocab()) vocab += t + "\n";
  write_file_atomic(dir / "vocab.txt", vocab);
  const nlohmann::json tok = {{"do_lower_case", tokenizer_.lowercase()}, {"tokenizer_class", "BertTokenizer"}};
  write_file_atomic(dir / "tokenizer_config.json", tok.dump(2) + "\n");
  write_safetensors(dir / "model.safetensors", params_.to_tensors(), {{"format", "pt"}});
}

}  // namespace mensp
