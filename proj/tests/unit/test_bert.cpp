#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "mensp/encoder/bert_backend.hpp"
#include "mensp/errors.hpp"

using namespace mensp;
using nlohmann::json;

namespace {

const json& expected() {
  static const json doc = json::parse(read_text_file(testing::tiny_bert_dir() / "expected.json"));
  return doc;
}

std::shared_ptr<const BertEncoder> tiny(Pooling pooling = Pooling::pooled, int max_len = 512) {
  return BertEncoder::load(testing::tiny_bert_dir(), max_len, pooling);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("bert tokenizer reproduces reference ids") {
  const auto enc = tiny();
  for (const auto& t : expected()["tokenize"]) {
    const auto text = t["text"].get<std::string>();
    CAPTURE(text);
    const auto ids = enc->tokenizer().encode(text);
    CHECK(std::vector<std::int32_t>(ids.begin(), ids.end()) == t["ids"].get<std::vector<std::int32_t>>());
  }
}

TEST_CASE("bert pair encoding and truncation match the reference tokenizer") {
  for (const auto& p : expected()["pairs"]) {
    const auto enc = tiny(Pooling::pooled, p["max_length"].get<int>());
    const auto pair = enc->build_pair_input(p["a"].get<std::string>(), p["b"].get<std::string>());
    CAPTURE(p["max_length"].get<int>());
    CHECK(pair.token_ids == p["input_ids"].get<std::vector<std::int32_t>>());
    std::vector<int> segs(pair.segment_ids.begin(), pair.segment_ids.end());
    CHECK(segs == p["token_type_ids"].get<std::vector<int>>());
    CHECK(pair.token_ids.size() <= static_cast<std::size_t>(enc->capabilities().max_sequence_length));
    CHECK(pair.trailing_separator);
  }
}

TEST_CASE("bert nsp probability matches the reference model") {
  const auto enc = tiny();
  for (const auto& n : expected()["nsp"]) {
    const auto a = n["a"].get<std::string>();
    const auto b = n["b"].get<std::string>();
    const auto logits = enc->pair_logits(enc->build_pair_input(a, b));
    const auto ref = n["logits"].get<std::vector<double>>();
    CHECK(logits[0] == doctest::Approx(ref[0]).epsilon(1e-4));
    CHECK(logits[1] == doctest::Approx(ref[1]).epsilon(1e-4));
    CHECK(std::abs(enc->nsp_probability(a, b) - n["prob_is_next"].get<double>()) < 1e-5);
  }
}

TEST_CASE("bert pooled and mean embeddings match the reference model") {
  const auto pooled = tiny(Pooling::pooled);
  const auto mean = tiny(Pooling::mean);
  for (const auto& e : expected()["embed"]) {
    const auto text = e["text"].get<std::string>();
    CAPTURE(text);
    CHECK(max_abs_diff(pooled->embed(text).values, e["pooled"].get<std::vector<double>>()) < 1e-5);
    CHECK(max_abs_diff(mean->embed(text).values, e["mean"].get<std::vector<double>>()) < 1e-4);
  }
  CHECK(pooled->embed("").dim() == 32);
}

TEST_CASE("bert backward pass matches reference gradients") {
  const auto enc = tiny();
  const auto& g = expected()["grad"];
  const auto pair = enc->build_pair_input(g["a"].get<std::string>(), g["b"].get<std::string>());
  const auto& p = enc->params();
  bert::Activations act;
  bert::forward_encoder(p, pair.token_ids, pair.segment_ids, act);
  const std::size_t h = 32;
  std::span<const float> cls(act.hidden.data(), h);
  const auto pooled = bert::pool(p, cls);
  const auto logits = bert::nsp_logits(p, pooled);
  const double p0 = bert::is_next_probability(logits);
  CHECK(-std::log(p0) == doctest::Approx(g["loss"].get<double>()).epsilon(1e-5));

  auto grads = bert::Params::zeros_like(p);
  std::vector<float> d_cls(h);
  bert::backward_head(p, cls, pooled, {static_cast<float>(p0 - 1.0), static_cast<float>(1.0 - p0)}, grads, d_cls);
  std::vector<float> d_hidden(act.length * h, 0.0f);
  std::copy(d_cls.begin(), d_cls.end(), d_hidden.begin());
  bert::backward_encoder(p, act, d_hidden, grads);

  const auto named = grads.to_tensors();
  for (const auto& [name, ref_json] : g["tensors"].items()) {
    if (name == "word_rows") continue;
    CAPTURE(name);
    const auto ref = ref_json.get<std::vector<double>>();
    const auto& mine = named.at(name).data;
    const std::vector<double> got(mine.begin(), mine.end());
    CHECK(max_abs_diff(got, ref) <= 1e-5 + 1e-3 * max_abs(ref));
  }
  const auto& word = named.at("bert.embeddings.word_embeddings.weight").data;
  for (const auto& [row, ref_json] : g["tensors"]["word_rows"].items()) {
    const auto ref = ref_json.get<std::vector<double>>();
    const std::size_t r = std::stoul(row);
    const std::vector<double> got(word.begin() + static_cast<std::ptrdiff_t>(r * h),
                                  word.begin() + static_cast<std::ptrdiff_t>((r + 1) * h));
    CAPTURE(row);
    CHECK(max_abs_diff(got, ref) <= 1e-5 + 1e-3 * max_abs(ref));
  }
}

TEST_CASE("bert checkpoint save and reload is lossless") {
  const auto enc = tiny();
  const auto dir = testing::scratch_dir("bert_roundtrip");
  enc->save(dir);
  const auto back = BertEncoder::load(dir, 512, Pooling::pooled);
  CHECK(back->capabilities().identifier == enc->capabilities().identifier);
  const std::string a = "gas spreads out", b = "the particles move";
  CHECK(back->nsp_probability(a, b) == enc->nsp_probability(a, b));
}

TEST_CASE("bert weights load under legacy tensor names") {
  auto tensors = read_safetensors(testing::tiny_bert_dir() / "model.safetensors");
  TensorMap renamed;
  for (auto& [name, t] : tensors) {
    std::string n = name;
    if (n.rfind("bert.", 0) == 0) n = n.substr(5);
    for (auto [from, to] : {std::pair{"LayerNorm.weight", "LayerNorm.gamma"}, std::pair{"LayerNorm.bias", "LayerNorm.beta"}}) {
      const auto pos = n.find(from);
      if (pos != std::string::npos) n.replace(pos, std::string(from).size(), to);
    }
    renamed.emplace(n, t);
  }
  const auto config = bert::Config::from_json_text(read_text_file(testing::tiny_bert_dir() / "config.json"));
  const auto a = bert::Params::from_tensors(tensors, config);
  const auto b = bert::Params::from_tensors(renamed, config);
  CHECK(a.to_tensors().at("bert.encoder.layer.1.output.LayerNorm.weight").data ==
        b.to_tensors().at("bert.encoder.layer.1.output.LayerNorm.weight").data);

  renamed.erase("cls.seq_relationship.weight");
  CHECK_THROWS_WITH_AS(bert::Params::from_tensors(renamed, config), doctest::Contains("next-sentence"), BackendError);
}

TEST_CASE("bert config rejects inconsistent shapes") {
  CHECK_THROWS_AS(bert::Config::from_json_text(R"({"vocab_size": 10, "hidden_size": 30, "num_hidden_layers": 1,
      "num_attention_heads": 4, "intermediate_size": 8, "max_position_embeddings": 16})"), BackendError);
  CHECK_THROWS_AS(bert::Config::from_json_text("{}"), BackendError);
  CHECK_THROWS_AS(BertEncoder::load(testing::source_dir() / "no_such_checkpoint", 128, Pooling::pooled), BackendError);
}

TEST_CASE("bert random parameters give a working encoder") {
  bert::Config c;
  c.vocab_size = 233;
  c.hidden_size = 16;
  c.num_layers = 1;
  c.num_heads = 2;
  c.intermediate_size = 32;
  c.max_position_embeddings = 64;
  const auto base = tiny();
  const auto enc = std::make_shared<BertEncoder>(bert::Params::random(c, 7), base->tokenizer(), 512, Pooling::pooled);
  CHECK(enc->capabilities().max_sequence_length == 64);
  CHECK(enc->capabilities().embedding_dim == 16);
  const double p = enc->nsp_probability("gas moves", "particles spread");
  CHECK(p >= 0.0);
  CHECK(p <= 1.0);
  CHECK(enc->params().parameter_count() == bert::Params::random(c, 8).parameter_count());
}
