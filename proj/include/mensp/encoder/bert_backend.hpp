#pragma once

// Encoder backed by a BERT checkpoint directory in the HF layout:
// config.json, vocab.txt, model.safetensors and optionally tokenizer_config.json.
//
// NSP orientation: logit 0 is "is next", so P(same context) = softmax(logits)[0].
// Pairs follow the checkpoint's tokenizer convention [CLS] a [SEP] b [SEP],
// with token types 0 up to and including the first [SEP] and 1 afterwards.

#include <array>
#include <filesystem>
#include <memory>

#include "mensp/encoder/backend.hpp"
#include "mensp/encoder/bert_model.hpp"
#include "mensp/encoder/wordpiece.hpp"

namespace mensp {

class BertEncoder final : public Encoder {
 public:
  BertEncoder(bert::Params params, WordPieceTokenizer tokenizer, int max_sequence_length, Pooling pooling);

  static std::shared_ptr<const BertEncoder> load(const std::filesystem::path& dir, int max_sequence_length,
                                                 Pooling pooling);

  const Capabilities& capabilities() const override { return caps_; }
  EncodedPair build_pair_input(std::string_view response, std::string_view exemplar) const override;
  double nsp_probability(std::string_view text_a, std::string_view text_b) const override;
  Embedding embed(std::string_view text) const override;

  /// Raw two-class NSP logits for an encoded pair.
  std::array<float, 2> pair_logits(const EncodedPair& pair) const;

  /// [CLS] text [SEP], truncated to fit.
  EncodedPair encode_single(std::string_view text) const;

  const bert::Params& params() const { return params_; }
  const WordPieceTokenizer& tokenizer() const { return tokenizer_; }
  Pooling pooling() const { return pooling_; }

  /// Same tokenizer and settings over different weights.
  std::shared_ptr<const BertEncoder> with_params(bert::Params params) const;

  /// Writes a checkpoint directory loadable by `load`.
  void save(const std::filesystem::path& dir) const;

 private:
  bert::Params params_;
  WordPieceTokenizer tokenizer_;
  Pooling pooling_;
  Capabilities caps_;
};

}  // namespace mensp
