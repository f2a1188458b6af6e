#pragma once

#include <functional>

#include "mensp/encoder/backend.hpp"

namespace mensp {

/// Deterministic rule-driven encoder used as a test oracle. Tokenization is
/// lowercased whitespace splitting; pairs carry no trailing separator.
class MockEncoder final : public Encoder {
 public:
  MockEncoder(const MockSpec& spec, int embedding_dim, int max_sequence_length);

  const Capabilities& capabilities() const override { return caps_; }
  EncodedPair build_pair_input(std::string_view response, std::string_view exemplar) const override;
  double nsp_probability(std::string_view text_a, std::string_view text_b) const override;
  Embedding embed(std::string_view text) const override;

  static constexpr std::int32_t kMarkerId = 1;
  static constexpr std::int32_t kSeparatorId = 2;

  /// The mock's token id for a lowercased word.
  static std::int32_t token_id(std::string_view token);

 private:
  void maybe_fail(std::string_view text) const;

  MockSpec spec_;
  Capabilities caps_;
  std::function<double(const std::vector<std::string>&, const std::vector<std::string>&)> nsp_;
};

/// Token-set Jaccard overlap; two empty sets give 0.
double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

}  // namespace mensp
