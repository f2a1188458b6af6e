#include "mensp/encoder/mock.hpp"

#include <cctype>
#include <charconv>
#include <set>

#include "mensp/errors.hpp"
#include "mensp/util.hpp"

namespace mensp {

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end());
  std::set<std::string> sb(b.begin(), b.end());
  std::size_t common = 0;
  for (const auto& t : sa) common += sb.count(t);
  const std::size_t uni = sa.size() + sb.size() - common;
  return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

namespace {

std::vector<std::string> mock_tokens(std::string_view text) { return split_whitespace(to_lower_ascii(text)); }

}  // namespace

MockEncoder::MockEncoder(const MockSpec& spec, int embedding_dim, int max_sequence_length)
    : spec_(spec) {
  if (spec.nsp_rule == "jaccard") {
    nsp_ = [](const auto& a, const auto& b) { return jaccard(a, b); };
  } else if (spec.nsp_rule.rfind("constant:", 0) == 0) {
    const std::string value = spec.nsp_rule.substr(9);
    double p = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), p);
    if (ec != std::errc{} || ptr != value.data() + value.size() || !(p >= 0.0 && p <= 1.0))
      throw ConfigError("mock nsp_rule constant must be a probability: '" + spec.nsp_rule + "'");
    nsp_ = [p](const auto&, const auto&) { return p; };
  } else {
    throw ConfigError("unknown mock nsp_rule '" + spec.nsp_rule + "'");
  }
  if (spec.embed_rule != "letter-count" && spec.embed_rule != "token-hash")
    throw ConfigError("unknown mock embed_rule '" + spec.embed_rule + "'");
  if (spec.embed_rule == "letter-count" && embedding_dim > 26)
    throw ConfigError("letter-count embeddings support at most 26 dimensions");

  caps_.kind = BackendKind::mock;
  caps_.concurrent_safe = true;
  caps_.trainable = false;
  caps_.max_sequence_length = max_sequence_length;
  caps_.embedding_dim = embedding_dim;
  caps_.identifier = "mock:nsp=" + spec.nsp_rule + ",embed=" + spec.embed_rule +
                     ",d=" + std::to_string(embedding_dim) + ",L=" + std::to_string(max_sequence_length);
}

std::int32_t MockEncoder::token_id(std::string_view token) {
  return 3 + static_cast<std::int32_t>(fnv1a64(token) % 0x7ffffff0ULL);
}

void MockEncoder::maybe_fail(std::string_view text) const {
  if (!spec_.fail_on) return;
  for (const auto& t : mock_tokens(text))
    if (t == *spec_.fail_on) throw BackendError("mock backend failure injected on token '" + t + "'");
}

EncodedPair MockEncoder::build_pair_input(std::string_view response, std::string_view exemplar) const {
  const auto a = mock_tokens(response);
  const auto b = mock_tokens(exemplar);
  const auto [na, nb] = truncate_longest_first(a.size(), b.size(),
                                               static_cast<std::size_t>(caps_.max_sequence_length) - 2);
  EncodedPair pair;
  pair.first_length = na;
  pair.second_length = nb;
  pair.token_ids.reserve(na + nb + 2);
  pair.token_ids.push_back(kMarkerId);
  for (std::size_t i = 0; i < na; ++i) pair.token_ids.push_back(token_id(a[i]));
  pair.token_ids.push_back(kSeparatorId);
  for (std::size_t i = 0; i < nb; ++i) pair.token_ids.push_back(token_id(b[i]));
  pair.segment_ids.assign(na + 2, 0);
  pair.segment_ids.resize(na + nb + 2, 1);
  return pair;
}

double MockEncoder::nsp_probability(std::string_view text_a, std::string_view text_b) const {
  maybe_fail(text_a);
  maybe_fail(text_b);
  auto a = mock_tokens(text_a);
  auto b = mock_tokens(text_b);
  const auto [na, nb] = truncate_longest_first(a.size(), b.size(),
                                               static_cast<std::size_t>(caps_.max_sequence_length) - 2);
  a.resize(na);
  b.resize(nb);
  return nsp_(a, b);
}

Embedding MockEncoder::embed(std::string_view text) const {
  maybe_fail(text);
  const auto d = static_cast<std::size_t>(caps_.embedding_dim);
  Embedding e;
  e.values.assign(d, 0.0);
  if (spec_.embed_rule == "letter-count") {
    for (unsigned char c : text) {
      const int lower = std::tolower(c);
      if (lower >= 'a' && static_cast<std::size_t>(lower - 'a') < d && lower <= 'z')
        e.values[static_cast<std::size_t>(lower - 'a')] += 1.0;
    }
  } else {
    auto tokens = mock_tokens(text);
    if (tokens.size() > static_cast<std::size_t>(caps_.max_sequence_length) - 2)
      tokens.resize(static_cast<std::size_t>(caps_.max_sequence_length) - 2);
    for (const auto& t : tokens) e.values[fnv1a64(t) % d] += 1.0;
  }
  return e;
}

}  // namespace mensp
