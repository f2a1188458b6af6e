#pragma once

// Contract over a pre-trained encoder: next-sentence-prediction probability
// for a text pair and a fixed-width embedding for a single text.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mensp {

enum class BackendKind { pretrained_checkpoint, mock };
enum class Pooling { pooled, mean };
enum class Device { cpu, accelerator };

/// Rule descriptors for the deterministic test backend.
///
/// nsp_rule:   "jaccard"         token-set Jaccard overlap of the two segments
///             "constant:<p>"    always p
/// embed_rule: "letter-count"    counts of the letters a, b, c, ... (first d letters)
///             "token-hash"      bag of tokens hashed (FNV-1a) into d buckets
/// fail_on:    texts containing this token raise BackendError (fault injection)
struct MockSpec {
  std::string nsp_rule = "jaccard";
  std::string embed_rule = "token-hash";
  std::optional<std::string> fail_on;
};

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  int max_sequence_length = 512;
  /// Mock only; a checkpoint fixes its own width.
  int embedding_dim = 64;
  Pooling pooling = Pooling::pooled;
  Device device = Device::cpu;
  std::optional<std::filesystem::path> checkpoint;
  /// Mock only; absent means the default rules.
  std::optional<MockSpec> mock;

  /// Throws ConfigError on a violated invariant.
  void validate() const;
};

/// [marker; first segment; separator; second segment (; separator)]
struct EncodedPair {
  std::vector<std::int32_t> token_ids;
  /// 0 for the marker, first segment and first separator; 1 afterwards.
  std::vector<std::int8_t> segment_ids;
  std::size_t first_length = 0;
  std::size_t second_length = 0;
  bool trailing_separator = false;
};

struct Embedding {
  std::vector<double> values;
  std::size_t dim() const { return values.size(); }
};

struct Capabilities {
  BackendKind kind = BackendKind::mock;
  bool concurrent_safe = true;
  bool trainable = false;
  int max_sequence_length = 0;
  int embedding_dim = 0;
  /// Stable description used in run digests.
  std::string identifier;
};

class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual const Capabilities& capabilities() const = 0;

  /// Pair input truncated longest-first to fit max_sequence_length.
  virtual EncodedPair build_pair_input(std::string_view response, std::string_view exemplar) const = 0;

  /// P(text_b continues text_a), in [0, 1].
  virtual double nsp_probability(std::string_view text_a, std::string_view text_b) const = 0;

  virtual Embedding embed(std::string_view text) const = 0;
};

/// Longest-first pairwise truncation on segment lengths: while the sum
/// exceeds `budget`, drop one tail token from the longer segment. On ties the
/// first segment loses the token, which reproduces the reference BERT pair
/// tokenizer. Returns the kept lengths.
std::pair<std::size_t, std::size_t> truncate_longest_first(std::size_t first, std::size_t second,
                                                           std::size_t budget);

std::shared_ptr<const Encoder> make_encoder(const BackendConfig& config);

}  // namespace mensp
