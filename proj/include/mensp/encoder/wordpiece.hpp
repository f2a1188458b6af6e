#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mensp {

/// BERT-style tokenizer driven by a checkpoint's vocab.txt.
///
/// Basic pass: drop control characters, map whitespace to spaces, isolate CJK
/// ideographs, split on whitespace, optionally lowercase and strip accents,
/// then split off punctuation. Each word is then greedily matched
/// longest-prefix-first against the vocabulary with "##" continuations; a
/// word with no full cover becomes [UNK].
///
/// Case folding and accent stripping cover ASCII, Latin-1, Latin Extended-A,
/// basic Greek and basic Cyrillic, plus removal of combining marks
/// (U+0300..U+036F). Other scripts pass through unchanged.
class WordPieceTokenizer {
 public:
  WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase);

  static WordPieceTokenizer from_vocab_file(const std::filesystem::path& path, bool lowercase);

  std::vector<std::string> tokenize(std::string_view text) const;
  /// Token ids without special tokens.
  std::vector<std::int32_t> encode(std::string_view text) const;

  std::int32_t cls_id() const { return cls_; }
  std::int32_t sep_id() const { return sep_; }
  std::int32_t unk_id() const { return unk_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  const std::vector<std::string>& vocab() const { return vocab_; }
  bool lowercase() const { return lowercase_; }

  /// Basic pre-tokenization (exposed for tests).
  std::vector<std::string> basic_tokenize(std::string_view text) const;

 private:
  void wordpiece(const std::string& word, std::vector<std::string>& out) const;

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::int32_t> ids_;
  bool lowercase_;
  std::int32_t cls_ = -1, sep_ = -1, unk_ = -1;
};

}  // namespace mensp
