#include "mensp/encoder/wordpiece.hpp"

#include <fstream>

#include "mensp/errors.hpp"

namespace mensp {
namespace {

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    char32_t cp;
    std::size_t len;
    if (c < 0x80) {
      cp = c;
      len = 1;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1f;
      len = 2;
    } else if ((c >> 4) == 0xe) {
      cp = c & 0x0f;
      len = 3;
    } else if ((c >> 3) == 0x1e) {
      cp = c & 0x07;
      len = 4;
    } else {
      out.push_back(0xfffd);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(0xfffd);
      break;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3f);
    }
    if (!ok) {
      out.push_back(0xfffd);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

std::string encode_utf8(const std::u32string& s) {
  std::string out;
  for (char32_t cp : s) append_utf8(out, cp);
  return out;
}

bool is_whitespace(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0xa0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200a) || cp == 0x202f || cp == 0x205f || cp == 0x3000;
}

bool is_control(char32_t cp) {
  if (cp == '\t' || cp == '\n' || cp == '\r') return false;
  return cp < 0x20 || (cp >= 0x7f && cp <= 0x9f) || cp == 0xad || (cp >= 0x200b && cp <= 0x200f) ||
         (cp >= 0x202a && cp <= 0x202e) || cp == 0xfeff;
}

bool is_punctuation(char32_t cp) {
  if ((cp >= 33 && cp <= 47) || (cp >= 58 && cp <= 64) || (cp >= 91 && cp <= 96) ||
      (cp >= 123 && cp <= 126))
    return true;
  switch (cp) {
    case 0xa1: case 0xa7: case 0xab: case 0xb6: case 0xb7: case 0xbb: case 0xbf:
      return true;
    default:
      break;
  }
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205e) ||
         (cp >= 0x3001 && cp <= 0x3003) || (cp >= 0x3008 && cp <= 0x3011) ||
         (cp >= 0x3014 && cp <= 0x301f) || (cp >= 0xff01 && cp <= 0xff0f);
}

bool is_cjk(char32_t cp) {
  return (cp >= 0x4e00 && cp <= 0x9fff) || (cp >= 0x3400 && cp <= 0x4dbf) ||
         (cp >= 0x20000 && cp <= 0x2a6df) || (cp >= 0x2a700 && cp <= 0x2b73f) ||
         (cp >= 0x2b740 && cp <= 0x2b81f) || (cp >= 0x2b820 && cp <= 0x2ceaf) ||
         (cp >= 0xf900 && cp <= 0xfaff) || (cp >= 0x2f800 && cp <= 0x2fa1f);
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0x80) return cp;
  if (cp >= 0xc0 && cp <= 0xde && cp != 0xd7) return cp + 32;
  if (cp == 0x130) return 'i';
  if (cp >= 0x100 && cp <= 0x137 && cp % 2 == 0) return cp + 1;
  if (cp >= 0x139 && cp <= 0x148 && cp % 2 == 1) return cp + 1;
  if (cp >= 0x14a && cp <= 0x177 && cp % 2 == 0) return cp + 1;
  if (cp == 0x178) return 0xff;
  if (cp >= 0x179 && cp <= 0x17e && cp % 2 == 1) return cp + 1;
  if (cp >= 0x391 && cp <= 0x3a9 && cp != 0x3a2) return cp + 32;
  if (cp >= 0x410 && cp <= 0x42f) return cp + 32;
  if (cp >= 0x400 && cp <= 0x40f) return cp + 80;
  return cp;
}

// Canonical-decomposition base letter for lowercase Latin-1 / Latin Extended-A
// letters that carry a diacritic; 0 when the letter has no decomposition.
char32_t accent_base(char32_t cp) {
  static constexpr char32_t latin1[64] = {
      // U+00C0..U+00FF (uppercase half is unreachable after lowercasing)
      'a', 'a', 'a', 'a', 'a', 'a', 0, 'c', 'e', 'e', 'e', 'e', 'i', 'i', 'i', 'i',
      0,   'n', 'o', 'o', 'o', 'o', 'o', 0, 0, 'u', 'u', 'u', 'u', 'y', 0, 0,
      'a', 'a', 'a', 'a', 'a', 'a', 0, 'c', 'e', 'e', 'e', 'e', 'i', 'i', 'i', 'i',
      0,   'n', 'o', 'o', 'o', 'o', 'o', 0, 0, 'u', 'u', 'u', 'u', 'y', 0, 'y'};
  static constexpr char32_t ext_a[128] = {
      // U+0100..U+017F
      'a', 'a', 'a', 'a', 'a', 'a', 'c', 'c', 'c', 'c', 'c', 'c', 'c', 'c', 'd', 'd',
      0,   0,   'e', 'e', 'e', 'e', 'e', 'e', 'e', 'e', 'e', 'e', 'g', 'g', 'g', 'g',
      'g', 'g', 'g', 'g', 'h', 'h', 0,   0,   'i', 'i', 'i', 'i', 'i', 'i', 'i', 'i',
      'i', 0,   0,   0,   'j', 'j', 'k', 'k', 0,   'l', 'l', 'l', 'l', 'l', 'l', 0,
      0,   0,   0,   'n', 'n', 'n', 'n', 'n', 'n', 0,   0,   0,   'o', 'o', 'o', 'o',
      'o', 'o', 0,   0,   'r', 'r', 'r', 'r', 'r', 'r', 's', 's', 's', 's', 's', 's',
      's', 's', 't', 't', 't', 't', 0,   0,   'u', 'u', 'u', 'u', 'u', 'u', 'u', 'u',
      'u', 'u', 'u', 'u', 'w', 'w', 'y', 'y', 'y', 'z', 'z', 'z', 'z', 'z', 'z', 0};
  if (cp >= 0xc0 && cp <= 0xff) return latin1[cp - 0xc0];
  if (cp >= 0x100 && cp <= 0x17f) return ext_a[cp - 0x100];
  return 0;
}

bool is_combining_mark(char32_t cp) { return cp >= 0x300 && cp <= 0x36f; }

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase)
    : vocab_(std::move(vocab)), lowercase_(lowercase) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], static_cast<std::int32_t>(i));
  auto find = [&](const char* token) {
    auto it = ids_.find(token);
    if (it == ids_.end()) throw BackendError(std::string("vocabulary lacks special token ") + token);
    return it->second;
  };
  cls_ = find("[CLS]");
  sep_ = find("[SEP]");
  unk_ = find("[UNK]");
}

WordPieceTokenizer WordPieceTokenizer::from_vocab_file(const std::filesystem::path& path, bool lowercase) {
  std::ifstream in(path);
  if (!in) throw BackendError("cannot open vocabulary: " + path.string());
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  // vocab.txt conventionally ends with a newline; a final empty entry is not a token.
  while (!vocab.empty() && vocab.back().empty()) vocab.pop_back();
  return WordPieceTokenizer(std::move(vocab), lowercase);
}

std::vector<std::string> WordPieceTokenizer::basic_tokenize(std::string_view text) const {
  const std::u32string cps = decode_utf8(text);
  std::u32string cleaned;
  cleaned.reserve(cps.size());
  for (char32_t cp : cps) {
    if (cp == 0 || cp == 0xfffd || is_control(cp)) continue;
    if (is_whitespace(cp)) {
      cleaned.push_back(' ');
    } else if (is_cjk(cp)) {
      cleaned.push_back(' ');
      cleaned.push_back(cp);
      cleaned.push_back(' ');
    } else {
      cleaned.push_back(cp);
    }
  }

  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && cleaned[i] == ' ') ++i;
    std::size_t start = i;
    while (i < cleaned.size() && cleaned[i] != ' ') ++i;
    if (i == start) continue;
    std::u32string word = cleaned.substr(start, i - start);
    if (lowercase_) {
      std::u32string folded;
      for (char32_t cp : word) {
        cp = to_lower(cp);
        if (is_combining_mark(cp)) continue;
        if (char32_t base = accent_base(cp)) cp = base;
        folded.push_back(cp);
      }
      word = std::move(folded);
    }
    std::u32string current;
    for (char32_t cp : word) {
      if (is_punctuation(cp)) {
        if (!current.empty()) out.push_back(encode_utf8(current));
        current.clear();
        out.push_back(encode_utf8(std::u32string(1, cp)));
      } else {
        current.push_back(cp);
      }
    }
    if (!current.empty()) out.push_back(encode_utf8(current));
  }
  return out;
}

void WordPieceTokenizer::wordpiece(const std::string& word, std::vector<std::string>& out) const {
  constexpr std::size_t kMaxCharsPerWord = 100;
  const std::u32string cps = decode_utf8(word);
  if (cps.size() > kMaxCharsPerWord) {
    out.push_back("[UNK]");
    return;
  }
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < cps.size()) {
    std::size_t end = cps.size();
    std::string match;
    while (start < end) {
      std::string candidate = encode_utf8(cps.substr(start, end - start));
      if (start > 0) candidate = "##" + candidate;
      if (ids_.count(candidate)) {
        match = std::move(candidate);
        break;
      }
      --end;
    }
    if (match.empty()) {
      out.push_back("[UNK]");
      return;
    }
    pieces.push_back(std::move(match));
    start = end;
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

std::vector<std::string> WordPieceTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  for (const auto& word : basic_tokenize(text)) wordpiece(word, out);
  return out;
}

std::vector<std::int32_t> WordPieceTokenizer::encode(std::string_view text) const {
  std::vector<std::int32_t> ids;
  for (const auto& piece : tokenize(text)) {
    auto it = ids_.find(piece);
    ids.push_back(it == ids_.end() ? unk_ : it->second);
  }
  return ids;
}

}  // namespace mensp
