#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "mensp/encoder/backend.hpp"
#include "mensp/util.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return MENSP_SOURCE_DIR; }
inline std::filesystem::path tiny_bert_dir() { return source_dir() / "tests" / "fixtures" / "tiny_bert"; }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mensp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write(const std::filesystem::path& p, const std::string& text) { mensp::write_file_atomic(p, text); }

}  // namespace testing

namespace testing {

/// Encoder whose behaviour is given by plain functions.
class FunctionEncoder final : public mensp::Encoder {
 public:
  using NspFn = std::function<double(std::string_view, std::string_view)>;
  using EmbedFn = std::function<std::vector<double>(std::string_view)>;

  FunctionEncoder(NspFn nsp, EmbedFn embed, int dim, bool concurrent_safe = true)
      : nsp_(std::move(nsp)), embed_(std::move(embed)) {
    caps_.kind = mensp::BackendKind::mock;
    caps_.concurrent_safe = concurrent_safe;
    caps_.max_sequence_length = 512;
    caps_.embedding_dim = dim;
    caps_.identifier = "function";
  }

  const mensp::Capabilities& capabilities() const override { return caps_; }
  mensp::EncodedPair build_pair_input(std::string_view, std::string_view) const override { return {}; }
  double nsp_probability(std::string_view a, std::string_view b) const override { return nsp_(a, b); }
  mensp::Embedding embed(std::string_view text) const override { return {embed_(text)}; }

 private:
  NspFn nsp_;
  EmbedFn embed_;
  mensp::Capabilities caps_;
};

/// Texts start with "g<level>"; returns that level or -1.
inline int tagged_level(std::string_view text) {
  if (text.size() < 2 || text[0] != 'g') return -1;
  int v = 0;
  std::size_t i = 1;
  for (; i < text.size() && text[i] >= '0' && text[i] <= '9'; ++i) v = v * 10 + (text[i] - '0');
  return i == 1 ? -1 : v;
}

/// NSP peaks where the response tag equals the exemplar tag; level-0 texts
/// embed orthogonally to every other level.
inline std::shared_ptr<const mensp::Encoder> oracle_encoder() {
  return std::make_shared<FunctionEncoder>(
      [](std::string_view a, std::string_view b) { return tagged_level(a) == tagged_level(b) ? 0.9 : 0.1; },
      [](std::string_view t) {
        return tagged_level(t) == 0 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
      },
      2);
}

}  // namespace testing
