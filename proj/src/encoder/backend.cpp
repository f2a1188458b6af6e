#include "mensp/encoder/backend.hpp"

#include "mensp/encoder/bert_backend.hpp"
#include "mensp/encoder/mock.hpp"
#include "mensp/errors.hpp"

namespace mensp {

void BackendConfig::validate() const {
  if (max_sequence_length < 8)
    throw ConfigError("backend.max_sequence_length must be at least 8, got " + std::to_string(max_sequence_length));
  if (embedding_dim < 1) throw ConfigError("backend.embedding_dim must be positive");
  if (kind == BackendKind::mock) {
    if (checkpoint) throw ConfigError("mock backend must not name a checkpoint path");
  } else {
    if (!checkpoint) throw ConfigError("pretrained backend requires backend.path");
    if (mock) throw ConfigError("pretrained backend must not carry a mock spec");
  }
}

std::pair<std::size_t, std::size_t> truncate_longest_first(std::size_t first, std::size_t second,
                                                           std::size_t budget) {
  while (first + second > budget) {
    if (first >= second)
      --first;
    else
      --second;
  }
  return {first, second};
}

std::shared_ptr<const Encoder> make_encoder(const BackendConfig& config) {
  config.validate();
  if (config.device == Device::accelerator)
    throw BackendError("no accelerator runtime is available in this build; use device \"cpu\"");
  if (config.kind == BackendKind::mock)
    return std::make_shared<const MockEncoder>(config.mock.value_or(MockSpec{}), config.embedding_dim, config.max_sequence_length);
  return BertEncoder::load(*config.checkpoint, config.max_sequence_length, config.pooling);
}

}  // namespace mensp
