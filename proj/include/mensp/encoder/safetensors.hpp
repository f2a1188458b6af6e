#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mensp {

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::size_t numel() const;
};

using TensorMap = std::map<std::string, Tensor>;

/// Reads a .safetensors file. F32, F16 and BF16 payloads are widened to float;
/// other dtypes are rejected with BackendError.
TensorMap read_safetensors(const std::filesystem::path& path);

/// Writes F32 tensors (keys sorted, offsets contiguous) with optional string metadata.
void write_safetensors(const std::filesystem::path& path, const TensorMap& tensors,
                       const std::map<std::string, std::string>& metadata = {});

}  // namespace mensp
