#include "mensp/encoder/safetensors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "mensp/errors.hpp"
#include "mensp/util.hpp"

namespace mensp {

static_assert(std::endian::native == std::endian::little, "safetensors payloads are little-endian");

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

namespace {

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000) << 16;
  std::uint32_t exp = (h >> 10) & 0x1f;
  std::uint32_t mant = h & 0x3ff;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      exp = 127 - 15 + 1;
      while ((mant & 0x400) == 0) {
        mant <<= 1;
        --exp;
      }
      mant &= 0x3ff;
      bits = sign | (exp << 23) | (mant << 13);
    }
  } else if (exp == 0x1f) {
    bits = sign | 0x7f800000 | (mant << 13);
  } else {
    bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(bits);
}

}  // namespace

TensorMap read_safetensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackendError("cannot open weights: " + path.string());
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), 8);
  if (!in || header_len > (std::uint64_t{1} << 30))
    throw BackendError("not a safetensors file: " + path.string());
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw BackendError("truncated safetensors header: " + path.string());

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(header);
  } catch (const nlohmann::json::parse_error& e) {
    throw BackendError("bad safetensors header in " + path.string() + ": " + e.what());
  }

  const std::uint64_t data_start = 8 + header_len;
  in.seekg(0, std::ios::end);
  const std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());

  TensorMap out;
  std::vector<char> raw;
  for (const auto& [name, info] : doc.items()) {
    if (name == "__metadata__") continue;
    const std::string dtype = info.at("dtype").get<std::string>();
    Tensor t;
    t.shape = info.at("shape").get<std::vector<std::int64_t>>();
    const auto offsets = info.at("data_offsets").get<std::vector<std::uint64_t>>();
    if (offsets.size() != 2 || offsets[1] < offsets[0] || data_start + offsets[1] > file_size)
      throw BackendError("tensor '" + name + "' has invalid offsets in " + path.string());
    const std::uint64_t nbytes = offsets[1] - offsets[0];
    std::size_t width = dtype == "F32" ? 4 : (dtype == "F16" || dtype == "BF16") ? 2 : 0;
    if (width == 0) throw BackendError("tensor '" + name + "' has unsupported dtype " + dtype);
    const std::size_t n = t.numel();
    if (nbytes != n * width) throw BackendError("tensor '" + name + "' size does not match its shape");
    raw.resize(nbytes);
    in.seekg(static_cast<std::streamoff>(data_start + offsets[0]));
    in.read(raw.data(), static_cast<std::streamsize>(nbytes));
    if (!in) throw BackendError("short read for tensor '" + name + "'");
    t.data.resize(n);
    if (dtype == "F32") {
      std::memcpy(t.data.data(), raw.data(), nbytes);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        std::uint16_t v;
        std::memcpy(&v, raw.data() + 2 * i, 2);
        t.data[i] = dtype == "F16" ? half_to_float(v)
                                   : std::bit_cast<float>(static_cast<std::uint32_t>(v) << 16);
      }
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

void write_safetensors(const std::filesystem::path& path, const TensorMap& tensors,
                       const std::map<std::string, std::string>& metadata) {
  nlohmann::json header = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    if (t.numel() != t.data.size()) throw BackendError("tensor '" + name + "' shape/data mismatch");
    const std::uint64_t nbytes = t.data.size() * 4;
    header[name] = {{"dtype", "F32"}, {"shape", t.shape}, {"data_offsets", {offset, offset + nbytes}}};
    offset += nbytes;
  }
  if (!metadata.empty()) header["__metadata__"] = metadata;
  std::string text = header.dump();
  // Pad so the payload starts 8-byte aligned.
  while ((text.size() + 8) % 8 != 0) text.push_back(' ');

  std::string blob;
  blob.reserve(8 + text.size() + offset);
  const std::uint64_t header_len = text.size();
  blob.append(reinterpret_cast<const char*>(&header_len), 8);
  blob += text;
  for (const auto& [name, t] : tensors)
    blob.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * 4);
  write_file_atomic(path, blob);
}

}  // namespace mensp
