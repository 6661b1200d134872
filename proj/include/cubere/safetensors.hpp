#pragma once

// Minimal reader for the safetensors container: an 8-byte little-endian
// header length, a JSON header mapping tensor names to dtype/shape/offsets,
// then raw little-endian tensor bytes.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "cubere/error.hpp"
#include "cubere/tensor.hpp"

namespace cubere {

struct SafeTensor {
  std::string dtype;
  std::vector<std::int64_t> shape;
  std::vector<char> bytes;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto s : shape) n *= s;
    return n;
  }
};

namespace detail {

inline float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = (h & 0x8000u) << 16;
  std::uint32_t exp = (h >> 10) & 0x1Fu;
  std::uint32_t mant = h & 0x3FFu;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      exp = 127 - 15 + 1;
      while (!(mant & 0x400u)) {
        mant <<= 1;
        --exp;
      }
      mant &= 0x3FFu;
      bits = sign | (exp << 23) | (mant << 13);
    }
  } else if (exp == 0x1F) {
    bits = sign | 0x7F800000u | (mant << 13);
  } else {
    bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

inline float bf16_to_float(std::uint16_t b) {
  const std::uint32_t bits = std::uint32_t(b) << 16;
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace detail

inline std::map<std::string, SafeTensor> read_safetensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  unsigned char len_bytes[8];
  if (!in.read(reinterpret_cast<char*>(len_bytes), 8)) throw ParseError(path.string() + ": truncated header");
  std::uint64_t header_len = 0;
  for (int b = 7; b >= 0; --b) header_len = (header_len << 8) | len_bytes[b];
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len)))
    throw ParseError(path.string() + ": truncated header");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(header);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  const auto data_start = static_cast<std::streamoff>(8 + header_len);
  std::map<std::string, SafeTensor> out;
  for (const auto& [name, info] : meta.items()) {
    if (name == "__metadata__") continue;
    SafeTensor t;
    t.dtype = info.at("dtype").get<std::string>();
    t.shape = info.at("shape").get<std::vector<std::int64_t>>();
    const auto offsets = info.at("data_offsets").get<std::vector<std::uint64_t>>();
    t.bytes.resize(offsets.at(1) - offsets.at(0));
    in.seekg(data_start + static_cast<std::streamoff>(offsets[0]));
    if (!in.read(t.bytes.data(), static_cast<std::streamsize>(t.bytes.size())))
      throw ParseError(path.string() + ": tensor " + name + " out of bounds");
    out.emplace(name, std::move(t));
  }
  return out;
}

// Converts a 1-D or 2-D tensor to a matrix; 1-D tensors become one row.
template <typename T>
Mat<T> to_matrix(const SafeTensor& t) {
  if (t.shape.empty() || t.shape.size() > 2) throw SchemaError("expected a 1-D or 2-D tensor");
  const Eigen::Index rows = t.shape.size() == 2 ? t.shape[0] : 1;
  const Eigen::Index cols = t.shape.back();
  Mat<T> m(rows, cols);
  const std::int64_t n = t.numel();
  auto at = [&](std::int64_t i, std::size_t width) { return t.bytes.data() + i * static_cast<std::int64_t>(width); };
  for (std::int64_t i = 0; i < n; ++i) {
    double v;
    if (t.dtype == "F32") {
      float f;
      std::memcpy(&f, at(i, 4), 4);
      v = f;
    } else if (t.dtype == "F64") {
      std::memcpy(&v, at(i, 8), 8);
    } else if (t.dtype == "F16" || t.dtype == "BF16") {
      std::uint16_t h;
      std::memcpy(&h, at(i, 2), 2);
      v = t.dtype == "F16" ? detail::half_to_float(h) : detail::bf16_to_float(h);
    } else {
      throw SchemaError("unsupported tensor dtype " + t.dtype);
    }
    m.data()[i] = static_cast<T>(v);
  }
  return m;
}

}  // namespace cubere
