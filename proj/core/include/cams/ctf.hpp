#pragma once

#include <string>

#include "cams/dtype.hpp"
#include "cams/tensor.hpp"

namespace cams {

// CTF: a minimal portable tensor container. Layout, all little-endian:
//   magic "CAMS" | version u8 = 1 | dtype u8 | ndim u8 | ndim x u32 dims |
//   row-major payload. The dtype codes match the Dtype enum values.
struct CtfInfo {
  Dtype dtype = Dtype::F32;
  Shape shape;
};

template <typename T>
void ctf_write(const std::string& path, const Tensor<T>& tensor);

// Fails when the file's dtype differs from T.
template <typename T>
Tensor<T> ctf_read(const std::string& path);

// Header only; validates magic, version, dtype and payload length.
CtfInfo ctf_inspect(const std::string& path);

}  // namespace cams
