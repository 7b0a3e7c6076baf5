#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace cams {

// On-disk and in-memory scalar kinds. The numeric values double as the
// dtype codes of the tensor file container.
enum class Dtype : std::uint8_t { F32 = 1, F64 = 2, U8 = 3 };

template <typename T>
struct DtypeOf;
template <>
struct DtypeOf<float> {
  static constexpr Dtype value = Dtype::F32;
};
template <>
struct DtypeOf<double> {
  static constexpr Dtype value = Dtype::F64;
};
template <>
struct DtypeOf<std::uint8_t> {
  static constexpr Dtype value = Dtype::U8;
};

template <typename T>
inline constexpr Dtype dtype_of = DtypeOf<T>::value;

std::size_t dtype_size(Dtype d);
std::string_view dtype_name(Dtype d);

}  // namespace cams
