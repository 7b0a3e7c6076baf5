#include "cams/dtype.hpp"

#include <stdexcept>

namespace cams {

std::size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::F32:
      return 4;
    case Dtype::F64:
      return 8;
    case Dtype::U8:
      return 1;
  }
  throw std::invalid_argument("dtype_size: unknown dtype code " +
                              std::to_string(static_cast<int>(d)));
}

std::string_view dtype_name(Dtype d) {
  switch (d) {
    case Dtype::F32:
      return "f32";
    case Dtype::F64:
      return "f64";
    case Dtype::U8:
      return "u8";
  }
  throw std::invalid_argument("dtype_name: unknown dtype code " +
                              std::to_string(static_cast<int>(d)));
}

}  // namespace cams
