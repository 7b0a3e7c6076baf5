#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cams {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Row-major strides; size-0 shapes yield an empty stride vector.
Shape shape_strides(const Shape& s);

// Resolves a possibly negative axis against ndim, throwing
// std::invalid_argument tagged with `op` when out of range.
int normalize_axis(int axis, int ndim, const char* op);

}  // namespace cams
