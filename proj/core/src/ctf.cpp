#include "cams/ctf.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <type_traits>
#include <vector>

namespace cams {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'M', 'S'};
constexpr std::uint8_t kVersion = 1;

// Scalars go to disk least-significant byte first regardless of host order.
template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = sizeof(T); i-- > 0;) out.push_back(raw[i]);
  } else {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(raw[i]);
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::uint8_t raw[sizeof(T)];
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T); ++i) raw[i] = p[sizeof(T) - 1 - i];
  } else {
    std::memcpy(raw, p, sizeof(T));
  }
  T value;
  std::memcpy(&value, raw, sizeof(T));
  return value;
}

[[noreturn]] void malformed(const std::string& path, std::size_t offset, const std::string& what) {
  throw std::runtime_error("ctf: " + path + ": " + what + " (byte offset " +
                           std::to_string(offset) + ")");
}

struct Parsed {
  CtfInfo info;
  std::size_t payload_offset = 0;
  std::vector<std::uint8_t> bytes;
};

Parsed parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ctf: cannot open " + path);
  Parsed p;
  p.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  if (in.bad()) throw std::runtime_error("ctf: read failure on " + path);

  const auto& b = p.bytes;
  if (b.size() < 7) malformed(path, b.size(), "header truncated, need at least 7 bytes");
  if (std::memcmp(b.data(), kMagic, 4) != 0) malformed(path, 0, "bad magic, expected \"CAMS\"");
  if (b[4] != kVersion) {
    malformed(path, 4, "unsupported version " + std::to_string(b[4]) + ", expected " +
                           std::to_string(kVersion));
  }
  const std::uint8_t dtype_code = b[5];
  if (dtype_code < 1 || dtype_code > 3) {
    malformed(path, 5, "unknown dtype code " + std::to_string(dtype_code));
  }
  p.info.dtype = static_cast<Dtype>(dtype_code);
  const std::uint8_t ndim = b[6];
  std::size_t off = 7;
  if (b.size() < off + 4u * ndim) malformed(path, b.size(), "dims truncated");
  std::int64_t numel = 1;
  for (std::uint8_t i = 0; i < ndim; ++i, off += 4) {
    const std::uint32_t d = get_le<std::uint32_t>(b.data() + off);
    p.info.shape.push_back(static_cast<std::int64_t>(d));
    numel *= static_cast<std::int64_t>(d);
  }
  p.payload_offset = off;
  const std::size_t expected = static_cast<std::size_t>(numel) * dtype_size(p.info.dtype);
  const std::size_t actual = b.size() - off;
  if (actual != expected) {
    malformed(path, off,
              "payload expected " + std::to_string(expected) + " bytes, got " +
                  std::to_string(actual));
  }
  return p;
}

}  // namespace

template <typename T>
void ctf_write(const std::string& path, const Tensor<T>& tensor) {
  if (!tensor.defined()) throw std::invalid_argument("ctf: cannot write an undefined tensor");
  const Shape& shape = tensor.shape();
  if (shape.size() > 255) throw std::invalid_argument("ctf: at most 255 dims");
  for (std::int64_t d : shape) {
    if (d < 0 || d > std::numeric_limits<std::uint32_t>::max()) {
      throw std::invalid_argument("ctf: dim " + std::to_string(d) + " does not fit in u32");
    }
  }
  std::vector<std::uint8_t> out;
  out.reserve(7 + 4 * shape.size() + tensor.numel() * sizeof(T));
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(dtype_of<T>));
  out.push_back(static_cast<std::uint8_t>(shape.size()));
  for (std::int64_t d : shape) put_le(out, static_cast<std::uint32_t>(d));
  for (T v : tensor.values()) put_le(out, v);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("ctf: cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!os) throw std::runtime_error("ctf: write failure on " + path);
}

template <typename T>
Tensor<T> ctf_read(const std::string& path) {
  Parsed p = parse_file(path);
  if (p.info.dtype != dtype_of<T>) {
    throw std::runtime_error("ctf: " + path + " holds " +
                             std::string(dtype_name(p.info.dtype)) + ", requested " +
                             std::string(dtype_name(dtype_of<T>)));
  }
  std::vector<T> data(static_cast<std::size_t>(shape_numel(p.info.shape)));
  const std::uint8_t* src = p.bytes.data() + p.payload_offset;
  for (auto& v : data) {
    v = get_le<T>(src);
    src += sizeof(T);
  }
  return Tensor<T>(p.info.shape, std::move(data));
}

CtfInfo ctf_inspect(const std::string& path) { return parse_file(path).info; }

template void ctf_write<float>(const std::string&, const Tensor<float>&);
template void ctf_write<double>(const std::string&, const Tensor<double>&);
template void ctf_write<std::uint8_t>(const std::string&, const Tensor<std::uint8_t>&);
template Tensor<float> ctf_read<float>(const std::string&);
template Tensor<double> ctf_read<double>(const std::string&);
template Tensor<std::uint8_t> ctf_read<std::uint8_t>(const std::string&);

}  // namespace cams
