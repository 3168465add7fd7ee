#include "aegan/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "aegan/errors.hpp"

namespace aegan {

namespace {

constexpr char kMagic[4] = {'A', 'E', 'G', 'T'};
constexpr uint32_t kVersion = 1;

enum DType : uint32_t { kF32 = 0, kI64 = 1 };

void put_u32(std::ostream& out, uint32_t v) {
  char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
  out.write(b, 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v));
  put_u32(out, static_cast<uint32_t>(v >> 32));
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

uint64_t get_u64(std::istream& in) {
  const uint64_t lo = get_u32(in);
  const uint64_t hi = get_u32(in);
  return lo | hi << 32;
}

}  // namespace

void save_tensors(const std::string& path,
                  const std::map<std::string, torch::Tensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write tensor file: " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, tensors.size());
  for (const auto& [name, raw] : tensors) {
    torch::Tensor t = raw.contiguous().cpu();
    DType dt;
    if (t.scalar_type() == torch::kFloat32) dt = kF32;
    else if (t.scalar_type() == torch::kInt64) dt = kI64;
    else throw IoError("unsupported dtype for tensor '" + name + "'");
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, dt);
    put_u32(out, static_cast<uint32_t>(t.dim()));
    for (int64_t d = 0; d < t.dim(); ++d)
      put_u64(out, static_cast<uint64_t>(t.size(d)));
    const size_t bytes = t.numel() * t.element_size();
    out.write(static_cast<const char*>(t.const_data_ptr()),
              static_cast<std::streamsize>(bytes));
  }
  if (!out) throw IoError("short write: " + path);
}

std::map<std::string, torch::Tensor> load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tensor file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a tensor container: " + path);
  if (get_u32(in) != kVersion) throw IoError("unsupported container version: " + path);

  std::map<std::string, torch::Tensor> out;
  const uint64_t count = get_u64(in);
  for (uint64_t i = 0; i < count; ++i) {
    const uint64_t name_len = get_u64(in);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    const uint32_t dt = get_u32(in);
    const uint32_t ndim = get_u32(in);
    std::vector<int64_t> shape(ndim);
    for (auto& s : shape) s = static_cast<int64_t>(get_u64(in));
    const auto type = dt == kF32 ? torch::kFloat32 : torch::kInt64;
    torch::Tensor t = torch::empty(shape, type);
    in.read(static_cast<char*>(t.data_ptr()),
            static_cast<std::streamsize>(t.numel() * t.element_size()));
    if (!in) throw IoError("truncated tensor '" + name + "' in " + path);
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace aegan
