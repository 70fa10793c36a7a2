#include "jexpand/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "jexpand/error.hpp"

namespace jexpand::io {

namespace {

constexpr char kMagic[4] = {'J', 'X', 'P', '1'};
constexpr std::uint32_t kDtypeFloat32 = 0;

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

void put_u32(std::vector<char>& buf, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf.insert(buf.end(), b, b + 4);
}

std::uint32_t get_u32(const std::vector<char>& buf, std::size_t offset) {
  std::uint32_t v;
  std::memcpy(&v, buf.data() + offset, 4);
  return v;
}

}  // namespace

void save_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  std::vector<char> buf;
  buf.reserve(kTensorHeaderBytes + 4 * tensor.ndim() + 4 * static_cast<std::size_t>(tensor.numel()));
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32(buf, kTensorFormatVersion);
  put_u32(buf, kDtypeFloat32);
  put_u32(buf, static_cast<std::uint32_t>(tensor.ndim()));
  for (auto e : tensor.shape()) put_u32(buf, static_cast<std::uint32_t>(e));
  const auto data = tensor.data();
  const auto* bytes = reinterpret_cast<const char*>(data.data());
  buf.insert(buf.end(), bytes, bytes + data.size_bytes());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (buf.size() < 4) throw TruncatedFileError(where + ": file shorter than the magic");
  if (std::memcmp(buf.data(), kMagic, 3) != 0) throw BadMagicError(where + ": not a tensor file (bad magic)");
  if (buf[3] != kMagic[3]) throw VersionMismatchError(where + ": unsupported magic revision");
  if (buf.size() < kTensorHeaderBytes) throw TruncatedFileError(where + ": truncated header");
  const auto version = get_u32(buf, 4);
  if (version != kTensorFormatVersion) {
    throw VersionMismatchError(where + ": format version " + std::to_string(version) + ", expected " +
                               std::to_string(kTensorFormatVersion));
  }
  if (get_u32(buf, 8) != kDtypeFloat32) throw FormatError(where + ": unsupported dtype");
  const auto ndim = get_u32(buf, 12);
  if (ndim == 0) throw FormatError(where + ": zero-dimensional tensor");
  if (buf.size() < kTensorHeaderBytes + 4ull * ndim) throw TruncatedFileError(where + ": truncated extents");
  Shape shape;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const auto e = get_u32(buf, kTensorHeaderBytes + 4ull * i);
    if (e == 0) throw FormatError(where + ": zero extent");
    shape.push_back(e);
    count *= e;
  }
  const std::size_t offset = kTensorHeaderBytes + 4ull * ndim;
  if (buf.size() < offset + 4 * count) throw TruncatedFileError(where + ": truncated payload");
  if (buf.size() > offset + 4 * count) throw FormatError(where + ": trailing bytes after payload");
  std::vector<float> data(count);
  std::memcpy(data.data(), buf.data() + offset, 4 * count);
  return Tensor::from_data(std::move(shape), std::move(data));
}

}  // namespace jexpand::io
