#include "scapv/numkit/pvt_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "scapv/numkit/errors.hpp"

namespace scapv::numkit {

static_assert(std::endian::native == std::endian::little, "PVT1 I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos, const char* what) {
  if (pos + sizeof(T) > in.size()) {
    throw IoError(std::string("PVT1: truncated ") + what + " at byte offset " + std::to_string(pos));
  }
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string encode_pvt(const Tensor& t) {
  std::string out = "PVT1";
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put<std::uint64_t>(out, d);
  const auto data = t.data();
  out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
  return out;
}

Tensor decode_pvt(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "PVT1") != 0) throw IoError("PVT1: bad magic at byte offset 0");
  std::size_t pos = 4;
  const auto rank = take<std::uint32_t>(bytes, pos, "rank");
  if (rank == 0 || rank > 16) throw IoError("PVT1: invalid rank " + std::to_string(rank) + " at byte offset 4");
  Shape shape;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::size_t at = pos;
    const auto d = take<std::uint64_t>(bytes, pos, "dims");
    if (d == 0) throw IoError("PVT1: zero extent at byte offset " + std::to_string(at));
    shape.push_back(static_cast<std::size_t>(d));
  }
  const std::size_t n = shape_numel(shape);
  if (bytes.size() - pos != n * sizeof(double)) {
    throw IoError("PVT1: payload size mismatch at byte offset " + std::to_string(pos) + " (expected " +
                  std::to_string(n * sizeof(double)) + " bytes, found " +
                  std::to_string(bytes.size() - pos) + ")");
  }
  std::vector<double> values(n);
  std::memcpy(values.data(), bytes.data() + pos, n * sizeof(double));
  return Tensor(std::move(shape), std::move(values));
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void save_pvt(const std::filesystem::path& path, const Tensor& t) { write_file_bytes(path, encode_pvt(t)); }

Tensor load_pvt(const std::filesystem::path& path) {
  try {
    return decode_pvt(read_file_bytes(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace scapv::numkit
