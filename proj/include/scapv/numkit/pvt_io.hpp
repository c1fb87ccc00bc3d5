#pragma once

#include <filesystem>
#include <string>

#include "scapv/numkit/tensor.hpp"

// PVT1 tensor files:
//   "PVT1" | u32 rank | rank x u64 dims | fp64 little-endian row-major payload
namespace scapv::numkit {

std::string encode_pvt(const Tensor& t);
// Throws IoError naming the byte offset on malformed input.
Tensor decode_pvt(const std::string& bytes);

void save_pvt(const std::filesystem::path& path, const Tensor& t);
Tensor load_pvt(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace scapv::numkit
