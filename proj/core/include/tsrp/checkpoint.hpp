#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tsrp/matrix.hpp"

namespace tsrp {

/// Binary container shared by trainable-parameter checkpoints and external
/// backbone weights. Layout (little-endian):
///
///   "TSRP"  u16 version
///   u32 metadata count, then (u32 len, key bytes, u32 len, value bytes)*
///   u32 array count, then (u16 len, name, u8 dtype = 1 (f64), u8 ndim, u64 dims[ndim])*
///   raw f64 data for every array, in manifest order
struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;

  static NamedArray from_matrix(std::string name, const Matrix& m);
  /// 1-d arrays become a single row.
  Matrix to_matrix() const;
};

struct Checkpoint {
  static constexpr std::uint16_t kVersion = 1;

  std::map<std::string, std::string> metadata;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
  /// Throws FormatError naming the array when absent.
  const NamedArray& require(const std::string& name) const;
  /// Throws FormatError with expected vs found shapes on mismatch.
  Matrix require_matrix(const std::string& name, std::size_t rows, std::size_t cols) const;
  const std::string& require_meta(const std::string& key) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);

}  // namespace tsrp
