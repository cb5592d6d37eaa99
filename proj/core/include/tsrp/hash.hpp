#pragma once

#include <span>
#include <string>
#include <string_view>

#include "tsrp/matrix.hpp"

namespace tsrp {

/// Incremental SHA-256 over named arrays: name, shape and the raw
/// little-endian f64 bytes all enter the digest.
class ArrayHasher {
 public:
  ArrayHasher();
  ~ArrayHasher();
  ArrayHasher(const ArrayHasher&) = delete;
  ArrayHasher& operator=(const ArrayHasher&) = delete;

  void add(std::string_view name, const Matrix& m);
  /// Hex digest; the hasher cannot be used afterwards.
  std::string finish();

 private:
  void update(const void* data, std::size_t size);
  struct Impl;
  Impl* impl_;
};

std::string sha256_hex(std::string_view bytes);

}  // namespace tsrp
