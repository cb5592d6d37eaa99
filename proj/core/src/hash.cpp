#include "tsrp/hash.hpp"

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace tsrp {

struct ArrayHasher::Impl {
  EVP_MD_CTX* ctx = nullptr;
};

ArrayHasher::ArrayHasher() : impl_(new Impl) {
  impl_->ctx = EVP_MD_CTX_new();
  if (impl_->ctx == nullptr || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(impl_->ctx);
    delete impl_;
    throw std::runtime_error("sha256 init failed");
  }
}

ArrayHasher::~ArrayHasher() {
  EVP_MD_CTX_free(impl_->ctx);
  delete impl_;
}

void ArrayHasher::update(const void* data, std::size_t size) {
  EVP_DigestUpdate(impl_->ctx, data, size);
}

void ArrayHasher::add(std::string_view name, const Matrix& m) {
  const std::uint64_t len = name.size();
  update(&len, sizeof len);
  update(name.data(), name.size());
  const std::uint64_t shape[2] = {m.rows(), m.cols()};
  update(shape, sizeof shape);
  static_assert(std::endian::native == std::endian::little, "hash assumes little-endian doubles");
  update(m.data().data(), m.size() * sizeof(double));
}

std::string ArrayHasher::finish() {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(impl_->ctx, digest, &len);
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace tsrp
