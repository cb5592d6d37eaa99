#include "tsrp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

#include "tsrp/error.hpp"

namespace tsrp {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'R', 'P'};
constexpr std::uint8_t kDtypeF64 = 1;

template <typename T>
void put(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  double get_f64(const char* what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }

  std::string get_string(std::size_t len, const char* what) {
    need(len, what);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(fmt::format("checkpoint truncated while reading {} at byte {}", what, pos_));
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string shape_text(const std::vector<std::uint64_t>& shape) {
  return fmt::format("[{}]", fmt::join(shape, ", "));
}

}  // namespace

NamedArray NamedArray::from_matrix(std::string name, const Matrix& m) {
  return NamedArray{std::move(name), {m.rows(), m.cols()}, m.values()};
}

Matrix NamedArray::to_matrix() const {
  if (shape.size() == 1) return Matrix(1, shape[0], data);
  if (shape.size() == 2) return Matrix(shape[0], shape[1], data);
  throw FormatError(fmt::format("array '{}' has {} dimensions, expected 1 or 2", name, shape.size()));
}

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const NamedArray& Checkpoint::require(const std::string& name) const {
  const NamedArray* a = find(name);
  if (a == nullptr) throw FormatError(fmt::format("missing array '{}'", name));
  return *a;
}

Matrix Checkpoint::require_matrix(const std::string& name, std::size_t rows, std::size_t cols) const {
  const NamedArray& a = require(name);
  const std::vector<std::uint64_t> expected = {rows, cols};
  const bool row_vector_ok = rows == 1 && a.shape.size() == 1 && a.shape[0] == cols;
  if (a.shape != expected && !row_vector_ok) {
    throw FormatError(fmt::format("array '{}': expected shape {}, found {}", name,
                                  shape_text(expected), shape_text(a.shape)));
  }
  return Matrix(rows, cols, a.data);
}

const std::string& Checkpoint::require_meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw FormatError(fmt::format("missing metadata '{}'", key));
  return it->second;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint16_t>(out, Checkpoint::kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(k.size()));
    out += k;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
    out += v;
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& a : ckpt.arrays) {
    std::uint64_t count = 1;
    for (auto d : a.shape) count *= d;
    if (count != a.data.size()) {
      throw FormatError(fmt::format("array '{}': shape {} holds {} values, data has {}", a.name,
                                    shape_text(a.shape), count, a.data.size()));
    }
    if (a.name.size() > 0xffff) throw FormatError("array name too long");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(a.name.size()));
    out += a.name;
    put<std::uint8_t>(out, kDtypeF64);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(a.shape.size()));
    for (auto d : a.shape) put<std::uint64_t>(out, d);
  }
  for (const auto& a : ckpt.arrays)
    for (double v : a.data) put_f64(out, v);
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  const std::string magic = r.get_string(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad magic, not a TSRP container");
  const auto version = r.get<std::uint16_t>("version");
  if (version != Checkpoint::kVersion) {
    throw FormatError(fmt::format("unsupported container version {}", version));
  }
  Checkpoint ckpt;
  const auto meta_count = r.get<std::uint32_t>("metadata count");
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string key = r.get_string(r.get<std::uint32_t>("key length"), "metadata key");
    std::string value = r.get_string(r.get<std::uint32_t>("value length"), "metadata value");
    ckpt.metadata.emplace(std::move(key), std::move(value));
  }
  const auto array_count = r.get<std::uint32_t>("array count");
  std::vector<std::uint64_t> counts;
  for (std::uint32_t i = 0; i < array_count; ++i) {
    NamedArray a;
    a.name = r.get_string(r.get<std::uint16_t>("name length"), "array name");
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype != kDtypeF64) throw FormatError(fmt::format("array '{}': unsupported dtype {}", a.name, dtype));
    const auto ndim = r.get<std::uint8_t>("ndim");
    std::uint64_t count = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      a.shape.push_back(r.get<std::uint64_t>("dimension"));
      count *= a.shape.back();
    }
    counts.push_back(count);
    ckpt.arrays.push_back(std::move(a));
  }
  for (std::size_t i = 0; i < ckpt.arrays.size(); ++i) {
    if (counts[i] > r.remaining() / sizeof(double)) {
      throw FormatError(fmt::format("checkpoint truncated in data of array '{}'", ckpt.arrays[i].name));
    }
    auto& data = ckpt.arrays[i].data;
    data.resize(counts[i]);
    for (auto& v : data) v = r.get_f64("array data");
  }
  if (!r.done()) throw FormatError(fmt::format("{} trailing bytes after array data", r.remaining()));
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot open '{}' for writing", path.string()));
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError(fmt::format("failed writing '{}'", path.string()));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace tsrp
