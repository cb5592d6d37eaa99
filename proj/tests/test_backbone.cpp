#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "tsrp/backbone.hpp"
#include "tsrp/checkpoint.hpp"
#include "tsrp/error.hpp"
#include "tsrp/prompt.hpp"

using namespace tsrp;
using testing_util::random_matrix;

namespace {

std::filesystem::path temp_file(const char* name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST(Backbone, SeededFingerprint) {
  // Guards the PRNG, the init order and the array layout together.
  EXPECT_EQ(Backbone(BackboneConfig{}).hash(), TSRP_BACKBONE_FINGERPRINT);
  BackboneConfig other;
  other.seed = 1;
  EXPECT_NE(Backbone(other).hash(), Backbone(BackboneConfig{}).hash());
}

TEST(Backbone, ScalarCount) {
  const Backbone b(BackboneConfig{});
  const std::size_t per_layer = 2 * 32 + 4 * 32 * 32 + 2 * 32 + 64 * 32 + 64 + 32 * 64 + 32;
  EXPECT_EQ(b.scalar_count(), 256u * 32 + 2 * per_layer + 2 * 32);
}

TEST(Backbone, CausalRowsIgnoreTheFuture) {
  const Backbone b(BackboneConfig{});
  Matrix x = random_matrix(6, 32, 1, 0.5);
  const Matrix y0 = b.forward(x);
  x(5, 3) += 1.0;
  x(4, 0) -= 2.0;
  const Matrix y1 = b.forward(x);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 32; ++c) EXPECT_EQ(y0(r, c), y1(r, c));
  EXPECT_NE(y0(5, 0), y1(5, 0));
}

TEST(Backbone, CachedPrefixIsBitwiseExact) {
  const Backbone b(BackboneConfig{});
  const auto prompt = b.embed_tokens(tokenize("a short prompt for the prefix test"));
  const Matrix tail = random_matrix(3, 32, 2, 0.3);
  const Matrix full = b.forward(concat_rows(prompt, tail));

  const PrefixKV kv = b.encode_prefix(prompt);
  EXPECT_EQ(kv.length, prompt.rows());
  Tape tape;
  const Var out = b.forward(tape.constant(tail), &kv);
  EXPECT_EQ(out.value(), slice_rows(full, prompt.rows(), 3));

  // Encoding in two pieces gives the same keys/values as in one.
  const PrefixKV first = b.encode_prefix(slice_rows(prompt, 0, 10));
  const PrefixKV both = b.encode_prefix(slice_rows(prompt, 10, prompt.rows() - 10), &first);
  for (std::size_t l = 0; l < kv.keys.size(); ++l) {
    EXPECT_EQ(both.keys[l], kv.keys[l]);
    EXPECT_EQ(both.values[l], kv.values[l]);
  }
}

TEST(Backbone, NoGradientReachesWeights) {
  const Backbone b(BackboneConfig{});
  const std::string before = b.hash();
  Parameter x{"x", random_matrix(4, 32, 3)};
  Tape tape;
  const Var y = b.forward(tape.param(x));
  tape.backward(ad::mse(y, Matrix(4, 32)));
  ASSERT_TRUE(tape.gradient(x).has_value());
  EXPECT_GT(std::abs(tape.gradient(x)->operator()(0, 0)), 0.0);
  EXPECT_EQ(b.hash(), before);
}

TEST(Backbone, SequenceLimitAndWidth) {
  BackboneConfig cfg;
  cfg.max_seq = 8;
  const Backbone b(cfg);
  EXPECT_THROW(b.forward(Matrix(9, 32)), ConfigError);
  EXPECT_THROW(b.forward(Matrix(2, 16)), ShapeError);
  const std::size_t bad[] = {256};
  EXPECT_THROW(b.embed_tokens(bad), ShapeError);
}

TEST(Backbone, ConfigValidation) {
  BackboneConfig c;
  c.heads = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.vocab = 300;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Backbone, ExternalWeightsRoundTrip) {
  BackboneConfig cfg;
  cfg.seed = 11;
  const Backbone b(cfg);
  const auto path = temp_file("tsrp_backbone_rt.tsrp");
  b.save(path);
  const Backbone back = Backbone::load_external(path);
  EXPECT_EQ(back.hash(), b.hash());
  const Matrix x = random_matrix(4, 32, 5);
  EXPECT_EQ(back.forward(x), b.forward(x));
  std::filesystem::remove(path);
}

TEST(Backbone, MalformedWeightFiles) {
  const Backbone b(BackboneConfig{});
  const std::string bytes = serialize_checkpoint(b.to_checkpoint());
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() / 2)), FormatError);
  EXPECT_THROW(parse_checkpoint("JUNK" + bytes.substr(4)), FormatError);

  Checkpoint wrong_width = b.to_checkpoint();
  wrong_width.metadata["d_llm"] = "48";
  EXPECT_THROW(Backbone::from_checkpoint(wrong_width), FormatError);

  Checkpoint missing = b.to_checkpoint();
  missing.arrays.pop_back();
  EXPECT_THROW(Backbone::from_checkpoint(missing), FormatError);

  Checkpoint reshaped = b.to_checkpoint();
  reshaped.arrays[0].shape = {1, reshaped.arrays[0].data.size()};
  EXPECT_THROW(Backbone::from_checkpoint(reshaped), FormatError);

  const auto path = temp_file("tsrp_truncated.tsrp");
  std::ofstream(path, std::ios::binary) << bytes.substr(0, 100);
  EXPECT_THROW(Backbone::load_external(path), FormatError);
  std::filesystem::remove(path);
}
