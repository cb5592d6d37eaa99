#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tsrp/matrix.hpp"
#include "tsrp/tape.hpp"

namespace tsrp {

/// Flatten + linear head over the last k rows of the backbone output.
struct ProjectionHead {
  std::size_t patches = 0;  // k
  std::size_t horizon = 0;  // H_out
  Parameter weight;         // H_out × (k·d_llm)
  Parameter bias;           // 1 × H_out

  static ProjectionHead init(std::size_t patches, std::size_t d_llm, std::size_t horizon,
                             std::uint64_t seed);

  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
  std::size_t scalar_count() const { return weight.value.size() + bias.value.size(); }
};

/// 1×H_out forecast from O ((p+k)×d_llm). Prompt rows are ignored.
Var project(Var output, ProjectionHead& head, bool trainable);
std::vector<double> project(const Matrix& output, ProjectionHead& head);

}  // namespace tsrp
