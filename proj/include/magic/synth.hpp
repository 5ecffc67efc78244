// Procedural multi-modal scene generator. Every modality is a different
// rendering of the same arrangement of shapes:
//   rgb   - filled shapes, one palette color per class
//   depth - 1 - z per shape (near is bright), background 0
//   event - label-boundary indicator
//   lidar - depth kept only on a sparse deterministic pixel mask
#pragma once

#include <cstdint>
#include <vector>

#include "magic/config.hpp"
#include "magic/sample.hpp"

namespace magic {

// Deterministic in (seed, count, config); safe to call concurrently.
std::vector<ModalitySample> synthesize(std::uint64_t seed, int count, const SceneConfig& config);

// Exposed for tests; identity when spec.severity == 0 or spec.kind == None.
Tensor<float> apply_corruption(const Tensor<float>& clean, const CorruptionSpec& spec,
                               std::uint64_t noise_seed);

}  // namespace magic
