#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "magic/registry.hpp"
#include "magic/tensor.hpp"

namespace magic {

enum class CorruptionKind : std::uint8_t {
  None = 0,
  GaussianNoise = 1,
  Blackout = 2,
  Blur = 3,
  Downsample = 4,
};

const char* corruption_kind_name(CorruptionKind k);
CorruptionKind corruption_kind_from_name(const std::string& name);

struct CorruptionSpec {
  int target = -1;  // registry index, -1 = none
  CorruptionKind kind = CorruptionKind::None;
  float severity = 0.0f;
};

// One scene rendered into every registry modality plus its label map.
// Slots follow the registry; restricted-away slots hold empty tensors and a
// cleared bit in `present`.
struct ModalitySample {
  std::vector<Tensor<float>> images;  // each (3, H, W) in [0, 1]
  std::uint32_t present = 0;
  Tensor<std::int32_t> label;  // (H, W), values in [0, K)
  int num_classes = 0;
  std::uint64_t seed = 0;
  CorruptionSpec corruption;

  int height() const { return label.size(0); }
  int width() const { return label.size(1); }
  bool has(int modality) const { return (present & (1u << modality)) != 0; }

  const Tensor<float>& image(int modality) const {
    if (!has(modality)) throw std::invalid_argument("modality not present in sample");
    return images.at(static_cast<std::size_t>(modality));
  }
};

// Keeps exactly the subset's modalities; label and meta unchanged.
ModalitySample restrict_sample(const ModalitySample& s, std::uint32_t subset);

}  // namespace magic
