// Binary sample files ("MAGC") and the dataset manifest.
//
// File layout, little-endian:
//   "MAGC" | version u16 | K u16 | H u32 | W u32 | modality count u8
//   per modality: name length u16 + name bytes
//   per modality in registry order: 3*H*W float32 planes
//   label: H*W int32
//   meta: corrupted modality i8 (-1 none) | kind u8 | severity f32 | seed u64
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "magic/sample.hpp"

namespace magic {

inline constexpr std::uint16_t kSampleFormatVersion = 1;

void save_sample_file(const ModalitySample& s, const std::filesystem::path& path,
                      const ModalityRegistry& registry);
ModalitySample load_sample_file(const std::filesystem::path& path,
                                const ModalityRegistry& registry);

// Writes sample_NNNNN.mgc files plus manifest.txt (config hash + file list).
void save_samples(const std::vector<ModalitySample>& samples, const std::filesystem::path& dir,
                  const ModalityRegistry& registry, std::uint64_t config_hash = 0);

// Loads every file listed in the directory's manifest, in manifest order.
std::vector<ModalitySample> load_samples(const std::filesystem::path& dir,
                                         const ModalityRegistry& registry);

struct DatasetManifest {
  std::uint64_t config_hash = 0;
  std::vector<std::string> files;
};

DatasetManifest read_manifest(const std::filesystem::path& dir);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& dir);

}  // namespace magic
