#include "magic/sample_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "magic/errors.hpp"

namespace magic {

namespace {

void put_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put(std::ofstream& out, T v) {
  put_bytes(out, &v, sizeof(v));
}

void get_bytes(std::ifstream& in, void* p, std::size_t n, const std::filesystem::path& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError("truncated sample file: " + path.string());
  }
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  get_bytes(in, &v, sizeof(v), path);
  return v;
}

}  // namespace

void save_sample_file(const ModalitySample& s, const std::filesystem::path& path,
                      const ModalityRegistry& registry) {
  if (s.present != registry.full_mask()) {
    throw std::invalid_argument("stored samples must contain every registry modality");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());

  put_bytes(out, "MAGC", 4);
  put<std::uint16_t>(out, kSampleFormatVersion);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(s.num_classes));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.height()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.width()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(registry.size()));
  for (int i = 0; i < registry.size(); ++i) {
    const std::string& n = registry.name(i);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(n.size()));
    put_bytes(out, n.data(), n.size());
  }
  for (int i = 0; i < registry.size(); ++i) {
    const Tensor<float>& img = s.images[static_cast<std::size_t>(i)];
    put_bytes(out, img.data(), sizeof(float) * static_cast<std::size_t>(img.numel()));
  }
  put_bytes(out, s.label.data(), sizeof(std::int32_t) * static_cast<std::size_t>(s.label.numel()));

  put<std::int8_t>(out, static_cast<std::int8_t>(s.corruption.target));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(s.corruption.kind));
  put<float>(out, s.corruption.severity);
  put<std::uint64_t>(out, s.seed);

  if (!out) throw FormatError("write failed: " + path.string());
}

ModalitySample load_sample_file(const std::filesystem::path& path,
                                const ModalityRegistry& registry) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open sample file: " + path.string());

  char magic_bytes[4];
  get_bytes(in, magic_bytes, 4, path);
  if (std::memcmp(magic_bytes, "MAGC", 4) != 0) {
    throw FormatError("bad magic bytes in sample file: " + path.string());
  }
  auto version = get<std::uint16_t>(in, path);
  if (version != kSampleFormatVersion) {
    throw FormatError("unsupported sample format version " + std::to_string(version) + " in " +
                      path.string());
  }
  ModalitySample s;
  s.num_classes = get<std::uint16_t>(in, path);
  int h = static_cast<int>(get<std::uint32_t>(in, path));
  int w = static_cast<int>(get<std::uint32_t>(in, path));
  int count = get<std::uint8_t>(in, path);
  if (count != registry.size()) {
    throw FormatError("sample file modality count mismatch: " + path.string());
  }
  for (int i = 0; i < count; ++i) {
    auto len = get<std::uint16_t>(in, path);
    std::string name(len, '\0');
    get_bytes(in, name.data(), len, path);
    if (name != registry.name(i)) {
      throw FormatError("sample file registry mismatch ('" + name + "' vs '" + registry.name(i) +
                        "') in " + path.string());
    }
  }
  s.images.assign(static_cast<std::size_t>(count), Tensor<float>());
  for (int i = 0; i < count; ++i) {
    Tensor<float> img({3, h, w});
    get_bytes(in, img.data(), sizeof(float) * static_cast<std::size_t>(img.numel()), path);
    s.images[static_cast<std::size_t>(i)] = std::move(img);
  }
  s.label = Tensor<std::int32_t>({h, w});
  get_bytes(in, s.label.data(), sizeof(std::int32_t) * static_cast<std::size_t>(s.label.numel()),
            path);
  s.present = registry.full_mask();

  s.corruption.target = get<std::int8_t>(in, path);
  s.corruption.kind = static_cast<CorruptionKind>(get<std::uint8_t>(in, path));
  s.corruption.severity = get<float>(in, path);
  s.seed = get<std::uint64_t>(in, path);

  // nothing may trail the meta block
  char extra;
  in.read(&extra, 1);
  if (in.gcount() != 0) {
    throw FormatError("trailing bytes in sample file: " + path.string());
  }
  return s;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& dir) {
  std::ofstream out(dir / "manifest.txt", std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest in " + dir.string());
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(m.config_hash));
  out << "config_hash " << buf << "\n";
  for (const auto& f : m.files) out << f << "\n";
  if (!out) throw FormatError("manifest write failed in " + dir.string());
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw FormatError("missing manifest.txt in " + dir.string());
  DatasetManifest m;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty manifest in " + dir.string());
  std::istringstream head(line);
  std::string tag, hex;
  head >> tag >> hex;
  if (tag != "config_hash" || hex.empty()) {
    throw FormatError("malformed manifest header in " + dir.string());
  }
  m.config_hash = std::strtoull(hex.c_str(), nullptr, 16);
  while (std::getline(in, line)) {
    if (!line.empty()) m.files.push_back(line);
  }
  return m;
}

void save_samples(const std::vector<ModalitySample>& samples, const std::filesystem::path& dir,
                  const ModalityRegistry& registry, std::uint64_t config_hash) {
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.config_hash = config_hash;
  char name[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(name, sizeof(name), "sample_%05zu.mgc", i);
    save_sample_file(samples[i], dir / name, registry);
    m.files.emplace_back(name);
  }
  write_manifest(m, dir);
}

std::vector<ModalitySample> load_samples(const std::filesystem::path& dir,
                                         const ModalityRegistry& registry) {
  DatasetManifest m = read_manifest(dir);
  std::vector<ModalitySample> out;
  out.reserve(m.files.size());
  for (const auto& f : m.files) {
    out.push_back(load_sample_file(dir / f, registry));
  }
  return out;
}

}  // namespace magic
