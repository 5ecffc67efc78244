#include "magic/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "magic/rng.hpp"

namespace magic {

const char* corruption_kind_name(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::None: return "none";
    case CorruptionKind::GaussianNoise: return "gaussian-noise";
    case CorruptionKind::Blackout: return "blackout";
    case CorruptionKind::Blur: return "blur";
    case CorruptionKind::Downsample: return "downsample";
  }
  return "none";
}

CorruptionKind corruption_kind_from_name(const std::string& name) {
  if (name == "none") return CorruptionKind::None;
  if (name == "gaussian-noise") return CorruptionKind::GaussianNoise;
  if (name == "blackout") return CorruptionKind::Blackout;
  if (name == "blur") return CorruptionKind::Blur;
  if (name == "downsample") return CorruptionKind::Downsample;
  throw std::invalid_argument("unknown corruption kind: " + name);
}

ModalitySample restrict_sample(const ModalitySample& s, std::uint32_t subset) {
  if (subset == 0) throw std::invalid_argument("restrict: subset must not be empty");
  if ((subset & ~s.present) != 0) {
    throw std::invalid_argument("restrict: subset requests a modality not present in the sample");
  }
  ModalitySample out = s;
  out.present = subset;
  for (std::size_t i = 0; i < out.images.size(); ++i) {
    if (!(subset & (1u << i))) out.images[i] = Tensor<float>();
  }
  return out;
}

namespace {

struct Shape {
  int kind;  // 0 rect, 1 disk, 2 triangle, 3 ring
  int cls;
  double cx, cy, rx, ry;
  double z;          // distance, 0 near .. 1 far
  double brightness;
};

bool inside(const Shape& s, int x, int y) {
  double dx = x + 0.5 - s.cx;
  double dy = y + 0.5 - s.cy;
  switch (s.kind) {
    case 0:
      return std::abs(dx) <= s.rx && std::abs(dy) <= s.ry;
    case 1: {
      double nx = dx / s.rx, ny = dy / s.ry;
      return nx * nx + ny * ny <= 1.0;
    }
    case 2: {
      // upward triangle inscribed in the (rx, ry) box
      if (dy < -s.ry || dy > s.ry) return false;
      double half = s.rx * (dy + s.ry) / (2.0 * s.ry);
      return std::abs(dx) <= half;
    }
    case 3: {
      double nx = dx / s.rx, ny = dy / s.ry;
      double d2 = nx * nx + ny * ny;
      return d2 <= 1.0 && d2 >= 0.30;
    }
  }
  return false;
}

// fixed palette: evenly spaced hues, full saturation
void class_color(int cls, int num_classes, float rgb[3]) {
  int n = std::max(1, num_classes - 1);
  double h = 6.0 * static_cast<double>((cls - 1) % n) / n;
  double v = 0.9, s = 0.85;
  double c = v * s;
  double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
  double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    case 5: r = c; b = x; break;
  }
  rgb[0] = static_cast<float>(r + m);
  rgb[1] = static_cast<float>(g + m);
  rgb[2] = static_cast<float>(b + m);
}

bool sparse_lidar_hit(std::uint64_t sample_seed, int y, int x) {
  std::uint64_t h = mix_seed(sample_seed ^ 0x11d4aULL, static_cast<std::uint64_t>(y) << 32 | static_cast<std::uint32_t>(x));
  return (h & 0xffffu) < 12000u;  // ~18% of pixels carry a return
}

Tensor<float> box_blur5(const Tensor<float>& x) {
  int h = x.size(1), w = x.size(2);
  Tensor<float> out({3, h, w});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        double acc = 0;
        int cnt = 0;
        for (int dy = -2; dy <= 2; ++dy) {
          for (int dx = -2; dx <= 2; ++dx) {
            int yy = y + dy, xc = xx + dx;
            if (yy < 0 || yy >= h || xc < 0 || xc >= w) continue;
            acc += x.at(c, yy, xc);
            ++cnt;
          }
        }
        out.at(c, y, xx) = static_cast<float>(acc / cnt);
      }
    }
  }
  return out;
}

Tensor<float> block_average4(const Tensor<float>& x) {
  int h = x.size(1), w = x.size(2);
  Tensor<float> out({3, h, w});
  for (int c = 0; c < 3; ++c) {
    for (int by = 0; by < h; by += 4) {
      for (int bx = 0; bx < w; bx += 4) {
        double acc = 0;
        int cnt = 0;
        for (int y = by; y < std::min(by + 4, h); ++y) {
          for (int xx = bx; xx < std::min(bx + 4, w); ++xx) {
            acc += x.at(c, y, xx);
            ++cnt;
          }
        }
        float v = static_cast<float>(acc / cnt);
        for (int y = by; y < std::min(by + 4, h); ++y) {
          for (int xx = bx; xx < std::min(bx + 4, w); ++xx) {
            out.at(c, y, xx) = v;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

Tensor<float> apply_corruption(const Tensor<float>& clean, const CorruptionSpec& spec,
                               std::uint64_t noise_seed) {
  if (spec.kind == CorruptionKind::None || spec.severity <= 0.0f) return clean;
  float s = std::min(spec.severity, 1.0f);
  int h = clean.size(1), w = clean.size(2);
  Tensor<float> out = clean;
  switch (spec.kind) {
    case CorruptionKind::GaussianNoise: {
      Rng rng(mix_seed(noise_seed, 0x6e0153ULL));
      for (std::int64_t i = 0; i < out.numel(); ++i) {
        float v = out[i] + 0.5f * s * static_cast<float>(rng.normal());
        out[i] = std::clamp(v, 0.0f, 1.0f);
      }
      break;
    }
    case CorruptionKind::Blackout: {
      // dead band of rows covering fraction s of the image
      int band = std::min(h, static_cast<int>(std::lround(static_cast<double>(s) * h)));
      Rng rng(mix_seed(noise_seed, 0xb1ac0ULL));
      int r0 = band >= h ? 0 : rng.uniform_int(0, h - band);
      for (int c = 0; c < 3; ++c) {
        for (int y = r0; y < r0 + band; ++y) {
          for (int x = 0; x < w; ++x) out.at(c, y, x) = 0.0f;
        }
      }
      break;
    }
    case CorruptionKind::Blur: {
      Tensor<float> blurred = box_blur5(clean);
      for (std::int64_t i = 0; i < out.numel(); ++i) {
        out[i] = (1.0f - s) * clean[i] + s * blurred[i];
      }
      break;
    }
    case CorruptionKind::Downsample: {
      Tensor<float> coarse = block_average4(clean);
      for (std::int64_t i = 0; i < out.numel(); ++i) {
        out[i] = (1.0f - s) * clean[i] + s * coarse[i];
      }
      break;
    }
    case CorruptionKind::None:
      break;
  }
  return out;
}

std::vector<ModalitySample> synthesize(std::uint64_t seed, int count, const SceneConfig& config) {
  config.validate();
  if (count < 1) throw std::invalid_argument("synthesize: count must be >= 1");

  const ModalityRegistry& reg = ModalityRegistry::rdel();
  const int H = config.height, W = config.width, K = config.classes;
  const int rgb_i = reg.index_of("rgb"), depth_i = reg.index_of("depth");
  const int event_i = reg.index_of("event"), lidar_i = reg.index_of("lidar");

  std::vector<ModalitySample> out;
  out.reserve(static_cast<std::size_t>(count));

  for (int idx = 0; idx < count; ++idx) {
    std::uint64_t sample_seed = mix_seed(seed, static_cast<std::uint64_t>(idx));
    Rng rng(sample_seed);

    int n_shapes = rng.uniform_int(config.min_shapes, config.max_shapes);
    std::vector<Shape> shapes(static_cast<std::size_t>(n_shapes));
    double min_dim = std::min(H, W);
    for (auto& sh : shapes) {
      sh.cls = rng.uniform_int(1, K - 1);
      sh.kind = (sh.cls - 1) % 4;
      sh.rx = rng.uniform(min_dim / 8.0, min_dim / 3.0);
      sh.ry = rng.uniform(min_dim / 8.0, min_dim / 3.0);
      sh.cx = rng.uniform(sh.rx * 0.5, W - sh.rx * 0.5);
      sh.cy = rng.uniform(sh.ry * 0.5, H - sh.ry * 0.5);
      sh.z = rng.uniform(0.15, 0.9);
      sh.brightness = rng.uniform(0.75, 1.0);
    }
    // painter's order: far first, near overwrites
    std::stable_sort(shapes.begin(), shapes.end(),
                     [](const Shape& a, const Shape& b) { return a.z > b.z; });

    ModalitySample s;
    s.seed = sample_seed;
    s.num_classes = K;
    s.present = reg.full_mask();
    s.label = Tensor<std::int32_t>({H, W});
    s.images.assign(static_cast<std::size_t>(reg.size()), Tensor<float>());

    Tensor<float> rgb({3, H, W}), depth({3, H, W}), event({3, H, W}), lidar({3, H, W});
    const float bg[3] = {0.10f, 0.10f, 0.12f};
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        for (int c = 0; c < 3; ++c) rgb.at(c, y, x) = bg[c];
      }
    }

    for (const Shape& sh : shapes) {
      float color[3];
      class_color(sh.cls, K, color);
      float near_val = static_cast<float>(1.0 - sh.z);
      int y0 = std::max(0, static_cast<int>(std::floor(sh.cy - sh.ry - 1)));
      int y1 = std::min(H - 1, static_cast<int>(std::ceil(sh.cy + sh.ry + 1)));
      int x0 = std::max(0, static_cast<int>(std::floor(sh.cx - sh.rx - 1)));
      int x1 = std::min(W - 1, static_cast<int>(std::ceil(sh.cx + sh.rx + 1)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (!inside(sh, x, y)) continue;
          s.label.at(y, x) = sh.cls;
          for (int c = 0; c < 3; ++c) {
            rgb.at(c, y, x) = color[c] * static_cast<float>(sh.brightness);
            depth.at(c, y, x) = near_val;
          }
        }
      }
    }

    // event: label-boundary indicator (4-neighbour differences)
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        std::int32_t l = s.label.at(y, x);
        bool edge = (y > 0 && s.label.at(y - 1, x) != l) ||
                    (y + 1 < H && s.label.at(y + 1, x) != l) ||
                    (x > 0 && s.label.at(y, x - 1) != l) ||
                    (x + 1 < W && s.label.at(y, x + 1) != l);
        if (edge) {
          for (int c = 0; c < 3; ++c) event.at(c, y, x) = 1.0f;
        }
      }
    }

    // lidar: sparse depth returns
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (!sparse_lidar_hit(sample_seed, y, x)) continue;
        for (int c = 0; c < 3; ++c) lidar.at(c, y, x) = depth.at(c, y, x);
      }
    }

    // light sensor noise on rgb and depth; event and lidar stay clean so the
    // boundary invariant holds exactly
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        for (int c = 0; c < 3; ++c) {
          float nr = static_cast<float>(0.02 * (rng.uniform() - 0.5));
          float nd = static_cast<float>(0.02 * (rng.uniform() - 0.5));
          rgb.at(c, y, x) = std::clamp(rgb.at(c, y, x) + nr, 0.0f, 1.0f);
          depth.at(c, y, x) = std::clamp(depth.at(c, y, x) + nd, 0.0f, 1.0f);
        }
      }
    }

    s.images[static_cast<std::size_t>(rgb_i)] = std::move(rgb);
    s.images[static_cast<std::size_t>(depth_i)] = std::move(depth);
    s.images[static_cast<std::size_t>(event_i)] = std::move(event);
    s.images[static_cast<std::size_t>(lidar_i)] = std::move(lidar);

    if (rng.uniform() < config.corruption_prob) {
      CorruptionSpec spec;
      spec.target = rng.uniform_int(0, reg.size() - 1);
      spec.severity = static_cast<float>(rng.uniform(0.5, 1.0));
      if (config.corruption_kind == "mixed") {
        static const CorruptionKind kinds[4] = {
            CorruptionKind::GaussianNoise, CorruptionKind::Blackout, CorruptionKind::Blur,
            CorruptionKind::Downsample};
        spec.kind = kinds[rng.uniform_int(0, 3)];
      } else {
        spec.kind = corruption_kind_from_name(config.corruption_kind);
      }
      s.corruption = spec;
      auto& img = s.images[static_cast<std::size_t>(spec.target)];
      img = apply_corruption(img, spec, sample_seed);
    }

    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace magic
