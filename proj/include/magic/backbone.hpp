// Weight-shared encoder and the segmentation head.
//
// Encoder: three conv blocks (stride 2, 2, 1), channels 3 -> D/2 -> D -> D,
// each conv -> silu -> per-channel norm. Output spatial size is (H/4, W/4).
// SegHead: two (nearest x2 upsample -> conv -> silu -> norm) blocks followed
// by a 1x1 projection to K classes.
#pragma once

#include <string>
#include <vector>

#include "magic/rng.hpp"
#include "magic/tape.hpp"

namespace magic {

template <typename T>
struct ConvLayer {
  Parameter<T> w, b;
  int stride = 1;
  int pad = 0;

  ConvLayer() = default;
  ConvLayer(const std::string& name, int cout, int cin, int k, int stride_, int pad_)
      : w(name + "/w", {cout, cin, k, k}), b(name + "/b", {cout}), stride(stride_), pad(pad_) {}

  void init(Rng& rng) {
    int fan_in = w.value.size(1) * w.value.size(2) * w.value.size(3);
    double limit = std::sqrt(1.0 / fan_in);
    for (std::int64_t i = 0; i < w.value.numel(); ++i) {
      w.value[i] = static_cast<T>(rng.uniform(-limit, limit));
    }
    b.value.fill(T(0));
  }

  int apply(Tape<T>& t, int x) {
    return t.conv2d(x, t.param(w), t.param(b), stride, pad);
  }
};

template <typename T>
struct NormLayer {
  Parameter<T> gamma, beta;
  static constexpr T kEps = T(1e-5);

  NormLayer() = default;
  NormLayer(const std::string& name, int channels)
      : gamma(name + "/gamma", {channels}), beta(name + "/beta", {channels}) {
    gamma.value.fill(T(1));
  }

  int apply(Tape<T>& t, int x) {
    return t.channel_norm(x, t.param(gamma), t.param(beta), kEps);
  }
};

template <typename T>
struct EncoderParams {
  ConvLayer<T> c1, c2, c3;
  NormLayer<T> n1, n2, n3;
  int feature_dim = 0;

  EncoderParams() = default;
  EncoderParams(int d, Rng& rng)
      : c1("encoder/c1", std::max(1, d / 2), 3, 3, 2, 1),
        c2("encoder/c2", d, std::max(1, d / 2), 3, 2, 1),
        c3("encoder/c3", d, d, 3, 1, 1),
        n1("encoder/n1", std::max(1, d / 2)),
        n2("encoder/n2", d),
        n3("encoder/n3", d),
        feature_dim(d) {
    c1.init(rng);
    c2.init(rng);
    c3.init(rng);
  }

  int apply(Tape<T>& t, int x) {
    int h = n1.apply(t, t.silu(c1.apply(t, x)));
    h = n2.apply(t, t.silu(c2.apply(t, h)));
    return n3.apply(t, t.silu(c3.apply(t, h)));
  }
};

template <typename T>
struct SegHeadParams {
  ConvLayer<T> d1, d2, proj;
  NormLayer<T> n1, n2;
  int num_classes = 0;

  SegHeadParams() = default;
  SegHeadParams(int d, int k, Rng& rng)
      : d1("seghead/d1", d, d, 3, 1, 1),
        d2("seghead/d2", d, d, 3, 1, 1),
        proj("seghead/proj", k, d, 1, 1, 0),
        n1("seghead/n1", d),
        n2("seghead/n2", d),
        num_classes(k) {
    d1.init(rng);
    d2.init(rng);
    proj.init(rng);
  }

  int apply(Tape<T>& t, int feat) {
    int h = n1.apply(t, t.silu(d1.apply(t, t.upsample2x(feat))));
    h = n2.apply(t, t.silu(d2.apply(t, t.upsample2x(h))));
    return proj.apply(t, h);
  }
};

}  // namespace magic
