// Reverse-mode autodiff on a flat tape. Nodes are created in topological
// order; backward() walks the tape in reverse. Templated on the scalar type:
// float for training/inference, double for gradient checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "magic/tensor.hpp"

namespace magic {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<int> shape)
      : name(std::move(n)), value(shape), grad(shape) {}

  void zero_grad() { grad.fill(T(0)); }
};

namespace detail {

// stride-1 box sum with zero padding, divided by k^2; self-adjoint, so the
// same routine serves forward and backward. Uses a summed-area table.
template <typename T>
void box_filter_add(const T* x, T* out, int h, int w, int k, T scale) {
  int r = (k - 1) / 2;
  std::vector<double> sat(static_cast<std::size_t>((h + 1) * (w + 1)), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      sat[static_cast<std::size_t>((y + 1) * (w + 1) + xx + 1)] =
          static_cast<double>(x[y * w + xx]) + sat[static_cast<std::size_t>(y * (w + 1) + xx + 1)] +
          sat[static_cast<std::size_t>((y + 1) * (w + 1) + xx)] -
          sat[static_cast<std::size_t>(y * (w + 1) + xx)];
    }
  }
  auto rect = [&](int y0, int x0, int y1, int x1) {
    y0 = std::max(y0, 0);
    x0 = std::max(x0, 0);
    y1 = std::min(y1, h - 1);
    x1 = std::min(x1, w - 1);
    if (y0 > y1 || x0 > x1) return 0.0;
    return sat[static_cast<std::size_t>((y1 + 1) * (w + 1) + x1 + 1)] -
           sat[static_cast<std::size_t>(y0 * (w + 1) + x1 + 1)] -
           sat[static_cast<std::size_t>((y1 + 1) * (w + 1) + x0)] +
           sat[static_cast<std::size_t>(y0 * (w + 1) + x0)];
  };
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      out[y * w + xx] += static_cast<T>(rect(y - r, xx - r, y + r, xx + r) * scale);
    }
  }
}

}  // namespace detail

template <typename T>
class Tape {
 public:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::function<void(Tape&)> backprop;  // may be empty for leaves
    Parameter<T>* param = nullptr;
  };

  int constant(Tensor<T> v) { return push(std::move(v), nullptr); }

  int param(Parameter<T>& p) {
    int id = push(p.value, nullptr);
    nodes_[static_cast<std::size_t>(id)].param = &p;
    return id;
  }

  const Tensor<T>& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  const Tensor<T>& grad(int id) const { return nodes_.at(static_cast<std::size_t>(id)).grad; }
  std::size_t size() const { return nodes_.size(); }

  // ---- elementwise ----

  int add(int a, int b) {
    check_same(a, b, "add");
    Tensor<T> out = value(a);
    const Tensor<T>& vb = value(b);
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += vb[i];
    return push(std::move(out), [a, b](Tape& t, Node& n) {
      accumulate(t.mutable_grad(a), n.grad);
      accumulate(t.mutable_grad(b), n.grad);
    });
  }

  int mul(int a, int b) {
    check_same(a, b, "mul");
    const Tensor<T>& va = value(a);
    const Tensor<T>& vb = value(b);
    Tensor<T> out(va.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] * vb[i];
    return push(std::move(out), [a, b](Tape& t, Node& n) {
      const Tensor<T>& va = t.value(a);
      const Tensor<T>& vb = t.value(b);
      Tensor<T>& ga = t.mutable_grad(a);
      Tensor<T>& gb = t.mutable_grad(b);
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
        ga[i] += n.grad[i] * vb[i];
        gb[i] += n.grad[i] * va[i];
      }
    });
  }

  int scale(int a, T s) {
    Tensor<T> out = value(a);
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= s;
    return push(std::move(out), [a, s](Tape& t, Node& n) {
      Tensor<T>& ga = t.mutable_grad(a);
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i] * s;
    });
  }

  int sigmoid(int a) {
    Tensor<T> out = value(a);
    for (std::int64_t i = 0; i < out.numel(); ++i) {
      out[i] = T(1) / (T(1) + std::exp(-out[i]));
    }
    return push(std::move(out), [a](Tape& t, Node& n) {
      Tensor<T>& ga = t.mutable_grad(a);
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
        T y = n.value[i];
        ga[i] += n.grad[i] * y * (T(1) - y);
      }
    });
  }

  // x * sigmoid(x); smooth everywhere, which keeps finite-difference checks clean
  int silu(int a) {
    const Tensor<T>& va = value(a);
    Tensor<T> out(va.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) {
      T s = T(1) / (T(1) + std::exp(-va[i]));
      out[i] = va[i] * s;
    }
    return push(std::move(out), [a](Tape& t, Node& n) {
      const Tensor<T>& va = t.value(a);
      Tensor<T>& ga = t.mutable_grad(a);
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
        T s = T(1) / (T(1) + std::exp(-va[i]));
        ga[i] += n.grad[i] * s * (T(1) + va[i] * (T(1) - s));
      }
    });
  }

  // mean of equally shaped tensors
  int mean_many(const std::vector<int>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean_many: empty input");
    Tensor<T> out = value(xs[0]);
    for (std::size_t i = 1; i < xs.size(); ++i) {
      check_same(xs[0], xs[static_cast<int>(i)], "mean_many");
      const Tensor<T>& v = value(xs[i]);
      for (std::int64_t j = 0; j < out.numel(); ++j) out[j] += v[j];
    }
    T inv = T(1) / static_cast<T>(xs.size());
    for (std::int64_t j = 0; j < out.numel(); ++j) out[j] *= inv;
    return push(std::move(out), [xs, inv](Tape& t, Node& n) {
      for (int x : xs) {
        Tensor<T>& g = t.mutable_grad(x);
        for (std::int64_t j = 0; j < n.grad.numel(); ++j) g[j] += n.grad[j] * inv;
      }
    });
  }

  // ---- spatial ops on (C, H, W) ----

  int conv2d(int x, int w, int b, int stride, int pad) {
    const Tensor<T>& vx = value(x);
    const Tensor<T>& vw = value(w);
    const Tensor<T>& vb = value(b);
    if (vx.dim() != 3 || vw.dim() != 4) throw std::invalid_argument("conv2d: bad ranks");
    int cin = vx.size(0), h = vx.size(1), wd = vx.size(2);
    int cout = vw.size(0), kh = vw.size(2), kw = vw.size(3);
    if (vw.size(1) != cin) throw std::invalid_argument("conv2d: channel mismatch");
    if (vb.numel() != cout) throw std::invalid_argument("conv2d: bias size mismatch");
    int ho = (h + 2 * pad - kh) / stride + 1;
    int wo = (wd + 2 * pad - kw) / stride + 1;
    if (ho < 1 || wo < 1) throw std::invalid_argument("conv2d: output would be empty");

    Tensor<T> out({cout, ho, wo});
    for (int oc = 0; oc < cout; ++oc) {
      T* op = out.data() + static_cast<std::int64_t>(oc) * ho * wo;
      for (int i = 0; i < ho * wo; ++i) op[i] = vb[oc];
      for (int ic = 0; ic < cin; ++ic) {
        const T* ip = vx.data() + static_cast<std::int64_t>(ic) * h * wd;
        const T* wp = vw.data() + ((static_cast<std::int64_t>(oc) * cin + ic) * kh) * kw;
        for (int ky = 0; ky < kh; ++ky) {
          for (int kx = 0; kx < kw; ++kx) {
            T wv = wp[ky * kw + kx];
            if (wv == T(0)) continue;
            for (int oy = 0; oy < ho; ++oy) {
              int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= h) continue;
              const T* row = ip + static_cast<std::int64_t>(iy) * wd;
              T* orow = op + static_cast<std::int64_t>(oy) * wo;
              for (int ox = 0; ox < wo; ++ox) {
                int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= wd) continue;
                orow[ox] += wv * row[ix];
              }
            }
          }
        }
      }
    }
    return push(std::move(out), [x, w, b, stride, pad](Tape& t, Node& n) {
      const Tensor<T>& vx = t.value(x);
      const Tensor<T>& vw = t.value(w);
      Tensor<T>& gx = t.mutable_grad(x);
      Tensor<T>& gw = t.mutable_grad(w);
      Tensor<T>& gb = t.mutable_grad(b);
      int cin = vx.size(0), h = vx.size(1), wd = vx.size(2);
      int cout = vw.size(0), kh = vw.size(2), kw = vw.size(3);
      int ho = n.grad.size(1), wo = n.grad.size(2);
      for (int oc = 0; oc < cout; ++oc) {
        const T* gp = n.grad.data() + static_cast<std::int64_t>(oc) * ho * wo;
        T gbacc = T(0);
        for (int i = 0; i < ho * wo; ++i) gbacc += gp[i];
        gb[oc] += gbacc;
        for (int ic = 0; ic < cin; ++ic) {
          const T* ip = vx.data() + static_cast<std::int64_t>(ic) * h * wd;
          T* gip = gx.data() + static_cast<std::int64_t>(ic) * h * wd;
          const T* wp = vw.data() + ((static_cast<std::int64_t>(oc) * cin + ic) * kh) * kw;
          T* gwp = gw.data() + ((static_cast<std::int64_t>(oc) * cin + ic) * kh) * kw;
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              T wv = wp[ky * kw + kx];
              T gwacc = T(0);
              for (int oy = 0; oy < ho; ++oy) {
                int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= h) continue;
                const T* grow = gp + static_cast<std::int64_t>(oy) * wo;
                const T* row = ip + static_cast<std::int64_t>(iy) * wd;
                T* girow = gip + static_cast<std::int64_t>(iy) * wd;
                for (int ox = 0; ox < wo; ++ox) {
                  int ix = ox * stride - pad + kx;
                  if (ix < 0 || ix >= wd) continue;
                  gwacc += grow[ox] * row[ix];
                  girow[ix] += grow[ox] * wv;
                }
              }
              gwp[ky * kw + kx] += gwacc;
            }
          }
        }
      }
    });
  }

  // sum over `sizes` of stride-1 average pooling with zero padding (s-1)/2;
  // each window divides by s^2 regardless of how much padding it overlaps
  int pool_sum(int x, const std::vector<int>& sizes) {
    const Tensor<T>& vx = value(x);
    if (vx.dim() != 3) throw std::invalid_argument("pool_sum: expected (C,H,W)");
    int c = vx.size(0), h = vx.size(1), w = vx.size(2);
    Tensor<T> out({c, h, w});
    for (int ch = 0; ch < c; ++ch) {
      const T* ip = vx.data() + static_cast<std::int64_t>(ch) * h * w;
      T* op = out.data() + static_cast<std::int64_t>(ch) * h * w;
      for (int k : sizes) {
        detail::box_filter_add(ip, op, h, w, k, T(1) / static_cast<T>(k * k));
      }
    }
    return push(std::move(out), [x, sizes](Tape& t, Node& n) {
      Tensor<T>& gx = t.mutable_grad(x);
      int c = gx.size(0), h = gx.size(1), w = gx.size(2);
      for (int ch = 0; ch < c; ++ch) {
        const T* gp = n.grad.data() + static_cast<std::int64_t>(ch) * h * w;
        T* op = gx.data() + static_cast<std::int64_t>(ch) * h * w;
        for (int k : sizes) {
          detail::box_filter_add(gp, op, h, w, k, T(1) / static_cast<T>(k * k));
        }
      }
    });
  }

  // per-channel affine normalization over the spatial dims (batch-free)
  int channel_norm(int x, int gamma, int beta, T eps) {
    const Tensor<T>& vx = value(x);
    const Tensor<T>& vg = value(gamma);
    const Tensor<T>& vb = value(beta);
    if (vx.dim() != 3) throw std::invalid_argument("channel_norm: expected (C,H,W)");
    int c = vx.size(0);
    std::int64_t hw = static_cast<std::int64_t>(vx.size(1)) * vx.size(2);
    if (vg.numel() != c || vb.numel() != c) {
      throw std::invalid_argument("channel_norm: affine size mismatch");
    }
    auto stats = std::make_shared<std::vector<T>>(static_cast<std::size_t>(2 * c));
    Tensor<T> out(vx.shape());
    for (int ch = 0; ch < c; ++ch) {
      const T* ip = vx.data() + ch * hw;
      T* op = out.data() + ch * hw;
      double mean = 0;
      for (std::int64_t i = 0; i < hw; ++i) mean += static_cast<double>(ip[i]);
      mean /= static_cast<double>(hw);
      double var = 0;
      for (std::int64_t i = 0; i < hw; ++i) {
        double d = static_cast<double>(ip[i]) - mean;
        var += d * d;
      }
      var /= static_cast<double>(hw);
      T inv = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      (*stats)[static_cast<std::size_t>(2 * ch)] = static_cast<T>(mean);
      (*stats)[static_cast<std::size_t>(2 * ch + 1)] = inv;
      for (std::int64_t i = 0; i < hw; ++i) {
        op[i] = vg[ch] * ((ip[i] - static_cast<T>(mean)) * inv) + vb[ch];
      }
    }
    return push(std::move(out), [x, gamma, beta, stats](Tape& t, Node& n) {
      const Tensor<T>& vx = t.value(x);
      const Tensor<T>& vg = t.value(gamma);
      Tensor<T>& gx = t.mutable_grad(x);
      Tensor<T>& gg = t.mutable_grad(gamma);
      Tensor<T>& gb = t.mutable_grad(beta);
      int c = vx.size(0);
      std::int64_t hw = static_cast<std::int64_t>(vx.size(1)) * vx.size(2);
      for (int ch = 0; ch < c; ++ch) {
        const T* ip = vx.data() + ch * hw;
        const T* gp = n.grad.data() + ch * hw;
        T* gxp = gx.data() + ch * hw;
        T mean = (*stats)[static_cast<std::size_t>(2 * ch)];
        T inv = (*stats)[static_cast<std::size_t>(2 * ch + 1)];
        double sum_g = 0, sum_gx = 0;
        for (std::int64_t i = 0; i < hw; ++i) {
          T xh = (ip[i] - mean) * inv;
          sum_g += static_cast<double>(gp[i]);
          sum_gx += static_cast<double>(gp[i]) * static_cast<double>(xh);
        }
        gb[ch] += static_cast<T>(sum_g);
        gg[ch] += static_cast<T>(sum_gx);
        T mg = static_cast<T>(sum_g / static_cast<double>(hw));
        T mgx = static_cast<T>(sum_gx / static_cast<double>(hw));
        for (std::int64_t i = 0; i < hw; ++i) {
          T xh = (ip[i] - mean) * inv;
          gxp[i] += vg[ch] * inv * (gp[i] - mg - xh * mgx);
        }
      }
    });
  }

  int upsample2x(int x) {
    const Tensor<T>& vx = value(x);
    if (vx.dim() != 3) throw std::invalid_argument("upsample2x: expected (C,H,W)");
    int c = vx.size(0), h = vx.size(1), w = vx.size(2);
    Tensor<T> out({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          T v = vx.at(ch, y, xx);
          out.at(ch, 2 * y, 2 * xx) = v;
          out.at(ch, 2 * y, 2 * xx + 1) = v;
          out.at(ch, 2 * y + 1, 2 * xx) = v;
          out.at(ch, 2 * y + 1, 2 * xx + 1) = v;
        }
      }
    }
    return push(std::move(out), [x](Tape& t, Node& n) {
      Tensor<T>& gx = t.mutable_grad(x);
      int c = gx.size(0), h = gx.size(1), w = gx.size(2);
      for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
          for (int xx = 0; xx < w; ++xx) {
            gx.at(ch, y, xx) += n.grad.at(ch, 2 * y, 2 * xx) + n.grad.at(ch, 2 * y, 2 * xx + 1) +
                                n.grad.at(ch, 2 * y + 1, 2 * xx) +
                                n.grad.at(ch, 2 * y + 1, 2 * xx + 1);
          }
        }
      }
    });
  }

  // ---- losses ----

  // mean over pixels of -log softmax(logits)[label]
  int softmax_ce(int logits, const Tensor<std::int32_t>& label) {
    const Tensor<T>& vl = value(logits);
    if (vl.dim() != 3) throw std::invalid_argument("softmax_ce: expected (K,H,W) logits");
    int k = vl.size(0), h = vl.size(1), w = vl.size(2);
    if (label.dim() != 2 || label.size(0) != h || label.size(1) != w) {
      throw std::invalid_argument("softmax_ce: label shape mismatch");
    }
    std::int64_t npix = static_cast<std::int64_t>(h) * w;
    double loss = 0;
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        std::int32_t cls = label.at(y, xx);
        if (cls < 0 || cls >= k) throw std::invalid_argument("softmax_ce: label out of range");
        double m = -1e300;
        for (int c = 0; c < k; ++c) m = std::max(m, static_cast<double>(vl.at(c, y, xx)));
        double se = 0;
        for (int c = 0; c < k; ++c) se += std::exp(static_cast<double>(vl.at(c, y, xx)) - m);
        loss += m + std::log(se) - static_cast<double>(vl.at(cls, y, xx));
      }
    }
    Tensor<T> out({1});
    out[0] = static_cast<T>(loss / static_cast<double>(npix));
    auto lbl = std::make_shared<Tensor<std::int32_t>>(label);
    return push(std::move(out), [logits, lbl, npix](Tape& t, Node& n) {
      const Tensor<T>& vl = t.value(logits);
      Tensor<T>& gl = t.mutable_grad(logits);
      int k = vl.size(0), h = vl.size(1), w = vl.size(2);
      T g = n.grad[0] / static_cast<T>(npix);
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          double m = -1e300;
          for (int c = 0; c < k; ++c) m = std::max(m, static_cast<double>(vl.at(c, y, xx)));
          double se = 0;
          for (int c = 0; c < k; ++c) se += std::exp(static_cast<double>(vl.at(c, y, xx)) - m);
          std::int32_t cls = lbl->at(y, xx);
          for (int c = 0; c < k; ++c) {
            double p = std::exp(static_cast<double>(vl.at(c, y, xx)) - m) / se;
            gl.at(c, y, xx) += g * static_cast<T>(p - (c == cls ? 1.0 : 0.0));
          }
        }
      }
    });
  }

  // mean over pixels of -sum_k targets_k * log softmax(logits)_k; targets are
  // constants (no gradient flows into them)
  int soft_ce(int logits, const Tensor<T>& targets) {
    const Tensor<T>& vl = value(logits);
    if (vl.dim() != 3) throw std::invalid_argument("soft_ce: expected (K,H,W) logits");
    if (!vl.same_shape(targets)) throw std::invalid_argument("soft_ce: target shape mismatch");
    int k = vl.size(0), h = vl.size(1), w = vl.size(2);
    std::int64_t npix = static_cast<std::int64_t>(h) * w;
    double loss = 0;
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        double m = -1e300;
        for (int c = 0; c < k; ++c) m = std::max(m, static_cast<double>(vl.at(c, y, xx)));
        double se = 0;
        for (int c = 0; c < k; ++c) se += std::exp(static_cast<double>(vl.at(c, y, xx)) - m);
        double lse = m + std::log(se);
        for (int c = 0; c < k; ++c) {
          loss += static_cast<double>(targets.at(c, y, xx)) *
                  (lse - static_cast<double>(vl.at(c, y, xx)));
        }
      }
    }
    Tensor<T> out({1});
    out[0] = static_cast<T>(loss / static_cast<double>(npix));
    auto tgt = std::make_shared<Tensor<T>>(targets);
    return push(std::move(out), [logits, tgt, npix](Tape& t, Node& n) {
      const Tensor<T>& vl = t.value(logits);
      Tensor<T>& gl = t.mutable_grad(logits);
      int k = vl.size(0), h = vl.size(1), w = vl.size(2);
      T g = n.grad[0] / static_cast<T>(npix);
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          double m = -1e300;
          for (int c = 0; c < k; ++c) m = std::max(m, static_cast<double>(vl.at(c, y, xx)));
          double se = 0, ts = 0;
          for (int c = 0; c < k; ++c) {
            se += std::exp(static_cast<double>(vl.at(c, y, xx)) - m);
            ts += static_cast<double>(tgt->at(c, y, xx));
          }
          for (int c = 0; c < k; ++c) {
            double p = std::exp(static_cast<double>(vl.at(c, y, xx)) - m) / se;
            gl.at(c, y, xx) +=
                g * static_cast<T>(ts * p - static_cast<double>(tgt->at(c, y, xx)));
          }
        }
      }
    });
  }

  // ---- consistency chain ----

  // per-channel cosine similarity between two (D,h,w) tensors -> (D)
  int channel_cosine(int a, int b) {
    check_same(a, b, "channel_cosine");
    const Tensor<T>& va = value(a);
    const Tensor<T>& vb = value(b);
    if (va.dim() != 3) throw std::invalid_argument("channel_cosine: expected (D,h,w)");
    int d = va.size(0);
    std::int64_t hw = static_cast<std::int64_t>(va.size(1)) * va.size(2);
    Tensor<T> out({d});
    for (int ch = 0; ch < d; ++ch) {
      const T* pa = va.data() + ch * hw;
      const T* pb = vb.data() + ch * hw;
      double dot = 0, na = 0, nb = 0;
      for (std::int64_t i = 0; i < hw; ++i) {
        dot += static_cast<double>(pa[i]) * pb[i];
        na += static_cast<double>(pa[i]) * pa[i];
        nb += static_cast<double>(pb[i]) * pb[i];
      }
      out[ch] = (na == 0 || nb == 0)
                    ? T(0)
                    : static_cast<T>(dot / (std::sqrt(na) * std::sqrt(nb)));
    }
    return push(std::move(out), [a, b](Tape& t, Node& n) {
      const Tensor<T>& va = t.value(a);
      const Tensor<T>& vb = t.value(b);
      Tensor<T>& ga = t.mutable_grad(a);
      Tensor<T>& gb = t.mutable_grad(b);
      int d = va.size(0);
      std::int64_t hw = static_cast<std::int64_t>(va.size(1)) * va.size(2);
      for (int ch = 0; ch < d; ++ch) {
        const T* pa = va.data() + ch * hw;
        const T* pb = vb.data() + ch * hw;
        T* gpa = ga.data() + ch * hw;
        T* gpb = gb.data() + ch * hw;
        double dot = 0, na2 = 0, nb2 = 0;
        for (std::int64_t i = 0; i < hw; ++i) {
          dot += static_cast<double>(pa[i]) * pb[i];
          na2 += static_cast<double>(pa[i]) * pa[i];
          nb2 += static_cast<double>(pb[i]) * pb[i];
        }
        if (na2 == 0 || nb2 == 0) continue;  // cosine pinned to 0, zero gradient
        double na = std::sqrt(na2), nb = std::sqrt(nb2);
        double c = dot / (na * nb);
        double g = static_cast<double>(n.grad[ch]);
        for (std::int64_t i = 0; i < hw; ++i) {
          gpa[i] += static_cast<T>(g * (static_cast<double>(pb[i]) / (na * nb) -
                                        c * static_cast<double>(pa[i]) / na2));
          gpb[i] += static_cast<T>(g * (static_cast<double>(pa[i]) / (na * nb) -
                                        c * static_cast<double>(pb[i]) / nb2));
        }
      }
    });
  }

  // q = normalize((c + 1)/2 + eps) over the channel axis
  int prob_normalize(int c, T eps) {
    const Tensor<T>& vc = value(c);
    if (vc.dim() != 1 || vc.numel() == 0) {
      throw std::invalid_argument("prob_normalize: expected non-empty vector");
    }
    std::int64_t d = vc.numel();
    double sum = 0;
    Tensor<T> out(vc.shape());
    for (std::int64_t i = 0; i < d; ++i) {
      double x = (static_cast<double>(vc[i]) + 1.0) / 2.0 + static_cast<double>(eps);
      out[i] = static_cast<T>(x);
      sum += x;
    }
    for (std::int64_t i = 0; i < d; ++i) out[i] = static_cast<T>(static_cast<double>(out[i]) / sum);
    auto total = std::make_shared<double>(sum);
    return push(std::move(out), [c, total](Tape& t, Node& n) {
      Tensor<T>& gc = t.mutable_grad(c);
      std::int64_t d = n.grad.numel();
      double dotgq = 0;
      for (std::int64_t i = 0; i < d; ++i) {
        dotgq += static_cast<double>(n.grad[i]) * static_cast<double>(n.value[i]);
      }
      for (std::int64_t i = 0; i < d; ++i) {
        gc[i] += static_cast<T>(0.5 * (static_cast<double>(n.grad[i]) - dotgq) / *total);
      }
    });
  }

  // sum_i q1 log(q1/m) + q2 log(q2/m), m = (q1+q2)/2
  int js_divergence(int q1, int q2) {
    check_same(q1, q2, "js_divergence");
    const Tensor<T>& a = value(q1);
    const Tensor<T>& b = value(q2);
    double loss = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
      double x = static_cast<double>(a[i]);
      double y = static_cast<double>(b[i]);
      double m = 0.5 * (x + y);
      loss += x * std::log(x / m) + y * std::log(y / m);
    }
    Tensor<T> out({1});
    out[0] = static_cast<T>(loss);
    return push(std::move(out), [q1, q2](Tape& t, Node& n) {
      const Tensor<T>& a = t.value(q1);
      const Tensor<T>& b = t.value(q2);
      Tensor<T>& ga = t.mutable_grad(q1);
      Tensor<T>& gb = t.mutable_grad(q2);
      double g = static_cast<double>(n.grad[0]);
      for (std::int64_t i = 0; i < a.numel(); ++i) {
        double x = static_cast<double>(a[i]);
        double y = static_cast<double>(b[i]);
        double m = 0.5 * (x + y);
        ga[i] += static_cast<T>(g * std::log(x / m));
        gb[i] += static_cast<T>(g * std::log(y / m));
      }
    });
  }

  // ---- driver ----

  void backward(int id) {
    Node& root = nodes_.at(static_cast<std::size_t>(id));
    if (root.value.numel() != 1) throw std::invalid_argument("backward: root must be a scalar");
    root.grad.fill(T(1));
    for (int i = id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.backprop) n.backprop(*this);
      if (n.param) {
        Tensor<T>& pg = n.param->grad;
        for (std::int64_t j = 0; j < pg.numel(); ++j) pg[j] += n.grad[j];
      }
    }
  }

  // test hook: corrupt a node's backward pass by negating its incoming grad
  void inject_backward_sign_flip(int id) { flip_ids_.push_back(id); }

  Tensor<T>& mutable_grad(int id) { return nodes_.at(static_cast<std::size_t>(id)).grad; }

 private:
  static void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
    for (std::int64_t i = 0; i < dst.numel(); ++i) dst[i] += src[i];
  }

  void check_same(int a, int b, const char* op) const {
    if (!value(a).same_shape(value(b))) {
      throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
  }

  int push(Tensor<T> v, std::function<void(Tape&, Node&)> bp) {
    Node n;
    n.grad = Tensor<T>(v.shape());
    n.value = std::move(v);
    if (bp) {
      int id = static_cast<int>(nodes_.size());
      n.backprop = [bp, id](Tape& t) {
        Node& self = t.nodes_[static_cast<std::size_t>(id)];
        for (int f : t.flip_ids_) {
          if (f == id) {
            for (std::int64_t j = 0; j < self.grad.numel(); ++j) self.grad[j] = -self.grad[j];
            break;
          }
        }
        bp(t, self);
      };
    }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
  std::vector<int> flip_ids_;
};

}  // namespace magic
