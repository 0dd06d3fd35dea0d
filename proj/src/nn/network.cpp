#include "retina/nn/network.hpp"

#include <cmath>
#include <limits>

#include "gemm.hpp"

namespace retina::nn {

namespace {

using detail::col2im;
using detail::gemm_nn;
using detail::gemm_nt;
using detail::gemm_tn;
using detail::im2col;

int window_out(int size, int k, int stride, int pad) { return (size + 2 * pad - k) / stride + 1; }

template <class T>
void check_finite(const Tensor<T>& t, const LayerSpec& l) {
  for (const T v : t.data)
    if (!std::isfinite(v))
      throw NnError(NnErrc::NonFiniteActivation, std::string(to_string(l.kind)) + " produced a non-finite value");
}

template <class T>
Tensor<T> conv_forward(const LayerSpec& l, const Params<T>& p, std::size_t slot, const Tensor<T>& x) {
  const int Ho = window_out(x.h, l.k, l.stride, l.pad), Wo = window_out(x.w, l.k, l.stride, l.pad);
  Tensor<T> y(x.n, l.c_out, Ho, Wo);
  const auto& w = p.tensors[slot].data;
  const int K = l.c_in * l.k * l.k;
  const int N = Ho * Wo;
  const bool direct = l.k == 1 && l.stride == 1 && l.pad == 0;
  std::vector<T> col(direct ? 0 : static_cast<std::size_t>(K) * N);
  for (int n = 0; n < x.n; ++n) {
    T* out = y.sample(n);
    if (l.bias) {
      const auto& b = p.tensors[slot + 1].data;
      for (int c = 0; c < l.c_out; ++c) std::fill(out + static_cast<std::size_t>(c) * N, out + static_cast<std::size_t>(c + 1) * N, b[c]);
    }
    const T* src = x.sample(n);
    if (!direct) {
      im2col(src, x.c, x.h, x.w, l.k, l.stride, l.pad, Ho, Wo, col.data());
      src = col.data();
    }
    gemm_nn(l.c_out, N, K, w.data(), src, out);
  }
  return y;
}

template <class T>
Tensor<T> conv_backward(const LayerSpec& l, const Params<T>& p, std::size_t slot, const Tensor<T>& x,
                        const Tensor<T>& dy, Params<T>& grads) {
  const int Ho = dy.h, Wo = dy.w;
  const int K = l.c_in * l.k * l.k;
  const int N = Ho * Wo;
  const auto& w = p.tensors[slot].data;
  std::vector<double> dw(w.size(), 0.0);
  std::vector<double> db(static_cast<std::size_t>(l.c_out), 0.0);
  Tensor<T> dx(x.n, x.c, x.h, x.w);
  std::vector<T> col(static_cast<std::size_t>(K) * N);
  std::vector<T> dcol(static_cast<std::size_t>(K) * N);
  for (int n = 0; n < x.n; ++n) {
    const T* g = dy.sample(n);
    im2col(x.sample(n), x.c, x.h, x.w, l.k, l.stride, l.pad, Ho, Wo, col.data());
    gemm_nt(l.c_out, K, N, g, col.data(), dw.data());
    for (int c = 0; c < l.c_out; ++c)
      for (int j = 0; j < N; ++j) db[static_cast<std::size_t>(c)] += g[static_cast<std::size_t>(c) * N + j];
    std::fill(dcol.begin(), dcol.end(), T(0));
    gemm_tn(K, N, l.c_out, w.data(), g, dcol.data());
    col2im(dcol.data(), x.c, x.h, x.w, l.k, l.stride, l.pad, Ho, Wo, dx.sample(n));
  }
  auto& gw = grads.tensors[slot].data;
  for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += static_cast<T>(dw[i]);
  if (l.bias) {
    auto& gb = grads.tensors[slot + 1].data;
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += static_cast<T>(db[i]);
  }
  return dx;
}

template <class T>
Tensor<T> dense_forward(const LayerSpec& l, const Params<T>& p, std::size_t slot, const Tensor<T>& x) {
  Tensor<T> y(x.n, l.c_out, 1, 1);
  const auto& w = p.tensors[slot].data;
  const auto& b = p.tensors[slot + 1].data;
  for (int n = 0; n < x.n; ++n) {
    const T* in = x.sample(n);
    for (int o = 0; o < l.c_out; ++o) {
      const T* row = w.data() + static_cast<std::size_t>(o) * l.c_in;
      double s = b[static_cast<std::size_t>(o)];
      for (int i = 0; i < l.c_in; ++i) s += static_cast<double>(row[i]) * in[i];
      y.sample(n)[o] = static_cast<T>(s);
    }
  }
  return y;
}

template <class T>
Tensor<T> dense_backward(const LayerSpec& l, const Params<T>& p, std::size_t slot, const Tensor<T>& x,
                         const Tensor<T>& dy, Params<T>& grads) {
  const auto& w = p.tensors[slot].data;
  auto& gw = grads.tensors[slot].data;
  auto& gb = grads.tensors[slot + 1].data;
  Tensor<T> dx(x.n, x.c, x.h, x.w);
  for (int o = 0; o < l.c_out; ++o) {
    double sb = 0.0;
    for (int n = 0; n < x.n; ++n) sb += dy.sample(n)[o];
    gb[static_cast<std::size_t>(o)] += static_cast<T>(sb);
    for (int i = 0; i < l.c_in; ++i) {
      double s = 0.0;
      for (int n = 0; n < x.n; ++n) s += static_cast<double>(dy.sample(n)[o]) * x.sample(n)[i];
      gw[static_cast<std::size_t>(o) * l.c_in + i] += static_cast<T>(s);
    }
  }
  for (int n = 0; n < x.n; ++n)
    for (int i = 0; i < l.c_in; ++i) {
      double s = 0.0;
      for (int o = 0; o < l.c_out; ++o) s += static_cast<double>(w[static_cast<std::size_t>(o) * l.c_in + i]) * dy.sample(n)[o];
      dx.sample(n)[i] = static_cast<T>(s);
    }
  return dx;
}

template <class T>
Tensor<T> maxpool_forward(const LayerSpec& l, const Tensor<T>& x, std::vector<std::uint32_t>* argmax) {
  const int Ho = window_out(x.h, l.k, l.stride, l.pad), Wo = window_out(x.w, l.k, l.stride, l.pad);
  Tensor<T> y(x.n, x.c, Ho, Wo);
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t o = 0;
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < x.c; ++c) {
      const T* plane = x.data.data() + x.index(n, c, 0, 0);
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          std::uint32_t where = 0;
          for (int ky = 0; ky < l.k; ++ky) {
            const int iy = oy * l.stride - l.pad + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < l.k; ++kx) {
              const int ix = ox * l.stride - l.pad + kx;
              if (ix < 0 || ix >= x.w) continue;
              const T v = plane[iy * x.w + ix];
              if (v > best) {
                best = v;
                where = static_cast<std::uint32_t>(iy * x.w + ix);
              }
            }
          }
          y.data[o] = best;
          if (argmax) (*argmax)[o] = where;
        }
    }
  return y;
}

template <class T>
Tensor<T> maxpool_backward(const Tensor<T>& x, const LayerCache<T>& cache, const Tensor<T>& dy) {
  Tensor<T> dx(x.n, x.c, x.h, x.w);
  const std::size_t plane_out = static_cast<std::size_t>(dy.h) * dy.w;
  const std::size_t plane_in = static_cast<std::size_t>(x.h) * x.w;
  for (std::size_t o = 0; o < dy.size(); ++o) dx.data[(o / plane_out) * plane_in + cache.argmax[o]] += dy.data[o];
  return dx;
}

template <class T>
Tensor<T> gap_forward(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, 1, 1);
  const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < x.c; ++c) {
      const T* plane = x.data.data() + x.index(n, c, 0, 0);
      double s = 0.0;
      for (std::size_t i = 0; i < hw; ++i) s += plane[i];
      y.at(n, c, 0, 0) = static_cast<T>(s / static_cast<double>(hw));
    }
  return y;
}

template <class T>
Tensor<T> gap_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx(x.n, x.c, x.h, x.w);
  const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < x.c; ++c) {
      const T g = static_cast<T>(static_cast<double>(dy.at(n, c, 0, 0)) / static_cast<double>(hw));
      T* plane = dx.data.data() + dx.index(n, c, 0, 0);
      std::fill(plane, plane + hw, g);
    }
  return dx;
}

template <class T>
Tensor<T> bn_forward(const LayerSpec& l, const Params<T>& p, std::size_t slot, const Tensor<T>& x, Mode mode,
                     LayerCache<T>* cache) {
  const auto& gamma = p.tensors[slot].data;
  const auto& beta = p.tensors[slot + 1].data;
  const auto& rmean = p.tensors[slot + 2].data;
  const auto& rvar = p.tensors[slot + 3].data;
  const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
  const double m = static_cast<double>(hw) * x.n;
  std::vector<double> mean(static_cast<std::size_t>(l.c_out)), var(mean.size()), inv(mean.size());
  for (int c = 0; c < l.c_out; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    if (mode == Mode::Train) {
      double s = 0.0;
      for (int n = 0; n < x.n; ++n) {
        const T* plane = x.data.data() + x.index(n, c, 0, 0);
        for (std::size_t i = 0; i < hw; ++i) s += plane[i];
      }
      mean[ci] = s / m;
      double v = 0.0;
      for (int n = 0; n < x.n; ++n) {
        const T* plane = x.data.data() + x.index(n, c, 0, 0);
        for (std::size_t i = 0; i < hw; ++i) v += (plane[i] - mean[ci]) * (plane[i] - mean[ci]);
      }
      var[ci] = v / m;
    } else {
      mean[ci] = rmean[ci];
      var[ci] = rvar[ci];
    }
    inv[ci] = 1.0 / std::sqrt(var[ci] + kBatchNormEps);
  }
  Tensor<T> y(x.n, x.c, x.h, x.w);
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < l.c_out; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      const T* in = x.data.data() + x.index(n, c, 0, 0);
      T* out = y.data.data() + y.index(n, c, 0, 0);
      for (std::size_t i = 0; i < hw; ++i)
        out[i] = static_cast<T>(gamma[ci] * ((in[i] - mean[ci]) * inv[ci]) + beta[ci]);
    }
  if (cache) {
    cache->mean = std::move(mean);
    cache->var = std::move(var);
    cache->inv_std = std::move(inv);
  }
  return y;
}

template <class T>
Tensor<T> bn_backward(const LayerSpec& l, const Params<T>& p, std::size_t slot, const Tensor<T>& x, Mode mode,
                      const LayerCache<T>& cache, const Tensor<T>& dy, Params<T>& grads) {
  const auto& gamma = p.tensors[slot].data;
  auto& ggamma = grads.tensors[slot].data;
  auto& gbeta = grads.tensors[slot + 1].data;
  const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
  const double m = static_cast<double>(hw) * x.n;
  Tensor<T> dx(x.n, x.c, x.h, x.w);
  for (int c = 0; c < l.c_out; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const double mean = cache.mean[ci], inv = cache.inv_std[ci];
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < x.n; ++n) {
      const T* in = x.data.data() + x.index(n, c, 0, 0);
      const T* g = dy.data.data() + dy.index(n, c, 0, 0);
      for (std::size_t i = 0; i < hw; ++i) {
        sum_dy += g[i];
        sum_dy_xhat += g[i] * ((in[i] - mean) * inv);
      }
    }
    ggamma[ci] += static_cast<T>(sum_dy_xhat);
    gbeta[ci] += static_cast<T>(sum_dy);
    const double gm = gamma[ci];
    for (int n = 0; n < x.n; ++n) {
      const T* in = x.data.data() + x.index(n, c, 0, 0);
      const T* g = dy.data.data() + dy.index(n, c, 0, 0);
      T* out = dx.data.data() + dx.index(n, c, 0, 0);
      for (std::size_t i = 0; i < hw; ++i) {
        if (mode == Mode::Train) {
          const double xhat = (in[i] - mean) * inv;
          out[i] = static_cast<T>(gm * inv * (g[i] - sum_dy / m - xhat * sum_dy_xhat / m));
        } else {
          out[i] = static_cast<T>(gm * inv * g[i]);
        }
      }
    }
  }
  return dx;
}

template <class T>
Tensor<T> softmax_forward(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, x.h, x.w);
  const std::size_t d = x.sample_size();
  for (int n = 0; n < x.n; ++n) {
    const T* in = x.sample(n);
    T* out = y.sample(n);
    double mx = in[0];
    for (std::size_t i = 1; i < d; ++i) mx = std::max<double>(mx, in[i]);
    double s = 0.0;
    std::vector<double> e(d);
    for (std::size_t i = 0; i < d; ++i) s += (e[i] = std::exp(in[i] - mx));
    for (std::size_t i = 0; i < d; ++i) out[i] = static_cast<T>(e[i] / s);
  }
  return y;
}

template <class T>
Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(y.n, y.c, y.h, y.w);
  const std::size_t d = y.sample_size();
  for (int n = 0; n < y.n; ++n) {
    const T* s = y.sample(n);
    const T* g = dy.sample(n);
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += static_cast<double>(g[i]) * s[i];
    for (std::size_t i = 0; i < d; ++i) dx.sample(n)[i] = static_cast<T>(s[i] * (g[i] - dot));
  }
  return dx;
}

template <class T>
Tensor<T> run(const std::vector<LayerSpec>& layers, const Params<T>& p, std::size_t slot, Tensor<T> x, Mode mode,
              std::vector<LayerCache<T>>* caches) {
  if (caches) caches->assign(layers.size(), {});
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& l = layers[li];
    LayerCache<T>* cache = caches ? &(*caches)[li] : nullptr;
    const Shape3 expect = infer_shape({l}, x.sample_shape());  // throws ShapeMismatch
    Tensor<T> y;
    switch (l.kind) {
      case LayerKind::Conv2d: y = conv_forward(l, p, slot, x); break;
      case LayerKind::Dense: y = dense_forward(l, p, slot, x); break;
      case LayerKind::ReLU:
        y = x;
        for (auto& v : y.data) v = v > T(0) ? v : T(0);
        break;
      case LayerKind::MaxPool: y = maxpool_forward(l, x, cache ? &cache->argmax : nullptr); break;
      case LayerKind::GlobalAvgPool: y = gap_forward(x); break;
      case LayerKind::BatchNorm: y = bn_forward(l, p, slot, x, mode, cache); break;
      case LayerKind::Softmax:
        y = softmax_forward(x);
        if (cache) cache->output = y;
        break;
      case LayerKind::ResidualAdd: {
        y = run(l.branch, p, slot, x, mode, cache ? &cache->branch : nullptr);
        const auto s = run(l.shortcut, p, slot + tensor_count(l.branch), x, mode, cache ? &cache->shortcut : nullptr);
        for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += s.data[i];
        break;
      }
    }
    if (!(y.sample_shape() == expect)) throw NnError(NnErrc::ShapeMismatch, "internal shape error");
    check_finite(y, l);
    slot += tensor_count(l);
    if (cache) cache->input = std::move(x);
    x = std::move(y);
  }
  return x;
}

template <class T>
Tensor<T> run_backward(const std::vector<LayerSpec>& layers, const Params<T>& p, std::size_t slot, Mode mode,
                       const std::vector<LayerCache<T>>& caches, Tensor<T> dy, Params<T>& grads) {
  std::vector<std::size_t> slots(layers.size());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    slots[li] = slot;
    slot += tensor_count(layers[li]);
  }
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& l = layers[li];
    const auto& c = caches[li];
    const auto& x = c.input;
    Tensor<T> dx;
    switch (l.kind) {
      case LayerKind::Conv2d: dx = conv_backward(l, p, slots[li], x, dy, grads); break;
      case LayerKind::Dense: dx = dense_backward(l, p, slots[li], x, dy, grads); break;
      case LayerKind::ReLU:
        dx = std::move(dy);
        for (std::size_t i = 0; i < dx.data.size(); ++i)
          if (!(x.data[i] > T(0))) dx.data[i] = T(0);
        break;
      case LayerKind::MaxPool: dx = maxpool_backward(x, c, dy); break;
      case LayerKind::GlobalAvgPool: dx = gap_backward(x, dy); break;
      case LayerKind::BatchNorm: dx = bn_backward(l, p, slots[li], x, mode, c, dy, grads); break;
      case LayerKind::Softmax: dx = softmax_backward(c.output, dy); break;
      case LayerKind::ResidualAdd: {
        dx = run_backward(l.branch, p, slots[li], mode, c.branch, dy, grads);
        const auto ds = run_backward(l.shortcut, p, slots[li] + tensor_count(l.branch), mode, c.shortcut, dy, grads);
        for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += ds.data[i];
        break;
      }
    }
    dy = std::move(dx);
  }
  return dy;
}

}  // namespace

template <class T>
Tensor<T> forward(const std::vector<LayerSpec>& layers, const Params<T>& params, const Tensor<T>& x, Mode mode,
                  ForwardCache<T>* cache) {
  check_params(layers, params);
  if (x.n < 1) throw NnError(NnErrc::ShapeMismatch, "empty batch");
  if (x.data.size() != static_cast<std::size_t>(x.n) * x.sample_size())
    throw NnError(NnErrc::ShapeMismatch, "tensor data does not match its shape");
  for (const T v : x.data)
    if (!std::isfinite(v)) throw NnError(NnErrc::NonFiniteActivation, "input contains a non-finite value");
  if (cache) cache->mode = mode;
  return run(layers, params, 0, x, mode, cache ? &cache->layers : nullptr);
}

template <class T>
Backward<T> backward(const std::vector<LayerSpec>& layers, const Params<T>& params, const ForwardCache<T>& cache,
                     const Tensor<T>& grad_out) {
  check_params(layers, params);
  if (cache.layers.size() != layers.size())
    throw NnError(NnErrc::InvalidArgument, "forward cache does not belong to this layer list");
  Backward<T> out;
  out.params = make_params<T>(layers);
  for (auto& t : out.params.tensors) std::fill(t.data.begin(), t.data.end(), T(0));
  out.input = run_backward(layers, params, 0, cache.mode, cache.layers, grad_out, out.params);
  return out;
}

namespace {

void update_running(const std::vector<LayerSpec>& layers, ModelParams& params, std::size_t slot,
                    const std::vector<LayerCache<float>>& caches, double momentum) {
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& l = layers[li];
    if (l.kind == LayerKind::BatchNorm) {
      auto& rm = params.tensors[slot + 2].data;
      auto& rv = params.tensors[slot + 3].data;
      for (std::size_t c = 0; c < rm.size(); ++c) {
        rm[c] = static_cast<float>(momentum * rm[c] + (1.0 - momentum) * caches[li].mean[c]);
        rv[c] = static_cast<float>(momentum * rv[c] + (1.0 - momentum) * caches[li].var[c]);
      }
    } else if (l.kind == LayerKind::ResidualAdd) {
      update_running(l.branch, params, slot, caches[li].branch, momentum);
      update_running(l.shortcut, params, slot + tensor_count(l.branch), caches[li].shortcut, momentum);
    }
    slot += tensor_count(l);
  }
}

}  // namespace

void update_running_stats(const std::vector<LayerSpec>& layers, ModelParams& params, const ForwardCache<float>& cache,
                          double momentum) {
  if (cache.mode != Mode::Train) throw NnError(NnErrc::InvalidArgument, "running stats need a Train-mode cache");
  update_running(layers, params, 0, cache.layers, momentum);
}

Tensor4 to_tensor(const imaging::PlaneTensor& img) { return to_batch({&img}); }

Tensor4 to_batch(const std::vector<const imaging::PlaneTensor*>& images) {
  if (images.empty()) throw NnError(NnErrc::InvalidArgument, "empty batch");
  const auto& first = *images.front();
  Tensor4 t(static_cast<int>(images.size()), first.channels, first.height, first.width);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = *images[n];
    if (img.width != first.width || img.height != first.height || img.channels != first.channels)
      throw NnError(NnErrc::ShapeMismatch, "batch images differ in size");
    float* dst = t.sample(static_cast<int>(n));
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < img.channels; ++c)
          dst[(static_cast<std::size_t>(c) * img.height + y) * img.width + x] = img.at(x, y, c);
  }
  return t;
}

int argmax(const float* values, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::vector<Severity> predict(const Tensor4& logits) {
  std::vector<Severity> out;
  out.reserve(static_cast<std::size_t>(logits.n));
  for (int n = 0; n < logits.n; ++n)
    out.push_back(static_cast<Severity>(argmax(logits.sample(n), static_cast<int>(logits.sample_size()))));
  return out;
}

template Tensor<float> forward<float>(const std::vector<LayerSpec>&, const Params<float>&, const Tensor<float>&, Mode,
                                      ForwardCache<float>*);
template Tensor<double> forward<double>(const std::vector<LayerSpec>&, const Params<double>&, const Tensor<double>&,
                                        Mode, ForwardCache<double>*);
template Backward<float> backward<float>(const std::vector<LayerSpec>&, const Params<float>&,
                                         const ForwardCache<float>&, const Tensor<float>&);
template Backward<double> backward<double>(const std::vector<LayerSpec>&, const Params<double>&,
                                           const ForwardCache<double>&, const Tensor<double>&);

}  // namespace retina::nn
