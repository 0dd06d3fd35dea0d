#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "retina/core/error.hpp"

namespace retina::nn {

enum class NnErrc {
  ShapeMismatch,
  NonFiniteActivation,
  InvalidConfig,
  InvalidArgument,
  FormatError,
  IoError,
};

const char* to_string(NnErrc code);

using NnError = CodedError<NnErrc>;

struct Shape3 {
  int c = 0;
  int h = 0;
  int w = 0;
  std::size_t size() const { return static_cast<std::size_t>(c) * h * w; }
  bool operator==(const Shape3&) const = default;
};

std::string to_string(const Shape3& s);

/// NCHW batch, row-major.
template <class T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}
  Tensor(int n_, Shape3 s, T fill = T(0)) : Tensor(n_, s.c, s.h, s.w, fill) {}

  Shape3 sample_shape() const { return {c, h, w}; }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  std::size_t size() const { return data.size(); }

  T& at(int in, int ic, int ih, int iw) { return data[index(in, ic, ih, iw)]; }
  const T& at(int in, int ic, int ih, int iw) const { return data[index(in, ic, ih, iw)]; }
  std::size_t index(int in, int ic, int ih, int iw) const {
    return ((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw;
  }
  T* sample(int in) { return data.data() + static_cast<std::size_t>(in) * sample_size(); }
  const T* sample(int in) const { return data.data() + static_cast<std::size_t>(in) * sample_size(); }

  bool operator==(const Tensor&) const = default;
};

using Tensor4 = Tensor<float>;

template <class To, class From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out;
  out.n = t.n;
  out.c = t.c;
  out.h = t.h;
  out.w = t.w;
  out.data.assign(t.data.begin(), t.data.end());
  return out;
}

}  // namespace retina::nn
