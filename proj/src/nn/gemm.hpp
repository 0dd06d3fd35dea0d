#pragma once

#include <algorithm>
#include <cstddef>

// Dense row-major matrix kernels shared by the float and int8 engines.

namespace retina::nn::detail {

/// C[M x N] += A[M x K] * B[K x N]. Four rows of C are updated per pass
/// over a column block so each load of B feeds four multiply-adds.
template <class T, class Acc = T>
void gemm_nn(int M, int N, int K, const T* __restrict A, const T* __restrict B, Acc* __restrict C) {
  constexpr int kBlock = 256;
  for (int j0 = 0; j0 < N; j0 += kBlock) {
    const int jn = std::min(kBlock, N - j0);
    int i = 0;
    for (; i + 4 <= M; i += 4) {
      Acc* __restrict c0 = C + static_cast<std::size_t>(i) * N + j0;
      Acc* __restrict c1 = c0 + N;
      Acc* __restrict c2 = c1 + N;
      Acc* __restrict c3 = c2 + N;
      for (int k = 0; k < K; ++k) {
        const Acc a0 = A[static_cast<std::size_t>(i) * K + k];
        const Acc a1 = A[static_cast<std::size_t>(i + 1) * K + k];
        const Acc a2 = A[static_cast<std::size_t>(i + 2) * K + k];
        const Acc a3 = A[static_cast<std::size_t>(i + 3) * K + k];
        const T* __restrict b = B + static_cast<std::size_t>(k) * N + j0;
        for (int j = 0; j < jn; ++j) {
          const Acc bj = b[j];
          c0[j] += a0 * bj;
          c1[j] += a1 * bj;
          c2[j] += a2 * bj;
          c3[j] += a3 * bj;
        }
      }
    }
    for (; i < M; ++i) {
      Acc* __restrict c = C + static_cast<std::size_t>(i) * N + j0;
      for (int k = 0; k < K; ++k) {
        const Acc a = A[static_cast<std::size_t>(i) * K + k];
        const T* __restrict b = B + static_cast<std::size_t>(k) * N + j0;
        for (int j = 0; j < jn; ++j) c[j] += a * static_cast<Acc>(b[j]);
      }
    }
  }
}

/// C[M x N] += A[M x K] * B[N x K]^T, each entry a double-accumulated dot.
template <class T, class Out>
void gemm_nt(int M, int N, int K, const T* A, const T* B, Out* C) {
  for (int i = 0; i < M; ++i) {
    const T* a = A + static_cast<std::size_t>(i) * K;
    for (int j = 0; j < N; ++j) {
      const T* b = B + static_cast<std::size_t>(j) * K;
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += static_cast<double>(a[k]) * b[k];
      C[static_cast<std::size_t>(i) * N + j] += static_cast<Out>(s);
    }
  }
}

/// C[M x N] += A[K x M]^T * B[K x N].
template <class T>
void gemm_tn(int M, int N, int K, const T* __restrict A, const T* __restrict B, T* __restrict C) {
  for (int k = 0; k < K; ++k) {
    const T* __restrict b = B + static_cast<std::size_t>(k) * N;
    for (int i = 0; i < M; ++i) {
      const T a = A[static_cast<std::size_t>(k) * M + i];
      if (a == T(0)) continue;
      T* __restrict c = C + static_cast<std::size_t>(i) * N;
      for (int j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

/// Unfolds one CHW sample into a (C*k*k) x (Ho*Wo) matrix; out-of-image
/// taps are `pad_value`.
template <class T>
void im2col(const T* x, int C, int H, int W, int k, int stride, int pad, int Ho, int Wo, T* col, T pad_value = T(0)) {
  const std::size_t hw = static_cast<std::size_t>(Ho) * Wo;
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * hw;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * Wo;
          if (iy < 0 || iy >= H) {
            std::fill(dst, dst + Wo, pad_value);
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * H + iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix < 0 || ix >= W) ? pad_value : src[ix];
          }
        }
      }
}

/// Adjoint of im2col: scatters-adds the column matrix back into a sample.
template <class T>
void col2im(const T* col, int C, int H, int W, int k, int stride, int pad, int Ho, int Wo, T* x) {
  const std::size_t hw = static_cast<std::size_t>(Ho) * Wo;
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * hw;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          T* dst = x + (static_cast<std::size_t>(c) * H + iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) dst[ix] += row[static_cast<std::size_t>(oy) * Wo + ox];
          }
        }
      }
}

}  // namespace retina::nn::detail
