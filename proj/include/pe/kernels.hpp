#pragma once

#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pe::kernels {

// Worker count used by the parallel kernels. 1 = serial path. Results are
// bitwise identical for any count: every output element is written by exactly
// one thread and its accumulation order is fixed by the loop structure, never
// by the schedule.
int workers();
void set_workers(int n);

namespace detail {

// One output row of conv2d. in: HxWxC, kernels: KxKxCxF, out row: WoxF.
template <typename T>
inline void conv2d_row(const T* in, int H, int W, int C, const T* k, int K, int F,
                       const T* bias, int stride, int pad, int oy, T* out_row, int Wo) {
  std::vector<T> acc(size_t(F));
  for (int ox = 0; ox < Wo; ++ox) {
    for (int f = 0; f < F; ++f) acc[size_t(f)] = bias ? bias[f] : T(0);
    const int iy0 = oy * stride - pad;
    const int ix0 = ox * stride - pad;
    for (int ky = 0; ky < K; ++ky) {
      const int iy = iy0 + ky;
      if (iy < 0 || iy >= H) continue;
      for (int kx = 0; kx < K; ++kx) {
        const int ix = ix0 + kx;
        if (ix < 0 || ix >= W) continue;
        const T* in_px = in + (size_t(iy) * W + ix) * C;
        const T* k_px = k + (size_t(ky) * K + kx) * C * F;
        for (int c = 0; c < C; ++c) {
          const T a = in_px[c];
          const T* k_row = k_px + size_t(c) * F;
          for (int f = 0; f < F; ++f) acc[size_t(f)] += a * k_row[f];
        }
      }
    }
    T* o = out_row + size_t(ox) * F;
    for (int f = 0; f < F; ++f) o[f] = acc[size_t(f)];
  }
}

// Gradient w.r.t. one input row (gather over the output positions that saw it).
template <typename T>
inline void conv2d_grad_in_row(const T* gout, int Ho, int Wo, int F, const T* k, int K, int C,
                               int stride, int pad, int iy, int W, int H, T* gin_row) {
  (void)H;
  for (int ix = 0; ix < W; ++ix) {
    T* g = gin_row + size_t(ix) * C;
    for (int ky = 0; ky < K; ++ky) {
      const int num_y = iy + pad - ky;
      if (num_y < 0 || num_y % stride != 0) continue;
      const int oy = num_y / stride;
      if (oy >= Ho) continue;
      for (int kx = 0; kx < K; ++kx) {
        const int num_x = ix + pad - kx;
        if (num_x < 0 || num_x % stride != 0) continue;
        const int ox = num_x / stride;
        if (ox >= Wo) continue;
        const T* go = gout + (size_t(oy) * Wo + ox) * F;
        const T* k_px = k + (size_t(ky) * K + kx) * C * F;
        for (int c = 0; c < C; ++c) {
          const T* k_row = k_px + size_t(c) * F;
          T s = T(0);
          for (int f = 0; f < F; ++f) s += go[f] * k_row[f];
          g[c] += s;
        }
      }
    }
  }
}

// Gradient w.r.t. one kernel tap (ky,kx,c,:) — gather over output positions.
template <typename T>
inline void conv2d_grad_k_tap(const T* in, int H, int W, int C, const T* gout, int Ho, int Wo,
                              int F, int stride, int pad, int ky, int kx, int c, T* gk_row) {
  for (int oy = 0; oy < Ho; ++oy) {
    const int iy = oy * stride - pad + ky;
    if (iy < 0 || iy >= H) continue;
    for (int ox = 0; ox < Wo; ++ox) {
      const int ix = ox * stride - pad + kx;
      if (ix < 0 || ix >= W) continue;
      const T a = in[(size_t(iy) * W + ix) * C + c];
      const T* go = gout + (size_t(oy) * Wo + ox) * F;
      for (int f = 0; f < F; ++f) gk_row[f] += a * go[f];
    }
  }
}

}  // namespace detail

// Production kernels. Parallelized over independent output slices when
// workers() > 1; identical arithmetic either way.

template <typename T>
void conv2d_forward(const T* in, int H, int W, int C, const T* k, int K, int F, const T* bias,
                    int stride, int pad, T* out, int Ho, int Wo) {
  const int nw = workers();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nw) if (nw > 1)
#endif
  for (int oy = 0; oy < Ho; ++oy)
    detail::conv2d_row(in, H, W, C, k, K, F, bias, stride, pad, oy, out + size_t(oy) * Wo * F, Wo);
}

template <typename T>
void conv2d_backward_input(const T* gout, int Ho, int Wo, int F, const T* k, int K, int C,
                           int stride, int pad, T* gin, int H, int W) {
  const int nw = workers();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nw) if (nw > 1)
#endif
  for (int iy = 0; iy < H; ++iy)
    detail::conv2d_grad_in_row(gout, Ho, Wo, F, k, K, C, stride, pad, iy, W, H,
                               gin + size_t(iy) * W * C);
}

// gk accumulates (callers zero it or rely on += semantics), gbias likewise.
template <typename T>
void conv2d_backward_weights(const T* in, int H, int W, int C, const T* gout, int Ho, int Wo,
                             int F, int K, int stride, int pad, T* gk, T* gbias) {
  const int nw = workers();
  const int taps = K * K * C;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nw) if (nw > 1)
#endif
  for (int t = 0; t < taps; ++t) {
    const int ky = t / (K * C);
    const int kx = (t / C) % K;
    const int c = t % C;
    detail::conv2d_grad_k_tap(in, H, W, C, gout, Ho, Wo, F, stride, pad, ky, kx, c,
                              gk + size_t(t) * F);
  }
  if (gbias) {
    for (int f = 0; f < F; ++f) {
      T s = T(0);
      for (int i = 0; i < Ho * Wo; ++i) s += gout[size_t(i) * F + f];
      gbias[f] += s;
    }
  }
}

// out[i] = bias[i] + sum_j w[i*N+j] * in[j]
template <typename T>
void dense_forward(const T* in, int N, const T* w, const T* bias, int M, T* out) {
  const int nw = workers();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nw) if (nw > 1 && M >= 64)
#endif
  for (int i = 0; i < M; ++i) {
    const T* wr = w + size_t(i) * N;
    T s = bias ? bias[i] : T(0);
    for (int j = 0; j < N; ++j) s += wr[j] * in[j];
    out[i] = s;
  }
}

template <typename T>
void dense_backward(const T* in, int N, const T* w, int M, const T* gout, T* gin, T* gw, T* gb) {
  const int nw = workers();
  if (gin) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nw) if (nw > 1 && N >= 64)
#endif
    for (int j = 0; j < N; ++j) {
      T s = T(0);
      for (int i = 0; i < M; ++i) s += w[size_t(i) * N + j] * gout[i];
      gin[j] += s;
    }
  }
  if (gw) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nw) if (nw > 1 && M >= 64)
#endif
    for (int i = 0; i < M; ++i) {
      T* gr = gw + size_t(i) * N;
      const T g = gout[i];
      for (int j = 0; j < N; ++j) gr[j] += g * in[j];
    }
  }
  if (gb)
    for (int i = 0; i < M; ++i) gb[i] += gout[i];
}

// Naive reference implementations, kept for the correctness tests and the
// kernel benchmark. Textbook loops, no parallelism, no tiling.
namespace reference {

template <typename T>
void conv2d_forward(const T* in, int H, int W, int C, const T* k, int K, int F, const T* bias,
                    int stride, int pad, T* out, int Ho, int Wo) {
  for (int oy = 0; oy < Ho; ++oy)
    for (int ox = 0; ox < Wo; ++ox)
      for (int f = 0; f < F; ++f) {
        T s = bias ? bias[f] : T(0);
        for (int ky = 0; ky < K; ++ky)
          for (int kx = 0; kx < K; ++kx) {
            int iy = oy * stride - pad + ky;
            int ix = ox * stride - pad + kx;
            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
            for (int c = 0; c < C; ++c)
              s += in[(size_t(iy) * W + ix) * C + c] * k[((size_t(ky) * K + kx) * C + c) * F + f];
          }
        out[(size_t(oy) * Wo + ox) * F + f] = s;
      }
}

template <typename T>
void dense_forward(const T* in, int N, const T* w, const T* bias, int M, T* out) {
  for (int i = 0; i < M; ++i) {
    T s = bias ? bias[i] : T(0);
    for (int j = 0; j < N; ++j) s += w[size_t(i) * N + j] * in[j];
    out[i] = s;
  }
}

}  // namespace reference

}  // namespace pe::kernels
