#include "phosc/net/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <vector>

namespace phosc::net::kernels {

namespace {
std::atomic<Mode> g_mode{Mode::kParallel};

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr long long kParallelThreshold = 1 << 16;
}  // namespace

Mode mode() { return g_mode.load(std::memory_order_relaxed); }
void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }

// ---------------------------------------------------------------------------
// serial reference

namespace serial {

template <class T>
void matmul_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      T acc = 0;
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] += acc;
    }
}

template <class T>
void matmul_tn_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      T acc = 0;
      for (int p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] += acc;
    }
}

template <class T>
void matmul_nt_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      T acc = 0;
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] += acc;
    }
}

template <class T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* w, const T* bias, T* out) {
  for (int o = 0; o < g.out_c; ++o)
    for (int y = 0; y < g.out_h; ++y)
      for (int x = 0; x < g.out_w; ++x) {
        T acc = bias[o];
        for (int c = 0; c < g.in_c; ++c)
          for (int ky = 0; ky < g.kernel; ++ky)
            for (int kx = 0; kx < g.kernel; ++kx) {
              const int iy = y * g.stride - g.pad + ky;
              const int ix = x * g.stride - g.pad + kx;
              if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
              acc += w[((o * g.in_c + c) * g.kernel + ky) * g.kernel + kx] * in[(c * g.in_h + iy) * g.in_w + ix];
            }
        out[(o * g.out_h + y) * g.out_w + x] = acc;
      }
}

template <class T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* w, const T* grad_out, T* grad_in, T* grad_w,
                     T* grad_b) {
  std::fill(grad_in, grad_in + static_cast<std::size_t>(g.in_c) * g.in_h * g.in_w, T{0});
  for (int o = 0; o < g.out_c; ++o)
    for (int y = 0; y < g.out_h; ++y)
      for (int x = 0; x < g.out_w; ++x) {
        const T go = grad_out[(o * g.out_h + y) * g.out_w + x];
        grad_b[o] += go;
        for (int c = 0; c < g.in_c; ++c)
          for (int ky = 0; ky < g.kernel; ++ky)
            for (int kx = 0; kx < g.kernel; ++kx) {
              const int iy = y * g.stride - g.pad + ky;
              const int ix = x * g.stride - g.pad + kx;
              if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
              const std::size_t wi = static_cast<std::size_t>(((o * g.in_c + c) * g.kernel + ky) * g.kernel + kx);
              const std::size_t ii = static_cast<std::size_t>((c * g.in_h + iy) * g.in_w + ix);
              grad_w[wi] += go * in[ii];
              grad_in[ii] += go * w[wi];
            }
      }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP-parallel, vectorisation-friendly

namespace parallel {

namespace {

// Dot product with eight independent accumulators so the compiler can keep
// them in vector lanes without reassociating a single sum.
template <class T>
T dot(const T* a, const T* b, int n) {
  T acc[8] = {};
  int p = 0;
  for (; p + 8 <= n; p += 8)
    for (int l = 0; l < 8; ++l) acc[l] += a[p + l] * b[p + l];
  T tail = 0;
  for (; p < n; ++p) tail += a[p] * b[p];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

bool worth_parallel(long long work) { return work >= kParallelThreshold; }

template <class T>
void im2col(const ConvGeometry& g, const T* in, T* cols) {
  const int plane = g.out_h * g.out_w;
  for (int c = 0; c < g.in_c; ++c)
    for (int ky = 0; ky < g.kernel; ++ky)
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* row = cols + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * plane;
        for (int y = 0; y < g.out_h; ++y) {
          const int iy = y * g.stride - g.pad + ky;
          T* dst = row + y * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + g.out_w, T{0});
            continue;
          }
          const T* src = in + (c * g.in_h + iy) * g.in_w;
          for (int x = 0; x < g.out_w; ++x) {
            const int ix = x * g.stride - g.pad + kx;
            dst[x] = (ix >= 0 && ix < g.in_w) ? src[ix] : T{0};
          }
        }
      }
}

template <class T>
void col2im(const ConvGeometry& g, const T* cols, T* out) {
  const int plane = g.out_h * g.out_w;
#pragma omp parallel for if (worth_parallel(static_cast<long long>(g.in_c) * g.kernel * g.kernel * plane))
  for (int c = 0; c < g.in_c; ++c) {
    T* dst_plane = out + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    std::fill(dst_plane, dst_plane + g.in_h * g.in_w, T{0});
    for (int ky = 0; ky < g.kernel; ++ky)
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* row = cols + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * plane;
        for (int y = 0; y < g.out_h; ++y) {
          const int iy = y * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          T* dst = dst_plane + iy * g.in_w;
          for (int x = 0; x < g.out_w; ++x) {
            const int ix = x * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) dst[ix] += row[y * g.out_w + x];
          }
        }
      }
  }
}

template <class T>
std::vector<T>& scratch(int slot) {
  thread_local std::vector<T> buffers[2];
  return buffers[slot];
}

}  // namespace

template <class T>
void matmul_acc(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for if (worth_parallel(static_cast<long long>(m) * k * n))
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T{0}) continue;
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
void matmul_tn_acc(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for if (worth_parallel(static_cast<long long>(m) * k * n))
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = a[static_cast<std::size_t>(p) * m + i];
      if (av == T{0}) continue;
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
void matmul_nt_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  if (m < 8) {
    // Few rows (dense layers on one sample): the transpose would dominate.
    for (int i = 0; i < m; ++i) {
      const T* arow = a + static_cast<std::size_t>(i) * k;
#pragma omp parallel for if (worth_parallel(static_cast<long long>(k) * n))
      for (int j = 0; j < n; ++j) c[static_cast<std::size_t>(i) * n + j] += dot(arow, b + static_cast<std::size_t>(j) * k, k);
    }
    return;
  }
  // Transposing B first turns the inner loop into a contiguous axpy, which
  // vectorizes far better than one horizontal dot product per output.
  std::vector<T> bt(static_cast<std::size_t>(k) * n);
  for (int j = 0; j < n; ++j)
    for (int p = 0; p < k; ++p) bt[static_cast<std::size_t>(p) * n + j] = b[static_cast<std::size_t>(j) * k + p];
  matmul_acc(a, bt.data(), c, m, k, n);
}

template <class T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* w, const T* bias, T* out) {
  const int plane = g.out_h * g.out_w;
  const int patch = g.in_c * g.kernel * g.kernel;
  auto& cols = scratch<T>(0);
  cols.resize(static_cast<std::size_t>(patch) * plane);
  im2col(g, in, cols.data());
  for (int o = 0; o < g.out_c; ++o) std::fill(out + static_cast<std::size_t>(o) * plane, out + static_cast<std::size_t>(o + 1) * plane, bias[o]);
  matmul_acc(w, cols.data(), out, g.out_c, patch, plane);
}

template <class T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* w, const T* grad_out, T* grad_in, T* grad_w,
                     T* grad_b) {
  const int plane = g.out_h * g.out_w;
  const int patch = g.in_c * g.kernel * g.kernel;
  auto& cols = scratch<T>(0);
  cols.resize(static_cast<std::size_t>(patch) * plane);
  im2col(g, in, cols.data());
  for (int o = 0; o < g.out_c; ++o) {
    const T* go = grad_out + static_cast<std::size_t>(o) * plane;
    T s = 0;
    for (int p = 0; p < plane; ++p) s += go[p];
    grad_b[o] += s;
  }
  matmul_nt_acc(grad_out, cols.data(), grad_w, g.out_c, plane, patch);
  auto& dcols = scratch<T>(1);
  dcols.assign(static_cast<std::size_t>(patch) * plane, T{0});
  matmul_tn_acc(w, grad_out, dcols.data(), patch, g.out_c, plane);
  col2im(g, dcols.data(), grad_in);
}

}  // namespace parallel

// ---------------------------------------------------------------------------
// dispatch

template <class T>
void matmul_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  mode() == Mode::kSerial ? serial::matmul_acc(a, b, c, m, k, n) : parallel::matmul_acc(a, b, c, m, k, n);
}
template <class T>
void matmul_tn_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  mode() == Mode::kSerial ? serial::matmul_tn_acc(a, b, c, m, k, n) : parallel::matmul_tn_acc(a, b, c, m, k, n);
}
template <class T>
void matmul_nt_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  mode() == Mode::kSerial ? serial::matmul_nt_acc(a, b, c, m, k, n) : parallel::matmul_nt_acc(a, b, c, m, k, n);
}
template <class T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* w, const T* bias, T* out) {
  mode() == Mode::kSerial ? serial::conv2d_forward(g, in, w, bias, out) : parallel::conv2d_forward(g, in, w, bias, out);
}
template <class T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* w, const T* grad_out, T* grad_in, T* grad_w,
                     T* grad_b) {
  mode() == Mode::kSerial ? serial::conv2d_backward(g, in, w, grad_out, grad_in, grad_w, grad_b)
                          : parallel::conv2d_backward(g, in, w, grad_out, grad_in, grad_w, grad_b);
}

#define PHOSC_INSTANTIATE(NS, T)                                                                   \
  template void NS matmul_acc<T>(const T*, const T*, T*, int, int, int);                          \
  template void NS matmul_tn_acc<T>(const T*, const T*, T*, int, int, int);                       \
  template void NS matmul_nt_acc<T>(const T*, const T*, T*, int, int, int);                       \
  template void NS conv2d_forward<T>(const ConvGeometry&, const T*, const T*, const T*, T*);      \
  template void NS conv2d_backward<T>(const ConvGeometry&, const T*, const T*, const T*, T*, T*, T*);

PHOSC_INSTANTIATE(serial::, float)
PHOSC_INSTANTIATE(serial::, double)
PHOSC_INSTANTIATE(parallel::, float)
PHOSC_INSTANTIATE(parallel::, double)
PHOSC_INSTANTIATE(, float)
PHOSC_INSTANTIATE(, double)

#undef PHOSC_INSTANTIATE

}  // namespace phosc::net::kernels
