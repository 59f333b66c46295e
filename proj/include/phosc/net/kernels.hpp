#pragma once

// Compute kernels behind the layers. Each kernel exists twice:
//   serial::   straightforward loops, the reference used by tests;
//   parallel:: cache-friendly loops (im2col + GEMM for convolution) split
//              across OpenMP threads.
// The unqualified functions dispatch on the process-wide mode.

namespace phosc::net::kernels {

enum class Mode { kSerial, kParallel };

Mode mode();
void set_mode(Mode m);

class ScopedMode {
 public:
  explicit ScopedMode(Mode m) : saved_(mode()) { set_mode(m); }
  ~ScopedMode() { set_mode(saved_); }
  ScopedMode(const ScopedMode&) = delete;
  ScopedMode& operator=(const ScopedMode&) = delete;

 private:
  Mode saved_;
};

struct ConvGeometry {
  int in_c, in_h, in_w;
  int out_c, kernel, stride, pad;
  int out_h, out_w;
};

#define PHOSC_KERNEL_DECLS                                                                        \
  /* C[m x n] += A[m x k] * B[k x n] */                                                           \
  template <class T>                                                                              \
  void matmul_acc(const T* a, const T* b, T* c, int m, int k, int n);                             \
  /* C[m x n] += A[k x m]^T * B[k x n] */                                                         \
  template <class T>                                                                              \
  void matmul_tn_acc(const T* a, const T* b, T* c, int m, int k, int n);                          \
  /* C[m x n] += A[m x k] * B[n x k]^T */                                                         \
  template <class T>                                                                              \
  void matmul_nt_acc(const T* a, const T* b, T* c, int m, int k, int n);                          \
  /* weights (out_c, in_c, kernel, kernel); out is overwritten */                                 \
  template <class T>                                                                              \
  void conv2d_forward(const ConvGeometry& g, const T* in, const T* w, const T* bias, T* out);     \
  /* grad_in is overwritten; grad_w and grad_b accumulate */                                      \
  template <class T>                                                                              \
  void conv2d_backward(const ConvGeometry& g, const T* in, const T* w, const T* grad_out, T* grad_in, \
                       T* grad_w, T* grad_b);

namespace serial {
PHOSC_KERNEL_DECLS
}  // namespace serial

namespace parallel {
PHOSC_KERNEL_DECLS
}  // namespace parallel

PHOSC_KERNEL_DECLS

#undef PHOSC_KERNEL_DECLS

}  // namespace phosc::net::kernels
