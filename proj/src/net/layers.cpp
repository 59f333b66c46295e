#include <algorithm>
#include <cmath>
#include <limits>

#include "phosc/net/kernels.hpp"
#include "phosc/net/sequential.hpp"

namespace phosc::net {

namespace {

template <class T>
void init_uniform(Tensor<T>& t, Rng& rng, double fan_in, double fan_out) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-a, a));
}

template <class T>
T sigmoid(T x) {
  return x >= 0 ? T{1} / (T{1} + std::exp(-x)) : std::exp(x) / (T{1} + std::exp(x));
}

// ---------------------------------------------------------------------------

template <class T>
class ConvLayer final : public Layer<T> {
 public:
  ConvLayer(const Conv& c, const Shape& in, const Shape& out)
      : geom_{in[0], in[1], in[2], c.out_channels, c.kernel, c.stride, c.padding, out[1], out[2]} {}

  void register_params(ParamStore<T>& store, const std::string& prefix) override {
    w_ = store.add(prefix + ".weight", {geom_.out_c, geom_.in_c, geom_.kernel, geom_.kernel});
    b_ = store.add(prefix + ".bias", {geom_.out_c});
  }
  void init_params(ParamStore<T>& store, Rng& rng) const override {
    const double k2 = geom_.kernel * geom_.kernel;
    init_uniform(store[w_], rng, geom_.in_c * k2, geom_.out_c * k2);
    store[b_].fill(T{0});
  }
  bool has_params() const override { return true; }
  std::vector<std::size_t> param_indices() const override { return {w_, b_}; }

  void forward(const ParamStore<T>& p, const Tensor<T>& in, Tensor<T>& out, LayerCache<T>&) const override {
    kernels::conv2d_forward(geom_, in.data(), p[w_].data(), p[b_].data(), out.data());
  }
  void backward(const ParamStore<T>& p, const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& gout,
                Tensor<T>& gin, ParamStore<T>& grads, const LayerCache<T>&) const override {
    kernels::conv2d_backward(geom_, in.data(), p[w_].data(), gout.data(), gin.data(), grads[w_].data(),
                             grads[b_].data());
  }

 private:
  kernels::ConvGeometry geom_;
  std::size_t w_ = 0, b_ = 0;
};

// ---------------------------------------------------------------------------

template <class T>
class MaxPoolLayer final : public Layer<T> {
 public:
  MaxPoolLayer(const MaxPool& p, const Shape& in, const Shape& out) : size_(p.size), in_(in), out_(out) {}

  void forward(const ParamStore<T>&, const Tensor<T>& in, Tensor<T>& out, LayerCache<T>& cache) const override {
    cache.indices.resize(out.size());
    const int H = in_[1], W = in_[2], oh = out_[1], ow = out_[2];
    std::size_t o = 0;
    for (int c = 0; c < in_[0]; ++c)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x, ++o) {
          int best = (c * H + y * size_) * W + x * size_;
          for (int dy = 0; dy < size_; ++dy)
            for (int dx = 0; dx < size_; ++dx) {
              const int idx = (c * H + y * size_ + dy) * W + x * size_ + dx;
              if (in[static_cast<std::size_t>(idx)] > in[static_cast<std::size_t>(best)]) best = idx;
            }
          cache.indices[o] = best;
          out[o] = in[static_cast<std::size_t>(best)];
        }
  }
  void backward(const ParamStore<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>& gout, Tensor<T>& gin,
                ParamStore<T>&, const LayerCache<T>& cache) const override {
    gin.fill(T{0});
    for (std::size_t o = 0; o < gout.size(); ++o) gin[static_cast<std::size_t>(cache.indices[o])] += gout[o];
  }

 private:
  int size_;
  Shape in_, out_;
};

// ---------------------------------------------------------------------------

template <class T>
void spp_forward(const Tensor<T>& in, const std::vector<int>& levels, T* out, int* argmax) {
  const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
  std::size_t o = 0;
  for (int h : levels)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < h; ++j) {
        const int y0 = i * H / h, y1 = (i + 1) * H / h;
        const int x0 = j * W / h, x1 = (j + 1) * W / h;
        for (int c = 0; c < C; ++c, ++o) {
          int best = (c * H + y0) * W + x0;
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
              const int idx = (c * H + y) * W + x;
              if (in[static_cast<std::size_t>(idx)] > in[static_cast<std::size_t>(best)]) best = idx;
            }
          argmax[o] = best;
          out[o] = in[static_cast<std::size_t>(best)];
        }
      }
}

template <class T>
class SppLayer final : public Layer<T> {
 public:
  SppLayer(const Spp& s, const Shape&, const Shape&) : levels_(s.levels) {}

  void forward(const ParamStore<T>&, const Tensor<T>& in, Tensor<T>& out, LayerCache<T>& cache) const override {
    cache.indices.resize(out.size());
    spp_forward(in, levels_, out.data(), cache.indices.data());
  }
  void backward(const ParamStore<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>& gout, Tensor<T>& gin,
                ParamStore<T>&, const LayerCache<T>& cache) const override {
    gin.fill(T{0});
    for (std::size_t o = 0; o < gout.size(); ++o) gin[static_cast<std::size_t>(cache.indices[o])] += gout[o];
  }

 private:
  std::vector<int> levels_;
};

// ---------------------------------------------------------------------------

// Weight stored as (in, out) so the forward product streams over outputs.
template <class T>
class DenseLayer final : public Layer<T> {
 public:
  DenseLayer(const Dense& d, const Shape& in, const Shape&)
      : rows_(in.size() == 2 ? in[0] : 1), in_dim_(in.back()), out_dim_(d.out) {}

  void register_params(ParamStore<T>& store, const std::string& prefix) override {
    w_ = store.add(prefix + ".weight", {in_dim_, out_dim_});
    b_ = store.add(prefix + ".bias", {out_dim_});
  }
  void init_params(ParamStore<T>& store, Rng& rng) const override {
    init_uniform(store[w_], rng, in_dim_, out_dim_);
    store[b_].fill(T{0});
  }
  bool has_params() const override { return true; }
  std::vector<std::size_t> param_indices() const override { return {w_, b_}; }

  void forward(const ParamStore<T>& p, const Tensor<T>& in, Tensor<T>& out, LayerCache<T>&) const override {
    const T* b = p[b_].data();
    for (int r = 0; r < rows_; ++r) std::copy(b, b + out_dim_, out.data() + static_cast<std::size_t>(r) * out_dim_);
    kernels::matmul_acc(in.data(), p[w_].data(), out.data(), rows_, in_dim_, out_dim_);
  }
  void backward(const ParamStore<T>& p, const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& gout,
                Tensor<T>& gin, ParamStore<T>& grads, const LayerCache<T>&) const override {
    kernels::matmul_tn_acc(in.data(), gout.data(), grads[w_].data(), in_dim_, rows_, out_dim_);
    T* gb = grads[b_].data();
    for (int r = 0; r < rows_; ++r)
      for (int k = 0; k < out_dim_; ++k) gb[k] += gout[static_cast<std::size_t>(r) * out_dim_ + k];
    gin.fill(T{0});
    kernels::matmul_nt_acc(gout.data(), p[w_].data(), gin.data(), rows_, out_dim_, in_dim_);
  }

 private:
  int rows_, in_dim_, out_dim_;
  std::size_t w_ = 0, b_ = 0;
};

// ---------------------------------------------------------------------------

template <class T>
class ActivationLayer final : public Layer<T> {
 public:
  explicit ActivationLayer(ActivationKind kind) : kind_(kind) {}

  void forward(const ParamStore<T>&, const Tensor<T>& in, Tensor<T>& out, LayerCache<T>&) const override {
    for (std::size_t i = 0; i < in.size(); ++i) {
      const T x = in[i];
      switch (kind_) {
        case ActivationKind::kRelu: out[i] = x > 0 ? x : T{0}; break;
        case ActivationKind::kSigmoid: out[i] = sigmoid(x); break;
        case ActivationKind::kTanh: out[i] = std::tanh(x); break;
      }
    }
  }
  void backward(const ParamStore<T>&, const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& gout,
                Tensor<T>& gin, ParamStore<T>&, const LayerCache<T>&) const override {
    for (std::size_t i = 0; i < in.size(); ++i) {
      const T y = out[i];
      switch (kind_) {
        case ActivationKind::kRelu: gin[i] = in[i] > 0 ? gout[i] : T{0}; break;
        case ActivationKind::kSigmoid: gin[i] = gout[i] * y * (T{1} - y); break;
        case ActivationKind::kTanh: gin[i] = gout[i] * (T{1} - y * y); break;
      }
    }
  }

 private:
  ActivationKind kind_;
};

// ---------------------------------------------------------------------------

template <class T>
class SoftmaxLayer final : public Layer<T> {
 public:
  explicit SoftmaxLayer(const Shape& in) : rows_(in.size() == 2 ? in[0] : 1), cols_(in.back()) {}

  void forward(const ParamStore<T>&, const Tensor<T>& in, Tensor<T>& out, LayerCache<T>&) const override {
    for (int r = 0; r < rows_; ++r) {
      const T* x = in.data() + static_cast<std::size_t>(r) * cols_;
      T* y = out.data() + static_cast<std::size_t>(r) * cols_;
      const T mx = *std::max_element(x, x + cols_);
      T sum = 0;
      for (int k = 0; k < cols_; ++k) sum += (y[k] = std::exp(x[k] - mx));
      for (int k = 0; k < cols_; ++k) y[k] /= sum;
    }
  }
  void backward(const ParamStore<T>&, const Tensor<T>&, const Tensor<T>& out, const Tensor<T>& gout, Tensor<T>& gin,
                ParamStore<T>&, const LayerCache<T>&) const override {
    for (int r = 0; r < rows_; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * cols_;
      T dot = 0;
      for (int k = 0; k < cols_; ++k) dot += gout[off + k] * out[off + k];
      for (int k = 0; k < cols_; ++k) gin[off + k] = out[off + k] * (gout[off + k] - dot);
    }
  }

 private:
  int rows_, cols_;
};

// ---------------------------------------------------------------------------

template <class T>
class HeightCollapseLayer final : public Layer<T> {
 public:
  explicit HeightCollapseLayer(const Shape& in) : in_(in) {}

  void forward(const ParamStore<T>&, const Tensor<T>& in, Tensor<T>& out, LayerCache<T>& cache) const override {
    const int C = in_[0], H = in_[1], W = in_[2];
    cache.indices.resize(out.size());
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        int best = c * H * W + x;
        for (int y = 1; y < H; ++y) {
          const int idx = (c * H + y) * W + x;
          if (in[static_cast<std::size_t>(idx)] > in[static_cast<std::size_t>(best)]) best = idx;
        }
        const std::size_t o = static_cast<std::size_t>(x) * C + c;
        cache.indices[o] = best;
        out[o] = in[static_cast<std::size_t>(best)];
      }
  }
  void backward(const ParamStore<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>& gout, Tensor<T>& gin,
                ParamStore<T>&, const LayerCache<T>& cache) const override {
    gin.fill(T{0});
    for (std::size_t o = 0; o < gout.size(); ++o) gin[static_cast<std::size_t>(cache.indices[o])] += gout[o];
  }

 private:
  Shape in_;
};

// ---------------------------------------------------------------------------

// Stacked bidirectional LSTM. Per layer and direction: w_ih (in, 4H),
// w_hh (H, 4H), bias (4H), gate blocks ordered input, forget, cell, output.
// Output row t is [h_forward(t), h_backward(t)].
template <class T>
class BiLstmLayer final : public Layer<T> {
 public:
  BiLstmLayer(const BiLstm& spec, const Shape& in, const Shape&)
      : steps_(in[0]), features_(in[1]), hidden_(spec.hidden), layers_(spec.num_layers) {}

  void register_params(ParamStore<T>& store, const std::string& prefix) override {
    for (int l = 0; l < layers_; ++l)
      for (int d = 0; d < 2; ++d) {
        const std::string base = prefix + ".l" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
        Dir dir;
        dir.w_ih = store.add(base + ".w_ih", {input_dim(l), 4 * hidden_});
        dir.w_hh = store.add(base + ".w_hh", {hidden_, 4 * hidden_});
        dir.bias = store.add(base + ".bias", {4 * hidden_});
        dirs_.push_back(dir);
      }
  }
  void init_params(ParamStore<T>& store, Rng& rng) const override {
    for (std::size_t i = 0; i < dirs_.size(); ++i) {
      const int l = static_cast<int>(i / 2);
      init_uniform(store[dirs_[i].w_ih], rng, input_dim(l), hidden_);
      init_uniform(store[dirs_[i].w_hh], rng, hidden_, hidden_);
      auto& b = store[dirs_[i].bias];
      b.fill(T{0});
      for (int k = hidden_; k < 2 * hidden_; ++k) b[static_cast<std::size_t>(k)] = T{1};
    }
  }
  bool has_params() const override { return true; }
  std::vector<std::size_t> param_indices() const override {
    std::vector<std::size_t> out;
    for (const auto& d : dirs_) out.insert(out.end(), {d.w_ih, d.w_hh, d.bias});
    return out;
  }

  void forward(const ParamStore<T>& p, const Tensor<T>& in, Tensor<T>& out, LayerCache<T>& cache) const override {
    cache.values.assign(cache_size(), T{0});
    const T* x = in.data();
    for (int l = 0; l < layers_; ++l) {
      T* layer_in = layer_input(cache, l);
      std::copy(x, x + static_cast<std::size_t>(steps_) * input_dim(l), layer_in);
      T* y = layer_output(cache, l);
      for (int d = 0; d < 2; ++d) run_direction(p, l, d, layer_in, cache, y);
      x = y;
    }
    std::copy(x, x + out.size(), out.data());
  }

  void backward(const ParamStore<T>& p, const Tensor<T>&, const Tensor<T>&, const Tensor<T>& gout, Tensor<T>& gin,
                ParamStore<T>& grads, const LayerCache<T>& cache) const override {
    const int H = hidden_, G = 4 * H;
    std::vector<T> gy(gout.values());
    std::vector<T> gx;
    std::vector<T> dz(static_cast<std::size_t>(steps_) * G);
    std::vector<T> hprev(static_cast<std::size_t>(steps_) * H);
    std::vector<T> dh(H), dc(H), dh_rec(H);
    std::vector<T> w_hh_t(static_cast<std::size_t>(G) * H);
    for (int l = layers_ - 1; l >= 0; --l) {
      const int in_dim = input_dim(l);
      const T* layer_in = layer_input(cache, l);
      gx.assign(static_cast<std::size_t>(steps_) * in_dim, T{0});
      for (int d = 0; d < 2; ++d) {
        const Dir& dir = dirs_[static_cast<std::size_t>(2 * l + d)];
        const T* gates = gates_of(cache, l, d);
        const T* cells = cells_of(cache, l, d);
        const T* hs = hidden_of(cache, l, d);
        const T* w_hh = p[dir.w_hh].data();
        for (int j = 0; j < H; ++j)
          for (int k = 0; k < G; ++k) w_hh_t[static_cast<std::size_t>(k) * H + j] = w_hh[static_cast<std::size_t>(j) * G + k];
        std::fill(dh_rec.begin(), dh_rec.end(), T{0});
        std::fill(dc.begin(), dc.end(), T{0});
        std::fill(hprev.begin(), hprev.end(), T{0});
        for (int s = steps_ - 1; s >= 0; --s) {
          const int t = d == 0 ? s : steps_ - 1 - s;
          const int tp = d == 0 ? t - 1 : t + 1;  // previous step in this direction
          const bool has_prev = s > 0;
          const T* g = gates + static_cast<std::size_t>(t) * G;
          const T* c = cells + static_cast<std::size_t>(t) * H;
          T* z = dz.data() + static_cast<std::size_t>(t) * G;
          for (int j = 0; j < H; ++j) {
            dh[static_cast<std::size_t>(j)] =
                gy[static_cast<std::size_t>(t) * 2 * H + static_cast<std::size_t>(d * H + j)] + dh_rec[static_cast<std::size_t>(j)];
            const T i_g = g[j], f_g = g[H + j], c_g = g[2 * H + j], o_g = g[3 * H + j];
            const T tc = std::tanh(c[j]);
            const T c_prev = has_prev ? cells[static_cast<std::size_t>(tp) * H + j] : T{0};
            const T d_o = dh[static_cast<std::size_t>(j)] * tc;
            const T d_c = dh[static_cast<std::size_t>(j)] * o_g * (T{1} - tc * tc) + dc[static_cast<std::size_t>(j)];
            z[j] = d_c * c_g * i_g * (T{1} - i_g);
            z[H + j] = d_c * c_prev * f_g * (T{1} - f_g);
            z[2 * H + j] = d_c * i_g * (T{1} - c_g * c_g);
            z[3 * H + j] = d_o * o_g * (T{1} - o_g);
            dc[static_cast<std::size_t>(j)] = d_c * f_g;
          }
          // dh_rec = W_hh * dz, accumulated over the rows of W_hh^T so the
          // inner loop is a contiguous axpy.
          std::fill(dh_rec.begin(), dh_rec.end(), T{0});
          for (int k = 0; k < G; ++k) {
            const T zk = z[k];
            const T* wc = w_hh_t.data() + static_cast<std::size_t>(k) * H;
            for (int j = 0; j < H; ++j) dh_rec[static_cast<std::size_t>(j)] += zk * wc[j];
          }
          if (has_prev) std::copy(hs + static_cast<std::size_t>(tp) * H, hs + static_cast<std::size_t>(tp + 1) * H,
                                  hprev.data() + static_cast<std::size_t>(t) * H);
        }
        kernels::matmul_tn_acc(layer_in, dz.data(), grads[dir.w_ih].data(), in_dim, steps_, G);
        kernels::matmul_tn_acc(hprev.data(), dz.data(), grads[dir.w_hh].data(), H, steps_, G);
        T* gb = grads[dir.bias].data();
        for (int t = 0; t < steps_; ++t)
          for (int k = 0; k < G; ++k) gb[k] += dz[static_cast<std::size_t>(t) * G + k];
        kernels::matmul_nt_acc(dz.data(), p[dir.w_ih].data(), gx.data(), steps_, G, in_dim);
      }
      gy.swap(gx);
    }
    std::copy(gy.begin(), gy.end(), gin.data());
  }

 private:
  struct Dir {
    std::size_t w_ih = 0, w_hh = 0, bias = 0;
  };

  int input_dim(int l) const { return l == 0 ? features_ : 2 * hidden_; }

  // Cache layout per layer: input (T x in), output (T x 2H), then for each
  // direction gates (T x 4H), cells (T x H), hidden (T x H).
  std::size_t layer_block(int l) const {
    const std::size_t T_ = static_cast<std::size_t>(steps_), H = static_cast<std::size_t>(hidden_);
    return T_ * static_cast<std::size_t>(input_dim(l)) + T_ * 2 * H + 2 * (T_ * 4 * H + 2 * T_ * H);
  }
  std::size_t layer_offset(int l) const {
    std::size_t off = 0;
    for (int i = 0; i < l; ++i) off += layer_block(i);
    return off;
  }
  std::size_t cache_size() const { return layer_offset(layers_); }
  template <class V>
  auto* layer_input(V& cache, int l) const {
    return cache.values.data() + layer_offset(l);
  }
  template <class V>
  auto* layer_output(V& cache, int l) const {
    return layer_input(cache, l) + static_cast<std::size_t>(steps_) * input_dim(l);
  }
  template <class V>
  auto* dir_base(V& cache, int l, int d) const {
    const std::size_t T_ = static_cast<std::size_t>(steps_), H = static_cast<std::size_t>(hidden_);
    return layer_output(cache, l) + T_ * 2 * H + static_cast<std::size_t>(d) * (T_ * 4 * H + 2 * T_ * H);
  }
  template <class V>
  auto* gates_of(V& cache, int l, int d) const { return dir_base(cache, l, d); }
  template <class V>
  auto* cells_of(V& cache, int l, int d) const {
    return dir_base(cache, l, d) + static_cast<std::size_t>(steps_) * 4 * hidden_;
  }
  template <class V>
  auto* hidden_of(V& cache, int l, int d) const {
    return cells_of(cache, l, d) + static_cast<std::size_t>(steps_) * hidden_;
  }

  void run_direction(const ParamStore<T>& p, int l, int d, const T* x, LayerCache<T>& cache, T* y) const {
    const Dir& dir = dirs_[static_cast<std::size_t>(2 * l + d)];
    const int H = hidden_, G = 4 * H, in_dim = input_dim(l);
    T* gates = gates_of(cache, l, d);
    T* cells = cells_of(cache, l, d);
    T* hs = hidden_of(cache, l, d);
    // Input projections for all steps at once.
    const T* bias = p[dir.bias].data();
    for (int t = 0; t < steps_; ++t) std::copy(bias, bias + G, gates + static_cast<std::size_t>(t) * G);
    kernels::matmul_acc(x, p[dir.w_ih].data(), gates, steps_, in_dim, G);
    const T* w_hh = p[dir.w_hh].data();
    for (int s = 0; s < steps_; ++s) {
      const int t = d == 0 ? s : steps_ - 1 - s;
      const int tp = d == 0 ? t - 1 : t + 1;
      T* z = gates + static_cast<std::size_t>(t) * G;
      if (s > 0) {
        const T* hp = hs + static_cast<std::size_t>(tp) * H;
        for (int j = 0; j < H; ++j) {
          const T hv = hp[j];
          const T* wr = w_hh + static_cast<std::size_t>(j) * G;
          for (int k = 0; k < G; ++k) z[k] += hv * wr[k];
        }
      }
      T* c = cells + static_cast<std::size_t>(t) * H;
      T* h = hs + static_cast<std::size_t>(t) * H;
      for (int j = 0; j < H; ++j) {
        const T i_g = sigmoid(z[j]);
        const T f_g = sigmoid(z[H + j]);
        const T c_g = std::tanh(z[2 * H + j]);
        const T o_g = sigmoid(z[3 * H + j]);
        z[j] = i_g;
        z[H + j] = f_g;
        z[2 * H + j] = c_g;
        z[3 * H + j] = o_g;
        const T c_prev = s > 0 ? cells[static_cast<std::size_t>(tp) * H + j] : T{0};
        c[j] = f_g * c_prev + i_g * c_g;
        h[j] = o_g * std::tanh(c[j]);
        y[static_cast<std::size_t>(t) * 2 * H + static_cast<std::size_t>(d * H + j)] = h[j];
      }
    }
  }

  int steps_, features_, hidden_, layers_;
  std::vector<Dir> dirs_;
};

}  // namespace

template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& in, const Shape& out) {
  if (auto* c = std::get_if<Conv>(&spec)) return std::make_unique<ConvLayer<T>>(*c, in, out);
  if (auto* m = std::get_if<MaxPool>(&spec)) return std::make_unique<MaxPoolLayer<T>>(*m, in, out);
  if (auto* s = std::get_if<Spp>(&spec)) return std::make_unique<SppLayer<T>>(*s, in, out);
  if (auto* d = std::get_if<Dense>(&spec)) return std::make_unique<DenseLayer<T>>(*d, in, out);
  if (auto* a = std::get_if<Activation>(&spec)) return std::make_unique<ActivationLayer<T>>(a->kind);
  if (auto* l = std::get_if<BiLstm>(&spec)) return std::make_unique<BiLstmLayer<T>>(*l, in, out);
  if (std::holds_alternative<Softmax>(spec)) return std::make_unique<SoftmaxLayer<T>>(in);
  return std::make_unique<HeightCollapseLayer<T>>(in);
}

template <class T>
Tensor<T> spp_pool(const Tensor<T>& feature_map, const std::vector<int>& levels) {
  const Shape out_shape = infer_shape(Spp{levels}, feature_map.shape());
  Tensor<T> out(out_shape);
  std::vector<int> argmax(out.size());
  spp_forward(feature_map, levels, out.data(), argmax.data());
  return out;
}

template <class T>
Sequential<T>::Sequential(NetSpec spec, Shape input, ParamStore<T>& store, const std::string& prefix)
    : spec_(std::move(spec)), shapes_(infer_shapes(spec_, input)), prefix_(prefix) {
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    layers_.push_back(make_layer<T>(spec_.layers[i], shapes_[i], shapes_[i + 1]));
    layers_.back()->register_params(store, prefix_ + "." + std::to_string(i));
  }
}

template <class T>
void Sequential<T>::init_params(ParamStore<T>& store, Rng& rng) const {
  for (const auto& layer : layers_) layer->init_params(store, rng);
}

template <class T>
ForwardState<T> Sequential<T>::forward(const ParamStore<T>& params, const Tensor<T>& input) const {
  if (input.shape() != shapes_.front()) {
    throw Error(ErrorCode::kShapeMismatch,
                "input " + shape_string(input.shape()) + " but network expects " + shape_string(shapes_.front()));
  }
  ForwardState<T> state;
  state.outputs.reserve(layers_.size() + 1);
  state.outputs.push_back(input);
  state.caches.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Tensor<T> out(shapes_[i + 1]);
    layers_[i]->forward(params, state.outputs[i], out, state.caches[i]);
    state.outputs.push_back(std::move(out));
  }
#ifndef NDEBUG
  for (const auto& v : state.outputs.back().values()) {
    if (!std::isfinite(static_cast<double>(v))) throw Error(ErrorCode::kStateError, "non-finite activation");
  }
#endif
  return state;
}

template <class T>
Tensor<T> Sequential<T>::backward(const ParamStore<T>& params, const ForwardState<T>& state,
                                  const Tensor<T>& upstream, ParamStore<T>& grads) const {
  if (state.outputs.size() != layers_.size() + 1 || state.caches.size() != layers_.size()) {
    throw Error(ErrorCode::kStateError, "backward called without a matching forward pass");
  }
  if (upstream.shape() != shapes_.back()) {
    throw Error(ErrorCode::kShapeMismatch, "upstream gradient " + shape_string(upstream.shape()) +
                                               " but network output is " + shape_string(shapes_.back()));
  }
  Tensor<T> grad = upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    Tensor<T> gin(shapes_[i]);
    layers_[i]->backward(params, state.outputs[i], state.outputs[i + 1], grad, gin, grads, state.caches[i]);
    grad = std::move(gin);
  }
  return grad;
}

template class Sequential<float>;
template class Sequential<double>;
template std::unique_ptr<Layer<float>> make_layer<float>(const LayerSpec&, const Shape&, const Shape&);
template std::unique_ptr<Layer<double>> make_layer<double>(const LayerSpec&, const Shape&, const Shape&);
template Tensor<float> spp_pool<float>(const Tensor<float>&, const std::vector<int>&);
template Tensor<double> spp_pool<double>(const Tensor<double>&, const std::vector<int>&);

}  // namespace phosc::net
