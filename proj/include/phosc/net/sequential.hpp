#pragma once

#include <memory>
#include <string>
#include <vector>

#include "phosc/net/params.hpp"
#include "phosc/net/spec.hpp"
#include "phosc/rng.hpp"

namespace phosc::net {

// Per-layer scratch kept from forward for backward (argmax positions, LSTM
// gate activations, ...).
template <class T>
struct LayerCache {
  std::vector<T> values;
  std::vector<int> indices;
};

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual void register_params(ParamStore<T>& /*store*/, const std::string& /*prefix*/) {}
  virtual void init_params(ParamStore<T>& /*store*/, Rng& /*rng*/) const {}
  virtual bool has_params() const { return false; }
  virtual std::vector<std::size_t> param_indices() const { return {}; }
  virtual void forward(const ParamStore<T>& params, const Tensor<T>& in, Tensor<T>& out,
                       LayerCache<T>& cache) const = 0;
  // Writes grad_in; accumulates parameter gradients into grads.
  virtual void backward(const ParamStore<T>& params, const Tensor<T>& in, const Tensor<T>& out,
                        const Tensor<T>& grad_out, Tensor<T>& grad_in, ParamStore<T>& grads,
                        const LayerCache<T>& cache) const = 0;
};

template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& in, const Shape& out);

// All intermediate outputs: outputs[0] is the input, outputs[i + 1] the
// output of layer i.
template <class T>
struct ForwardState {
  std::vector<Tensor<T>> outputs;
  std::vector<LayerCache<T>> caches;
  const Tensor<T>& output() const { return outputs.back(); }
};

// A chain of layers whose parameters live in a shared ParamStore under
// "<prefix>.<layer index>.<name>".
template <class T>
class Sequential {
 public:
  Sequential(NetSpec spec, Shape input, ParamStore<T>& store, const std::string& prefix);

  const NetSpec& spec() const { return spec_; }
  const Shape& input_shape() const { return shapes_.front(); }
  const Shape& output_shape() const { return shapes_.back(); }
  const std::vector<Shape>& shapes() const { return shapes_; }
  std::size_t num_layers() const { return layers_.size(); }
  const std::string& prefix() const { return prefix_; }

  // Seeded uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases 0,
  // LSTM forget-gate bias 1.
  void init_params(ParamStore<T>& store, Rng& rng) const;
  std::vector<std::size_t> layer_param_indices(std::size_t layer) const { return layers_[layer]->param_indices(); }

  ForwardState<T> forward(const ParamStore<T>& params, const Tensor<T>& input) const;
  // Throws StateError when state does not come from forward() on this net.
  Tensor<T> backward(const ParamStore<T>& params, const ForwardState<T>& state, const Tensor<T>& upstream,
                     ParamStore<T>& grads) const;

 private:
  NetSpec spec_;
  std::vector<Shape> shapes_;
  std::string prefix_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// Spatial pyramid max pooling of a (C, H, W) map: for each level h an h x h
// grid with cell edges at floor(i * H / h), floor(j * W / h). Output layout is
// level-major, then cell (row-major), then channel; length C * sum(h^2).
template <class T>
Tensor<T> spp_pool(const Tensor<T>& feature_map, const std::vector<int>& levels);

}  // namespace phosc::net
