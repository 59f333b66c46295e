#pragma once

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "phosc/net/tensor.hpp"

namespace phosc::net {

struct Conv {
  int out_channels = 16;
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  bool operator==(const Conv&) const = default;
};

// Non-overlapping size x size max pooling; trailing rows/columns are dropped.
struct MaxPool {
  int size = 2;
  bool operator==(const MaxPool&) const = default;
};

struct Spp {
  std::vector<int> levels{1, 2, 4};
  bool operator==(const Spp&) const = default;
};

struct Dense {
  int out = 1;
  bool operator==(const Dense&) const = default;
};

enum class ActivationKind { kRelu, kSigmoid, kTanh };

struct Activation {
  ActivationKind kind = ActivationKind::kRelu;
  bool operator==(const Activation&) const = default;
};

// Gate order inside each direction: input, forget, cell, output.
struct BiLstm {
  int hidden = 32;
  int num_layers = 2;
  bool operator==(const BiLstm&) const = default;
};

struct Softmax {
  bool operator==(const Softmax&) const = default;
};

// (C, H, W) -> (T = W, features = C) by max over the height axis.
struct HeightCollapse {
  bool operator==(const HeightCollapse&) const = default;
};

using LayerSpec = std::variant<Conv, MaxPool, Spp, Dense, Activation, BiLstm, Softmax, HeightCollapse>;

std::string layer_name(const LayerSpec& layer);

struct NetSpec {
  std::vector<LayerSpec> layers;
  bool operator==(const NetSpec&) const = default;
};

// Output shape of a single layer; throws ShapeMismatch / TooSmall.
Shape infer_shape(const LayerSpec& layer, const Shape& input);

// Chain-check: shapes[0] = input, shapes[i+1] = output of layer i.
std::vector<Shape> infer_shapes(const NetSpec& spec, const Shape& input);

nlohmann::json to_json(const LayerSpec& layer);
LayerSpec layer_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NetSpec& spec);
NetSpec net_from_json(const nlohmann::json& j);

}  // namespace phosc::net
