#include "phosc/net/spec.hpp"

#include <algorithm>
#include <sstream>

#include "phosc/error.hpp"

namespace phosc::net {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ')';
  return out.str();
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const char* activation_name(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::kRelu: return "relu";
    case ActivationKind::kSigmoid: return "sigmoid";
    case ActivationKind::kTanh: return "tanh";
  }
  return "?";
}

[[noreturn]] void mismatch(const LayerSpec& layer, const Shape& input, const std::string& why) {
  throw Error(ErrorCode::kShapeMismatch, layer_name(layer) + " cannot take input " + shape_string(input) + ": " + why);
}

}  // namespace

std::string layer_name(const LayerSpec& layer) {
  return std::visit(Overloaded{
                        [](const Conv&) -> std::string { return "conv"; },
                        [](const MaxPool&) -> std::string { return "maxpool"; },
                        [](const Spp&) -> std::string { return "spp"; },
                        [](const Dense&) -> std::string { return "dense"; },
                        [](const Activation& a) -> std::string { return activation_name(a.kind); },
                        [](const BiLstm&) -> std::string { return "bilstm"; },
                        [](const Softmax&) -> std::string { return "softmax"; },
                        [](const HeightCollapse&) -> std::string { return "height_collapse"; },
                    },
                    layer);
}

Shape infer_shape(const LayerSpec& layer, const Shape& in) {
  for (int d : in) {
    if (d < 1) mismatch(layer, in, "non-positive dimension");
  }
  return std::visit(
      Overloaded{
          [&](const Conv& c) -> Shape {
            if (in.size() != 3) mismatch(layer, in, "expects (C,H,W)");
            if (c.out_channels < 1 || c.kernel < 1 || c.stride < 1 || c.padding < 0) {
              mismatch(layer, in, "invalid conv parameters");
            }
            const int oh = (in[1] + 2 * c.padding - c.kernel) / c.stride + 1;
            const int ow = (in[2] + 2 * c.padding - c.kernel) / c.stride + 1;
            if (in[1] + 2 * c.padding < c.kernel || in[2] + 2 * c.padding < c.kernel) {
              mismatch(layer, in, "input smaller than kernel");
            }
            return {c.out_channels, oh, ow};
          },
          [&](const MaxPool& p) -> Shape {
            if (in.size() != 3) mismatch(layer, in, "expects (C,H,W)");
            if (p.size < 1 || in[1] < p.size || in[2] < p.size) mismatch(layer, in, "input smaller than pool");
            return {in[0], in[1] / p.size, in[2] / p.size};
          },
          [&](const Spp& s) -> Shape {
            if (in.size() != 3) mismatch(layer, in, "expects (C,H,W)");
            if (s.levels.empty()) mismatch(layer, in, "no pyramid levels");
            int cells = 0;
            for (int h : s.levels) {
              if (h < 1) mismatch(layer, in, "pyramid level must be positive");
              if (in[1] < h || in[2] < h) {
                throw Error(ErrorCode::kTooSmall, "spp level " + std::to_string(h) + " needs H,W >= level, got " +
                                                      shape_string(in));
              }
              cells += h * h;
            }
            return {in[0] * cells};
          },
          [&](const Dense& d) -> Shape {
            if (d.out < 1) mismatch(layer, in, "dense width must be positive");
            if (in.size() == 1) return {d.out};
            if (in.size() == 2) return {in[0], d.out};
            mismatch(layer, in, "expects (F) or (T,F)");
          },
          [&](const Activation&) -> Shape { return in; },
          [&](const BiLstm& l) -> Shape {
            if (in.size() != 2) mismatch(layer, in, "expects (T,F)");
            if (l.hidden < 1 || l.num_layers < 1) mismatch(layer, in, "invalid LSTM parameters");
            return {in[0], 2 * l.hidden};
          },
          [&](const Softmax&) -> Shape {
            if (in.size() > 2) mismatch(layer, in, "expects (F) or (T,F)");
            return in;
          },
          [&](const HeightCollapse&) -> Shape {
            if (in.size() != 3) mismatch(layer, in, "expects (C,H,W)");
            return {in[2], in[0]};
          },
      },
      layer);
}

std::vector<Shape> infer_shapes(const NetSpec& spec, const Shape& input) {
  std::vector<Shape> shapes{input};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    try {
      shapes.push_back(infer_shape(spec.layers[i], shapes.back()));
    } catch (const Error& e) {
      throw Error(e.code(), "layer " + std::to_string(i) + ": " + e.what());
    }
  }
  return shapes;
}

nlohmann::json to_json(const LayerSpec& layer) {
  using nlohmann::json;
  return std::visit(Overloaded{
                        [](const Conv& c) {
                          return json{{"type", "conv"},
                                      {"out_channels", c.out_channels},
                                      {"kernel", c.kernel},
                                      {"stride", c.stride},
                                      {"padding", c.padding}};
                        },
                        [](const MaxPool& p) { return json{{"type", "maxpool"}, {"size", p.size}}; },
                        [](const Spp& s) { return json{{"type", "spp"}, {"levels", s.levels}}; },
                        [](const Dense& d) { return json{{"type", "dense"}, {"out", d.out}}; },
                        [](const Activation& a) { return json{{"type", activation_name(a.kind)}}; },
                        [](const BiLstm& l) {
                          return json{{"type", "bilstm"}, {"hidden", l.hidden}, {"num_layers", l.num_layers}};
                        },
                        [](const Softmax&) { return json{{"type", "softmax"}}; },
                        [](const HeightCollapse&) { return json{{"type", "height_collapse"}}; },
                    },
                    layer);
}

namespace {

int int_field(const nlohmann::json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) {
    throw Error(ErrorCode::kConfigError, std::string("layer field '") + key + "' must be an integer");
  }
  return j.at(key).get<int>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (key == "type") continue;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw Error(ErrorCode::kConfigError, "unknown layer field '" + key + "'");
    }
  }
}

}  // namespace

LayerSpec layer_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw Error(ErrorCode::kConfigError, "layer must be an object with a string 'type'");
  }
  const auto type = j.at("type").get<std::string>();
  if (type == "conv") {
    reject_unknown(j, {"out_channels", "kernel", "stride", "padding"});
    Conv c;
    c.out_channels = int_field(j, "out_channels", c.out_channels);
    c.kernel = int_field(j, "kernel", c.kernel);
    c.stride = int_field(j, "stride", c.stride);
    c.padding = int_field(j, "padding", c.padding);
    return c;
  }
  if (type == "maxpool") {
    reject_unknown(j, {"size"});
    return MaxPool{int_field(j, "size", 2)};
  }
  if (type == "spp") {
    reject_unknown(j, {"levels"});
    Spp s;
    if (j.contains("levels")) s.levels = j.at("levels").get<std::vector<int>>();
    return s;
  }
  if (type == "dense") {
    reject_unknown(j, {"out"});
    return Dense{int_field(j, "out", 1)};
  }
  if (type == "relu" || type == "sigmoid" || type == "tanh") {
    reject_unknown(j, {});
    return Activation{type == "relu"      ? ActivationKind::kRelu
                      : type == "sigmoid" ? ActivationKind::kSigmoid
                                          : ActivationKind::kTanh};
  }
  if (type == "bilstm") {
    reject_unknown(j, {"hidden", "num_layers"});
    BiLstm l;
    l.hidden = int_field(j, "hidden", l.hidden);
    l.num_layers = int_field(j, "num_layers", l.num_layers);
    return l;
  }
  if (type == "softmax") {
    reject_unknown(j, {});
    return Softmax{};
  }
  if (type == "height_collapse") {
    reject_unknown(j, {});
    return HeightCollapse{};
  }
  throw Error(ErrorCode::kConfigError, "unknown layer type '" + type + "'");
}

nlohmann::json to_json(const NetSpec& spec) {
  auto arr = nlohmann::json::array();
  for (const auto& layer : spec.layers) arr.push_back(to_json(layer));
  return arr;
}

NetSpec net_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kConfigError, "network spec must be an array of layers");
  NetSpec spec;
  for (const auto& layer : j) spec.layers.push_back(layer_from_json(layer));
  return spec;
}

}  // namespace phosc::net
