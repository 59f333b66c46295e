#include "phosc/model.hpp"

#include <algorithm>
#include <cmath>

#include "phosc/error.hpp"

namespace phosc::model {

using net::Activation;
using net::ActivationKind;
using net::Conv;
using net::Dense;
using net::MaxPool;
using net::NetSpec;
using net::ParamStore;
using net::Tensor;

namespace {

NetSpec trunk_spec(const ArchConfig& arch) {
  NetSpec s = arch.backbone;
  s.layers.push_back(net::Spp{arch.spp_levels});
  return s;
}

NetSpec head_spec(int hidden, int out, ActivationKind final_activation) {
  return NetSpec{{Dense{hidden}, Activation{ActivationKind::kRelu}, Dense{out}, Activation{final_activation}}};
}

NetSpec ctc_head_spec(const ArchConfig& arch, int classes) {
  return NetSpec{{net::HeightCollapse{}, net::BiLstm{arch.lstm_hidden, arch.lstm_layers}, Dense{classes}}};
}

template <class T>
void init_store(ParamStore<T>& params, std::uint64_t seed, const std::vector<const net::Sequential<T>*>& parts) {
  // Each part draws from its own stream so adding a head never perturbs the
  // backbone initialization.
  for (std::size_t i = 0; i < parts.size(); ++i) {
    Rng rng(mix_seed(seed, i));
    parts[i]->init_params(params, rng);
  }
}

}  // namespace

ArchConfig default_arch() {
  ArchConfig a;
  a.backbone = NetSpec{{Conv{16, 3, 2, 1}, Activation{}, MaxPool{2}, Conv{32, 3, 1, 1}, Activation{}, MaxPool{2},
                        Conv{48, 3, 1, 1}, Activation{}}};
  return a;
}

nlohmann::json to_json(const ArchConfig& arch) {
  return {{"backbone", net::to_json(arch.backbone)}, {"spp_levels", arch.spp_levels}, {"head_hidden", arch.head_hidden},
          {"lstm_hidden", arch.lstm_hidden},         {"lstm_layers", arch.lstm_layers}, {"input", arch.input}};
}

ArchConfig arch_from_json(const nlohmann::json& j) {
  ArchConfig a = default_arch();
  for (const auto& [key, value] : j.items()) {
    if (key == "backbone") {
      a.backbone = net::net_from_json(value);
    } else if (key == "spp_levels") {
      a.spp_levels = value.get<std::vector<int>>();
    } else if (key == "head_hidden") {
      a.head_hidden = value.get<int>();
    } else if (key == "lstm_hidden") {
      a.lstm_hidden = value.get<int>();
    } else if (key == "lstm_layers") {
      a.lstm_layers = value.get<int>();
    } else if (key == "input") {
      a.input = value.get<net::Shape>();
    } else {
      throw Error(ErrorCode::kConfigError, "unknown architecture field '" + key + "'");
    }
  }
  for (const auto& layer : a.backbone.layers) {
    if (!std::holds_alternative<Conv>(layer) && !std::holds_alternative<MaxPool>(layer) &&
        !std::holds_alternative<Activation>(layer)) {
      throw Error(ErrorCode::kConfigError, "backbone may only contain conv, maxpool and activation layers, got " +
                                               net::layer_name(layer));
    }
  }
  return a;
}

nlohmann::json to_json(const PhosConfig& cfg) {
  return {{"levels", cfg.levels}, {"shape_table", format_shape_table(cfg.shape_table)}};
}

nlohmann::json to_json(const PhocConfig& cfg) {
  return {{"levels", cfg.levels}, {"alphabet", cfg.alphabet}, {"occupancy_threshold", cfg.occupancy_threshold}};
}

PhosConfig phos_from_json(const nlohmann::json& j) {
  PhosConfig c;
  if (j.contains("levels")) c.levels = j.at("levels").get<std::vector<int>>();
  if (j.contains("shape_table")) c.shape_table = parse_shape_table(j.at("shape_table").get<std::string>());
  c.validate();
  return c;
}

PhocConfig phoc_from_json(const nlohmann::json& j) {
  PhocConfig c;
  if (j.contains("levels")) c.levels = j.at("levels").get<std::vector<int>>();
  if (j.contains("alphabet")) c.alphabet = j.at("alphabet").get<std::string>();
  if (j.contains("occupancy_threshold")) c.occupancy_threshold = j.at("occupancy_threshold").get<double>();
  c.validate();
  return c;
}

template <class T>
Tensor<T> image_tensor(const synth::WordImage& image) {
  Tensor<T> t({1, image.height, image.width});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) t[i] = static_cast<T>(image.pixels[i]) / T{255};
  return t;
}

template <class T>
PhoscLossResult<T> phosc_loss(std::span<const T> pred_phoc, std::span<const T> pred_phos, std::span<const float> true_phoc,
                              std::span<const float> true_phos, double lambda_c, double lambda_s) {
  if (pred_phoc.size() != true_phoc.size() || pred_phos.size() != true_phos.size() || pred_phoc.empty() ||
      pred_phos.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "loss inputs: phoc " + std::to_string(pred_phoc.size()) + " vs " +
                                               std::to_string(true_phoc.size()) + ", phos " +
                                               std::to_string(pred_phos.size()) + " vs " +
                                               std::to_string(true_phos.size()));
  }
  constexpr double kEps = 1e-7;
  PhoscLossResult<T> r;
  r.grad_phoc.resize(pred_phoc.size());
  r.grad_phos.resize(pred_phos.size());
  const double nc = static_cast<double>(pred_phoc.size()), ns = static_cast<double>(pred_phos.size());
  for (std::size_t i = 0; i < pred_phoc.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred_phoc[i]), kEps, 1.0 - kEps);
    const double y = true_phoc[i];
    r.phoc -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    r.grad_phoc[i] = static_cast<T>(lambda_c * (p - y) / (p * (1.0 - p)) / nc);
  }
  r.phoc /= nc;
  for (std::size_t i = 0; i < pred_phos.size(); ++i) {
    const double d = static_cast<double>(pred_phos[i]) - true_phos[i];
    r.phos += d * d;
    r.grad_phos[i] = static_cast<T>(lambda_s * 2.0 * d / ns);
  }
  r.phos /= ns;
  r.total = lambda_c * r.phoc + lambda_s * r.phos;
  return r;
}

// ---------------------------------------------------------------- PhoscNet

template <class T>
PhoscNet<T>::PhoscNet(ArchConfig arch, PhosConfig phos, PhocConfig phoc)
    : arch_(std::move(arch)),
      phos_(std::move(phos)),
      phoc_(std::move(phoc)),
      trunk_(trunk_spec(arch_), arch_.input, params_, "backbone"),
      phoc_head_(head_spec(arch_.head_hidden, static_cast<int>(phoc_.length()), ActivationKind::kSigmoid),
                 trunk_.output_shape(), params_, "phoc"),
      phos_head_(head_spec(arch_.head_hidden, static_cast<int>(phos_.length()), ActivationKind::kRelu),
                 trunk_.output_shape(), params_, "phos") {
  phos_.validate();
  phoc_.validate();
}

template <class T>
void PhoscNet<T>::init(std::uint64_t seed) {
  init_store(params_, seed, {&trunk_, &phoc_head_, &phos_head_});
}

template <class T>
typename PhoscNet<T>::Pass PhoscNet<T>::forward(const ParamStore<T>& params, const Tensor<T>& image) const {
  Pass p;
  p.trunk = trunk_.forward(params, image);
  p.phoc = phoc_head_.forward(params, p.trunk.output());
  p.phos = phos_head_.forward(params, p.trunk.output());
  return p;
}

template <class T>
Tensor<T> PhoscNet<T>::backward(const ParamStore<T>& params, const Pass& pass, std::span<const T> grad_phoc,
                                std::span<const T> grad_phos, ParamStore<T>& grads) const {
  const Tensor<T> gc(phoc_head_.output_shape(), std::vector<T>(grad_phoc.begin(), grad_phoc.end()));
  const Tensor<T> gs(phos_head_.output_shape(), std::vector<T>(grad_phos.begin(), grad_phos.end()));
  Tensor<T> g = phoc_head_.backward(params, pass.phoc, gc, grads);
  const Tensor<T> g2 = phos_head_.backward(params, pass.phos, gs, grads);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += g2[i];
  return trunk_.backward(params, pass.trunk, g, grads);
}

template <class T>
std::vector<float> PhoscNet<T>::predict_signature(const Tensor<T>& image) const {
  const auto pass = forward(params_, image);
  std::vector<float> out;
  out.reserve(phoc_.length() + phos_.length());
  for (T v : pass.phoc.output().values()) out.push_back(static_cast<float>(v));
  for (T v : pass.phos.output().values()) out.push_back(static_cast<float>(v));
  return out;
}

// ---------------------------------------------------------------- PhoscCtc

template <class T>
PhoscCtc<T>::PhoscCtc(ArchConfig arch, ctc::CtcAlphabet alphabet)
    : arch_(std::move(arch)),
      alphabet_(std::move(alphabet)),
      trunk_(arch_.backbone, arch_.input, params_, "backbone"),
      head_(ctc_head_spec(arch_, static_cast<int>(alphabet_.num_classes())), trunk_.output_shape(), params_, "ctc") {}

template <class T>
void PhoscCtc<T>::init(std::uint64_t seed) {
  init_store(params_, seed, {&trunk_, &head_});
}

template <class T>
typename PhoscCtc<T>::Pass PhoscCtc<T>::forward(const ParamStore<T>& params, const Tensor<T>& image) const {
  Pass p;
  p.trunk = trunk_.forward(params, image);
  p.head = head_.forward(params, p.trunk.output());
  return p;
}

template <class T>
Tensor<T> PhoscCtc<T>::backward(const ParamStore<T>& params, const Pass& pass, std::span<const T> grad_logits,
                                ParamStore<T>& grads) const {
  const Tensor<T> g(head_.output_shape(), std::vector<T>(grad_logits.begin(), grad_logits.end()));
  return trunk_.backward(params, pass.trunk, head_.backward(params, pass.head, g, grads), grads);
}

template <class T>
double PhoscCtc<T>::loss_and_backward(const ParamStore<T>& params, const Tensor<T>& image, const std::string& label,
                                      ParamStore<T>& grads) const {
  const auto pass = forward(params, image);
  const auto& lg = logits(pass).values();
  const std::vector<double> logits64(lg.begin(), lg.end());
  const auto res = ctc::ctc_loss_and_grad(logits64, time_steps(), std::string_view(label), alphabet_);
  const std::vector<T> g(res.grad_wrt_logits.begin(), res.grad_wrt_logits.end());
  backward(params, pass, g, grads);
  return res.neg_log_prob;
}

template <class T>
ctc::ProbMatrix PhoscCtc<T>::probabilities(const Tensor<T>& image) const {
  const auto pass = forward(params_, image);
  const auto& lg = logits(pass).values();
  const std::vector<double> logits64(lg.begin(), lg.end());
  return ctc::ProbMatrix::from_logits(logits64, time_steps(), alphabet_.num_classes());
}

template <class T>
std::string PhoscCtc<T>::predict_string(const Tensor<T>& image, const Decoder& decoder) const {
  const auto probs = probabilities(image);
  if (decoder.kind == DecoderKind::kBeam) return ctc::beam_search_decode(probs, alphabet_, decoder.beam_width).best;
  return ctc::best_path_decode(probs, alphabet_);
}

// ---------------------------------------------------------------- transfer

void transfer_conv_weights(const net::Checkpoint& source, PhoscCtc<float>& target) {
  const ArchConfig src = arch_from_json(source.meta.at("arch"));
  const auto& a = src.backbone.layers;
  const auto& b = target.arch().backbone.layers;
  for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
    if (i >= a.size() || i >= b.size() || !(a[i] == b[i])) {
      const std::string sa = i < a.size() ? net::to_json(a[i]).dump() : "none";
      const std::string sb = i < b.size() ? net::to_json(b[i]).dump() : "none";
      throw Error(ErrorCode::kSpecMismatch, "backbone layer " + std::to_string(i) + " differs: source " + sa +
                                                ", target " + sb);
    }
  }
  if (src.input != target.arch().input) throw Error(ErrorCode::kSpecMismatch, "backbone input shapes differ");
  auto& dst = target.params();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const auto& name = dst.name(i);
    if (name.rfind("backbone.", 0) != 0) continue;
    const auto& t = source.params.at(name);
    if (t.shape() != dst[i].shape()) throw Error(ErrorCode::kSpecMismatch, "tensor " + name + " has a different shape");
    dst[i] = t;
  }
}

// ---------------------------------------------------------------- checkpoints

nlohmann::json checkpoint_meta(const PhoscNet<float>& model) {
  return {{"model", "phoscnet"},
          {"arch", to_json(model.arch())},
          {"phos", to_json(model.phos_config())},
          {"phoc", to_json(model.phoc_config())}};
}

nlohmann::json checkpoint_meta(const PhoscCtc<float>& model, const std::string& variant) {
  return {{"model", variant},
          {"arch", to_json(model.arch())},
          {"alphabet", model.alphabet().symbols()},
          {"blank_index", model.alphabet().blank_index()},
          {"time_steps", model.time_steps()}};
}

namespace {

void copy_params(const ParamStore<float>& src, ParamStore<float>& dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::kFormatError, "checkpoint holds " + std::to_string(src.size()) + " tensors, model needs " +
                                             std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (src.name(i) != dst.name(i) || src[i].shape() != dst[i].shape()) {
      throw Error(ErrorCode::kFormatError, "checkpoint tensor " + src.name(i) + " does not match model tensor " +
                                               dst.name(i));
    }
    dst[i] = src[i];
  }
}

}  // namespace

PhoscNet<float> load_phoscnet(const net::Checkpoint& ck) {
  if (ck.meta.value("model", "") != "phoscnet") throw Error(ErrorCode::kFormatError, "not a phoscnet checkpoint");
  PhoscNet<float> m(arch_from_json(ck.meta.at("arch")), phos_from_json(ck.meta.at("phos")),
                    phoc_from_json(ck.meta.at("phoc")));
  copy_params(ck.params, m.params());
  return m;
}

PhoscCtc<float> load_phoscctc(const net::Checkpoint& ck) {
  const std::string kind = ck.meta.value("model", "");
  if (kind != "ctc" && kind != "ctc_p") throw Error(ErrorCode::kFormatError, "not a ctc checkpoint");
  ctc::CtcAlphabet alphabet(ck.meta.at("alphabet").get<std::string>());
  if (ck.meta.at("blank_index").get<int>() != alphabet.blank_index()) {
    throw Error(ErrorCode::kFormatError, "blank index must be the last class");
  }
  PhoscCtc<float> m(arch_from_json(ck.meta.at("arch")), std::move(alphabet));
  copy_params(ck.params, m.params());
  return m;
}

std::vector<Sample> load_samples(const synth::SplitManifest& manifest, synth::Partition partition,
                                 const std::filesystem::path& root) {
  const auto rows = manifest.partition(partition);
  std::vector<Sample> out(rows.size());
  std::string failure;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      out[i] = {image_tensor<float>(synth::read_pgm(root / rows[i].path)), rows[i].label};
    } catch (const std::exception& e) {
#pragma omp critical(phosc_load_failure)
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) throw Error(ErrorCode::kIoError, failure);
  return out;
}

template net::Tensor<float> image_tensor<float>(const synth::WordImage&);
template net::Tensor<double> image_tensor<double>(const synth::WordImage&);
template PhoscLossResult<float> phosc_loss<float>(std::span<const float>, std::span<const float>,
                                                  std::span<const float>, std::span<const float>, double, double);
template PhoscLossResult<double> phosc_loss<double>(std::span<const double>, std::span<const double>,
                                                    std::span<const float>, std::span<const float>, double, double);
template class PhoscNet<float>;
template class PhoscNet<double>;
template class PhoscCtc<float>;
template class PhoscCtc<double>;

}  // namespace phosc::model
