#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "phosc/ctc.hpp"
#include "phosc/net/checkpoint.hpp"
#include "phosc/net/sequential.hpp"
#include "phosc/signature.hpp"
#include "phosc/synthdata.hpp"

namespace phosc::model {

// Layer sizes shared by the three model variants. The conv backbone is
// identical between them, which is what makes weight transfer possible.
struct ArchConfig {
  net::NetSpec backbone;
  std::vector<int> spp_levels{1, 2, 4};
  int head_hidden = 512;
  // A narrow recurrent head (e.g. 32 units) sits on the all-blank CTC
  // plateau for many epochs; 128 units leave it within a few.
  int lstm_hidden = 128;
  int lstm_layers = 2;
  net::Shape input{1, synth::kImageHeight, synth::kImageWidth};

  bool operator==(const ArchConfig&) const = default;
};

// Three conv blocks (16/32/48 channels). The first conv has stride 2 rather
// than a pool so thin dark strokes on white survive the first downsampling.
ArchConfig default_arch();

nlohmann::json to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PhosConfig& cfg);
nlohmann::json to_json(const PhocConfig& cfg);
PhosConfig phos_from_json(const nlohmann::json& j);
PhocConfig phoc_from_json(const nlohmann::json& j);

// Image bytes to a (1, H, W) tensor, pixel / 255 (white = 1).
template <class T>
net::Tensor<T> image_tensor(const synth::WordImage& image);

// Eq.-1 style multi-task loss for one sample: lambda_c * mean BCE(phoc) +
// lambda_s * mean squared error(phos). Probabilities are clamped to
// [1e-7, 1 - 1e-7] inside the logarithms.
template <class T>
struct PhoscLossResult {
  double total = 0.0;
  double phoc = 0.0;
  double phos = 0.0;
  std::vector<T> grad_phoc;
  std::vector<T> grad_phos;
};

template <class T>
PhoscLossResult<T> phosc_loss(std::span<const T> pred_phoc, std::span<const T> pred_phos, std::span<const float> true_phoc,
                              std::span<const float> true_phos, double lambda_c, double lambda_s);

// Multi-task network: backbone -> SPP -> {PHOC head (sigmoid), PHOS head (ReLU)}.
template <class T>
class PhoscNet {
 public:
  PhoscNet(ArchConfig arch, PhosConfig phos = {}, PhocConfig phoc = {});

  struct Pass {
    net::ForwardState<T> trunk;
    net::ForwardState<T> phoc;
    net::ForwardState<T> phos;
  };

  const ArchConfig& arch() const { return arch_; }
  const PhosConfig& phos_config() const { return phos_; }
  const PhocConfig& phoc_config() const { return phoc_; }
  net::ParamStore<T>& params() { return params_; }
  const net::ParamStore<T>& params() const { return params_; }

  void init(std::uint64_t seed);
  Pass forward(const net::ParamStore<T>& params, const net::Tensor<T>& image) const;
  // Accumulates parameter gradients; returns the image gradient.
  net::Tensor<T> backward(const net::ParamStore<T>& params, const Pass& pass, std::span<const T> grad_phoc,
                          std::span<const T> grad_phos, net::ParamStore<T>& grads) const;

  // [phoc (in (0,1)), phos (>= 0)], length |phoc| + |phos|.
  std::vector<float> predict_signature(const net::Tensor<T>& image) const;

 private:
  ArchConfig arch_;
  PhosConfig phos_;
  PhocConfig phoc_;
  net::ParamStore<T> params_;
  net::Sequential<T> trunk_;
  net::Sequential<T> phoc_head_;
  net::Sequential<T> phos_head_;
};

enum class DecoderKind { kBestPath, kBeam };
struct Decoder {
  DecoderKind kind = DecoderKind::kBestPath;
  std::size_t beam_width = 10;
};

// Hybrid recognizer: backbone -> height collapse -> BiLSTM stack -> dense
// logits over the alphabet plus blank.
template <class T>
class PhoscCtc {
 public:
  PhoscCtc(ArchConfig arch, ctc::CtcAlphabet alphabet = ctc::CtcAlphabet(std::string(kDefaultAlphabet)));

  struct Pass {
    net::ForwardState<T> trunk;
    net::ForwardState<T> head;
  };

  const ArchConfig& arch() const { return arch_; }
  const ctc::CtcAlphabet& alphabet() const { return alphabet_; }
  std::size_t time_steps() const { return static_cast<std::size_t>(head_.output_shape()[0]); }
  net::ParamStore<T>& params() { return params_; }
  const net::ParamStore<T>& params() const { return params_; }

  void init(std::uint64_t seed);
  Pass forward(const net::ParamStore<T>& params, const net::Tensor<T>& image) const;
  const net::Tensor<T>& logits(const Pass& pass) const { return pass.head.output(); }
  net::Tensor<T> backward(const net::ParamStore<T>& params, const Pass& pass, std::span<const T> grad_logits,
                          net::ParamStore<T>& grads) const;

  // CTC negative log-likelihood of label; gradients accumulate into grads.
  double loss_and_backward(const net::ParamStore<T>& params, const net::Tensor<T>& image, const std::string& label,
                           net::ParamStore<T>& grads) const;

  ctc::ProbMatrix probabilities(const net::Tensor<T>& image) const;
  std::string predict_string(const net::Tensor<T>& image, const Decoder& decoder = {}) const;

 private:
  ArchConfig arch_;
  ctc::CtcAlphabet alphabet_;
  net::ParamStore<T> params_;
  net::Sequential<T> trunk_;
  net::Sequential<T> head_;
};

// Copies every backbone tensor of source into target; all other target
// tensors are left as they are. Throws SpecMismatch naming the first
// differing backbone layer.
void transfer_conv_weights(const net::Checkpoint& source, PhoscCtc<float>& target);

// Checkpoint metadata and reconstruction.
nlohmann::json checkpoint_meta(const PhoscNet<float>& model);
nlohmann::json checkpoint_meta(const PhoscCtc<float>& model, const std::string& variant);
PhoscNet<float> load_phoscnet(const net::Checkpoint& checkpoint);
PhoscCtc<float> load_phoscctc(const net::Checkpoint& checkpoint);

struct Sample {
  net::Tensor<float> image;
  std::string label;
};

// Reads every image of a partition; paths are relative to root.
std::vector<Sample> load_samples(const synth::SplitManifest& manifest, synth::Partition partition,
                                 const std::filesystem::path& root);

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 5e-5;
  int batch_size = 16;
  int max_epochs = 30;
  int patience = 3;
  double lr_reduction_factor = 0.5;
  std::uint64_t seed = 1;
  double lambda_c = 1.0;
  double lambda_s = 4.5;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  net::Checkpoint best;
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val = 0.0;
};

// Optional per-epoch observer (progress output).
using EpochCallback = std::function<void(const EpochLog&)>;

// Validation metric: seen top-1 by cosine over the training lexicon (higher
// is better). Writes one JSON line per epoch to log_out when given.
TrainResult train_phoscnet(PhoscNet<float>& model, const std::vector<Sample>& train, const std::vector<Sample>& val,
                           const TrainConfig& cfg, std::ostream* log_out = nullptr, const EpochCallback& on_epoch = {});

// Validation metric: CER with best-path decoding (lower is better).
TrainResult train_ctc(PhoscCtc<float>& model, const std::string& variant, const std::vector<Sample>& train,
                      const std::vector<Sample>& val, const TrainConfig& cfg, std::ostream* log_out = nullptr,
                      const EpochCallback& on_epoch = {});

}  // namespace phosc::model
