#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include "phosc/error.hpp"
#include "phosc/matcher.hpp"
#include "phosc/metrics.hpp"
#include "phosc/model.hpp"
#include "phosc/net/adam.hpp"

namespace phosc::model {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kConfigError, std::string(name) + " must be positive, got " + std::to_string(v));
    }
  };
  positive(learning_rate, "learning_rate");
  if (weight_decay < 0.0) throw Error(ErrorCode::kConfigError, "weight_decay must not be negative");
  positive(batch_size, "batch_size");
  positive(max_epochs, "max_epochs");
  if (patience < 1) throw Error(ErrorCode::kConfigError, "patience must be at least 1");
  if (!(lr_reduction_factor > 0.0 && lr_reduction_factor < 1.0)) {
    throw Error(ErrorCode::kConfigError, "lr_reduction_factor must lie in (0, 1)");
  }
  // A zero weight switches one task off (single-task ablation).
  if (lambda_c < 0.0 || lambda_s < 0.0 || lambda_c + lambda_s <= 0.0) {
    throw Error(ErrorCode::kConfigError, "loss weights must be non-negative and not both zero");
  }
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate}, {"weight_decay", cfg.weight_decay},
          {"batch_size", cfg.batch_size},       {"max_epochs", cfg.max_epochs},
          {"patience", cfg.patience},           {"lr_reduction_factor", cfg.lr_reduction_factor},
          {"seed", cfg.seed},                   {"lambda_c", cfg.lambda_c},
          {"lambda_s", cfg.lambda_s}};
}

namespace {

// Plateau scheduler: after `patience` epochs without improvement the rate is
// reduced; a plateau reached after two reductions with no improvement in
// between ends training.
class Plateau {
 public:
  Plateau(const TrainConfig& cfg, bool higher_is_better)
      : cfg_(cfg), higher_(higher_is_better), lr_(cfg.learning_rate) {}

  // Returns true when this metric is the new best.
  bool observe(double metric) {
    const bool improved = !seen_ || (higher_ ? metric > best_ : metric < best_);
    seen_ = true;
    if (improved) {
      best_ = metric;
      stale_ = 0;
      reductions_ = 0;
      return true;
    }
    if (++stale_ >= cfg_.patience) {
      stale_ = 0;
      if (reductions_ >= 2) {
        stop_ = true;
      } else {
        lr_ *= cfg_.lr_reduction_factor;
        ++reductions_;
      }
    }
    return false;
  }

  double lr() const { return lr_; }
  double best() const { return best_; }
  bool stop() const { return stop_; }

 private:
  const TrainConfig& cfg_;
  bool higher_;
  double lr_;
  double best_ = 0.0;
  bool seen_ = false;
  int stale_ = 0;
  int reductions_ = 0;
  bool stop_ = false;
};

void write_log_line(std::ostream* out, const EpochLog& e) {
  if (!out) return;
  *out << nlohmann::json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_metric", e.val_metric}, {"lr", e.lr}}
              .dump()
       << '\n';
  out->flush();
}

// Shared loop. sample_step(params, index, grads) returns the sample loss and
// accumulates its gradient; validate(params) returns the validation metric.
template <class StepFn, class ValFn>
TrainResult run_training(net::ParamStore<float>& params, std::size_t n_train, const TrainConfig& cfg,
                         bool higher_is_better, const nlohmann::json& meta, StepFn sample_step, ValFn validate,
                         std::ostream* log_out, const EpochCallback& on_epoch) {
  cfg.validate();
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  // One gradient buffer per batch slot; summed in slot order so results do
  // not depend on the thread count.
  std::vector<net::ParamStore<float>> slot_grads(batch, params.zeros_like());
  std::vector<double> slot_loss(batch, 0.0);
  net::ParamStore<float> grads = params.zeros_like();
  net::Adam<float> adam(params);
  Plateau plateau(cfg, higher_is_better);
  std::vector<std::size_t> order(n_train);

  TrainResult result;
  for (int epoch = 1; epoch <= cfg.max_epochs && !plateau.stop(); ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order.begin(), order.end());
    const net::AdamConfig adam_cfg{plateau.lr(), 0.9, 0.999, 1e-8, cfg.weight_decay};

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_train; start += batch) {
      const std::size_t count = std::min(batch, n_train - start);
      std::string failure;
#pragma omp parallel for schedule(dynamic, 1)
      for (std::size_t s = 0; s < count; ++s) {
        try {
          slot_grads[s].zero();
          slot_loss[s] = sample_step(params, order[start + s], slot_grads[s]);
        } catch (const std::exception& e) {
#pragma omp critical(phosc_train_failure)
          if (failure.empty()) failure = e.what();
        }
      }
      if (!failure.empty()) throw Error(ErrorCode::kDivergedLoss, "training step failed: " + failure);
      grads.zero();
      double batch_loss = 0.0;
      for (std::size_t s = 0; s < count; ++s) {
        grads.add_scaled(slot_grads[s], 1.0f);
        batch_loss += slot_loss[s];
      }
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorCode::kDivergedLoss, "non-finite loss in epoch " + std::to_string(epoch));
      }
      epoch_loss += batch_loss;
      adam.step(params, grads, adam_cfg);
    }

    EpochLog entry{epoch, epoch_loss / static_cast<double>(n_train), validate(params), adam_cfg.learning_rate};
    if (!std::isfinite(entry.val_metric)) {
      throw Error(ErrorCode::kDivergedLoss, "non-finite validation metric in epoch " + std::to_string(epoch));
    }
    if (plateau.observe(entry.val_metric)) {
      result.best = net::Checkpoint{meta, params};
      result.best_epoch = epoch;
      result.best_val = entry.val_metric;
    }
    result.log.push_back(entry);
    write_log_line(log_out, entry);
    if (on_epoch) on_epoch(entry);
  }
  result.best.meta["best_epoch"] = result.best_epoch;
  result.best.meta["best_val"] = result.best_val;
  return result;
}

void require_data(const std::vector<Sample>& train, const std::vector<Sample>& val) {
  if (train.empty()) throw Error(ErrorCode::kEmptyDataset, "training set is empty");
  if (val.empty()) throw Error(ErrorCode::kEmptyDataset, "validation set is empty");
}

}  // namespace

TrainResult train_phoscnet(PhoscNet<float>& model, const std::vector<Sample>& train, const std::vector<Sample>& val,
                           const TrainConfig& cfg, std::ostream* log_out, const EpochCallback& on_epoch) {
  require_data(train, val);
  // Targets and the matching lexicon come from the training labels.
  std::vector<std::string> words;
  std::set<std::string> seen;
  for (const auto& s : train) {
    if (seen.insert(s.label).second) words.push_back(s.label);
  }
  for (const auto& s : val) {
    if (!seen.count(s.label)) {
      throw Error(ErrorCode::kMissingPartition, "validation word '" + s.label + "' is not in the training set");
    }
  }
  const matcher::Lexicon lexicon(words, {}, model.phos_config(), model.phoc_config());
  std::map<std::string, AttributeSignature> targets;
  for (const auto& w : words) targets[w] = phosc_encode(w, model.phos_config(), model.phoc_config());

  auto step = [&](const net::ParamStore<float>& params, std::size_t i, net::ParamStore<float>& g) {
    const auto pass = model.forward(params, train[i].image);
    const auto& t = targets.at(train[i].label);
    const auto loss = phosc_loss<float>(pass.phoc.output().span(), pass.phos.output().span(), t.phoc, t.phos,
                                        cfg.lambda_c, cfg.lambda_s);
    model.backward(params, pass, loss.grad_phoc, loss.grad_phos, g);
    return loss.total;
  };
  auto validate = [&](const net::ParamStore<float>&) {
    std::vector<std::string> pred(val.size()), truth(val.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::size_t i = 0; i < val.size(); ++i) {
      pred[i] = matcher::nearest(model.predict_signature(val[i].image), lexicon.seen()).word;
      truth[i] = val[i].label;
    }
    return metrics::top1_accuracy(pred, truth);
  };
  nlohmann::json meta = checkpoint_meta(model);
  meta["train"] = to_json(cfg);
  return run_training(model.params(), train.size(), cfg, true, meta, step, validate, log_out, on_epoch);
}

TrainResult train_ctc(PhoscCtc<float>& model, const std::string& variant, const std::vector<Sample>& train,
                      const std::vector<Sample>& val, const TrainConfig& cfg, std::ostream* log_out,
                      const EpochCallback& on_epoch) {
  require_data(train, val);
  std::vector<std::vector<int>> labels(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    labels[i] = model.alphabet().encode(train[i].label);
    if (ctc::required_frames(labels[i]) > model.time_steps()) {
      throw Error(ErrorCode::kInfeasibleLabel, "training sample " + std::to_string(i) + " '" + train[i].label +
                                                   "' needs " + std::to_string(ctc::required_frames(labels[i])) +
                                                   " frames, model emits " + std::to_string(model.time_steps()));
    }
  }
  auto step = [&](const net::ParamStore<float>& params, std::size_t i, net::ParamStore<float>& g) {
    return model.loss_and_backward(params, train[i].image, train[i].label, g);
  };
  auto validate = [&](const net::ParamStore<float>&) {
    std::vector<std::string> pred(val.size()), truth(val.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::size_t i = 0; i < val.size(); ++i) {
      pred[i] = model.predict_string(val[i].image);
      truth[i] = val[i].label;
    }
    return metrics::cer(pred, truth);
  };
  nlohmann::json meta = checkpoint_meta(model, variant);
  meta["train"] = to_json(cfg);
  return run_training(model.params(), train.size(), cfg, false, meta, step, validate, log_out, on_epoch);
}

}  // namespace phosc::model
