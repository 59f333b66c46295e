#include "phosc/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "phosc/error.hpp"

namespace phosc::metrics {

namespace {

void check_pairs(std::size_t a, std::size_t b) {
  if (a == 0 || b == 0) throw Error(ErrorCode::kEmpty, "no samples");
  if (a != b) {
    throw Error(ErrorCode::kShapeMismatch,
                std::to_string(a) + " predictions for " + std::to_string(b) + " references");
  }
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

double top1_accuracy(std::span<const std::string> predictions, std::span<const std::string> truths) {
  check_pairs(predictions.size(), truths.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == truths[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double harmonic_mean(double a_u, double a_s) {
  if (!(a_u >= 0.0 && a_u <= 1.0) || !(a_s >= 0.0 && a_s <= 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "accuracies must lie in [0, 1], got " + std::to_string(a_u) + ", " +
                                            std::to_string(a_s));
  }
  if (a_u + a_s == 0.0) return 0.0;
  return 2.0 * a_u * a_s / (a_u + a_s);
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] != b[j - 1])});
      diag = up;
    }
  }
  return row[b.size()];
}

CerResult cer_detail(std::span<const std::string> predicted, std::span<const std::string> truth) {
  check_pairs(predicted.size(), truth.size());
  CerResult r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].empty()) throw Error(ErrorCode::kEmptyTruth, "reference " + std::to_string(i) + " is empty");
    r.sum += static_cast<double>(edit_distance(predicted[i], truth[i])) / static_cast<double>(truth[i].size());
  }
  r.samples = truth.size();
  r.mean = r.sum / static_cast<double>(r.samples);
  return r;
}

LengthConfusion length_confusion(std::span<const std::string> predictions, std::span<const std::string> truths) {
  check_pairs(predictions.size(), truths.size());
  LengthConfusion lc;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    lc.max_length = std::max({lc.max_length, predictions[i].size(), truths[i].size()});
  const std::size_t n = lc.max_length + 1;
  lc.counts.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < predictions.size(); ++i) lc.counts[predictions[i].size()][truths[i].size()] += 1.0;

  lc.pred_marginal.assign(n, 0.0);
  lc.true_marginal.assign(n, 0.0);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t t = 0; t < n; ++t) {
      lc.pred_marginal[p] += lc.counts[p][t];
      lc.true_marginal[t] += lc.counts[p][t];
    }
  lc.by_true = lc.counts;
  lc.by_pred = lc.counts;
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t t = 0; t < n; ++t) {
      if (lc.true_marginal[t] > 0) lc.by_true[p][t] /= lc.true_marginal[t];
      if (lc.pred_marginal[p] > 0) lc.by_pred[p][t] /= lc.pred_marginal[p];
    }
  return lc;
}

nlohmann::json to_json(const LengthConfusion& lc) {
  return {{"max_length", lc.max_length},
          {"axes", "rows: predicted length, columns: true length"},
          {"counts", lc.counts},
          {"normalized_by_true_length", lc.by_true},
          {"normalized_by_predicted_length", lc.by_pred},
          {"predicted_length_marginal", lc.pred_marginal},
          {"true_length_marginal", lc.true_marginal}};
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j{{"model", r.model}, {"protocol", r.protocol}, {"A_u", r.a_u},         {"A_s", r.a_s},
                   {"h", r.h},         {"n_unseen", r.n_unseen}, {"n_seen", r.n_seen}};
  auto cer_json = [](const CerResult& c) {
    return nlohmann::json{{"mean", c.mean}, {"sum", c.sum}, {"samples", c.samples}};
  };
  if (r.cer_seen) j["cer_seen"] = cer_json(*r.cer_seen);
  if (r.cer_unseen) j["cer_unseen"] = cer_json(*r.cer_unseen);
  if (r.length_confusion) j["length_confusion"] = to_json(*r.length_confusion);
  return j;
}

void write_table_tsv(std::ostream& out, const std::vector<EvalReport>& reports) {
  out << "model\tprotocol\tA_u\tA_s\th\tcer_seen\n";
  for (const auto& r : reports) {
    out << r.model << '\t' << r.protocol << '\t' << fixed(r.a_u, 4) << '\t' << fixed(r.a_s, 4) << '\t'
        << fixed(r.h, 4) << '\t' << (r.cer_seen ? fixed(r.cer_seen->mean, 4) : "-") << '\n';
  }
}

}  // namespace phosc::metrics
