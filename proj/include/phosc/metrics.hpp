#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace phosc::metrics {

// Exact-match fraction. Throws Empty on no samples, ShapeMismatch on unequal
// lengths.
double top1_accuracy(std::span<const std::string> predictions, std::span<const std::string> truths);

// 2ab / (a + b); 0 when both are 0. Inputs outside [0, 1] throw OutOfRange.
double harmonic_mean(double a_u, double a_s);

// Levenshtein distance (unit-cost insert, delete, substitute).
std::size_t edit_distance(std::string_view a, std::string_view b);

struct CerResult {
  double mean = 0.0;  // reported CER
  double sum = 0.0;   // sum of per-sample ED / |truth|
  std::size_t samples = 0;
};

// Character error rate; throws EmptyTruth on an empty reference string.
CerResult cer_detail(std::span<const std::string> predicted, std::span<const std::string> truth);
inline double cer(std::span<const std::string> predicted, std::span<const std::string> truth) {
  return cer_detail(predicted, truth).mean;
}

// counts[p][t] = number of samples with predicted length p and true length t,
// for lengths 0..max_length.
struct LengthConfusion {
  std::size_t max_length = 0;
  std::vector<std::vector<double>> counts;
  std::vector<std::vector<double>> by_true;  // each non-empty column sums to 1
  std::vector<std::vector<double>> by_pred;  // each non-empty row sums to 1
  std::vector<double> pred_marginal;         // samples per predicted length
  std::vector<double> true_marginal;         // samples per true length
};

LengthConfusion length_confusion(std::span<const std::string> predictions, std::span<const std::string> truths);

nlohmann::json to_json(const LengthConfusion& lc);

// One evaluated model: unseen and seen top-1 under the chosen protocol, their
// harmonic mean and, for sequence models, CER on the seen test split.
struct EvalReport {
  std::string model;
  std::string protocol;  // "zsl" or "gzsl"
  double a_u = 0.0;
  double a_s = 0.0;
  double h = 0.0;
  std::size_t n_unseen = 0;
  std::size_t n_seen = 0;
  std::optional<CerResult> cer_seen;
  std::optional<CerResult> cer_unseen;
  std::optional<LengthConfusion> length_confusion;
};

nlohmann::json to_json(const EvalReport& report);

// Tab-separated comparison table, one row per model: model, A_u, A_s, h, CER.
void write_table_tsv(std::ostream& out, const std::vector<EvalReport>& reports);

}  // namespace phosc::metrics
