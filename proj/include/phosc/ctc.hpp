#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phosc::ctc {

// Character written for the blank class in textual paths.
inline constexpr char kBlankChar = '-';

// Ordered label symbols; the blank is the extra class at index size().
class CtcAlphabet {
 public:
  explicit CtcAlphabet(std::string symbols);

  std::size_t size() const { return symbols_.size(); }
  std::size_t num_classes() const { return symbols_.size() + 1; }
  int blank_index() const { return static_cast<int>(symbols_.size()); }
  const std::string& symbols() const { return symbols_; }

  int index_of(char c) const;  // throws InvalidSymbol
  char symbol(int index) const;
  std::vector<int> encode(std::string_view label) const;
  std::string decode(std::span<const int> indices) const;

 private:
  std::string symbols_;
  int lookup_[256];
};

// T x C row-stochastic matrix in 64-bit floats.
class ProbMatrix {
 public:
  ProbMatrix() = default;
  // Validates shape, non-negativity and row sums (1 +- 1e-9).
  ProbMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static ProbMatrix from_logits(std::span<const double> logits, std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t t, std::size_t k) const { return values_[t * cols_ + k]; }
  std::span<const double> row(std::size_t t) const {
    return {values_.data() + t * cols_, cols_};
  }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Header line: "# symbols=<symbols> blank=last", then one TSV row per timestep.
void write_prob_matrix(std::ostream& out, const ProbMatrix& probs, const CtcAlphabet& alphabet);
ProbMatrix read_prob_matrix(std::istream& in, std::string* symbols_out = nullptr);

// Merge consecutive duplicates, then drop blanks.
std::string collapse(std::string_view path, const CtcAlphabet& alphabet, char blank = kBlankChar);
std::vector<int> collapse_indices(std::span<const int> path, int blank);

// Minimum number of frames needed to emit label: |label| + adjacent repeats.
std::size_t required_frames(std::span<const int> label);

struct CtcLogProb {
  double value;   // ln p(label | probs); -inf when infeasible
  bool feasible;
};

CtcLogProb ctc_log_prob(const ProbMatrix& probs, std::string_view label, const CtcAlphabet& alphabet);

struct CtcLossResult {
  double neg_log_prob = 0.0;
  std::vector<double> grad_wrt_logits;  // T x num_classes, row-major
};

// -ln p(label | softmax(logits)) and its gradient w.r.t. the logits.
// Throws InfeasibleLabel when T is too short for the label.
CtcLossResult ctc_loss_and_grad(std::span<const double> logits, std::size_t time_steps,
                                std::span<const int> label, const CtcAlphabet& alphabet);
CtcLossResult ctc_loss_and_grad(std::span<const double> logits, std::size_t time_steps,
                                std::string_view label, const CtcAlphabet& alphabet);

std::string best_path_decode(const ProbMatrix& probs, const CtcAlphabet& alphabet);

struct Beam {
  std::string prefix;
  double log_prob;  // ln(p_blank + p_nonblank) at the final timestep
};

struct BeamSearchResult {
  std::string best;
  std::vector<Beam> beams;  // ranked, best first
};

BeamSearchResult beam_search_decode(const ProbMatrix& probs, const CtcAlphabet& alphabet,
                                    std::size_t beam_width);

// Exhaustive enumeration of all (num_classes)^T paths, accumulated by
// collapsed label. Throws TooLarge when more than 1e6 paths.
std::map<std::string, double> brute_force_label_posterior(const ProbMatrix& probs,
                                                          const CtcAlphabet& alphabet,
                                                          std::size_t max_len);

}  // namespace phosc::ctc
