#include "phosc/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "phosc/error.hpp"

namespace phosc::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

}  // namespace

CtcAlphabet::CtcAlphabet(std::string symbols) : symbols_(std::move(symbols)) {
  std::fill(std::begin(lookup_), std::end(lookup_), -1);
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto c = static_cast<unsigned char>(symbols_[i]);
    if (symbols_[i] == kBlankChar) {
      throw Error(ErrorCode::kInvalidSymbol, "blank character cannot be a label symbol");
    }
    if (lookup_[c] != -1) throw Error(ErrorCode::kInvalidSymbol, "duplicate symbol in alphabet");
    lookup_[c] = static_cast<int>(i);
  }
}

int CtcAlphabet::index_of(char c) const {
  const int idx = lookup_[static_cast<unsigned char>(c)];
  if (idx < 0) throw Error(ErrorCode::kInvalidSymbol, std::string("symbol '") + c + "' not in alphabet");
  return idx;
}

char CtcAlphabet::symbol(int index) const {
  if (index == blank_index()) return kBlankChar;
  if (index < 0 || index > blank_index()) throw Error(ErrorCode::kInvalidSymbol, "class index out of range");
  return symbols_[static_cast<std::size_t>(index)];
}

std::vector<int> CtcAlphabet::encode(std::string_view label) const {
  std::vector<int> out;
  out.reserve(label.size());
  for (char c : label) out.push_back(index_of(c));
  return out;
}

std::string CtcAlphabet::decode(std::span<const int> indices) const {
  std::string out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(symbol(i));
  return out;
}

ProbMatrix::ProbMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_ || cols_ == 0) {
    throw Error(ErrorCode::kShapeMismatch, "probability matrix size does not match rows x cols");
  }
  for (std::size_t t = 0; t < rows_; ++t) {
    double sum = 0.0;
    for (double v : row(t)) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::kFormatError, "probability row " + std::to_string(t) + " has invalid entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::kFormatError, "probability row " + std::to_string(t) + " does not sum to 1");
    }
  }
}

ProbMatrix ProbMatrix::from_logits(std::span<const double> logits, std::size_t rows, std::size_t cols) {
  if (logits.size() != rows * cols) throw Error(ErrorCode::kShapeMismatch, "logit matrix size mismatch");
  std::vector<double> values(logits.size());
  for (std::size_t t = 0; t < rows; ++t) {
    const double* in = logits.data() + t * cols;
    double* out = values.data() + t * cols;
    const double mx = *std::max_element(in, in + cols);
    double sum = 0.0;
    for (std::size_t k = 0; k < cols; ++k) sum += (out[k] = std::exp(in[k] - mx));
    for (std::size_t k = 0; k < cols; ++k) out[k] /= sum;
  }
  return ProbMatrix(rows, cols, std::move(values));
}

void write_prob_matrix(std::ostream& out, const ProbMatrix& probs, const CtcAlphabet& alphabet) {
  if (probs.cols() != alphabet.num_classes()) {
    throw Error(ErrorCode::kShapeMismatch, "matrix columns do not match alphabet");
  }
  out << "# symbols=" << alphabet.symbols() << " blank=last\n";
  out << std::setprecision(17);
  for (std::size_t t = 0; t < probs.rows(); ++t) {
    for (std::size_t k = 0; k < probs.cols(); ++k) {
      if (k) out << '\t';
      out << probs(t, k);
    }
    out << '\n';
  }
}

ProbMatrix read_prob_matrix(std::istream& in, std::string* symbols_out) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("# symbols=", 0) != 0) {
    throw Error(ErrorCode::kFormatError, "missing '# symbols=... blank=last' header");
  }
  const auto blank_pos = header.rfind(" blank=last");
  if (blank_pos == std::string::npos) throw Error(ErrorCode::kFormatError, "header must declare blank=last");
  const std::string symbols = header.substr(10, blank_pos - 10);
  const std::size_t cols = symbols.size() + 1;
  std::vector<double> values;
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t n = 0;
    double v = 0.0;
    while (fields >> v) {
      values.push_back(v);
      ++n;
    }
    if (!fields.eof() || n != cols) {
      throw Error(ErrorCode::kFormatError, "row " + std::to_string(rows + 1) + " must hold " +
                                               std::to_string(cols) + " numbers");
    }
    ++rows;
  }
  if (symbols_out) *symbols_out = symbols;
  return ProbMatrix(rows, cols, std::move(values));
}

std::vector<int> collapse_indices(std::span<const int> path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int k : path) {
    if (k != prev && k != blank) out.push_back(k);
    prev = k;
  }
  return out;
}

std::string collapse(std::string_view path, const CtcAlphabet& alphabet, char blank) {
  std::string out;
  char prev = 0;
  bool have_prev = false;
  for (char c : path) {
    if (c != blank) alphabet.index_of(c);
    if (!(have_prev && c == prev) && c != blank) out.push_back(c);
    prev = c;
    have_prev = true;
  }
  return out;
}

std::size_t required_frames(std::span<const int> label) {
  std::size_t need = label.size();
  for (std::size_t i = 1; i < label.size(); ++i) need += label[i] == label[i - 1] ? 1 : 0;
  return need;
}

namespace {

// Blank-interleaved extended label: blank, l1, blank, l2, ..., blank.
std::vector<int> extend_label(std::span<const int> label, int blank) {
  std::vector<int> ext(2 * label.size() + 1, blank);
  for (std::size_t i = 0; i < label.size(); ++i) ext[2 * i + 1] = label[i];
  return ext;
}

bool can_skip(const std::vector<int>& ext, std::size_t s, int blank) {
  return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
}

// log alpha over (t, s), row-major T x S; log_probs is T x C.
std::vector<double> forward_variables(const std::vector<double>& log_probs, std::size_t T, std::size_t C,
                                      const std::vector<int>& ext, int blank) {
  const std::size_t S = ext.size();
  std::vector<double> alpha(T * S, kNegInf);
  alpha[0] = log_probs[static_cast<std::size_t>(ext[0])];
  if (S > 1) alpha[1] = log_probs[static_cast<std::size_t>(ext[1])];
  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = alpha.data() + (t - 1) * S;
    double* cur = alpha.data() + t * S;
    const double* lp = log_probs.data() + t * C;
    for (std::size_t s = 0; s < S; ++s) {
      double acc = prev[s];
      if (s >= 1) acc = log_add(acc, prev[s - 1]);
      if (can_skip(ext, s, blank)) acc = log_add(acc, prev[s - 2]);
      cur[s] = acc == kNegInf ? kNegInf : acc + lp[static_cast<std::size_t>(ext[s])];
    }
  }
  return alpha;
}

// log beta over (t, s), excluding the emission at t itself.
std::vector<double> backward_variables(const std::vector<double>& log_probs, std::size_t T, std::size_t C,
                                       const std::vector<int>& ext, int blank) {
  const std::size_t S = ext.size();
  std::vector<double> beta(T * S, kNegInf);
  beta[(T - 1) * S + S - 1] = 0.0;
  if (S > 1) beta[(T - 1) * S + S - 2] = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    const double* next = beta.data() + (t + 1) * S;
    double* cur = beta.data() + t * S;
    const double* lp = log_probs.data() + (t + 1) * C;
    for (std::size_t s = 0; s < S; ++s) {
      auto term = [&](std::size_t s2) {
        return next[s2] == kNegInf ? kNegInf : next[s2] + lp[static_cast<std::size_t>(ext[s2])];
      };
      double acc = term(s);
      if (s + 1 < S) acc = log_add(acc, term(s + 1));
      if (s + 2 < S && can_skip(ext, s + 2, blank)) acc = log_add(acc, term(s + 2));
      cur[s] = acc;
    }
  }
  return beta;
}

double total_log_prob(const std::vector<double>& alpha, std::size_t T, std::size_t S) {
  const double* last = alpha.data() + (T - 1) * S;
  return S > 1 ? log_add(last[S - 1], last[S - 2]) : last[S - 1];
}

}  // namespace

CtcLogProb ctc_log_prob(const ProbMatrix& probs, std::string_view label, const CtcAlphabet& alphabet) {
  if (probs.cols() != alphabet.num_classes()) {
    throw Error(ErrorCode::kShapeMismatch, "matrix columns do not match alphabet");
  }
  const std::vector<int> encoded = alphabet.encode(label);
  const std::size_t T = probs.rows();
  if (T == 0 || required_frames(encoded) > T) return {kNegInf, false};
  std::vector<double> log_probs(probs.values().size());
  std::transform(probs.values().begin(), probs.values().end(), log_probs.begin(), safe_log);
  const auto ext = extend_label(encoded, alphabet.blank_index());
  const auto alpha = forward_variables(log_probs, T, probs.cols(), ext, alphabet.blank_index());
  return {total_log_prob(alpha, T, ext.size()), true};
}

CtcLossResult ctc_loss_and_grad(std::span<const double> logits, std::size_t time_steps,
                                std::span<const int> label, const CtcAlphabet& alphabet) {
  const std::size_t T = time_steps;
  const std::size_t C = alphabet.num_classes();
  if (logits.size() != T * C) throw Error(ErrorCode::kShapeMismatch, "logits must be T x (|symbols|+1)");
  for (int k : label) {
    if (k < 0 || k >= alphabet.blank_index()) throw Error(ErrorCode::kInvalidSymbol, "label index out of range");
  }
  if (T == 0 || required_frames(label) > T) {
    throw Error(ErrorCode::kInfeasibleLabel, "label of length " + std::to_string(label.size()) + " needs " +
                                                 std::to_string(required_frames(label)) + " frames, have " +
                                                 std::to_string(T));
  }
  // log-softmax per row
  std::vector<double> log_probs(T * C);
  for (std::size_t t = 0; t < T; ++t) {
    const double* in = logits.data() + t * C;
    double* out = log_probs.data() + t * C;
    const double mx = *std::max_element(in, in + C);
    double sum = 0.0;
    for (std::size_t k = 0; k < C; ++k) sum += std::exp(in[k] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t k = 0; k < C; ++k) out[k] = in[k] - lse;
  }
  const int blank = alphabet.blank_index();
  const auto ext = extend_label(label, blank);
  const std::size_t S = ext.size();
  const auto alpha = forward_variables(log_probs, T, C, ext, blank);
  const auto beta = backward_variables(log_probs, T, C, ext, blank);
  const double log_p = total_log_prob(alpha, T, S);

  CtcLossResult result;
  result.neg_log_prob = -log_p;
  result.grad_wrt_logits.assign(T * C, 0.0);
  std::vector<double> occupancy(C);
  for (std::size_t t = 0; t < T; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (std::size_t s = 0; s < S; ++s) {
      const double a = alpha[t * S + s];
      const double b = beta[t * S + s];
      if (a == kNegInf || b == kNegInf) continue;
      auto& o = occupancy[static_cast<std::size_t>(ext[s])];
      o = log_add(o, a + b);
    }
    double* g = result.grad_wrt_logits.data() + t * C;
    for (std::size_t k = 0; k < C; ++k) {
      const double post = occupancy[k] == kNegInf ? 0.0 : std::exp(occupancy[k] - log_p);
      g[k] = std::exp(log_probs[t * C + k]) - post;
    }
  }
  return result;
}

CtcLossResult ctc_loss_and_grad(std::span<const double> logits, std::size_t time_steps,
                                std::string_view label, const CtcAlphabet& alphabet) {
  const auto encoded = alphabet.encode(label);
  return ctc_loss_and_grad(logits, time_steps, std::span<const int>(encoded), alphabet);
}

std::string best_path_decode(const ProbMatrix& probs, const CtcAlphabet& alphabet) {
  if (probs.cols() != alphabet.num_classes()) {
    throw Error(ErrorCode::kShapeMismatch, "matrix columns do not match alphabet");
  }
  std::vector<int> path(probs.rows());
  for (std::size_t t = 0; t < probs.rows(); ++t) {
    const auto row = probs.row(t);
    // max_element returns the first maximum: ties go to the lowest class.
    path[t] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  const auto collapsed = collapse_indices(path, alphabet.blank_index());
  return alphabet.decode(collapsed);
}

namespace {

struct PrefixScore {
  double blank = kNegInf;
  double non_blank = kNegInf;
  double total() const { return log_add(blank, non_blank); }
};

using BeamMap = std::map<std::vector<int>, PrefixScore>;

// Highest total first; equal totals ordered by lexicographic prefix.
std::vector<BeamMap::const_iterator> rank(const BeamMap& beams) {
  std::vector<BeamMap::const_iterator> order;
  order.reserve(beams.size());
  for (auto it = beams.begin(); it != beams.end(); ++it) order.push_back(it);
  std::stable_sort(order.begin(), order.end(),
                   [](auto a, auto b) { return a->second.total() > b->second.total(); });
  return order;
}

}  // namespace

BeamSearchResult beam_search_decode(const ProbMatrix& probs, const CtcAlphabet& alphabet,
                                    std::size_t beam_width) {
  if (beam_width < 1) throw Error(ErrorCode::kOutOfRange, "beam width must be >= 1");
  if (probs.cols() != alphabet.num_classes()) {
    throw Error(ErrorCode::kShapeMismatch, "matrix columns do not match alphabet");
  }
  const int blank = alphabet.blank_index();
  BeamMap beams;
  beams[{}].blank = 0.0;
  for (std::size_t t = 0; t < probs.rows(); ++t) {
    BeamMap next;
    const double lp_blank = safe_log(probs(t, static_cast<std::size_t>(blank)));
    for (const auto& [prefix, score] : beams) {
      const double total = score.total();
      auto& stay = next[prefix];
      stay.blank = log_add(stay.blank, total + lp_blank);
      for (int c = 0; c < blank; ++c) {
        const double lp = safe_log(probs(t, static_cast<std::size_t>(c)));
        if (lp == kNegInf) continue;
        std::vector<int> extended = prefix;
        extended.push_back(c);
        if (!prefix.empty() && prefix.back() == c) {
          // A repeat without an intervening blank collapses into the prefix.
          auto& same = next[prefix];
          same.non_blank = log_add(same.non_blank, score.non_blank + lp);
          auto& ext = next[extended];
          ext.non_blank = log_add(ext.non_blank, score.blank + lp);
        } else {
          auto& ext = next[extended];
          ext.non_blank = log_add(ext.non_blank, total + lp);
        }
      }
    }
    const auto order = rank(next);
    BeamMap kept;
    for (std::size_t i = 0; i < order.size() && i < beam_width; ++i) kept.insert(*order[i]);
    beams = std::move(kept);
  }
  BeamSearchResult result;
  for (auto it : rank(beams)) result.beams.push_back({alphabet.decode(it->first), it->second.total()});
  result.best = result.beams.front().prefix;
  return result;
}

std::map<std::string, double> brute_force_label_posterior(const ProbMatrix& probs,
                                                          const CtcAlphabet& alphabet,
                                                          std::size_t max_len) {
  const std::size_t T = probs.rows();
  const std::size_t C = probs.cols();
  if (C != alphabet.num_classes()) throw Error(ErrorCode::kShapeMismatch, "matrix columns do not match alphabet");
  double count = 1.0;
  for (std::size_t t = 0; t < T; ++t) count *= static_cast<double>(C);
  if (count > 1e6) throw Error(ErrorCode::kTooLarge, "more than 1e6 paths to enumerate");
  std::map<std::string, double> posterior;
  std::vector<int> path(T, 0);
  const auto total = static_cast<std::size_t>(count);
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t rem = n;
    double p = 1.0;
    for (std::size_t t = 0; t < T; ++t) {
      path[t] = static_cast<int>(rem % C);
      rem /= C;
      p *= probs(t, static_cast<std::size_t>(path[t]));
    }
    const auto label = collapse_indices(path, alphabet.blank_index());
    if (label.size() <= max_len) posterior[alphabet.decode(label)] += p;
  }
  return posterior;
}

}  // namespace phosc::ctc
