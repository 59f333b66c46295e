#include "phosc/matcher.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "phosc/error.hpp"

namespace phosc::matcher {

namespace {

double norm_of(std::span<const float> v) {
  double s = 0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

std::vector<LexiconEntry> encode_side(const std::vector<std::string>& words, const PhosConfig& phos,
                                      const PhocConfig& phoc) {
  std::vector<LexiconEntry> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(make_entry(w, phosc_encode(w, phos, phoc).combined));
  return out;
}

}  // namespace

Lexicon::Lexicon(const std::vector<std::string>& seen, const std::vector<std::string>& unseen, const PhosConfig& phos,
                 const PhocConfig& phoc)
    : seen_(encode_side(seen, phos, phoc)), unseen_(encode_side(unseen, phos, phoc)), length_(phoc.length() + phos.length()) {
  all_ = seen_;
  all_.insert(all_.end(), unseen_.begin(), unseen_.end());
  std::set<std::string> words;
  std::map<std::vector<float>, std::string> sigs;
  for (const auto* side : {&seen_, &unseen_}) {
    for (const auto& e : *side) {
      if (!words.insert(e.word).second) throw Error(ErrorCode::kDuplicateWord, "word '" + e.word + "' listed twice");
      auto [it, fresh] = sigs.emplace(e.signature, e.word);
      if (!fresh) {
        throw Error(ErrorCode::kDuplicateSignature,
                    "'" + it->second + "' and '" + e.word + "' have identical signatures");
      }
    }
  }
}

Lexicon load_lexicon(const std::filesystem::path& path, const PhosConfig& phos, const PhocConfig& phoc) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open lexicon " + path.string());
  std::vector<std::string> seen, unseen;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const std::string word = line.substr(0, tab);
    const std::string side = tab == std::string::npos ? "" : line.substr(tab + 1);
    if (side == "seen") {
      seen.push_back(word);
    } else if (side == "unseen") {
      unseen.push_back(word);
    } else {
      throw Error(ErrorCode::kFormatError, path.string() + " line " + std::to_string(lineno) +
                                               ": expected word<TAB>seen|unseen");
    }
  }
  return Lexicon(seen, unseen, phos, phoc);
}

void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  for (const auto& e : lexicon.seen()) out << e.word << "\tseen\n";
  for (const auto& e : lexicon.unseen()) out << e.word << "\tunseen\n";
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShapeMismatch, "cosine of vectors with different lengths");
  const double na = norm_of(a), nb = norm_of(b);
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kZeroVector, "cosine with a zero vector");
  double dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
  return dot / (na * nb);
}

LexiconEntry make_entry(std::string word, std::vector<float> signature) {
  const double n = norm_of(signature);
  return {std::move(word), std::move(signature), n};
}

const LexiconEntry& nearest(std::span<const float> prediction, std::span<const LexiconEntry> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::kEmptyLexicon, "no candidate words");
  const std::size_t length = candidates.front().signature.size();
  if (prediction.size() != length) {
    throw Error(ErrorCode::kShapeMismatch, "prediction has length " + std::to_string(prediction.size()) +
                                               ", lexicon signatures have " + std::to_string(length));
  }
  const double pn = norm_of(prediction);
  if (pn == 0.0) throw Error(ErrorCode::kZeroVector, "prediction vector has zero norm");
  const LexiconEntry* best = nullptr;
  double best_score = 0;
  for (const auto& e : candidates) {
    double dot = 0;
    for (std::size_t i = 0; i < length; ++i) dot += static_cast<double>(prediction[i]) * e.signature[i];
    const double score = e.norm == 0.0 ? 0.0 : dot / (pn * e.norm);
    if (!best || score > best_score || (score == best_score && e.word < best->word)) {
      best = &e;
      best_score = score;
    }
  }
  return *best;
}

std::string zsl_predict(std::span<const float> prediction, const Lexicon& lexicon) {
  if (lexicon.unseen().empty()) throw Error(ErrorCode::kEmptyLexicon, "no unseen words");
  return nearest(prediction, lexicon.unseen()).word;
}

std::string gzsl_predict(std::span<const float> prediction, const Lexicon& lexicon) {
  if (lexicon.all().empty()) throw Error(ErrorCode::kEmptyLexicon, "empty lexicon");
  return nearest(prediction, lexicon.all()).word;
}

}  // namespace phosc::matcher
