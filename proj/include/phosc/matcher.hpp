#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "phosc/signature.hpp"

namespace phosc::matcher {

struct LexiconEntry {
  std::string word;
  std::vector<float> signature;  // combined [phoc, phos]
  double norm = 0.0;
};

// Seen and unseen word sets with their attribute signatures. Immutable once
// built. Construction rejects words shared between (or repeated within) the
// sides, and distinct words whose signatures coincide.
class Lexicon {
 public:
  Lexicon(const std::vector<std::string>& seen, const std::vector<std::string>& unseen,
          const PhosConfig& phos = {}, const PhocConfig& phoc = {});

  const std::vector<LexiconEntry>& seen() const { return seen_; }
  const std::vector<LexiconEntry>& unseen() const { return unseen_; }
  // Seen entries followed by unseen entries.
  const std::vector<LexiconEntry>& all() const { return all_; }
  std::size_t signature_length() const { return length_; }

 private:
  std::vector<LexiconEntry> seen_;
  std::vector<LexiconEntry> unseen_;
  std::vector<LexiconEntry> all_;
  std::size_t length_ = 0;
};

// TSV rows "word<TAB>seen|unseen".
Lexicon load_lexicon(const std::filesystem::path& path, const PhosConfig& phos = {}, const PhocConfig& phoc = {});
void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

LexiconEntry make_entry(std::string word, std::vector<float> signature);

// Candidate with the highest cosine similarity; ties go to the
// lexicographically smallest word. Throws ZeroVector, EmptyLexicon,
// ShapeMismatch.
const LexiconEntry& nearest(std::span<const float> prediction, std::span<const LexiconEntry> candidates);

// Nearest signature restricted to the unseen words.
std::string zsl_predict(std::span<const float> prediction, const Lexicon& lexicon);
// Same over seen and unseen words together.
std::string gzsl_predict(std::span<const float> prediction, const Lexicon& lexicon);

// Sequence models have no search space: a prediction is correct only when the
// decoded string equals the label.
inline bool ctc_predict_eval(const std::string& decoded, const std::string& truth) { return decoded == truth; }

}  // namespace phosc::matcher
