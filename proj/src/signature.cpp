#include "phosc/signature.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "phosc/error.hpp"

namespace phosc {

namespace embedded {
extern const char* const kShapeTableText;
}  // namespace embedded

std::string_view shape_name(Shape shape) {
  switch (shape) {
    case Shape::kAscender: return "ascender";
    case Shape::kDescender: return "descender";
    case Shape::kLeftSmallSemicircle: return "left small semi-circle";
    case Shape::kRightSmallSemicircle: return "right small semi-circle";
    case Shape::kLeftLargeSemicircle: return "left large semi-circle";
    case Shape::kRightLargeSemicircle: return "right large semi-circle";
    case Shape::kCircle: return "circle";
    case Shape::kVerticalLine: return "vertical line";
    case Shape::kDiagonal: return "diagonal line";
    case Shape::kDiagonal135: return "diagonal line at 135 degrees";
    case Shape::kHorizontalLine: return "horizontal line";
  }
  return "?";
}

void ShapeTable::set(char c, const ShapeCounts& counts) {
  for (int v : counts) {
    if (v < 0) throw Error(ErrorCode::kParseError, std::string("negative count for '") + c + "'");
  }
  entries_[c] = counts;
}

const ShapeCounts& ShapeTable::at(char c) const {
  auto it = entries_.find(c);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kUnknownCharacter, std::string("no shape entry for '") + c + "'");
  }
  return it->second;
}

void ShapeTable::require_alphabet(std::string_view alphabet) const {
  for (char c : alphabet) {
    if (!contains(c)) {
      throw Error(ErrorCode::kMissingCharacter, std::string("shape table lacks '") + c + "'");
    }
  }
}

const ShapeTable& default_shape_table() {
  static const ShapeTable table = parse_shape_table(embedded::kShapeTableText);
  return table;
}

std::string_view default_shape_table_text() { return embedded::kShapeTableText; }

ShapeTable parse_shape_table(std::string_view text, std::string_view alphabet) {
  ShapeTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string key;
    if (!(fields >> key)) continue;
    auto fail = [&](const std::string& what) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": " + what);
    };
    if (key.size() != 1) fail("expected a single character, got '" + key + "'");
    ShapeCounts counts{};
    for (std::size_t k = 0; k < kNumShapes; ++k) {
      long long v = 0;
      if (!(fields >> v)) fail("expected 11 integer counts");
      if (v < 0) fail("negative count");
      counts[k] = static_cast<int>(v);
    }
    std::string extra;
    if (fields >> extra) fail("trailing field '" + extra + "'");
    if (table.contains(key[0])) fail(std::string("duplicate entry for '") + key[0] + "'");
    table.set(key[0], counts);
  }
  table.require_alphabet(alphabet);
  return table;
}

std::string format_shape_table(const ShapeTable& table) {
  std::ostringstream out;
  for (const auto& [c, counts] : table.entries()) {
    out << c;
    for (int v : counts) out << ' ' << v;
    out << '\n';
  }
  return out.str();
}

ShapeTable load_shape_table(const std::filesystem::path& path, std::string_view alphabet) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_shape_table(buf.str(), alphabet);
}

void save_shape_table(const ShapeTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << format_shape_table(table);
}

namespace {

void validate_levels(const std::vector<int>& levels, const char* what) {
  if (levels.empty()) throw Error(ErrorCode::kConfigError, std::string(what) + " levels empty");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1 || (i > 0 && levels[i] <= levels[i - 1])) {
      throw Error(ErrorCode::kConfigError,
                  std::string(what) + " levels must be positive and strictly increasing");
    }
  }
}

std::size_t level_sum(const std::vector<int>& levels) {
  return static_cast<std::size_t>(std::accumulate(levels.begin(), levels.end(), 0));
}

}  // namespace

std::size_t PhosConfig::length() const { return level_sum(levels) * kNumShapes; }

void PhosConfig::validate() const { validate_levels(levels, "PHOS"); }

std::size_t PhocConfig::length() const { return level_sum(levels) * alphabet.size(); }

void PhocConfig::validate() const {
  validate_levels(levels, "PHOC");
  if (alphabet.empty()) throw Error(ErrorCode::kConfigError, "PHOC alphabet empty");
  std::string sorted = alphabet;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorCode::kConfigError, "PHOC alphabet has duplicate characters");
  }
  if (!(occupancy_threshold > 0.0 && occupancy_threshold <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "occupancy_threshold must lie in (0,1]");
  }
}

int segment_of(std::size_t i, std::size_t n, int h) {
  const auto hh = static_cast<std::size_t>(h);
  auto s = static_cast<int>(((2 * i + 1) * hh) / (2 * n));
  return std::min(s, h - 1);
}

std::vector<float> phos_encode(std::string_view word, const PhosConfig& cfg) {
  if (word.empty()) throw Error(ErrorCode::kEmptyWord, "cannot encode an empty word");
  std::vector<const ShapeCounts*> rows;
  rows.reserve(word.size());
  for (char c : word) {
    if (!cfg.shape_table.contains(c)) {
      throw Error(ErrorCode::kUnknownCharacter,
                  "word '" + std::string(word) + "' has character '" + c + "'");
    }
    rows.push_back(&cfg.shape_table.at(c));
  }
  std::vector<float> out(cfg.length(), 0.0f);
  std::size_t base = 0;
  for (int h : cfg.levels) {
    for (std::size_t i = 0; i < word.size(); ++i) {
      const std::size_t block = base + static_cast<std::size_t>(segment_of(i, word.size(), h)) * kNumShapes;
      for (std::size_t k = 0; k < kNumShapes; ++k) out[block + k] += static_cast<float>((*rows[i])[k]);
    }
    base += static_cast<std::size_t>(h) * kNumShapes;
  }
  return out;
}

std::vector<float> phoc_encode(std::string_view word, const PhocConfig& cfg) {
  if (word.empty()) throw Error(ErrorCode::kEmptyWord, "cannot encode an empty word");
  const std::size_t alpha = cfg.alphabet.size();
  std::vector<std::size_t> index(word.size());
  for (std::size_t i = 0; i < word.size(); ++i) {
    auto pos = cfg.alphabet.find(word[i]);
    if (pos == std::string::npos) {
      throw Error(ErrorCode::kUnknownCharacter,
                  "word '" + std::string(word) + "' has character '" + word[i] + "'");
    }
    index[i] = pos;
  }
  // Intervals are compared in units of 1/(n*h): character i spans [i*h, (i+1)*h],
  // region r spans [r*n, (r+1)*n]; the bit is set when the overlap covers at
  // least threshold * h of these units.
  const auto n = static_cast<long long>(word.size());
  std::vector<float> out(cfg.length(), 0.0f);
  std::size_t base = 0;
  for (int level : cfg.levels) {
    const long long h = level;
    const double need = cfg.occupancy_threshold * static_cast<double>(h);
    for (long long i = 0; i < n; ++i) {
      for (long long r = 0; r < h; ++r) {
        const long long overlap = std::min((i + 1) * h, (r + 1) * n) - std::max(i * h, r * n);
        if (overlap > 0 && static_cast<double>(overlap) >= need - 1e-12) {
          out[base + static_cast<std::size_t>(r) * alpha + index[static_cast<std::size_t>(i)]] = 1.0f;
        }
      }
    }
    base += static_cast<std::size_t>(h) * alpha;
  }
  return out;
}

AttributeSignature phosc_encode(std::string_view word, const PhosConfig& phos_cfg,
                                const PhocConfig& phoc_cfg) {
  AttributeSignature sig;
  sig.word = std::string(word);
  sig.phoc = phoc_encode(word, phoc_cfg);
  sig.phos = phos_encode(word, phos_cfg);
  sig.combined = sig.phoc;
  sig.combined.insert(sig.combined.end(), sig.phos.begin(), sig.phos.end());
  return sig;
}

void write_signature_tsv(std::ostream& out, const std::vector<AttributeSignature>& signatures,
                         SignatureMode mode) {
  for (const auto& sig : signatures) {
    const std::vector<float>& v = mode == SignatureMode::kPhoc   ? sig.phoc
                                  : mode == SignatureMode::kPhos ? sig.phos
                                                                 : sig.combined;
    out << sig.word << '\t';
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out << ',';
      out << v[i];
    }
    out << '\n';
  }
}

}  // namespace phosc
