#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace phosc {

inline constexpr std::size_t kNumShapes = 11;
inline constexpr std::string_view kDefaultAlphabet = "abcdefghijklmnopqrstuvwxyz";

// Primitive shape attributes, in vector order.
enum class Shape : int {
  kAscender = 0,
  kDescender,
  kLeftSmallSemicircle,
  kRightSmallSemicircle,
  kLeftLargeSemicircle,
  kRightLargeSemicircle,
  kCircle,
  kVerticalLine,
  kDiagonal,     // "/"
  kDiagonal135,  // "\"
  kHorizontalLine,
};

std::string_view shape_name(Shape shape);

using ShapeCounts = std::array<int, kNumShapes>;

// Per-character primitive shape counts; the ground truth behind PHOS.
class ShapeTable {
 public:
  ShapeTable() = default;

  void set(char c, const ShapeCounts& counts);
  bool contains(char c) const { return entries_.count(c) != 0; }
  const ShapeCounts& at(char c) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<char, ShapeCounts>& entries() const { return entries_; }

  // Throws MissingCharacter if any alphabet character has no entry.
  void require_alphabet(std::string_view alphabet) const;

  bool operator==(const ShapeTable&) const = default;

 private:
  std::map<char, ShapeCounts> entries_;
};

// The table shipped in data/shape_table.txt, compiled in.
const ShapeTable& default_shape_table();
std::string_view default_shape_table_text();

// Text format: "<char> <11 ints>" per line, '#' starts a comment.
ShapeTable parse_shape_table(std::string_view text, std::string_view alphabet = kDefaultAlphabet);
std::string format_shape_table(const ShapeTable& table);
ShapeTable load_shape_table(const std::filesystem::path& path,
                            std::string_view alphabet = kDefaultAlphabet);
void save_shape_table(const ShapeTable& table, const std::filesystem::path& path);

struct PhosConfig {
  std::vector<int> levels{1, 2, 3, 4, 5};
  ShapeTable shape_table = default_shape_table();

  std::size_t length() const;
  void validate() const;
};

struct PhocConfig {
  std::vector<int> levels{2, 3, 4, 5};
  std::string alphabet{kDefaultAlphabet};
  double occupancy_threshold = 0.5;

  std::size_t length() const;
  void validate() const;
};

struct AttributeSignature {
  std::string word;
  std::vector<float> phoc;
  std::vector<float> phos;
  std::vector<float> combined;  // [phoc, phos]
};

// Segment of character i in an n-character word at pyramid level h
// (midpoint rule): floor((i + 0.5) / n * h), clamped to h - 1.
int segment_of(std::size_t i, std::size_t n, int h);

std::vector<float> phos_encode(std::string_view word, const PhosConfig& cfg);
std::vector<float> phoc_encode(std::string_view word, const PhocConfig& cfg);
AttributeSignature phosc_encode(std::string_view word, const PhosConfig& phos_cfg,
                                const PhocConfig& phoc_cfg);

enum class SignatureMode { kPhoc, kPhos, kPhosc };

// TSV: word<TAB>comma-separated vector, one line per signature, input order.
void write_signature_tsv(std::ostream& out, const std::vector<AttributeSignature>& signatures,
                         SignatureMode mode = SignatureMode::kPhosc);

}  // namespace phosc
