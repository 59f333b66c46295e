#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <set>
#include <sstream>

#include "phosc/error.hpp"
#include "phosc/rng.hpp"
#include "phosc/signature.hpp"

using namespace phosc;

namespace {

std::vector<float> block(const std::vector<float>& v, std::size_t offset, std::size_t len) {
  return {v.begin() + static_cast<std::ptrdiff_t>(offset), v.begin() + static_cast<std::ptrdiff_t>(offset + len)};
}

// Segment strings for a word at level h, built from segment_of.
std::vector<std::string> segments(const std::string& word, int h) {
  std::vector<std::string> out(static_cast<std::size_t>(h));
  for (std::size_t i = 0; i < word.size(); ++i) out[static_cast<std::size_t>(segment_of(i, word.size(), h))] += word[i];
  return out;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no phosc::Error thrown";
  return ErrorCode::kConfigError;
}

}  // namespace

TEST(ShapeTable, DefaultCoversAlphabetWithElevenCounts) {
  const auto& table = default_shape_table();
  EXPECT_EQ(table.size(), 26u);
  for (char c : kDefaultAlphabet) {
    ASSERT_TRUE(table.contains(c));
    for (int v : table.at(c)) EXPECT_GE(v, 0);
  }
  // Reference entries named in the design notes.
  ShapeCounts l{};
  l[static_cast<int>(Shape::kAscender)] = 1;
  l[static_cast<int>(Shape::kVerticalLine)] = 1;
  EXPECT_EQ(table.at('l'), l);
  ShapeCounts o{};
  o[static_cast<int>(Shape::kCircle)] = 1;
  EXPECT_EQ(table.at('o'), o);
}

TEST(ShapeTable, SaveLoadRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "phosc_shape_roundtrip.txt";
  save_shape_table(default_shape_table(), path);
  EXPECT_EQ(load_shape_table(path), default_shape_table());
  std::filesystem::remove(path);
}

TEST(ShapeTable, MissingCharacterRejected) {
  std::string text = format_shape_table(default_shape_table());
  text.erase(text.find("q "), text.find('\n', text.find("q ")) - text.find("q ") + 1);
  EXPECT_EQ(code_of([&] { parse_shape_table(text); }), ErrorCode::kMissingCharacter);
}

TEST(ShapeTable, NegativeCountIsParseErrorWithLine) {
  std::string text = "# header\n" + format_shape_table(default_shape_table());
  const auto pos = text.find("b 1 0");
  text.replace(pos, 5, "b -1 0");
  try {
    parse_shape_table(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(ShapeTable, CommentsAndBadRowsHandled) {
  EXPECT_EQ(code_of([] { parse_shape_table("a 1 2 3\n", "a"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_shape_table("ab 0 0 0 0 0 0 0 0 0 0 0\n", "a"); }), ErrorCode::kParseError);
  const auto t = parse_shape_table("# only a\na 0 0 0 0 0 0 0 0 0 0 1  # trailing comment\n", "a");
  EXPECT_EQ(t.at('a')[10], 1);
}

TEST(Phos, LengthIs165ForDefaultLevels) {
  PhosConfig cfg;
  EXPECT_EQ(cfg.length(), 165u);
  EXPECT_EQ(phos_encode("listen", cfg).size(), 165u);
  EXPECT_EQ(phos_encode("a", cfg).size(), 165u);
}

TEST(Phos, ListenSilentSegmentation) {
  EXPECT_EQ(segments("listen", 1), (std::vector<std::string>{"listen"}));
  EXPECT_EQ(segments("listen", 2), (std::vector<std::string>{"lis", "ten"}));
  EXPECT_EQ(segments("listen", 3), (std::vector<std::string>{"li", "st", "en"}));
  EXPECT_EQ(segments("silent", 2), (std::vector<std::string>{"sil", "ent"}));
  EXPECT_EQ(segments("silent", 3), (std::vector<std::string>{"si", "le", "nt"}));
}

TEST(Phos, BlockEqualsSumOfSegmentShapes) {
  PhosConfig cfg;
  const auto v = phos_encode("listen", cfg);
  // Level 3 block starts after levels 1 and 2.
  const std::size_t base = (1 + 2) * kNumShapes;
  const std::vector<std::string> segs{"li", "st", "en"};
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t k = 0; k < kNumShapes; ++k) {
      int expect = 0;
      for (char c : segs[s]) expect += cfg.shape_table.at(c)[k];
      EXPECT_EQ(v[base + s * kNumShapes + k], static_cast<float>(expect));
    }
  }
}

TEST(Phos, AnagramsShareLevelOneButDiffer) {
  PhosConfig cfg;
  const auto a = phos_encode("listen", cfg);
  const auto b = phos_encode("silent", cfg);
  EXPECT_EQ(block(a, 0, kNumShapes), block(b, 0, kNumShapes));
  EXPECT_NE(a, b);
  // Level 2 splits into anagram halves too ("lis"/"sil", "ten"/"ent").
  EXPECT_EQ(block(a, kNumShapes, 2 * kNumShapes), block(b, kNumShapes, 2 * kNumShapes));
  EXPECT_NE(block(a, 3 * kNumShapes, 3 * kNumShapes), block(b, 3 * kNumShapes, 3 * kNumShapes));
}

TEST(Phos, LevelBlocksSumToLevelOne) {
  PhosConfig cfg;
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::string w;
    const auto n = 1 + rng.below(12);
    for (std::uint64_t i = 0; i < n; ++i) w += static_cast<char>('a' + rng.below(26));
    const auto v = phos_encode(w, cfg);
    std::size_t base = 0;
    for (int h : cfg.levels) {
      for (std::size_t k = 0; k < kNumShapes; ++k) {
        float sum = 0;
        for (int s = 0; s < h; ++s) sum += v[base + static_cast<std::size_t>(s) * kNumShapes + k];
        EXPECT_EQ(sum, v[k]) << w;
      }
      base += static_cast<std::size_t>(h) * kNumShapes;
    }
  }
}

TEST(Phos, Errors) {
  PhosConfig cfg;
  EXPECT_EQ(code_of([&] { phos_encode("", cfg); }), ErrorCode::kEmptyWord);
  EXPECT_EQ(code_of([&] { phos_encode("Abc", cfg); }), ErrorCode::kUnknownCharacter);
  EXPECT_EQ(code_of([&] { phos_encode("a1", cfg); }), ErrorCode::kUnknownCharacter);
}

TEST(Phos, SegmentRuleEachCharacterOnceAndInRange) {
  for (std::size_t n = 1; n <= 24; ++n)
    for (int h = 1; h <= 7; ++h) {
      int prev = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const int s = segment_of(i, n, h);
        EXPECT_GE(s, prev);
        EXPECT_LT(s, h);
        prev = s;
      }
    }
}

TEST(Phoc, DefaultLength364) {
  PhocConfig cfg;
  EXPECT_EQ(cfg.length(), 364u);
  EXPECT_EQ(phoc_encode("word", cfg).size(), 364u);
}

TEST(Phoc, TwoCharacterWordLevelTwo) {
  PhocConfig cfg;
  cfg.levels = {2};
  const auto v = phoc_encode("ab", cfg);
  EXPECT_EQ(v[0 * 26 + 0], 1.0f);  // 'a' region 0
  EXPECT_EQ(v[1 * 26 + 0], 0.0f);
  EXPECT_EQ(v[0 * 26 + 1], 0.0f);
  EXPECT_EQ(v[1 * 26 + 1], 1.0f);  // 'b' region 1
  EXPECT_EQ(std::count(v.begin(), v.end(), 1.0f), 2);
}

TEST(Phoc, SingleCharacterFillsBothHalves) {
  PhocConfig cfg;
  cfg.levels = {2};
  const auto v = phoc_encode("a", cfg);
  EXPECT_EQ(v[0], 1.0f);
  EXPECT_EQ(v[26], 1.0f);
  EXPECT_EQ(std::count(v.begin(), v.end(), 1.0f), 2);
}

TEST(Phoc, BinaryAndOrderSensitive) {
  PhocConfig cfg;
  const auto a = phoc_encode("listen", cfg);
  const auto b = phoc_encode("silent", cfg);
  for (float x : a) EXPECT_TRUE(x == 0.0f || x == 1.0f);
  EXPECT_NE(a, b);
}

TEST(Phoc, Errors) {
  PhocConfig cfg;
  EXPECT_EQ(code_of([&] { phoc_encode("", cfg); }), ErrorCode::kEmptyWord);
  EXPECT_EQ(code_of([&] { phoc_encode("hi!", cfg); }), ErrorCode::kUnknownCharacter);
  cfg.levels = {3, 2};
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kConfigError);
}

TEST(Phosc, CombinedLayout) {
  PhosConfig phos;
  PhocConfig phoc;
  const auto sig = phosc_encode("a", phos, phoc);
  EXPECT_EQ(sig.combined.size(), 529u);
  EXPECT_EQ(block(sig.combined, 0, 364), sig.phoc);
  EXPECT_EQ(block(sig.combined, 364, 165), sig.phos);
  for (float x : sig.phos) EXPECT_EQ(x, std::floor(x));
}

TEST(Phosc, SingleCharacterSignaturesPairwiseDistinct) {
  PhosConfig phos;
  PhocConfig phoc;
  std::set<std::vector<float>> seen;
  for (char c : kDefaultAlphabet) {
    const auto sig = phosc_encode(std::string(1, c), phos, phoc);
    EXPECT_TRUE(seen.insert(sig.combined).second) << c;
    EXPECT_TRUE(std::any_of(sig.combined.begin(), sig.combined.end(), [](float x) { return x != 0.0f; }));
  }
}

TEST(Phosc, SignatureTsvColumns) {
  PhosConfig phos;
  PhocConfig phoc;
  std::vector<AttributeSignature> sigs{phosc_encode("the", phos, phoc), phosc_encode("of", phos, phoc)};
  for (auto [mode, cols] : {std::pair{SignatureMode::kPhos, 165}, std::pair{SignatureMode::kPhoc, 364},
                            std::pair{SignatureMode::kPhosc, 529}}) {
    std::ostringstream out;
    write_signature_tsv(out, sigs, mode);
    std::istringstream in(out.str());
    std::string line;
    std::vector<std::string> words;
    while (std::getline(in, line)) {
      const auto tab = line.find('\t');
      words.push_back(line.substr(0, tab));
      EXPECT_EQ(std::count(line.begin() + static_cast<std::ptrdiff_t>(tab), line.end(), ',') + 1, cols);
    }
    EXPECT_EQ(words, (std::vector<std::string>{"the", "of"}));
  }
}
