#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "phosc/signature.hpp"

namespace phosc::synth {

inline constexpr int kImageWidth = 250;
inline constexpr int kImageHeight = 50;
inline constexpr std::size_t kMaxWordLength = 24;

// 8-bit grayscale, row-major, white (255) background.
struct WordImage {
  int width = kImageWidth;
  int height = kImageHeight;
  std::vector<std::uint8_t> pixels;
  std::string label;
  int style_id = 0;
  double baseline = 31.0;  // pixel row of the text baseline, the shear pivot

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y * width + x)]; }
};

// Pen parameters of one handwriting style.
struct Style {
  double thickness = 0.14;  // stroke width in x-height units
  double slant = 0.0;       // horizontal shear (tan of the slant angle)
  double x_scale = 1.0;     // glyph width multiplier
  double spacing = 0.22;    // gap between glyphs
};

// Styles 0 and 1 are fixed; higher ids are drawn from a seeded generator.
Style style_for(int style_id);

// One pen stroke in glyph units: baseline at y = 0, x-height at 1, ascender
// at 1.8, descender at -0.8. Polylines approximate arcs.
struct Stroke {
  Shape shape;
  std::vector<std::pair<double, double>> points;
};

struct Glyph {
  double width = 0.0;
  std::vector<Stroke> strokes;
};

// Glyph for a lowercase letter. Its strokes realize exactly the primitive
// counts of the default shape table (checked by tests).
const Glyph& glyph_for(char c);

// Deterministic per (word, style_id). Throws WordTooLong, UnknownCharacter.
WordImage render_word(const std::string& word, int style_id);

// Horizontal shear about the baseline (white fill) followed by clamped
// additive Gaussian noise. |shear_degrees| <= 25, sigma >= 0, else OutOfRange.
WordImage augment(const WordImage& image, double shear_degrees, double noise_sigma, std::uint64_t seed);

// Binary PGM (P5).
void write_pgm(const WordImage& image, const std::filesystem::path& path);
WordImage read_pgm(const std::filesystem::path& path);

// Lowercase words, one per line; '#' comments and blank lines skipped.
std::vector<std::string> load_word_list(const std::filesystem::path& path);
std::vector<std::string> default_word_list();

enum class Partition { kTrain, kVal, kTestSeen, kTestUnseen };
std::string partition_name(Partition p);
Partition parse_partition(const std::string& name);

struct ManifestRow {
  std::string path;  // relative to the manifest's directory
  std::string label;
  Partition partition = Partition::kTrain;
};

struct SplitManifest {
  std::vector<ManifestRow> rows;

  std::vector<ManifestRow> partition(Partition p) const;
  std::vector<std::string> labels(Partition p) const;  // distinct, first-appearance order
};

// TSV path<TAB>label<TAB>partition, LF endings.
void write_manifest(const SplitManifest& manifest, const std::filesystem::path& path);
SplitManifest read_manifest(const std::filesystem::path& path);

struct AuditResult {
  bool ok = true;
  std::vector<std::string> problems;
};

// Unseen labels must not occur in train, val or test_seen, and every
// test_seen label must occur in train.
AuditResult audit_manifest(const SplitManifest& manifest);

struct CorpusConfig {
  int n_seen = 200;
  int n_unseen = 50;
  int styles = 2;
  // Images per word in each partition.
  int train_per_word = 12;
  int val_per_word = 1;
  int test_seen_per_word = 2;
  int test_unseen_per_word = 8;
  double max_shear_degrees = 12.0;
  double max_noise_sigma = 10.0;
  std::uint64_t seed = 1;
};

// First n_seen words are seen, the next n_unseen unseen. Writes images under
// out_dir/images and the manifest to out_dir/manifest.tsv. Throws
// InsufficientWords, IoError.
SplitManifest build_corpus(const std::vector<std::string>& words, const CorpusConfig& cfg,
                           const std::filesystem::path& out_dir);

}  // namespace phosc::synth
