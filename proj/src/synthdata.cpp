#include "phosc/synthdata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "phosc/error.hpp"
#include "phosc/rng.hpp"

namespace phosc::embedded {
extern const char* const kWordListText;
}

namespace phosc::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kAscender = 1.8;
constexpr double kDescender = -0.8;
constexpr double kMarginY = 0.2;
constexpr double kMarginX = 0.6;

// Glyph construction helpers.
struct GlyphBuilder {
  Glyph g;
  explicit GlyphBuilder(double width) { g.width = width; }

  GlyphBuilder& line(Shape s, double x0, double y0, double x1, double y1) {
    g.strokes.push_back({s, {{x0, y0}, {x1, y1}}});
    return *this;
  }
  // Elliptical arc from a0 to a1 degrees (counter-clockwise, 0 = +x).
  GlyphBuilder& arc(Shape s, double cx, double cy, double rx, double ry, double a0, double a1) {
    Stroke st{s, {}};
    const int n = std::max(8, static_cast<int>(std::abs(a1 - a0) / 10.0));
    for (int i = 0; i <= n; ++i) {
      const double a = (a0 + (a1 - a0) * i / n) * kPi / 180.0;
      st.points.emplace_back(cx + rx * std::cos(a), cy + ry * std::sin(a));
    }
    g.strokes.push_back(std::move(st));
    return *this;
  }
};

using S = Shape;

std::map<char, Glyph> build_glyphs() {
  std::map<char, Glyph> m;
  m['a'] = GlyphBuilder(0.6).arc(S::kLeftLargeSemicircle, 0.5, 0.5, 0.45, 0.5, 90, 270)
               .line(S::kVerticalLine, 0.5, 0, 0.5, 1).g;
  m['b'] = GlyphBuilder(0.6).line(S::kAscender, 0.05, 1, 0.05, kAscender)
               .line(S::kVerticalLine, 0.05, 0, 0.05, 1)
               .arc(S::kRightLargeSemicircle, 0.05, 0.5, 0.5, 0.5, -90, 90).g;
  m['c'] = GlyphBuilder(0.55).arc(S::kLeftLargeSemicircle, 0.5, 0.5, 0.45, 0.5, 90, 270).g;
  m['d'] = GlyphBuilder(0.6).arc(S::kLeftLargeSemicircle, 0.5, 0.5, 0.45, 0.5, 90, 270)
               .line(S::kVerticalLine, 0.5, 0, 0.5, 1)
               .line(S::kAscender, 0.5, 1, 0.5, kAscender).g;
  m['e'] = GlyphBuilder(0.65).arc(S::kLeftLargeSemicircle, 0.55, 0.5, 0.5, 0.5, 90, 270)
               .line(S::kHorizontalLine, 0.05, 0.5, 0.55, 0.5)
               .arc(S::kRightSmallSemicircle, 0.3, 0.75, 0.25, 0.25, -90, 90).g;
  m['f'] = GlyphBuilder(0.6).line(S::kVerticalLine, 0.3, 0, 0.3, 1)
               .line(S::kAscender, 0.3, 1, 0.3, kAscender)
               .line(S::kHorizontalLine, 0.3, kAscender, 0.6, kAscender)
               .line(S::kHorizontalLine, 0.05, 1, 0.55, 1).g;
  m['g'] = GlyphBuilder(0.62).arc(S::kCircle, 0.3, 0.6, 0.27, 0.4, 0, 360)
               .line(S::kDescender, 0.57, 0.6, 0.57, -0.5)
               .arc(S::kLeftSmallSemicircle, 0.32, -0.5, 0.25, 0.25, 180, 360).g;
  m['h'] = GlyphBuilder(0.55).line(S::kAscender, 0.05, 1, 0.05, kAscender)
               .line(S::kVerticalLine, 0.05, 0, 0.05, 1)
               .line(S::kVerticalLine, 0.5, 0, 0.5, 0.95)
               .line(S::kHorizontalLine, 0.05, 0.95, 0.5, 0.95).g;
  m['i'] = GlyphBuilder(0.2).line(S::kVerticalLine, 0.1, 0, 0.1, 1).g;
  m['j'] = GlyphBuilder(0.45).line(S::kVerticalLine, 0.4, 0, 0.4, 1)
               .line(S::kDescender, 0.4, 0, 0.4, -0.55)
               .arc(S::kLeftSmallSemicircle, 0.2, -0.55, 0.2, 0.2, 180, 360).g;
  m['k'] = GlyphBuilder(0.55).line(S::kAscender, 0.05, 1, 0.05, kAscender)
               .line(S::kVerticalLine, 0.05, 0, 0.05, 1)
               .line(S::kDiagonal, 0.05, 0.4, 0.5, 1)
               .line(S::kDiagonal135, 0.22, 0.62, 0.5, 0).g;
  m['l'] = GlyphBuilder(0.2).line(S::kAscender, 0.1, 1, 0.1, kAscender).line(S::kVerticalLine, 0.1, 0, 0.1, 1).g;
  m['m'] = GlyphBuilder(0.9).line(S::kVerticalLine, 0.05, 0, 0.05, 1)
               .line(S::kVerticalLine, 0.45, 0, 0.45, 0.8)
               .line(S::kVerticalLine, 0.85, 0, 0.85, 0.8)
               .arc(S::kRightSmallSemicircle, 0.25, 0.8, 0.2, 0.2, 180, 0)
               .arc(S::kRightSmallSemicircle, 0.65, 0.8, 0.2, 0.2, 180, 0).g;
  m['n'] = GlyphBuilder(0.55).line(S::kVerticalLine, 0.05, 0, 0.05, 1)
               .line(S::kVerticalLine, 0.5, 0, 0.5, 0.75)
               .arc(S::kRightSmallSemicircle, 0.275, 0.75, 0.225, 0.25, 180, 0).g;
  m['o'] = GlyphBuilder(0.6).arc(S::kCircle, 0.3, 0.5, 0.28, 0.5, 0, 360).g;
  m['p'] = GlyphBuilder(0.6).line(S::kVerticalLine, 0.05, 0, 0.05, 1)
               .line(S::kDescender, 0.05, 0, 0.05, kDescender)
               .arc(S::kRightLargeSemicircle, 0.05, 0.5, 0.5, 0.5, -90, 90).g;
  m['q'] = GlyphBuilder(0.6).arc(S::kLeftLargeSemicircle, 0.5, 0.5, 0.45, 0.5, 90, 270)
               .line(S::kVerticalLine, 0.5, 0, 0.5, 1)
               .line(S::kDescender, 0.5, 0, 0.5, kDescender).g;
  m['r'] = GlyphBuilder(0.5).line(S::kVerticalLine, 0.05, 0, 0.05, 1)
               .arc(S::kRightSmallSemicircle, 0.25, 0.75, 0.2, 0.25, 180, 20).g;
  m['s'] = GlyphBuilder(0.6).arc(S::kLeftSmallSemicircle, 0.3, 0.75, 0.25, 0.25, 90, 270)
               .arc(S::kRightSmallSemicircle, 0.3, 0.25, 0.25, 0.25, 90, -90).g;
  m['t'] = GlyphBuilder(0.6).line(S::kAscender, 0.3, 1, 0.3, 1.5)
               .line(S::kVerticalLine, 0.3, 0, 0.3, 1)
               .line(S::kHorizontalLine, 0.05, 1, 0.55, 1).g;
  m['u'] = GlyphBuilder(0.55).line(S::kVerticalLine, 0.05, 0, 0.05, 1)
               .line(S::kVerticalLine, 0.5, 0, 0.5, 1)
               .line(S::kHorizontalLine, 0.05, 0, 0.5, 0).g;
  m['v'] = GlyphBuilder(0.6).line(S::kDiagonal135, 0.05, 1, 0.3, 0).line(S::kDiagonal, 0.3, 0, 0.55, 1).g;
  m['w'] = GlyphBuilder(0.9).line(S::kDiagonal135, 0.05, 1, 0.25, 0)
               .line(S::kDiagonal, 0.25, 0, 0.45, 1)
               .line(S::kDiagonal135, 0.45, 1, 0.65, 0)
               .line(S::kDiagonal, 0.65, 0, 0.85, 1).g;
  m['x'] = GlyphBuilder(0.6).line(S::kDiagonal135, 0.05, 1, 0.55, 0).line(S::kDiagonal, 0.05, 0, 0.55, 1).g;
  m['y'] = GlyphBuilder(0.6).line(S::kDiagonal135, 0.05, 1, 0.3, 0)
               .line(S::kDiagonal, 0.3, 0, 0.55, 1)
               .line(S::kDescender, 0.3, 0, 0.12, kDescender).g;
  m['z'] = GlyphBuilder(0.6).line(S::kHorizontalLine, 0.05, 1, 0.55, 1)
               .line(S::kDiagonal, 0.05, 0, 0.55, 1)
               .line(S::kHorizontalLine, 0.05, 0, 0.55, 0).g;
  return m;
}

struct Segment {
  double x0, y0, x1, y1;
};

double segment_distance(const Segment& s, double px, double py) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = s.x0 + t * dx - px, ey = s.y0 + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

}  // namespace

Style style_for(int style_id) {
  if (style_id == 0) return {0.13, 0.0, 1.0, 0.22};
  if (style_id == 1) return {0.18, 0.3, 0.85, 0.16};
  Rng rng(mix_seed(0x5157, static_cast<std::uint64_t>(style_id)));
  Style s;
  s.thickness = rng.uniform(0.1, 0.2);
  s.slant = rng.uniform(-0.15, 0.35);
  s.x_scale = rng.uniform(0.8, 1.15);
  s.spacing = rng.uniform(0.12, 0.28);
  return s;
}

const Glyph& glyph_for(char c) {
  static const std::map<char, Glyph> glyphs = build_glyphs();
  auto it = glyphs.find(c);
  if (it == glyphs.end()) throw Error(ErrorCode::kUnknownCharacter, std::string("no glyph for '") + c + "'");
  return it->second;
}

WordImage render_word(const std::string& word, int style_id) {
  if (word.empty()) throw Error(ErrorCode::kEmptyWord, "cannot render an empty word");
  if (word.size() > kMaxWordLength) {
    throw Error(ErrorCode::kWordTooLong, "'" + word + "' has " + std::to_string(word.size()) + " characters, limit " +
                                             std::to_string(kMaxWordLength));
  }
  const Style style = style_for(style_id);

  // Lay out strokes in word units, slant applied.
  std::vector<Segment> segs;
  double pen = 0.0;
  for (char c : word) {
    const Glyph& g = glyph_for(c);
    for (const auto& st : g.strokes) {
      for (std::size_t i = 0; i + 1 < st.points.size(); ++i) {
        auto tx = [&](const std::pair<double, double>& p) { return pen + p.first * style.x_scale + style.slant * p.second; };
        segs.push_back({tx(st.points[i]), st.points[i].second, tx(st.points[i + 1]), st.points[i + 1].second});
      }
    }
    pen += g.width * style.x_scale + style.spacing;
  }
  double min_x = 1e9, max_x = -1e9;
  for (const auto& s : segs) {
    min_x = std::min({min_x, s.x0, s.x1});
    max_x = std::max({max_x, s.x0, s.x1});
  }
  const double units_w = (max_x - min_x) + 2 * kMarginX;
  const double units_h = (kAscender - kDescender) + 2 * kMarginY;
  const double scale = std::min(kImageHeight / units_h, kImageWidth / units_w);
  // Center horizontally; the vertical band is fixed so the baseline only
  // moves when a long word forces a smaller scale.
  const double off_x = (kImageWidth - (max_x - min_x) * scale) / 2.0 - min_x * scale;
  const double off_y = (kImageHeight - units_h * scale) / 2.0 + (kAscender + kMarginY) * scale;
  for (auto& s : segs) {
    s.x0 = off_x + s.x0 * scale;
    s.x1 = off_x + s.x1 * scale;
    s.y0 = off_y - s.y0 * scale;
    s.y1 = off_y - s.y1 * scale;
  }

  const double half = style.thickness * scale / 2.0;
  std::vector<double> ink(static_cast<std::size_t>(kImageWidth * kImageHeight), 0.0);
  for (const auto& s : segs) {
    const int x_lo = std::max(0, static_cast<int>(std::floor(std::min(s.x0, s.x1) - half - 1)));
    const int x_hi = std::min(kImageWidth - 1, static_cast<int>(std::ceil(std::max(s.x0, s.x1) + half + 1)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(std::min(s.y0, s.y1) - half - 1)));
    const int y_hi = std::min(kImageHeight - 1, static_cast<int>(std::ceil(std::max(s.y0, s.y1) + half + 1)));
    for (int y = y_lo; y <= y_hi; ++y)
      for (int x = x_lo; x <= x_hi; ++x) {
        // Pixel centers; coverage falls off linearly over one pixel.
        const double d = segment_distance(s, x + 0.5, y + 0.5);
        const double v = std::clamp(half + 0.5 - d, 0.0, 1.0);
        auto& cell = ink[static_cast<std::size_t>(y * kImageWidth + x)];
        cell = std::max(cell, v);
      }
  }
  WordImage img;
  img.label = word;
  img.style_id = style_id;
  img.baseline = off_y;
  img.pixels.resize(ink.size());
  for (std::size_t i = 0; i < ink.size(); ++i) img.pixels[i] = to_byte(255.0 * (1.0 - ink[i]));
  return img;
}

WordImage augment(const WordImage& image, double shear_degrees, double noise_sigma, std::uint64_t seed) {
  if (!(std::abs(shear_degrees) <= 25.0)) {
    throw Error(ErrorCode::kOutOfRange, "shear " + std::to_string(shear_degrees) + " outside [-25, 25] degrees");
  }
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::kOutOfRange, "noise sigma must be >= 0");
  WordImage out = image;
  const int w = image.width, h = image.height;
  if (shear_degrees != 0.0) {
    const double k = std::tan(shear_degrees * kPi / 180.0);
    for (int y = 0; y < h; ++y) {
      // Rows above the baseline move right for positive shear.
      const double shift = k * (image.baseline - (y + 0.5));
      for (int x = 0; x < w; ++x) {
        const double sx = x - shift;
        const int x0 = static_cast<int>(std::floor(sx));
        const double f = sx - x0;
        auto px = [&](int xx) { return xx < 0 || xx >= w ? 255.0 : static_cast<double>(image.at(xx, y)); };
        out.pixels[static_cast<std::size_t>(y * w + x)] = to_byte((1 - f) * px(x0) + f * px(x0 + 1));
      }
    }
  }
  if (noise_sigma > 0.0) {
    Rng rng(seed);
    for (auto& p : out.pixels) p = to_byte(p + noise_sigma * rng.normal());
  }
  return out;
}

void write_pgm(const WordImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

WordImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
      } else {
        t += c;
      }
    }
    return t;
  };
  if (token() != "P5") throw Error(ErrorCode::kFormatError, path.string() + " is not a binary PGM");
  WordImage img;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    if (std::stoi(token()) != 255) throw Error(ErrorCode::kFormatError, path.string() + ": maxval must be 255");
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kFormatError, path.string() + ": malformed PGM header");
  }
  if (img.width <= 0 || img.height <= 0) throw Error(ErrorCode::kFormatError, path.string() + ": bad dimensions");
  img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw Error(ErrorCode::kFormatError, path.string() + ": truncated pixel data");
  }
  img.baseline = img.height * 0.62;
  return img;
}

namespace {

std::vector<std::string> parse_word_list(std::istream& in, const std::string& origin) {
  std::vector<std::string> words;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }), line.end());
    if (line.empty()) continue;
    for (char c : line) {
      if (c < 'a' || c > 'z') {
        throw Error(ErrorCode::kUnknownCharacter, origin + " line " + std::to_string(lineno) + ": '" + line +
                                                      "' is not a lowercase word");
      }
    }
    words.push_back(line);
  }
  return words;
}

}  // namespace

std::vector<std::string> load_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open word list " + path.string());
  return parse_word_list(in, path.string());
}

std::vector<std::string> default_word_list() {
  std::istringstream in(embedded::kWordListText);
  return parse_word_list(in, "built-in word list");
}

std::string partition_name(Partition p) {
  switch (p) {
    case Partition::kTrain: return "train";
    case Partition::kVal: return "val";
    case Partition::kTestSeen: return "test_seen";
    case Partition::kTestUnseen: return "test_unseen";
  }
  return "?";
}

Partition parse_partition(const std::string& name) {
  for (auto p : {Partition::kTrain, Partition::kVal, Partition::kTestSeen, Partition::kTestUnseen})
    if (partition_name(p) == name) return p;
  throw Error(ErrorCode::kFormatError, "unknown partition '" + name + "'");
}

std::vector<ManifestRow> SplitManifest::partition(Partition p) const {
  std::vector<ManifestRow> out;
  for (const auto& r : rows)
    if (r.partition == p) out.push_back(r);
  return out;
}

std::vector<std::string> SplitManifest::labels(Partition p) const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : rows)
    if (r.partition == p && seen.insert(r.label).second) out.push_back(r.label);
  return out;
}

void write_manifest(const SplitManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  for (const auto& r : manifest.rows) out << r.path << '\t' << r.label << '\t' << partition_name(r.partition) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

SplitManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open manifest " + path.string());
  SplitManifest m;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    if (fields.size() != 3) {
      throw Error(ErrorCode::kFormatError, path.string() + " line " + std::to_string(lineno) +
                                               ": expected path<TAB>label<TAB>partition");
    }
    m.rows.push_back({fields[0], fields[1], parse_partition(fields[2])});
  }
  return m;
}

AuditResult audit_manifest(const SplitManifest& manifest) {
  AuditResult r;
  std::set<std::string> unseen, train, other;
  for (const auto& row : manifest.rows) {
    if (row.partition == Partition::kTestUnseen) {
      unseen.insert(row.label);
    } else {
      other.insert(row.label);
      if (row.partition == Partition::kTrain) train.insert(row.label);
    }
  }
  for (const auto& w : unseen)
    if (other.count(w)) r.problems.push_back("unseen label '" + w + "' also appears in train/val/test_seen");
  for (const auto& row : manifest.rows)
    if (row.partition == Partition::kTestSeen && !train.count(row.label)) {
      r.problems.push_back("test_seen label '" + row.label + "' has no training images");
    }
  r.ok = r.problems.empty();
  return r;
}

SplitManifest build_corpus(const std::vector<std::string>& words, const CorpusConfig& cfg,
                           const std::filesystem::path& out_dir) {
  if (cfg.n_seen < 1 || cfg.n_unseen < 0 || cfg.styles < 1) {
    throw Error(ErrorCode::kConfigError, "corpus needs n_seen >= 1, n_unseen >= 0, styles >= 1");
  }
  const std::size_t need = static_cast<std::size_t>(cfg.n_seen + cfg.n_unseen);
  if (words.size() < need) {
    throw Error(ErrorCode::kInsufficientWords, "word list has " + std::to_string(words.size()) + " words, need " +
                                                   std::to_string(need));
  }
  struct Job {
    ManifestRow row;
    std::size_t word_index;
    int copy;
  };
  std::vector<Job> jobs;
  auto add = [&](Partition p, std::size_t first, std::size_t count, int per_word) {
    for (std::size_t w = first; w < first + count; ++w)
      for (int c = 0; c < per_word; ++c) {
        const std::string rel = "images/" + partition_name(p) + "/" + words[w] + "_" + std::to_string(c) + ".pgm";
        jobs.push_back({{rel, words[w], p}, w, c});
      }
  };
  const auto n_seen = static_cast<std::size_t>(cfg.n_seen), n_unseen = static_cast<std::size_t>(cfg.n_unseen);
  add(Partition::kTrain, 0, n_seen, cfg.train_per_word);
  add(Partition::kVal, 0, n_seen, cfg.val_per_word);
  add(Partition::kTestSeen, 0, n_seen, cfg.test_seen_per_word);
  add(Partition::kTestUnseen, n_seen, n_unseen, cfg.test_unseen_per_word);

  std::error_code ec;
  for (auto p : {Partition::kTrain, Partition::kVal, Partition::kTestSeen, Partition::kTestUnseen}) {
    std::filesystem::create_directories(out_dir / "images" / partition_name(p), ec);
    if (ec) throw Error(ErrorCode::kIoError, "cannot create " + (out_dir / "images").string() + ": " + ec.message());
  }

  std::string failure;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& job = jobs[i];
    // Every image's randomness derives from its own coordinates, so the
    // corpus does not depend on thread scheduling.
    const std::uint64_t tag = (static_cast<std::uint64_t>(job.row.partition) << 48) ^
                              (static_cast<std::uint64_t>(job.word_index) << 16) ^ static_cast<std::uint64_t>(job.copy);
    Rng rng(mix_seed(cfg.seed, tag));
    const int style = static_cast<int>((job.word_index + static_cast<std::size_t>(job.copy)) %
                                       static_cast<std::size_t>(cfg.styles));
    const double shear = rng.uniform(-cfg.max_shear_degrees, cfg.max_shear_degrees);
    const double sigma = rng.uniform(0.0, cfg.max_noise_sigma);
    try {
      const auto img = augment(render_word(job.row.label, style), shear, sigma, rng.next_u64());
      write_pgm(img, out_dir / job.row.path);
    } catch (const std::exception& e) {
#pragma omp critical(phosc_corpus_failure)
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) throw Error(ErrorCode::kIoError, failure);

  SplitManifest manifest;
  for (auto& j : jobs) manifest.rows.push_back(std::move(j.row));
  write_manifest(manifest, out_dir / "manifest.tsv");
  return manifest;
}

}  // namespace phosc::synth
