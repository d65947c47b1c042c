#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "schematik/corpus.hpp"
#include "schematik/image.hpp"
#include "schematik/random.hpp"

namespace schematik {

enum class FontStyle : std::uint8_t { Regular, Bold, Italic };

/// Monochrome glyph bitmap. Row 0 of the bitmap sits `ascent` pixels above
/// the baseline; the bitmap is drawn one pixel right of the pen position.
struct Glyph {
  int width = 0;
  int height = 0;
  int ascent = 0;
  int advance = 0;
  std::vector<std::uint8_t> bits;

  bool ink(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
};

/// One style at one pixel size. `size` is the cap height in pixels.
class Font {
 public:
  Font(FontStyle style, int size, std::map<char32_t, Glyph> glyphs);

  FontStyle style() const { return style_; }
  int size() const { return size_; }
  int descent() const { return descent_; }
  /// Baseline-to-baseline distance inside a block of text.
  int line_pitch() const { return size_ + descent_ - 1; }
  int space_advance() const { return space_advance_; }

  bool has(char32_t c) const { return glyphs_.contains(c); }
  /// Throws std::out_of_range for code points outside the atlas.
  const Glyph& glyph(char32_t c) const;
  int text_width(std::u32string_view s) const;

 private:
  FontStyle style_;
  int size_;
  int descent_;
  int space_advance_;
  std::map<char32_t, Glyph> glyphs_;
};

/// Procedurally generated glyphs for three styles at a set of sizes.
/// Immutable once built, so it can be shared across threads.
class GlyphAtlas {
 public:
  static GlyphAtlas build(const std::u32string& charset, const std::vector<int>& sizes);

  const Font& font(FontStyle style, int size) const;
  const std::u32string& charset() const { return charset_; }

 private:
  std::u32string charset_;
  std::map<std::pair<FontStyle, int>, std::shared_ptr<const Font>> fonts_;
};

/// Decoration symbol identifier -> private-use code point.
class SymbolMap {
 public:
  SymbolMap() = default;
  /// Throws std::invalid_argument unless the mapping is injective.
  explicit SymbolMap(std::map<std::string, char32_t> mapping);

  const std::map<std::string, char32_t>& mapping() const { return mapping_; }
  std::u32string code_points() const;

 private:
  std::map<std::string, char32_t> mapping_;
};

SymbolMap default_symbol_map();

struct TextPools {
  std::vector<std::string> surnames;
  std::vector<std::string> forenames;
  std::vector<std::string> abbreviations;
  std::vector<std::string> order_names;
  std::vector<std::string> municipality_names;
  int year_min = 1848;
  int year_max = 1918;

  /// Throws std::invalid_argument when a pool or string is empty.
  void validate() const;
  std::u32string code_points() const;
};

TextPools default_text_pools();

struct ClassWeights {
  double paragraph = 0.58;
  double big_paragraph = 0.03;
  double h1 = 0.02;
  double h2 = 0.07;
  double h3 = 0.06;
  double h4 = 0.05;
  double name_entry = 0.12;
  double curly = 0.07;

  double weight(LayoutClass c) const;
  void set(LayoutClass c, double w);
};

struct SynthConfig {
  int page_w = 1405;
  int page_h = 1988;
  int column_count = 3;
  int margin_left = 60;
  int margin_right = 60;
  int margin_top = 70;
  int margin_bottom = 70;
  int column_gap = 40;
  int size_h1 = 28;
  int size_h2 = 20;
  int size_h3 = 14;
  int size_paragraph = 14;
  int size_h4 = 14;
  int hanging_indent = 24;
  /// Blank pixel rows between consecutive elements.
  int element_gap = 10;
  ClassWeights weights;
  std::uint64_t seed = 0;

  int text_width() const { return page_w - margin_left - margin_right; }
  int column_width() const;
  int column_x(int column) const;

  /// Throws std::invalid_argument on inconsistent geometry or weights.
  void validate() const;
};

SynthConfig synth_config_from_json(const std::string& text);
std::string synth_config_to_json(const SynthConfig& cfg);

struct TextRun {
  std::string text;  // UTF-8
  FontStyle style = FontStyle::Regular;
  /// Set on NameEntry page references, which hug the right column edge.
  bool right_aligned = false;
};

/// Text content for one element of the given class. For Curly this is the
/// keyword placed right of the brace.
std::vector<TextRun> sample_text(const TextPools& pools, const SymbolMap& symbols,
                                 LayoutClass kind, Rng& rng);

/// Plain transcript of styled runs: words joined by single spaces.
std::string runs_to_text(const std::vector<TextRun>& runs);

struct TextLine {
  BoundingBox box;
  std::string text;
};

struct TruthElement {
  LayoutClass label = LayoutClass::Paragraph;
  BoundingBox box;
  std::string text;
  std::vector<TextLine> lines;
  /// Index of the enclosing Curly element, or -1.
  int parent = -1;
};

/// Ground truth for one page; elements are stored in reading order.
struct PageTruth {
  std::string page_id;
  int width = 0;
  int height = 0;
  std::vector<TruthElement> elements;

  PageAnnotation annotation() const;
  /// Transcripts of text-bearing elements in reading order, space-joined.
  std::string reading_text() const;
};

std::string write_truth_json(const PageTruth& t);
PageTruth read_truth_json(const std::string& text);

struct GeneratedPage {
  PageImage image;
  PageAnnotation annotation;
  PageTruth truth;
  /// Per pixel: 1 + index of the element whose ink covers it, 0 for paper.
  std::vector<std::uint16_t> ink_owner;
};

/// Renders one page. All randomness comes from `cfg.seed`.
GeneratedPage generate_page(const SynthConfig& cfg, const std::string& page_id,
                            const GlyphAtlas& atlas, const TextPools& pools,
                            const SymbolMap& symbols);
/// Convenience overload using the built-in pools, symbols and an atlas sized
/// for `cfg`.
GeneratedPage generate_page(const SynthConfig& cfg, const std::string& page_id = "page");

/// Atlas covering the pools, the symbols and every size used by `cfg`.
GlyphAtlas atlas_for(const SynthConfig& cfg, const TextPools& pools, const SymbolMap& symbols);

struct DatasetOptions {
  bool write_pgm = false;
  int workers = 1;
  std::string page_prefix = "page_";
};

/// Writes images/, annotations/, truth/ and manifest.jsonl under `out_dir`.
/// Page i uses seed `cfg.seed + i`.
DatasetManifest generate_dataset(const SynthConfig& cfg, int n_pages,
                                 const std::filesystem::path& out_dir,
                                 const DatasetOptions& options = {});

/// Loads the transcripts referenced by a manifest, keyed by page_id.
std::map<std::string, PageTruth> load_truths(const DatasetManifest& m);

}  // namespace schematik
