#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include "schematik/random.hpp"
#include "schematik/synthgen.hpp"

namespace schematik {

namespace {

// Glyphs are designed on a 5-column grid with 9 rows: rows 0-6 span the cap
// height, rows 7-8 the descender. Lowercase letters alternate between an
// ascender form (rows 0-6) and a descender form (rows 2-8) so every text line
// has ink reaching into the space between lines.
constexpr int kGridCols = 5;
constexpr int kGridRows = 9;

using Pattern = std::array<std::array<bool, kGridCols>, kGridRows>;

enum class Shape { Tall, Descender, Punct };

Shape shape_of(char32_t c) {
  static const std::u32string descenders = U"nsaucgmowzpvjqxyäöüß";
  if (c >= U'a' && c <= U'z') return descenders.find(c) == std::u32string::npos ? Shape::Tall : Shape::Descender;
  if (descenders.find(c) != std::u32string::npos) return Shape::Descender;
  if (c >= 0xE000 && c <= 0xF8FF) return Shape::Tall;
  if ((c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9')) return Shape::Tall;
  if (c == U'Ä' || c == U'Ö' || c == U'Ü' || c == U'é' || c == U'á' || c == U'&' || c == U'?' ||
      c == U'!' || c == U'#' || c == U'%' || c == U'@' || c == U'$' || c == U'*') {
    return Shape::Tall;
  }
  return Shape::Punct;
}

bool connected(const Pattern& p) {
  int total = 0;
  int sr = -1;
  int sc = -1;
  for (int r = 0; r < kGridRows; ++r) {
    for (int c = 0; c < kGridCols; ++c) {
      if (p[r][c]) {
        ++total;
        sr = r;
        sc = c;
      }
    }
  }
  if (total == 0) return false;
  Pattern seen{};
  std::vector<std::pair<int, int>> stack{{sr, sc}};
  seen[sr][sc] = true;
  int reached = 0;
  while (!stack.empty()) {
    auto [r, c] = stack.back();
    stack.pop_back();
    ++reached;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const int nr = r + dr;
        const int nc = c + dc;
        if (nr < 0 || nc < 0 || nr >= kGridRows || nc >= kGridCols) continue;
        if (p[nr][nc] && !seen[nr][nc]) {
          seen[nr][nc] = true;
          stack.emplace_back(nr, nc);
        }
      }
    }
  }
  return reached == total;
}

// A stem plus bars attached to it; the hash picks which pieces appear.
Pattern procedural_pattern(std::uint64_t h, int top, int bottom) {
  Pattern p{};
  const int mid = (top + bottom) / 2;
  const int stem = std::array<int, 3>{0, 0, 2}[h % 3];
  h = mix64(h);
  for (int r = top; r <= bottom; ++r) p[r][stem] = true;
  const std::array<int, 3> bar_rows{top, mid, bottom};
  for (int bar : bar_rows) {
    const int len = static_cast<int>(h % 5);  // 0 = absent
    h = mix64(h);
    if (len == 0) continue;
    if (stem == 2) {
      const int half = (len + 1) / 2;
      for (int c = std::max(0, 2 - half); c <= std::min(4, 2 + half); ++c) p[bar][c] = true;
    } else {
      for (int c = 0; c <= std::min(4, len); ++c) p[bar][c] = true;
    }
  }
  const int second = static_cast<int>(h % 4);  // none, upper, lower, full
  h = mix64(h);
  if (second != 0 && stem == 0) {
    const int from = second == 2 ? mid : top;
    const int to = second == 1 ? mid : bottom;
    for (int r = from; r <= to; ++r) p[r][4] = true;
    if (!connected(p)) {
      for (int c = 0; c < kGridCols; ++c) p[second == 2 ? bottom : top][c] = true;
    }
  }
  if (h % 3 == 0) p[mid][std::min(4, stem + 2)] = true;
  if (!connected(p)) {
    for (int c = 0; c < kGridCols; ++c) p[mid][c] = true;
  }
  return p;
}

Pattern punct_pattern(char32_t c) {
  Pattern p{};
  auto set = [&](int r, int col) { p[r][col] = true; };
  switch (c) {
    case U'.': set(5, 1); set(6, 1); set(5, 2); set(6, 2); break;
    case U',': set(5, 1); set(6, 1); set(5, 2); set(6, 2); set(7, 1); set(8, 0); break;
    case U':': set(2, 1); set(3, 1); set(5, 1); set(6, 1); break;
    case U';': set(2, 1); set(3, 1); set(5, 1); set(6, 1); set(7, 0); break;
    case U'-': for (int col = 0; col < 4; ++col) set(4, col); break;
    case U'\'': set(0, 1); set(1, 1); break;
    case U'"': set(0, 0); set(1, 0); set(0, 2); set(1, 2); break;
    case U'(':
      for (int r = 1; r <= 7; ++r) set(r, 1);
      set(0, 2); set(8, 2);
      break;
    case U')':
      for (int r = 1; r <= 7; ++r) set(r, 2);
      set(0, 1); set(8, 1);
      break;
    case U'[':
      for (int r = 0; r <= 8; ++r) set(r, 1);
      set(0, 2); set(8, 2);
      break;
    case U']':
      for (int r = 0; r <= 8; ++r) set(r, 2);
      set(0, 1); set(8, 1);
      break;
    case U'/':
      for (int r = 0; r <= 6; ++r) set(r, 4 - (r * 4) / 6);
      break;
    case U'—':  // em dash
      for (int col = 0; col < kGridCols; ++col) set(4, col);
      break;
    case U'_': for (int col = 0; col < kGridCols; ++col) set(7, col); break;
    case U'+': for (int col = 0; col < kGridCols; ++col) set(4, col);
      for (int r = 2; r <= 6; ++r) set(r, 2);
      break;
    case U'=': for (int col = 0; col < 4; ++col) { set(3, col); set(5, col); } break;
    default:
      // Anything else printable gets a small square mark.
      set(3, 1); set(4, 1); set(3, 2); set(4, 2);
  }
  return p;
}

int punct_columns(char32_t c) {
  switch (c) {
    case U'—': return 5;
    case U'-': case U'_': case U'+': case U'=': case U'/': return 4;
    case U'"': return 3;
    default: return 2;
  }
}

Pattern symbol_pattern(std::uint64_t h) {
  // Decoration symbols: crosses and stars centred on column 2.
  Pattern p{};
  for (int r = 0; r <= 6; ++r) p[r][2] = true;
  const int arm = 1 + static_cast<int>(h % 4);
  for (int c = 0; c < kGridCols; ++c) p[arm][c] = true;
  h = mix64(h);
  if (h % 2 == 0) {
    p[1][1] = p[1][3] = p[5][1] = p[5][3] = true;
  }
  h = mix64(h);
  if (h % 3 == 0) p[6][0] = p[6][4] = true;
  if (h % 3 == 1) p[0][1] = p[0][3] = true;
  return p;
}

struct GridMetrics {
  int size;
  int width;
  int row_start(int r) const { return (r * size) / 7; }
};

Glyph rasterize(const Pattern& p, int cols, const GridMetrics& gm, FontStyle style,
                int spacing) {
  int first_row = kGridRows;
  int last_row = -1;
  for (int r = 0; r < kGridRows; ++r) {
    for (int c = 0; c < kGridCols; ++c) {
      if (p[r][c]) {
        first_row = std::min(first_row, r);
        last_row = std::max(last_row, r);
      }
    }
  }
  const int px_w = std::max(2, (gm.width * cols + kGridCols - 1) / kGridCols);
  const int top = gm.row_start(first_row);
  const int bottom = gm.row_start(last_row + 1);
  const int h = std::max(1, bottom - top);
  const int bold = style == FontStyle::Bold ? std::max(1, gm.size / 14) : 0;
  const double slant = style == FontStyle::Italic ? 0.2 : 0.0;
  const int slant_extra = static_cast<int>(std::ceil(slant * (gm.row_start(kGridRows) + 1)));

  Glyph g;
  g.width = px_w + bold + slant_extra;
  g.height = h;
  g.ascent = gm.size - top;
  g.bits.assign(static_cast<std::size_t>(g.width) * g.height, 0);
  for (int y = 0; y < h; ++y) {
    const int abs_row = top + y;
    int grid_r = 0;
    while (grid_r + 1 < kGridRows && gm.row_start(grid_r + 1) <= abs_row) ++grid_r;
    const int shift = static_cast<int>(std::lround(slant * (gm.row_start(kGridRows) - abs_row)));
    for (int x = 0; x < px_w; ++x) {
      const int grid_c = std::min(kGridCols - 1, (x * kGridCols) / (gm.width));
      if (!p[grid_r][grid_c]) continue;
      for (int b = 0; b <= bold; ++b) {
        const int xx = x + b + shift;
        if (xx >= 0 && xx < g.width) g.bits[static_cast<std::size_t>(y) * g.width + xx] = 1;
      }
    }
  }
  g.advance = g.width + spacing;
  return g;
}

bool is_symbol(char32_t c) { return c >= 0xE000 && c <= 0xF8FF; }

}  // namespace

Font::Font(FontStyle style, int size, std::map<char32_t, Glyph> glyphs)
    : style_(style),
      size_(size),
      descent_((kGridRows * size) / 7 - size),
      space_advance_(std::max(3, static_cast<int>(std::lround(0.4 * size)))),
      glyphs_(std::move(glyphs)) {}

const Glyph& Font::glyph(char32_t c) const {
  const auto it = glyphs_.find(c);
  if (it == glyphs_.end()) {
    throw std::out_of_range("glyph U+" + std::to_string(static_cast<unsigned>(c)) +
                            " missing from atlas");
  }
  return it->second;
}

int Font::text_width(std::u32string_view s) const {
  int w = 0;
  for (char32_t c : s) w += c == U' ' ? space_advance_ : glyph(c).advance;
  return w;
}

GlyphAtlas GlyphAtlas::build(const std::u32string& charset, const std::vector<int>& sizes) {
  GlyphAtlas atlas;
  std::set<char32_t> chars(charset.begin(), charset.end());
  chars.erase(U' ');
  atlas.charset_.assign(chars.begin(), chars.end());

  // Patterns are fixed per code point so every size and style shares shapes.
  std::map<char32_t, std::pair<Pattern, int>> patterns;
  std::set<Pattern> used;
  for (char32_t c : chars) {
    Pattern p{};
    int cols = kGridCols;
    const Shape shape = shape_of(c);
    if (is_symbol(c)) {
      for (std::uint64_t salt = 0;; ++salt) {
        p = symbol_pattern(mix64(c * 131 + salt));
        if (!used.contains(p)) break;
      }
    } else if (shape == Shape::Punct) {
      p = punct_pattern(c);
      cols = punct_columns(c);
    } else {
      const int top = shape == Shape::Descender ? 2 : 0;
      const int bottom = shape == Shape::Descender ? 8 : 6;
      for (std::uint64_t salt = 0;; ++salt) {
        p = procedural_pattern(mix64(static_cast<std::uint64_t>(c) * 7919 + salt), top, bottom);
        if (!used.contains(p)) break;
      }
    }
    if (shape != Shape::Punct) used.insert(p);
    patterns.emplace(c, std::make_pair(p, cols));
  }

  for (int size : sizes) {
    if (size < 7) throw std::invalid_argument("font size below 7 px");
    const GridMetrics gm{size, std::max(3, static_cast<int>(std::lround(0.6 * size)))};
    const int spacing = std::max(2, static_cast<int>(std::lround(0.15 * size)));
    for (FontStyle style : {FontStyle::Regular, FontStyle::Bold, FontStyle::Italic}) {
      if (atlas.fonts_.contains({style, size})) continue;
      std::map<char32_t, Glyph> glyphs;
      for (const auto& [c, pc] : patterns) {
        glyphs.emplace(c, rasterize(pc.first, pc.second, gm, style, spacing));
      }
      atlas.fonts_.emplace(std::make_pair(style, size),
                           std::make_shared<const Font>(style, size, std::move(glyphs)));
    }
  }
  return atlas;
}

const Font& GlyphAtlas::font(FontStyle style, int size) const {
  const auto it = fonts_.find({style, size});
  if (it == fonts_.end()) {
    throw std::out_of_range("font size " + std::to_string(size) + " not in atlas");
  }
  return *it->second;
}

}  // namespace schematik
