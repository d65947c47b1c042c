#include "schematik/synthgen.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "schematik/parallel.hpp"
#include "schematik/utf8.hpp"

namespace schematik {

using nlohmann::json;

// Config ---------------------------------------------------------------------

int SynthConfig::column_width() const {
  return (text_width() - (column_count - 1) * column_gap) / column_count;
}

int SynthConfig::column_x(int column) const {
  return margin_left + column * (column_width() + column_gap);
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("SynthConfig: " + msg); };
  if (page_w <= 0 || page_h <= 0) fail("page size must be positive");
  if (column_count < 1 || column_count > 4) fail("column_count must be between 1 and 4");
  if (margin_left < 0 || margin_right < 0 || margin_top < 0 || margin_bottom < 0) {
    fail("margins must be non-negative");
  }
  if (column_gap < 0 || element_gap < 1 || hanging_indent < 0) fail("negative spacing");
  if (text_width() <= 0 || page_h - margin_top - margin_bottom <= 0) fail("margins exceed page");
  if (column_width() <= 0) fail("columns do not fit within the margins");
  if (!(size_h1 > size_h2 && size_h2 > size_h3)) fail("heading sizes must satisfy H1 > H2 > H3");
  if (size_h3 != size_paragraph) fail("H3 must share the paragraph size");
  double total = 0.0;
  for (auto c : kAllLayoutClasses) {
    const double w = weights.weight(c);
    if (!(w >= 0.0) || !std::isfinite(w)) fail("class weights must be non-negative");
    total += w;
  }
  if (total <= 0.0) fail("class weights are all zero");
}

namespace {

const std::array<std::pair<const char*, LayoutClass>, kLayoutClassCount> kWeightKeys{{
    {"weight_paragraph", LayoutClass::Paragraph},
    {"weight_big_paragraph", LayoutClass::BigParagraph},
    {"weight_h1", LayoutClass::H1},
    {"weight_h2", LayoutClass::H2},
    {"weight_h3", LayoutClass::H3},
    {"weight_h4", LayoutClass::H4},
    {"weight_name_entry", LayoutClass::NameEntry},
    {"weight_curly", LayoutClass::Curly},
}};

}  // namespace

SynthConfig synth_config_from_json(const std::string& text) {
  SynthConfig cfg;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("generation config: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("generation config must be a flat JSON object");
  std::map<std::string, int*> ints{
      {"page_w", &cfg.page_w},           {"page_h", &cfg.page_h},
      {"column_count", &cfg.column_count}, {"margin_left", &cfg.margin_left},
      {"margin_right", &cfg.margin_right}, {"margin_top", &cfg.margin_top},
      {"margin_bottom", &cfg.margin_bottom}, {"column_gap", &cfg.column_gap},
      {"size_h1", &cfg.size_h1},         {"size_h2", &cfg.size_h2},
      {"size_h3", &cfg.size_h3},         {"size_paragraph", &cfg.size_paragraph},
      {"size_h4", &cfg.size_h4},         {"hanging_indent", &cfg.hanging_indent},
      {"element_gap", &cfg.element_gap},
  };
  for (const auto& [key, value] : j.items()) {
    try {
      if (auto it = ints.find(key); it != ints.end()) {
        *it->second = value.get<int>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else {
        const auto w = std::find_if(kWeightKeys.begin(), kWeightKeys.end(),
                                    [&](const auto& kv) { return key == kv.first; });
        if (w == kWeightKeys.end()) throw FormatError("generation config: unknown key '" + key + "'");
        cfg.weights.set(w->second, value.get<double>());
      }
    } catch (const json::type_error& e) {
      throw FormatError("generation config: bad value for '" + key + "': " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

std::string synth_config_to_json(const SynthConfig& cfg) {
  json j{{"page_w", cfg.page_w},
         {"page_h", cfg.page_h},
         {"column_count", cfg.column_count},
         {"margin_left", cfg.margin_left},
         {"margin_right", cfg.margin_right},
         {"margin_top", cfg.margin_top},
         {"margin_bottom", cfg.margin_bottom},
         {"column_gap", cfg.column_gap},
         {"size_h1", cfg.size_h1},
         {"size_h2", cfg.size_h2},
         {"size_h3", cfg.size_h3},
         {"size_paragraph", cfg.size_paragraph},
         {"size_h4", cfg.size_h4},
         {"hanging_indent", cfg.hanging_indent},
         {"element_gap", cfg.element_gap},
         {"seed", cfg.seed}};
  for (const auto& [key, cls] : kWeightKeys) j[key] = cfg.weights.weight(cls);
  return j.dump(2);
}

// Truth ----------------------------------------------------------------------

PageAnnotation PageTruth::annotation() const {
  PageAnnotation a{page_id, width, height, {}};
  a.elements.reserve(elements.size());
  for (const auto& e : elements) a.elements.push_back({e.box, e.label});
  return a;
}

std::string PageTruth::reading_text() const {
  std::string out;
  for (const auto& e : elements) {
    if (e.text.empty()) continue;
    if (!out.empty()) out += ' ';
    out += e.text;
  }
  return out;
}

namespace {

json box_json(const BoundingBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BoundingBox box_from_json(const json& j) {
  return BoundingBox{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
                     j.at(3).get<double>()};
}

}  // namespace

std::string write_truth_json(const PageTruth& t) {
  json elems = json::array();
  for (const auto& e : t.elements) {
    json lines = json::array();
    for (const auto& l : e.lines) lines.push_back({{"box", box_json(l.box)}, {"text", l.text}});
    elems.push_back({{"label", std::string(to_string(e.label))},
                     {"box", box_json(e.box)},
                     {"text", e.text},
                     {"parent", e.parent},
                     {"lines", lines}});
  }
  json j{{"page_id", t.page_id}, {"width", t.width}, {"height", t.height}, {"elements", elems}};
  return j.dump(1);
}

PageTruth read_truth_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    PageTruth t;
    t.page_id = j.at("page_id").get<std::string>();
    t.width = j.at("width").get<int>();
    t.height = j.at("height").get<int>();
    for (const auto& e : j.at("elements")) {
      TruthElement el;
      el.label = layout_class_from_string(e.at("label").get<std::string>());
      el.box = box_from_json(e.at("box"));
      el.text = e.at("text").get<std::string>();
      el.parent = e.value("parent", -1);
      for (const auto& l : e.value("lines", json::array())) {
        el.lines.push_back({box_from_json(l.at("box")), l.at("text").get<std::string>()});
      }
      t.elements.push_back(std::move(el));
    }
    return t;
  } catch (const json::exception& e) {
    throw FormatError(std::string("transcript: ") + e.what());
  }
}

// Layout engine --------------------------------------------------------------

namespace {

struct GlyphOp {
  const Glyph* glyph;
  int x;         // pen position
  int baseline;  // relative to the element top
};

struct Rect {
  int x0, y0, x1, y1;  // relative to the element top
};

struct LineLayout {
  std::vector<GlyphOp> ops;
  std::string text;
};

struct ElementLayout {
  LayoutClass label = LayoutClass::Paragraph;
  std::vector<LineLayout> lines;
  std::vector<Rect> strokes;
  int height = 0;
  std::string text;
  /// Curly members with their vertical offsets; a Curly's own ink is the brace.
  std::vector<std::pair<int, ElementLayout>> children;
};

struct Word {
  std::u32string text;
  const Font* font;
  bool right_aligned = false;
  int width = 0;
  /// The next word continues this one after a hyphen, without a space.
  bool glued = false;
};

enum class Align { Left, Center, Justify };

class Typesetter {
 public:
  Typesetter(const SynthConfig& cfg, const GlyphAtlas& atlas) : cfg_(cfg), atlas_(atlas) {}

  const Font& font(FontStyle s, int size) const { return atlas_.font(s, size); }

  // Whitespace-separated words, further split after hyphens so compounds
  // can break across lines.
  std::vector<Word> words(const std::vector<TextRun>& runs, int size) const {
    std::vector<Word> out;
    for (const auto& r : runs) {
      const Font& f = font(r.style, size);
      for (const auto& w : utf8::split_words(r.text)) {
        const std::u32string text = utf8::decode(w);
        std::size_t start = 0;
        while (start < text.size()) {
          std::size_t end = text.find(U'-', start);
          // A hyphen needs letters on both sides to be a break point.
          while (end != std::u32string::npos && (end == 0 || end + 1 >= text.size())) {
            end = text.find(U'-', end + 1);
          }
          end = end == std::u32string::npos ? text.size() : end + 1;
          Word piece{text.substr(start, end - start), &f, r.right_aligned, 0, end < text.size()};
          piece.width = f.text_width(piece.text);
          out.push_back(std::move(piece));
          start = end;
        }
      }
    }
    return out;
  }

  // Greedy line breaking. `first_x/first_w` describe the first line and
  // `rest_x/rest_w` every following one (x relative to the page).
  std::vector<LineLayout> set_lines(const std::vector<Word>& words, int size, int first_x,
                                    int first_w, int rest_x, int rest_w, Align align) const {
    std::vector<std::vector<const Word*>> lines;
    const int space = font(FontStyle::Regular, size).space_advance();
    auto gap_after = [&](const Word* w) { return w->glued ? 0 : space; };
    std::vector<const Word*> cur;
    int cur_w = 0;
    for (const auto& w : words) {
      const int avail = lines.empty() ? first_w : rest_w;
      if (!cur.empty() && cur_w + gap_after(cur.back()) + w.width > avail) {
        lines.push_back(cur);
        cur.clear();
        cur_w = 0;
      }
      cur_w = cur.empty() ? w.width : cur_w + gap_after(cur.back()) + w.width;
      cur.push_back(&w);
    }
    if (!cur.empty()) lines.push_back(cur);

    std::vector<LineLayout> out;
    const int pitch = font(FontStyle::Regular, size).line_pitch();
    for (std::size_t li = 0; li < lines.size(); ++li) {
      const auto& line = lines[li];
      const int x0 = li == 0 ? first_x : rest_x;
      const int avail = li == 0 ? first_w : rest_w;
      int natural = 0;
      std::vector<int> gaps;
      std::vector<std::size_t> stretchable;
      for (std::size_t k = 0; k < line.size(); ++k) {
        natural += line[k]->width;
        if (k + 1 < line.size()) {
          gaps.push_back(gap_after(line[k]));
          natural += gaps.back();
          if (!line[k]->glued) stretchable.push_back(k);
        }
      }
      int x = x0;
      if (align == Align::Center) {
        x = x0 + std::max(0, (avail - natural) / 2);
      } else if (align == Align::Justify && li + 1 < lines.size() && !stretchable.empty()) {
        const int extra = std::max(0, avail - natural);
        const std::size_t n = stretchable.size();
        for (std::size_t g = 0; g < n; ++g) {
          gaps[stretchable[g]] += static_cast<int>(extra * (g + 1) / n - extra * g / n);
        }
      }
      LineLayout ll;
      const int baseline = size + static_cast<int>(li) * pitch;
      for (std::size_t k = 0; k < line.size(); ++k) {
        if (k > 0) {
          x += gaps[k - 1];
          if (!line[k - 1]->glued) ll.text += ' ';
        }
        x = emit_word(*line[k], x, baseline, ll);
      }
      out.push_back(std::move(ll));
    }
    return out;
  }

  int emit_word(const Word& w, int x, int baseline, LineLayout& ll) const {
    for (char32_t c : w.text) {
      const Glyph& g = w.font->glyph(c);
      ll.ops.push_back({&g, x, baseline});
      x += g.advance;
    }
    ll.text += utf8::encode(w.text);
    return x;
  }

  static int block_height(const std::vector<LineLayout>& lines, const Font& f) {
    if (lines.empty()) return 0;
    return f.size() + static_cast<int>(lines.size() - 1) * f.line_pitch() + f.descent();
  }

  ElementLayout paragraph(const std::vector<TextRun>& runs, int x, int width, bool inverted) const {
    const int size = cfg_.size_paragraph;
    const int indent = std::min(cfg_.hanging_indent, width / 3);
    const auto ws = words(runs, size);
    ElementLayout el;
    el.label = inverted ? LayoutClass::BigParagraph : LayoutClass::Paragraph;
    // One pixel of slack keeps justified ink strictly inside the measure.
    const int w = width - 1;
    el.lines = inverted ? set_lines(ws, size, x + indent, w - indent, x, w, Align::Justify)
                        : set_lines(ws, size, x, w, x + indent, w - indent, Align::Justify);
    el.height = block_height(el.lines, font(FontStyle::Regular, size));
    el.text = runs_to_text(runs);
    return el;
  }

  ElementLayout centered(LayoutClass label, const std::vector<TextRun>& runs, int size, int x,
                         int width) const {
    ElementLayout el;
    el.label = label;
    el.lines = set_lines(words(runs, size), size, x, width - 1, x, width - 1, Align::Center);
    el.height = block_height(el.lines, font(FontStyle::Regular, size));
    el.text = runs_to_text(runs);
    return el;
  }

  // Letter-spaced heading across the full text width.
  ElementLayout spaced_heading(const std::vector<TextRun>& runs) const {
    const int size = cfg_.size_h1;
    const int x = cfg_.margin_left;
    const int width = cfg_.text_width() - 1;
    ElementLayout el = centered(LayoutClass::H1, runs, size, x, width + 1);
    const int target = static_cast<int>(std::floor(0.92 * cfg_.text_width()));
    for (auto& line : el.lines) {
      if (line.ops.size() < 2) continue;
      const int left = line.ops.front().x;
      const int natural = line.ops.back().x + line.ops.back().glyph->advance - left;
      const int goal = std::min(width, std::max(natural, target));
      const int extra = goal - natural;
      const int start = x + (width - goal) / 2;
      const int n = static_cast<int>(line.ops.size()) - 1;
      for (int k = 0; k <= n; ++k) {
        line.ops[k].x = start + (line.ops[k].x - left) + (n > 0 ? extra * k / n : 0);
      }
    }
    return el;
  }

  ElementLayout name_entry(const std::vector<TextRun>& runs, int x, int width) const {
    const int size = cfg_.size_paragraph;
    std::vector<TextRun> left;
    std::vector<TextRun> right;
    for (const auto& r : runs) (r.right_aligned ? right : left).push_back(r);
    const auto rw = words(right, size);
    const int space = font(FontStyle::Regular, size).space_advance();
    int right_w = 0;
    for (std::size_t k = 0; k < rw.size(); ++k) right_w += rw[k].width + (k ? space : 0);
    auto lw = words(left, size);
    auto left_width = [&]() {
      int w = 0;
      for (std::size_t k = 0; k < lw.size(); ++k) {
        w += lw[k].width + (k && !lw[k - 1].glued ? space : 0);
      }
      return w;
    };
    while (lw.size() > 1 && (left_width() + 2 * space + right_w > width - 1 || lw.back().glued)) {
      lw.pop_back();
    }

    ElementLayout el;
    el.label = LayoutClass::NameEntry;
    LineLayout line;
    const int baseline = size;
    int pen = x;
    for (std::size_t k = 0; k < lw.size(); ++k) {
      if (k > 0 && !lw[k - 1].glued) {
        pen += space;
        line.text += ' ';
      }
      pen = emit_word(lw[k], pen, baseline, line);
    }
    pen = std::max(pen + 2 * space, x + width - 1 - right_w);
    for (std::size_t k = 0; k < rw.size(); ++k) {
      line.text += ' ';
      if (k > 0) pen += space;
      pen = emit_word(rw[k], pen, baseline, line);
    }
    el.text = line.text;
    el.lines.push_back(std::move(line));
    el.height = block_height(el.lines, font(FontStyle::Regular, size));
    return el;
  }

 private:
  const SynthConfig& cfg_;
  const GlyphAtlas& atlas_;
};

// Widest unbreakable piece a column paragraph may have to hold, trailing
// comma included.
int widest_word(const TextPools& pools, const Font& f) {
  int widest = 0;
  for (const auto* pool : {&pools.surnames, &pools.forenames, &pools.abbreviations,
                           &pools.municipality_names}) {
    for (const auto& entry : *pool) {
      for (const auto& w : utf8::split_words(entry)) {
        std::size_t start = 0;
        while (start < w.size()) {
          std::size_t end = w.find('-', start + 1);
          end = end == std::string::npos || end + 1 >= w.size() ? w.size() : end + 1;
          widest = std::max(widest, f.text_width(utf8::decode(w.substr(start, end - start) + ",")));
          start = end;
        }
      }
    }
  }
  return widest;
}

struct Placement {
  ElementLayout layout;
  int y = 0;  // page y of the element top
};

class PageBuilder {
 public:
  PageBuilder(const SynthConfig& cfg, const GlyphAtlas& atlas, const TextPools& pools,
              const SymbolMap& symbols)
      : cfg_(cfg), pools_(pools), symbols_(symbols), ts_(cfg, atlas),
        rng_(derive_seed(cfg.seed, "synthgen")),
        widest_word_(widest_word(pools, ts_.font(FontStyle::Bold, cfg.size_paragraph))) {}

  std::vector<Placement> build() {
    const int bottom = cfg_.page_h - cfg_.margin_bottom;
    const int section_gap = cfg_.element_gap + 6;
    int y = cfg_.margin_top;
    std::vector<Placement> placed;
    std::optional<ElementLayout> pending;
    bool page_full = false;
    while (!page_full) {
      ElementLayout unit = pending ? std::move(*pending) : make_unit(draw_class());
      pending.reset();
      if (is_full_width_class(unit.label)) {
        if (y + unit.height > bottom) break;
        placed.push_back({std::move(unit), y});
        y += placed.back().layout.height + section_gap;
        continue;
      }
      // Gather a run of column elements up to the next full-width element.
      const int remaining = bottom - y;
      std::vector<ElementLayout> run;
      long total = unit.height;
      run.push_back(std::move(unit));
      while (total <= static_cast<long>(cfg_.column_count) * (remaining + cfg_.element_gap)) {
        ElementLayout next = make_unit(draw_class());
        if (is_full_width_class(next.label)) {
          pending = std::move(next);
          break;
        }
        total += next.height + cfg_.element_gap;
        run.push_back(std::move(next));
      }
      const auto [section_h, full] = place_section(run, y, remaining, placed);
      if (full) page_full = true;
      y += section_h + section_gap;
      if (y >= bottom) page_full = true;
    }
    if (placed.empty()) throw std::invalid_argument("SynthConfig: no element fits on the page");
    return placed;
  }

 private:
  LayoutClass draw_class() {
    std::vector<double> w;
    for (auto c : kAllLayoutClasses) w.push_back(cfg_.weights.weight(c));
    std::discrete_distribution<std::size_t> d(w.begin(), w.end());
    return kAllLayoutClasses[d(rng_)];
  }

  ElementLayout make_unit(LayoutClass c) {
    const int cw = cfg_.column_width();
    const int x = cfg_.column_x(0);
    switch (c) {
      case LayoutClass::H1:
        return ts_.spaced_heading(sample_text(pools_, symbols_, c, rng_));
      case LayoutClass::BigParagraph: {
        // Needs a second line so the reversed indent is visible; short
        // samples grow by further sentences.
        auto runs = sample_text(pools_, symbols_, c, rng_);
        ElementLayout el = ts_.paragraph(runs, cfg_.margin_left, cfg_.text_width(), true);
        while (el.lines.size() < 2) {
          for (auto& r : sample_text(pools_, symbols_, c, rng_)) runs.push_back(std::move(r));
          el = ts_.paragraph(runs, cfg_.margin_left, cfg_.text_width(), true);
        }
        return el;
      }
      case LayoutClass::Paragraph:
        return ts_.paragraph(sample_text(pools_, symbols_, c, rng_), x, cw, false);
      case LayoutClass::H2:
        return ts_.centered(c, sample_text(pools_, symbols_, c, rng_), cfg_.size_h2, x, cw);
      case LayoutClass::H3:
        return ts_.centered(c, sample_text(pools_, symbols_, c, rng_), cfg_.size_h3, x, cw);
      case LayoutClass::H4:
        return ts_.centered(c, sample_text(pools_, symbols_, c, rng_), cfg_.size_h4, x, cw);
      case LayoutClass::NameEntry:
        return ts_.name_entry(sample_text(pools_, symbols_, c, rng_), x, cw);
      case LayoutClass::Curly:
        return curly(x, cw);
    }
    throw std::logic_error("unhandled layout class");
  }

  ElementLayout curly(int x, int cw) {
    const int size = cfg_.size_paragraph;
    const int gap = std::max(4, size / 2);
    const int brace_w = std::max(8, (size * 2) / 3);
    auto keyword_runs = sample_text(pools_, symbols_, LayoutClass::Curly, rng_);
    const Font& f = ts_.font(FontStyle::Regular, size);
    int kw_w = f.text_width(utf8::decode(keyword_runs.front().text));
    int member_w = cw - brace_w - kw_w - 3 * gap;
    auto holds_words = [&](int w) {
      return w - 1 - std::min(cfg_.hanging_indent, w / 3) >= widest_word_;
    };
    if (member_w < cw / 2 || !holds_words(member_w)) {
      keyword_runs.front().text = utf8::encode(utf8::decode(keyword_runs.front().text).substr(0, 4)) + ".";
      kw_w = f.text_width(utf8::decode(keyword_runs.front().text));
      member_w = cw - brace_w - kw_w - 3 * gap;
    }
    if (!holds_words(member_w)) {
      // Too narrow for a brace group; fall back to a plain paragraph.
      return ts_.paragraph(sample_text(pools_, symbols_, LayoutClass::Paragraph, rng_), x, cw, false);
    }

    ElementLayout el;
    el.label = LayoutClass::Curly;
    const int members = std::uniform_int_distribution<int>(2, 4)(rng_);
    int y = 0;
    for (int i = 0; i < members; ++i) {
      if (i > 0) y += cfg_.element_gap;
      ElementLayout p = ts_.paragraph(sample_text(pools_, symbols_, LayoutClass::Paragraph, rng_),
                                      x, member_w, false);
      const int h = p.height;
      el.children.emplace_back(y, std::move(p));
      y += h;
    }
    const int members_h = y;
    const int bx = x + member_w + gap;
    const int mid_x = bx + brace_w / 2;
    const int t = std::max(2, size / 7);
    const int mid_y = members_h / 2;
    el.strokes = {
        {bx, 0, mid_x + t, t},                          // top hook
        {mid_x, 0, mid_x + t, members_h},               // spine
        {bx, members_h - t, mid_x + t, members_h},      // bottom hook
        {mid_x, mid_y - t / 2, bx + brace_w, mid_y - t / 2 + t},  // cusp
    };
    ElementLayout kw = ts_.centered(LayoutClass::H3, keyword_runs, size, bx + brace_w + gap,
                                    kw_w + 2);
    const int kw_y = std::max(0, mid_y - kw.height / 2);
    el.height = std::max(members_h, kw_y + kw.height);
    el.children.emplace_back(kw_y, std::move(kw));
    return el;
  }

  // Lays a run of column elements into the columns starting at `y`.
  // Returns the section height and whether the page is now full.
  std::pair<int, bool> place_section(std::vector<ElementLayout>& run, int y, int remaining,
                                     std::vector<Placement>& placed) {
    const int n = static_cast<int>(run.size());
    const int cols = cfg_.column_count;
    const int gap = cfg_.element_gap;
    std::vector<long> prefix(n + 1, 0);
    for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + run[i].height;
    auto span_h = [&](int a, int b) -> long {  // units [a,b)
      return b <= a ? 0 : prefix[b] - prefix[a] + static_cast<long>(b - a - 1) * gap;
    };

    // Balanced contiguous partition minimising the tallest column.
    std::vector<std::vector<long>> best(cols + 1, std::vector<long>(n + 1, LONG_MAX));
    std::vector<std::vector<int>> cut(cols + 1, std::vector<int>(n + 1, 0));
    best[0][0] = 0;
    for (int k = 1; k <= cols; ++k) {
      for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= i; ++j) {
          if (best[k - 1][j] == LONG_MAX) continue;
          const long v = std::max(best[k - 1][j], span_h(j, i));
          if (v < best[k][i]) {
            best[k][i] = v;
            cut[k][i] = j;
          }
        }
      }
    }
    std::vector<int> starts(cols + 1, n);
    if (best[cols][n] <= remaining) {
      int i = n;
      for (int k = cols; k >= 1; --k) {
        starts[k] = i;
        i = cut[k][i];
      }
      starts[0] = 0;
      int section_h = 0;
      for (int k = 0; k < cols; ++k) {
        int cy = y;
        for (int u = starts[k]; u < starts[k + 1]; ++u) {
          place_in_column(run[u], k, cy, placed);
          cy += run[u].height + gap;
        }
        section_h = std::max(section_h, static_cast<int>(span_h(starts[k], starts[k + 1])));
      }
      return {section_h, false};
    }

    // Overflow: fill columns in turn and drop whatever no longer fits.
    int u = 0;
    int section_h = 0;
    for (int k = 0; k < cols && u < n; ++k) {
      int cy = y;
      while (u < n && cy + run[u].height <= y + remaining) {
        place_in_column(run[u], k, cy, placed);
        cy += run[u].height + gap;
        ++u;
      }
      section_h = std::max(section_h, cy - gap - y);
    }
    return {section_h, true};
  }

  void place_in_column(ElementLayout& el, int column, int y, std::vector<Placement>& placed) {
    shift_x(el, cfg_.column_x(column) - cfg_.column_x(0));
    placed.push_back({std::move(el), y});
  }

  static void shift_x(ElementLayout& el, int dx) {
    if (dx == 0) return;
    for (auto& l : el.lines) {
      for (auto& op : l.ops) op.x += dx;
    }
    for (auto& s : el.strokes) {
      s.x0 += dx;
      s.x1 += dx;
    }
    for (auto& [oy, child] : el.children) shift_x(child, dx);
  }

  const SynthConfig& cfg_;
  const TextPools& pools_;
  const SymbolMap& symbols_;
  Typesetter ts_;
  Rng rng_;
  int widest_word_;
};

class Renderer {
 public:
  Renderer(const SynthConfig& cfg, GeneratedPage& page) : cfg_(cfg), page_(page) {
    page_.image = PageImage(cfg.page_w, cfg.page_h);
    page_.ink_owner.assign(static_cast<std::size_t>(cfg.page_w) * cfg.page_h, 0);
  }

  void render(const ElementLayout& el, int y, int parent) {
    const int index = static_cast<int>(page_.truth.elements.size());
    page_.truth.elements.push_back({el.label, {}, el.text, {}, parent});
    Hull hull;
    for (const auto& line : el.lines) {
      Hull lh;
      for (const auto& op : line.ops) draw_glyph(*op.glyph, op.x, y + op.baseline, index, lh);
      if (!lh.empty()) {
        page_.truth.elements[index].lines.push_back({lh.box(cfg_), line.text});
        hull.add(lh);
      }
    }
    for (const auto& s : el.strokes) {
      for (int yy = y + s.y0; yy < y + s.y1; ++yy) {
        for (int xx = s.x0; xx < s.x1; ++xx) ink(xx, yy, index, hull);
      }
    }
    for (const auto& [dy, child] : el.children) {
      const int child_index = static_cast<int>(page_.truth.elements.size());
      render(child, y + dy, index);
      hull.add(page_.truth.elements[child_index].box);
    }
    if (hull.empty()) throw std::logic_error("element rendered without ink");
    page_.truth.elements[index].box = hull.box(cfg_);
  }

 private:
  struct Hull {
    int x0 = INT_MAX, y0 = INT_MAX, x1 = INT_MIN, y1 = INT_MIN;  // inclusive ink pixels
    bool empty() const { return x0 > x1; }
    void add(int x, int y) {
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
    void add(const Hull& o) {
      if (o.empty()) return;
      add(o.x0, o.y0);
      add(o.x1, o.y1);
    }
    // Child boxes already carry their one-pixel margin.
    void add(const BoundingBox& b) {
      add(static_cast<int>(b.x_min) + 1, static_cast<int>(b.y_min) + 1);
      add(static_cast<int>(b.x_max) - 2, static_cast<int>(b.y_max) - 2);
    }
    // Tight ink hull grown by one pixel on every side.
    BoundingBox box(const SynthConfig& cfg) const {
      BoundingBox b{static_cast<double>(x0 - 1), static_cast<double>(y0 - 1),
                    static_cast<double>(x1 + 2), static_cast<double>(y1 + 2)};
      clip_to_page(b, cfg.page_w, cfg.page_h);
      return b;
    }
  };

  void ink(int x, int y, int index, Hull& hull) {
    if (!page_.image.in_bounds(x, y)) return;
    page_.image.at(x, y) = 0;
    page_.ink_owner[static_cast<std::size_t>(y) * cfg_.page_w + x] = static_cast<std::uint16_t>(index + 1);
    hull.add(x, y);
  }

  void draw_glyph(const Glyph& g, int pen_x, int baseline, int index, Hull& hull) {
    const int left = pen_x + 1;
    const int top = baseline - g.ascent;
    for (int gy = 0; gy < g.height; ++gy) {
      for (int gx = 0; gx < g.width; ++gx) {
        if (g.ink(gx, gy)) ink(left + gx, top + gy, index, hull);
      }
    }
  }

  const SynthConfig& cfg_;
  GeneratedPage& page_;
};

}  // namespace

GlyphAtlas atlas_for(const SynthConfig& cfg, const TextPools& pools, const SymbolMap& symbols) {
  std::u32string charset = pools.code_points() + symbols.code_points();
  for (char32_t c = 0x21; c < 0x7F; ++c) charset.push_back(c);
  charset += U"—äöüÄÖÜßéá";
  return GlyphAtlas::build(charset, {cfg.size_h1, cfg.size_h2, cfg.size_h3, cfg.size_paragraph,
                                     cfg.size_h4});
}

GeneratedPage generate_page(const SynthConfig& cfg, const std::string& page_id,
                            const GlyphAtlas& atlas, const TextPools& pools,
                            const SymbolMap& symbols) {
  cfg.validate();
  pools.validate();
  {
    const int widest = widest_word(pools, atlas.font(FontStyle::Bold, cfg.size_paragraph));
    if (cfg.column_width() - 1 < widest + std::min(cfg.hanging_indent, cfg.column_width() / 3) ||
        atlas.font(FontStyle::Bold, cfg.size_h1).glyph(U'M').advance * 4 > cfg.text_width()) {
      throw std::invalid_argument("SynthConfig: fonts cannot fit one line in a column");
    }
  }
  PageBuilder builder(cfg, atlas, pools, symbols);
  const auto placements = builder.build();

  GeneratedPage page;
  page.truth.page_id = page_id;
  page.truth.width = cfg.page_w;
  page.truth.height = cfg.page_h;
  Renderer renderer(cfg, page);
  for (const auto& p : placements) renderer.render(p.layout, p.y, -1);
  page.annotation = page.truth.annotation();
  return page;
}

GeneratedPage generate_page(const SynthConfig& cfg, const std::string& page_id) {
  static const TextPools pools = default_text_pools();
  static const SymbolMap symbols = default_symbol_map();
  const GlyphAtlas atlas = atlas_for(cfg, pools, symbols);
  return generate_page(cfg, page_id, atlas, pools, symbols);
}

DatasetManifest generate_dataset(const SynthConfig& cfg, int n_pages,
                                 const std::filesystem::path& out_dir,
                                 const DatasetOptions& options) {
  if (n_pages < 1) throw std::invalid_argument("generate_dataset needs at least one page");
  cfg.validate();
  const TextPools pools = default_text_pools();
  const SymbolMap symbols = default_symbol_map();
  const GlyphAtlas atlas = atlas_for(cfg, pools, symbols);
  std::filesystem::create_directories(out_dir / "images");
  std::filesystem::create_directories(out_dir / "annotations");
  std::filesystem::create_directories(out_dir / "truth");

  DatasetManifest m;
  m.root = out_dir;
  m.entries.resize(static_cast<std::size_t>(n_pages));
  const int digits = std::max(5, static_cast<int>(std::to_string(n_pages - 1).size()));
  parallel_for(static_cast<std::size_t>(n_pages), options.workers, [&](std::size_t i) {
    SynthConfig page_cfg = cfg;
    page_cfg.seed = cfg.seed + i;
    std::ostringstream id;
    id << options.page_prefix << std::setw(digits) << std::setfill('0') << i;
    const std::string page_id = id.str();
    const GeneratedPage page = generate_page(page_cfg, page_id, atlas, pools, symbols);

    ManifestEntry e;
    e.page_id = page_id;
    e.image_path = "images/" + page_id + (options.write_pgm ? ".pgm" : ".png");
    e.annotation_path = "annotations/" + page_id + ".xml";
    e.transcript_path = "truth/" + page_id + ".json";
    e.class_histogram = class_histogram(page.annotation);
    write_image(out_dir / e.image_path, page.image);
    save_voc(out_dir / e.annotation_path, page.annotation);
    write_text_file(out_dir / e.transcript_path, write_truth_json(page.truth));
    m.entries[i] = std::move(e);
  });
  save_manifest(out_dir / "manifest.jsonl", m);
  return m;
}

std::map<std::string, PageTruth> load_truths(const DatasetManifest& m) {
  std::map<std::string, PageTruth> out;
  for (const auto& e : m.entries) {
    if (e.transcript_path.empty()) continue;
    out.emplace(e.page_id, read_truth_json(read_text_file(m.resolve(e.transcript_path))));
  }
  return out;
}

}  // namespace schematik
