#include "schematik/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "schematik/random.hpp"

namespace schematik {

// Oracle ---------------------------------------------------------------------

DetectorOutput oracle_detect(const PageAnnotation& a, const OraclePerturbation& p,
                             std::uint64_t seed) {
  Rng rng(derive_seed(seed, "oracle", a.page_id));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> other(0, kLayoutClassCount - 2);

  DetectorOutput out{a.page_id, {}};
  out.detections.reserve(a.elements.size());
  for (const auto& e : a.elements) {
    Detection d{e.box, e.label, 1.0};
    if (p.jitter_sigma > 0.0) {
      BoundingBox b{e.box.x_min + p.jitter_sigma * gauss(rng), e.box.y_min + p.jitter_sigma * gauss(rng),
                    e.box.x_max + p.jitter_sigma * gauss(rng), e.box.y_max + p.jitter_sigma * gauss(rng)};
      if (b.x_min > b.x_max) std::swap(b.x_min, b.x_max);
      if (b.y_min > b.y_max) std::swap(b.y_min, b.y_max);
      if (clip_to_page(b, a.width, a.height)) d.box = b;
    }
    bool flipped = false;
    if (p.label_flip_prob > 0.0 && unit(rng) < p.label_flip_prob) {
      std::size_t k = other(rng);
      if (k >= class_index(e.label)) ++k;
      d.label = kAllLayoutClasses[k];
      flipped = true;
    }
    const double mean = flipped ? p.confidence_flipped : p.confidence_correct;
    const double noise = p.confidence_spread > 0.0 ? p.confidence_spread * gauss(rng) : 0.0;
    d.confidence = std::clamp(mean + noise, 0.0, 1.0);
    out.detections.push_back(d);
  }
  return out;
}

OracleDetector::OracleDetector(std::map<std::string, PageAnnotation> truth, OraclePerturbation p,
                               std::uint64_t seed)
    : truth_(std::move(truth)), perturbation_(p), seed_(seed) {}

DetectorOutput OracleDetector::detect(const PageImage&, const std::string& page_id) const {
  const auto it = truth_.find(page_id);
  if (it == truth_.end()) throw std::runtime_error("oracle detector: no annotation for " + page_id);
  return oracle_detect(it->second, perturbation_, seed_);
}

// RLSA -----------------------------------------------------------------------

std::vector<std::uint8_t> rlsa_smooth(const std::vector<std::uint8_t>& bits, int threshold) {
  std::vector<std::uint8_t> out = bits;
  std::ptrdiff_t last_black = -1;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i]) continue;
    const auto gap = static_cast<std::ptrdiff_t>(i) - last_black - 1;
    if (last_black >= 0 && gap > 0 && gap < threshold) {
      std::fill(out.begin() + last_black + 1, out.begin() + static_cast<std::ptrdiff_t>(i), 1);
    }
    last_black = static_cast<std::ptrdiff_t>(i);
  }
  return out;
}

std::vector<Component> connected_components(const std::vector<std::uint8_t>& mask, int width,
                                            int height, std::vector<int>* labels) {
  std::vector<int> local;
  std::vector<int>& lab = labels ? *labels : local;
  lab.assign(mask.size(), 0);
  std::vector<Component> comps;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || lab[start]) continue;
    const int id = static_cast<int>(comps.size()) + 1;
    Component c;
    c.first = start;
    c.x0 = c.x1 = static_cast<int>(start % width);
    c.y0 = c.y1 = static_cast<int>(start / width);
    lab[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(i % width);
      const int y = static_cast<int>(i / width);
      ++c.pixels;
      c.x0 = std::min(c.x0, x);
      c.x1 = std::max(c.x1, x);
      c.y0 = std::min(c.y0, y);
      c.y1 = std::max(c.y1, y);
      for (int dy = -1; dy <= 1; ++dy) {
        const int ny = y + dy;
        if (ny < 0 || ny >= height) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          if (nx < 0 || nx >= width) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * width + nx;
          if (mask[j] && !lab[j]) {
            lab[j] = id;
            stack.push_back(j);
          }
        }
      }
    }
    comps.push_back(c);
  }
  return comps;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

double estimate_char_height(const std::vector<std::uint8_t>& mask, int width, int height) {
  std::vector<double> heights;
  for (const auto& c : connected_components(mask, width, height)) {
    heights.push_back(c.y1 - c.y0 + 1);
  }
  return median(std::move(heights));
}

RlsaThresholds resolve_thresholds(const RlsaParams& p, double char_height) {
  auto pick = [&](int fixed, double factor) {
    if (fixed > 0) return fixed;
    return std::max(1, static_cast<int>(round_half_away(factor * char_height)));
  };
  return {pick(p.horizontal_threshold_1, p.horizontal_factor_1),
          pick(p.vertical_threshold, p.vertical_factor),
          pick(p.horizontal_threshold_2, p.horizontal_factor_2)};
}

namespace {

void smooth_rows(std::vector<std::uint8_t>& m, int w, int h, int threshold) {
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    auto first = m.begin() + static_cast<std::ptrdiff_t>(y) * w;
    std::copy(first, first + w, row.begin());
    const auto s = rlsa_smooth(row, threshold);
    std::copy(s.begin(), s.end(), first);
  }
}

void smooth_columns(std::vector<std::uint8_t>& m, int w, int h, int threshold) {
  std::vector<std::uint8_t> col(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y] = m[static_cast<std::size_t>(y) * w + x];
    const auto s = rlsa_smooth(col, threshold);
    for (int y = 0; y < h; ++y) m[static_cast<std::size_t>(y) * w + x] = s[y];
  }
}

}  // namespace

std::vector<Block> rlsa_segment(const PageImage& page, const RlsaParams& params) {
  const int w = page.width();
  const int h = page.height();
  const auto ink = binarize(page, params.binarize_threshold);
  const auto glyphs = connected_components(ink, w, h);
  if (glyphs.empty()) return {};
  std::vector<double> heights;
  for (const auto& c : glyphs) heights.push_back(c.y1 - c.y0 + 1);
  const auto t = resolve_thresholds(params, median(heights));

  auto horiz = ink;
  smooth_rows(horiz, w, h, t.horizontal_1);
  auto vert = ink;
  smooth_columns(vert, w, h, t.vertical);
  for (std::size_t i = 0; i < horiz.size(); ++i) horiz[i] = horiz[i] & vert[i];
  smooth_rows(horiz, w, h, t.horizontal_2);

  std::vector<int> labels;
  const auto comps = connected_components(horiz, w, h, &labels);
  std::vector<std::vector<double>> block_heights(comps.size());
  std::vector<std::size_t> block_ink(comps.size(), 0);
  for (const auto& g : glyphs) {
    // Smoothing only adds black, so every glyph lies inside one block.
    const int b = labels[g.first];
    if (b == 0) continue;
    block_heights[b - 1].push_back(g.y1 - g.y0 + 1);
    block_ink[b - 1] += g.pixels;
  }

  std::vector<Block> out;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const auto& c = comps[i];
    Block b;
    b.box = BoundingBox{static_cast<double>(c.x0), static_cast<double>(c.y0),
                        static_cast<double>(c.x1 + 1), static_cast<double>(c.y1 + 1)};
    if (area(b.box) < params.min_block_area) continue;
    b.stats.black_pixel_density = static_cast<double>(block_ink[i]) / area(b.box);
    b.stats.aspect_ratio = b.box.width() / b.box.height();
    b.stats.height = b.box.height();
    b.stats.char_height = median(block_heights[i]);
    out.push_back(b);
  }
  return out;
}

std::vector<Detection> classify_blocks(const std::vector<Block>& blocks, int page_w, int) {
  std::vector<Detection> out;
  if (blocks.empty()) return out;
  std::vector<double> char_heights;
  std::vector<double> column_widths;
  for (const auto& b : blocks) {
    char_heights.push_back(b.stats.char_height);
    if (b.box.width() <= 0.8 * page_w) column_widths.push_back(b.box.width());
  }
  const double line_h = median(char_heights);
  const double column_w = median(column_widths);
  for (const auto& b : blocks) {
    LayoutClass label = LayoutClass::Paragraph;
    if (b.box.width() > 0.8 * page_w) {
      label = b.stats.char_height >= 1.5 * line_h ? LayoutClass::H1 : LayoutClass::BigParagraph;
    } else if (column_w > 0.0 && b.box.width() < 0.6 * column_w &&
               b.box.height() < 2.0 * std::max(1.0, b.stats.char_height)) {
      label = LayoutClass::H2;
    }
    out.push_back({b.box, label, kRlsaConfidence});
  }
  return out;
}

DetectorOutput RlsaDetector::detect(const PageImage& page, const std::string& page_id) const {
  return {page_id, classify_blocks(rlsa_segment(page, params_), page.width(), page.height())};
}

// External -------------------------------------------------------------------

ExternalDetector::ExternalDetector(const std::filesystem::path& interchange) {
  for (auto& p : read_detections_json(read_text_file(interchange))) {
    auto& dst = pages_[p.page_id];
    dst.insert(dst.end(), p.detections.begin(), p.detections.end());
  }
}

DetectorOutput ExternalDetector::detect(const PageImage& page, const std::string& page_id) const {
  DetectorOutput out{page_id, {}};
  const auto it = pages_.find(page_id);
  if (it == pages_.end()) return out;
  for (auto d : it->second) {
    if (clip_to_page(d.box, page.width(), page.height())) out.detections.push_back(d);
  }
  return out;
}

}  // namespace schematik
