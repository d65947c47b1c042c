#include "schematik/snippets.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace schematik {

namespace {

struct Item {
  BoundingBox box;
  LayoutClass label;
};

double median_width(const std::vector<std::size_t>& idx, const std::vector<Item>& items) {
  std::vector<double> w;
  for (auto i : idx) w.push_back(items[i].box.width());
  std::sort(w.begin(), w.end());
  const std::size_t n = w.size();
  return n % 2 ? w[n / 2] : 0.5 * (w[n / 2 - 1] + w[n / 2]);
}

bool top_then_left(const Item& a, const Item& b) {
  if (a.box.y_min != b.box.y_min) return a.box.y_min < b.box.y_min;
  return a.box.x_min < b.box.x_min;
}

class Orderer {
 public:
  Orderer(std::vector<Item> items, double page_w) : items_(std::move(items)), page_w_(page_w) {
    // Each element belongs to the smallest Curly whose box holds its center.
    parent_.assign(items_.size(), -1);
    for (std::size_t i = 0; i < items_.size(); ++i) {
      double best = 0.0;
      for (std::size_t c = 0; c < items_.size(); ++c) {
        if (c == i || items_[c].label != LayoutClass::Curly) continue;
        const auto& cb = items_[c].box;
        const auto& b = items_[i].box;
        const bool inside = b.center_x() > cb.x_min && b.center_x() < cb.x_max &&
                            b.center_y() > cb.y_min && b.center_y() < cb.y_max;
        if (!inside || area(b) >= area(cb)) continue;
        if (parent_[i] < 0 || area(cb) < best) {
          parent_[i] = static_cast<int>(c);
          best = area(cb);
        }
      }
    }
  }

  std::vector<std::size_t> run() {
    std::vector<std::size_t> top;
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (parent_[i] < 0) top.push_back(i);
    }
    std::vector<std::size_t> out;
    order_level(top, out, true);
    return out;
  }

 private:
  void emit(std::size_t i, std::vector<std::size_t>& out) {
    out.push_back(i);
    if (items_[i].label != LayoutClass::Curly) return;
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < items_.size(); ++j) {
      if (parent_[j] == static_cast<int>(i)) members.push_back(j);
    }
    // Members never cut bands: they are the columns of the brace group.
    order_level(members, out, false);
  }

  void order_level(std::vector<std::size_t> idx, std::vector<std::size_t>& out, bool bands_allowed) {
    if (idx.empty()) return;
    std::vector<std::size_t> full;
    std::vector<std::size_t> rest;
    for (auto i : idx) {
      const bool cuts = bands_allowed && items_[i].box.width() > kFullWidthShare * page_w_;
      (cuts ? full : rest).push_back(i);
    }
    std::sort(full.begin(), full.end(),
              [&](auto a, auto b) { return top_then_left(items_[a], items_[b]); });

    std::vector<std::vector<std::size_t>> bands(full.size() + 1);
    for (auto i : rest) {
      const double cy = items_[i].box.center_y();
      std::size_t band = 0;
      while (band < full.size() && items_[full[band]].box.center_y() < cy) ++band;
      bands[band].push_back(i);
    }
    for (std::size_t b = 0; b < bands.size(); ++b) {
      order_band(bands[b], out);
      if (b < full.size()) emit(full[b], out);
    }
  }

  void order_band(std::vector<std::size_t> idx, std::vector<std::size_t>& out) {
    if (idx.empty()) return;
    const double gap = 0.5 * median_width(idx, items_);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) {
      const double ca = items_[a].box.center_x();
      const double cb = items_[b].box.center_x();
      if (ca != cb) return ca < cb;
      return top_then_left(items_[a], items_[b]);
    });
    std::vector<std::vector<std::size_t>> columns{{idx.front()}};
    for (std::size_t k = 1; k < idx.size(); ++k) {
      if (items_[idx[k]].box.center_x() - items_[idx[k - 1]].box.center_x() > gap) {
        columns.emplace_back();
      }
      columns.back().push_back(idx[k]);
    }
    // Clusters with no two elements side by side are one column split by
    // alignment, e.g. a centered heading above a short left-aligned line.
    std::vector<std::vector<std::size_t>> merged;
    for (auto& col : columns) {
      if (!merged.empty() && !overlaps_vertically(merged.back(), col)) {
        merged.back().insert(merged.back().end(), col.begin(), col.end());
      } else {
        merged.push_back(std::move(col));
      }
    }
    for (auto& col : merged) {
      std::sort(col.begin(), col.end(),
                [&](auto a, auto b) { return top_then_left(items_[a], items_[b]); });
      for (auto i : col) emit(i, out);
    }
  }

  // True when some element of `a` sits beside some element of `b`.
  bool overlaps_vertically(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) const {
    for (auto i : a) {
      for (auto j : b) {
        const auto& p = items_[i].box;
        const auto& q = items_[j].box;
        if (p.y_min < q.y_max && q.y_min < p.y_max) return true;
      }
    }
    return false;
  }

  std::vector<Item> items_;
  double page_w_;
  std::vector<int> parent_;
};

}  // namespace

std::vector<std::size_t> reading_order(const std::vector<AnnotatedElement>& elements,
                                       double page_w) {
  std::vector<Item> items;
  for (const auto& e : elements) items.push_back({e.box, e.label});
  return Orderer(std::move(items), page_w).run();
}

std::vector<std::size_t> reading_order(const std::vector<Detection>& dets, double page_w) {
  std::vector<Item> items;
  for (const auto& d : dets) items.push_back({d.box, d.label});
  return Orderer(std::move(items), page_w).run();
}

Snippet extract_snippet(const PageImage& page, const Detection& d, double padding, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("snippet scale must be positive");
  const BoundingBox padded = pad_and_clip(d.box, padding, page.width(), page.height());
  const PageImage cropped = crop(page, padded);
  const int out_h = static_cast<int>(round_half_away(scale * cropped.height()));
  const int out_w = static_cast<int>(round_half_away(scale * cropped.width()));
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("snippet scale leaves an empty image");
  Snippet s;
  s.image = resize_bilinear(cropped, out_w, out_h);
  s.source_box = d.box;
  s.label = d.label;
  return s;
}

std::vector<Snippet> extract_snippets(const PageImage& page, const std::string& page_id,
                                      const std::vector<Detection>& dets, double padding,
                                      double scale) {
  std::vector<Snippet> out;
  const auto order = reading_order(dets, page.width());
  out.reserve(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    Snippet s = extract_snippet(page, dets[order[k]], padding, scale);
    s.order_index = static_cast<int>(k);
    s.page_id = page_id;
    out.push_back(std::move(s));
  }
  return out;
}

std::string snippet_filename(const Snippet& s) {
  return s.page_id + "_" + std::to_string(s.order_index) + "_" + std::string(to_string(s.label)) +
         ".png";
}

void export_snippets(const std::vector<Snippet>& snippets, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& s : snippets) write_image(dir / snippet_filename(s), s.image);
}

}  // namespace schematik
