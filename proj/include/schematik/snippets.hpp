#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "schematik/corpus.hpp"
#include "schematik/image.hpp"

namespace schematik {

inline constexpr double kDefaultPadding = 4.0;
inline constexpr double kDefaultScale = 1.6;
/// Elements wider than this share of the page width cut the page into bands.
inline constexpr double kFullWidthShare = 0.8;

struct Snippet {
  PageImage image;
  BoundingBox source_box;
  LayoutClass label = LayoutClass::Paragraph;
  int order_index = 0;
  std::string page_id;
};

/// Reading order as a permutation of element indices: bands split at
/// full-width elements, columns left to right, elements top to bottom.
/// A Curly precedes the elements inside its box, which are ordered the same
/// way among themselves.
std::vector<std::size_t> reading_order(const std::vector<AnnotatedElement>& elements,
                                       double page_w);
std::vector<std::size_t> reading_order(const std::vector<Detection>& dets, double page_w);

/// Crops pad_and_clip(d.box, padding) and resizes so the height becomes
/// round(scale * crop height), width by the same factor.
Snippet extract_snippet(const PageImage& page, const Detection& d, double padding = kDefaultPadding,
                        double scale = kDefaultScale);

/// Snippets for `dets` in reading order with order_index 0..n-1.
std::vector<Snippet> extract_snippets(const PageImage& page, const std::string& page_id,
                                      const std::vector<Detection>& dets,
                                      double padding = kDefaultPadding,
                                      double scale = kDefaultScale);

std::string snippet_filename(const Snippet& s);
void export_snippets(const std::vector<Snippet>& snippets, const std::filesystem::path& dir);

}  // namespace schematik
