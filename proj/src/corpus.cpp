#include "schematik/corpus.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "schematik/image.hpp"
#include "schematik/random.hpp"

namespace schematik {

namespace pt = boost::property_tree;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kLayoutClassCount> kClassNames{
    "Paragraph", "BigParagraph", "H1", "H2", "H3", "H4", "NameEntry", "Curly"};

}  // namespace

std::string_view to_string(LayoutClass c) { return kClassNames[class_index(c)]; }

std::optional<LayoutClass> parse_layout_class(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == name) return static_cast<LayoutClass>(i);
  }
  return std::nullopt;
}

LayoutClass layout_class_from_string(std::string_view name) {
  if (auto c = parse_layout_class(name)) return *c;
  throw FormatError("unknown layout class '" + std::string(name) + "'");
}

bool is_full_width_class(LayoutClass c) {
  return c == LayoutClass::H1 || c == LayoutClass::BigParagraph;
}

ClassHistogram class_histogram(const PageAnnotation& a) {
  ClassHistogram h{};
  for (const auto& e : a.elements) ++h[class_index(e.label)];
  return h;
}

void validate_annotation(const PageAnnotation& a) {
  if (a.width <= 0 || a.height <= 0) {
    throw FormatError("page " + a.page_id + " has non-positive size");
  }
  for (const auto& e : a.elements) {
    if (!e.box.valid()) {
      throw FormatError("page " + a.page_id + ": invalid box " + to_string(e.box));
    }
    if (e.box.x_min < 0 || e.box.y_min < 0 || e.box.x_max > a.width ||
        e.box.y_max > a.height) {
      throw FormatError("page " + a.page_id + ": box " + to_string(e.box) +
                        " outside page");
    }
  }
}

std::vector<std::pair<std::size_t, std::size_t>> containment_violations(
    const PageAnnotation& a) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < a.elements.size(); ++i) {
    if (a.elements[i].label == LayoutClass::Curly) continue;
    for (std::size_t j = 0; j < a.elements.size(); ++j) {
      if (i == j || a.elements[j].label == LayoutClass::Curly) continue;
      if (a.elements[i].box.contains(a.elements[j].box)) out.emplace_back(i, j);
    }
  }
  return out;
}

// Pascal VOC -----------------------------------------------------------------

namespace {

pt::ptree voc_tree(const PageAnnotation& a, std::span<const Detection> dets,
                   bool with_confidence) {
  pt::ptree root;
  root.put("annotation.folder", "images");
  root.put("annotation.filename", a.page_id + ".png");
  root.put("annotation.size.width", a.width);
  root.put("annotation.size.height", a.height);
  root.put("annotation.size.depth", 1);
  auto add_object = [&](const BoundingBox& b, LayoutClass label,
                        std::optional<double> confidence) {
    pt::ptree obj;
    obj.put("name", std::string(to_string(label)));
    obj.put("bndbox.xmin", static_cast<long>(std::floor(b.x_min)));
    obj.put("bndbox.ymin", static_cast<long>(std::floor(b.y_min)));
    obj.put("bndbox.xmax", static_cast<long>(std::ceil(b.x_max)));
    obj.put("bndbox.ymax", static_cast<long>(std::ceil(b.y_max)));
    if (confidence) {
      std::ostringstream os;
      os.precision(6);
      os << *confidence;
      obj.put("confidence", os.str());
    }
    root.add_child("annotation.object", obj);
  };
  if (with_confidence) {
    for (const auto& d : dets) add_object(d.box, d.label, d.confidence);
  } else {
    for (const auto& e : a.elements) add_object(e.box, e.label, std::nullopt);
  }
  return root;
}

std::string tree_to_xml(const pt::ptree& root) {
  std::ostringstream os;
  pt::write_xml(os, root, pt::xml_writer_make_settings<std::string>(' ', 2));
  return os.str();
}

double voc_int(const pt::ptree& node, const std::string& key) {
  const auto v = node.get_optional<std::string>(key);
  if (!v) throw FormatError("VOC: missing <" + key + ">");
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size() || !std::isfinite(d)) throw std::invalid_argument(*v);
    return d;
  } catch (const std::logic_error&) {
    throw FormatError("VOC: <" + key + "> is not numeric: '" + *v + "'");
  }
}

}  // namespace

std::string write_voc(const PageAnnotation& a) {
  validate_annotation(a);
  return tree_to_xml(voc_tree(a, {}, false));
}

std::string write_voc(const PageAnnotation& a, std::span<const Detection> detections) {
  return tree_to_xml(voc_tree(a, detections, true));
}

PageAnnotation read_voc(const std::string& xml) {
  pt::ptree root;
  try {
    std::istringstream is(xml);
    pt::read_xml(is, root, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw FormatError(std::string("VOC: malformed XML: ") + e.what());
  }
  const auto ann = root.get_child_optional("annotation");
  if (!ann) throw FormatError("VOC: missing <annotation> root");

  PageAnnotation a;
  auto filename = ann->get<std::string>("filename", "");
  if (filename.size() > 4 && filename.ends_with(".png")) filename.resize(filename.size() - 4);
  a.page_id = filename;
  a.width = static_cast<int>(voc_int(*ann, "size.width"));
  a.height = static_cast<int>(voc_int(*ann, "size.height"));
  for (const auto& [key, node] : *ann) {
    if (key != "object") continue;
    AnnotatedElement e;
    e.label = layout_class_from_string(node.get<std::string>("name", ""));
    e.box = BoundingBox{voc_int(node, "bndbox.xmin"), voc_int(node, "bndbox.ymin"),
                        voc_int(node, "bndbox.xmax"), voc_int(node, "bndbox.ymax")};
    a.elements.push_back(e);
  }
  validate_annotation(a);
  return a;
}

PageAnnotation load_voc(const std::filesystem::path& path) {
  return read_voc(read_text_file(path));
}

void save_voc(const std::filesystem::path& path, const PageAnnotation& a) {
  write_text_file(path, write_voc(a));
}

// Manifest -------------------------------------------------------------------

std::string_view to_string(SplitTag t) {
  switch (t) {
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    case SplitTag::Test: return "test";
    case SplitTag::None: break;
  }
  return "none";
}

SplitTag split_tag_from_string(std::string_view s) {
  if (s == "train") return SplitTag::Train;
  if (s == "val") return SplitTag::Val;
  if (s == "test") return SplitTag::Test;
  if (s == "none") return SplitTag::None;
  throw FormatError("unknown split tag '" + std::string(s) + "'");
}

std::filesystem::path DatasetManifest::resolve(const std::string& relative) const {
  std::filesystem::path p(relative);
  return p.is_absolute() || root.empty() ? p : root / p;
}

std::string write_manifest_jsonl(const DatasetManifest& m) {
  std::string out;
  for (const auto& e : m.entries) {
    json hist = json::object();
    for (auto c : kAllLayoutClasses) hist[std::string(to_string(c))] = e.class_histogram[class_index(c)];
    json j{{"page_id", e.page_id},
           {"image_path", e.image_path},
           {"annotation_path", e.annotation_path},
           {"split", std::string(to_string(e.split))},
           {"class_histogram", hist}};
    if (!e.transcript_path.empty()) j["transcript_path"] = e.transcript_path;
    out += j.dump();
    out += '\n';
  }
  return out;
}

DatasetManifest read_manifest_jsonl(const std::string& text, std::filesystem::path root) {
  DatasetManifest m;
  m.root = std::move(root);
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ManifestEntry e;
      e.page_id = j.at("page_id").get<std::string>();
      e.image_path = j.at("image_path").get<std::string>();
      e.annotation_path = j.at("annotation_path").get<std::string>();
      e.transcript_path = j.value("transcript_path", std::string{});
      e.split = split_tag_from_string(j.value("split", std::string("none")));
      for (const auto& [name, count] : j.at("class_histogram").items()) {
        e.class_histogram[class_index(layout_class_from_string(name))] = count.get<int>();
      }
      m.entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  std::set<std::string> ids;
  for (const auto& e : m.entries) {
    if (!ids.insert(e.page_id).second) throw FormatError("duplicate page_id " + e.page_id);
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return read_manifest_jsonl(read_text_file(path), path.parent_path());
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  write_text_file(path, write_manifest_jsonl(m));
}

void validate_manifest(const DatasetManifest& m) {
  std::set<std::string> ids;
  for (const auto& e : m.entries) {
    if (!ids.insert(e.page_id).second) throw FormatError("duplicate page_id " + e.page_id);
    const auto a = load_voc(m.resolve(e.annotation_path));
    if (class_histogram(a) != e.class_histogram) {
      throw FormatError("histogram of " + e.page_id + " disagrees with its annotation");
    }
  }
}

DatasetManifest stratified_split(const DatasetManifest& m, double train_fraction,
                                 std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = m.entries.size();
  if (n < 2) throw std::invalid_argument("stratified split needs at least 2 pages");

  const auto n_train = static_cast<std::size_t>(std::clamp<long>(
      std::lround(train_fraction * static_cast<double>(n)), 1, static_cast<long>(n) - 1));
  std::array<std::size_t, 2> capacity{n_train, n - n_train};
  std::array<std::size_t, 2> taken{0, 0};
  std::array<double, 2> share{train_fraction, 1.0 - train_fraction};

  std::array<double, kLayoutClassCount> total{};
  for (const auto& e : m.entries) {
    for (std::size_t c = 0; c < kLayoutClassCount; ++c) total[c] += e.class_histogram[c];
  }
  std::array<std::array<double, kLayoutClassCount>, 2> assigned{};
  auto remaining = total;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "stratified_split"));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> done(n, false);
  DatasetManifest out = m;
  for (std::size_t step = 0; step < n; ++step) {
    // Rarest class with unassigned elements drives the next assignment.
    std::optional<std::size_t> cls;
    for (std::size_t c = 0; c < kLayoutClassCount; ++c) {
      if (remaining[c] > 0 && (!cls || remaining[c] < remaining[*cls])) cls = c;
    }
    std::optional<std::size_t> page;
    for (std::size_t idx : order) {
      if (done[idx]) continue;
      if (!cls) {
        page = idx;
        break;
      }
      const int cnt = m.entries[idx].class_histogram[*cls];
      if (cnt > 0 && (!page || cnt > m.entries[*page].class_histogram[*cls])) page = idx;
    }

    std::size_t subset = 0;
    if (taken[0] == capacity[0]) {
      subset = 1;
    } else if (taken[1] == capacity[1]) {
      subset = 0;
    } else {
      std::array<double, 2> demand{};
      for (std::size_t s = 0; s < 2; ++s) {
        demand[s] = cls ? share[s] * total[*cls] - assigned[s][*cls]
                        : static_cast<double>(capacity[s] - taken[s]);
      }
      if (demand[0] != demand[1]) {
        subset = demand[0] > demand[1] ? 0 : 1;
      } else {
        subset = (capacity[0] - taken[0]) >= (capacity[1] - taken[1]) ? 0 : 1;
      }
    }

    done[*page] = true;
    ++taken[subset];
    for (std::size_t c = 0; c < kLayoutClassCount; ++c) {
      assigned[subset][c] += m.entries[*page].class_histogram[c];
      remaining[c] -= m.entries[*page].class_histogram[c];
    }
    out.entries[*page].split = subset == 0 ? SplitTag::Train : SplitTag::Val;
  }

  // Swap train/val pairs while that lowers the relative per-class deviation.
  auto cost_of = [&](const std::array<double, kLayoutClassCount>& train) {
    double cost = 0.0;
    for (std::size_t c = 0; c < kLayoutClassCount; ++c) {
      if (total[c] == 0) continue;
      const double d = (train[c] - share[0] * total[c]) / total[c];
      cost += d * d;
    }
    return cost;
  };
  // Small datasets: search every choice of the smaller subset exactly.
  const std::size_t k = std::min(n_train, n - n_train);
  double combos = 1.0;
  for (std::size_t i = 0; i < k; ++i) combos = combos * static_cast<double>(n - i) / static_cast<double>(i + 1);
  if (combos <= 200000.0) {
    const SplitTag small_tag = k == n_train ? SplitTag::Train : SplitTag::Val;
    const SplitTag large_tag = small_tag == SplitTag::Train ? SplitTag::Val : SplitTag::Train;
    std::vector<std::size_t> pick(k), best_pick;
    std::iota(pick.begin(), pick.end(), 0);
    double best_cost = std::numeric_limits<double>::infinity();
    while (true) {
      std::array<double, kLayoutClassCount> small{};
      for (std::size_t i : pick) {
        for (std::size_t c = 0; c < kLayoutClassCount; ++c) small[c] += m.entries[i].class_histogram[c];
      }
      auto train_counts = small;
      if (small_tag == SplitTag::Val) {
        for (std::size_t c = 0; c < kLayoutClassCount; ++c) train_counts[c] = total[c] - small[c];
      }
      const double c = cost_of(train_counts);
      if (c < best_cost - 1e-12) {
        best_cost = c;
        best_pick = pick;
      }
      std::size_t i = k;
      while (i > 0 && pick[i - 1] == n - k + i - 1) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
    for (auto& e : out.entries) e.split = large_tag;
    for (std::size_t i : best_pick) out.entries[i].split = small_tag;
    return out;
  }

  auto train = assigned[0];
  double cost = cost_of(train);
  for (int pass = 0; pass < 200; ++pass) {
    bool improved = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (out.entries[i].split != SplitTag::Train) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (out.entries[j].split != SplitTag::Val) continue;
        auto moved = train;
        for (std::size_t c = 0; c < kLayoutClassCount; ++c) {
          moved[c] += m.entries[j].class_histogram[c] - m.entries[i].class_histogram[c];
        }
        const double moved_cost = cost_of(moved);
        if (moved_cost < cost - 1e-12) {
          train = moved;
          cost = moved_cost;
          out.entries[i].split = SplitTag::Val;
          out.entries[j].split = SplitTag::Train;
          improved = true;
          break;
        }
      }
    }
    if (!improved) break;
  }
  return out;
}

BBoxStats bbox_stats(std::span<const PageAnnotation> pages) {
  BBoxStats s;
  s.aspect_ratio = {std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity(), 0.0};
  s.scale = s.aspect_ratio;
  double ratio_sum = 0.0;
  double scale_sum = 0.0;
  for (const auto& p : pages) {
    for (const auto& e : p.elements) {
      const double r = e.box.width() / e.box.height();
      const double sc = std::sqrt(area(e.box));
      s.aspect_ratio.min = std::min(s.aspect_ratio.min, r);
      s.aspect_ratio.max = std::max(s.aspect_ratio.max, r);
      s.scale.min = std::min(s.scale.min, sc);
      s.scale.max = std::max(s.scale.max, sc);
      ratio_sum += r;
      scale_sum += sc;
      ++s.count;
    }
  }
  if (s.count == 0) throw std::invalid_argument("bbox_stats over an empty dataset");
  s.aspect_ratio.mean = ratio_sum / static_cast<double>(s.count);
  s.scale.mean = scale_sum / static_cast<double>(s.count);
  return s;
}

BBoxStats bbox_stats(const DatasetManifest& m) {
  std::vector<PageAnnotation> pages;
  pages.reserve(m.entries.size());
  for (const auto& e : m.entries) pages.push_back(load_voc(m.resolve(e.annotation_path)));
  return bbox_stats(pages);
}

// Detection interchange ------------------------------------------------------

std::string write_detections_json(std::span<const PageDetections> pages) {
  json arr = json::array();
  for (const auto& p : pages) {
    for (const auto& d : p.detections) {
      arr.push_back({{"page_id", p.page_id},
                     {"label", std::string(to_string(d.label))},
                     {"confidence", d.confidence},
                     {"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}}});
    }
  }
  return arr.dump(1);
}

std::vector<std::string> validate_detections_json(const std::string& text) {
  std::vector<std::string> errors;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    errors.emplace_back(std::string("not valid JSON: ") + e.what());
    return errors;
  }
  if (!doc.is_array()) {
    errors.emplace_back("top level must be an array");
    return errors;
  }
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const std::string where = "item " + std::to_string(i) + ": ";
    if (!item.is_object()) {
      errors.push_back(where + "not an object");
      continue;
    }
    if (!item.contains("page_id") || !item["page_id"].is_string() ||
        item["page_id"].get<std::string>().empty()) {
      errors.push_back(where + "page_id must be a nonempty string");
    }
    if (!item.contains("label") || !item["label"].is_string()) {
      errors.push_back(where + "label must be a string");
    } else if (!parse_layout_class(item["label"].get<std::string>())) {
      errors.push_back(where + "unknown label '" + item["label"].get<std::string>() + "'");
    }
    if (!item.contains("confidence") || !item["confidence"].is_number()) {
      errors.push_back(where + "confidence must be a number");
    } else {
      const double c = item["confidence"].get<double>();
      if (!(c >= 0.0 && c <= 1.0)) errors.push_back(where + "confidence outside [0,1]");
    }
    if (!item.contains("box") || !item["box"].is_array() || item["box"].size() != 4) {
      errors.push_back(where + "box must be an array of 4 numbers");
    } else {
      const auto& b = item["box"];
      bool numeric = std::all_of(b.begin(), b.end(), [](const json& v) { return v.is_number(); });
      if (!numeric) {
        errors.push_back(where + "box must be an array of 4 numbers");
      } else {
        BoundingBox bb{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                       b[3].get<double>()};
        if (!bb.valid()) errors.push_back(where + "box " + to_string(bb) + " is not a valid rectangle");
        if (bb.x_min < 0 || bb.y_min < 0) errors.push_back(where + "box has negative coordinates");
      }
    }
  }
  return errors;
}

std::vector<PageDetections> read_detections_json(const std::string& text) {
  const auto errors = validate_detections_json(text);
  if (!errors.empty()) {
    std::string msg = "detection interchange: " + errors.front();
    if (errors.size() > 1) msg += " (+" + std::to_string(errors.size() - 1) + " more)";
    throw FormatError(msg);
  }
  std::vector<PageDetections> pages;
  std::map<std::string, std::size_t> index;
  for (const auto& item : json::parse(text)) {
    const auto id = item["page_id"].get<std::string>();
    auto [it, inserted] = index.try_emplace(id, pages.size());
    if (inserted) pages.push_back({id, {}});
    const auto& b = item["box"];
    pages[it->second].detections.push_back(
        {BoundingBox{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()},
         layout_class_from_string(item["label"].get<std::string>()),
         item["confidence"].get<double>()});
  }
  return pages;
}

}  // namespace schematik
