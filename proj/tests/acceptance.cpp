// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "schematik/augment.hpp"
#include "schematik/pipeline.hpp"
#include "schematik/synthgen.hpp"
#include "schematik/utf8.hpp"
#include "support.hpp"

using namespace schematik;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

// Full-table Levenshtein distance.
template <class Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    }
  }
  return d[a.size()][b.size()];
}

Outcome edit_distance_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  const std::u32string alphabet = U"abcäöü ß.";
  const std::vector<std::string> vocab{"der", "Pfarre", "Müller", "1887", "Dechant", "St.", "Ägidius"};
  std::size_t mismatches = 0;
  for (int t = 0; t < 10000; ++t) {
    // Characters.
    std::u32string ref, hyp;
    const auto lr = 1 + rng() % 12, lh = rng() % 13;
    for (std::size_t i = 0; i < lr; ++i) ref.push_back(alphabet[rng() % alphabet.size()]);
    for (std::size_t i = 0; i < lh; ++i) hyp.push_back(alphabet[rng() % alphabet.size()]);
    const double want_c = static_cast<double>(levenshtein(ref, hyp)) / static_cast<double>(ref.size());
    if (cer(utf8::encode(ref), utf8::encode(hyp)) != want_c) ++mismatches;

    // Words.
    std::vector<std::string> rw, hw;
    const auto wr = 1 + rng() % 12, wh = rng() % 13;
    for (std::size_t i = 0; i < wr; ++i) rw.push_back(vocab[rng() % vocab.size()]);
    for (std::size_t i = 0; i < wh; ++i) hw.push_back(vocab[rng() % vocab.size()]);
    auto join = [](const std::vector<std::string>& w) {
      std::string s;
      for (const auto& x : w) s += (s.empty() ? "" : " ") + x;
      return s;
    };
    const double want_w = static_cast<double>(levenshtein(rw, hw)) / static_cast<double>(rw.size());
    if (wer(join(rw), join(hw)) != want_w) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 60.0,
          "10000 pairs, mismatches " + std::to_string(mismatches) + ", " + fmt(secs, 2) + " s"};
}

Outcome scenario_replay() {
  const fs::path dir = fs::path(SCHEMATIK_FIXTURES_DIR) / "table5";
  std::vector<Scenario> scenarios;
  for (const char* name : {"full_page_base", "full_page_finetuned", "layout_detection", "final"}) {
    scenarios.push_back({name, report_from_json(read_text_file(dir / (std::string(name) + ".json")))});
  }
  const Comparison c = compare_scenarios(scenarios);
  struct Want {
    const char* from;
    const char* to;
    double cer;
    double wer;
  };
  const Want wants[] = {{"full_page_base", "full_page_finetuned", 21.62, 19.61},
                        {"full_page_finetuned", "layout_detection", 42.57, 19.73},
                        {"full_page_finetuned", "final", 64.24, 40.91},
                        {"full_page_base", "final", 71.98, 52.49}};
  bool ok = true;
  std::string detail;
  for (const auto& w : wants) {
    const auto it = std::find_if(c.improvements.begin(), c.improvements.end(),
                                 [&](const ImprovementRow& r) { return r.from == w.from && r.to == w.to; });
    if (it == c.improvements.end()) {
      ok = false;
      detail += std::string(" missing ") + w.from + "->" + w.to;
      continue;
    }
    ok = ok && std::abs(it->cer_pct - w.cer) <= 0.01 && std::abs(it->wer_pct - w.wer) <= 0.01;
    detail += " " + fmt(it->cer_pct, 2) + "/" + fmt(it->wer_pct, 2);
  }
  bool mismatch_rejected = false;
  try {
    scenarios.push_back({"other", report_from_json(read_text_file(dir / "other_pages.json"))});
    compare_scenarios(scenarios);
  } catch (const std::invalid_argument&) {
    mismatch_rejected = true;
  }
  return {ok && mismatch_rejected, "improvements" + detail +
                                       (mismatch_rejected ? "" : "; mismatched pages accepted")};
}

Outcome closed_loop() {
  const auto t0 = Clock::now();
  SynthConfig cfg;
  cfg.seed = 9000;
  const auto m = generate_dataset(cfg, 20, testing::scratch_dir("acc_closed_loop"));
  const auto r = run_pipeline(m, PipelineOptions{}, testing::scratch_dir("acc_closed_loop_run"));
  bool ok = r.pages.size() == 20;
  for (const auto& p : r.pages) {
    ok = ok && p.cer && *p.cer == 0.0 && *p.wer == 0.0 && p.bbox_accuracy == 1.0 && p.accuracy == 1.0;
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 120.0, "20 pages, CER " + fmt(*r.cer) + " WER " + fmt(*r.wer) + " bbox " +
                                  fmt(r.bbox_accuracy) + " acc " + fmt(r.accuracy) + ", " +
                                  fmt(secs, 1) + " s"};
}

Outcome segmentation_benefit() {
  SynthConfig cfg;
  cfg.column_count = 3;
  cfg.seed = 9100;
  const auto m = generate_dataset(cfg, 20, testing::scratch_dir("acc_segmentation"));
  PipelineOptions o;
  o.corruption.substitution = 0.02;
  o.corruption.scramble_full_pages = true;
  o.seed = 5;
  const auto segmented = run_pipeline(m, o, testing::scratch_dir("acc_segmented_run"));
  o.full_page = true;
  const auto full = run_pipeline(m, o, testing::scratch_dir("acc_full_page_run"));
  int better = 0;
  for (std::size_t i = 0; i < segmented.pages.size(); ++i) {
    better += *segmented.pages[i].wer < *full.pages[i].wer;
  }
  return {better == 20, std::to_string(better) + "/20 pages lower; mean WER segmented " +
                            fmt(*segmented.wer) + " vs full page " + fmt(*full.wer)};
}

Outcome merge_properties() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> pos(0, 300), size(5, 120), conf(0.1, 1.0);
  int failures = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<Detection> dets;
    const int n = 1 + static_cast<int>(rng() % 25);
    for (int i = 0; i < n; ++i) {
      const double x = pos(rng), y = pos(rng);
      const auto label = kAllLayoutClasses[rng() % kLayoutClassCount];
      dets.push_back({make_box(x, y, x + size(rng), y + size(rng)), label, std::round(conf(rng) * 100) / 100});
    }
    const auto merged = merge_overlapping(dets);
    bool ok = merge_overlapping(merged) == merged;

    auto shuffled = dets;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ok = ok && merge_overlapping(shuffled) == merged;

    std::vector<Detection> curly_in, curly_out;
    for (const auto& d : dets) {
      if (d.label == LayoutClass::Curly) curly_in.push_back(d);
    }
    for (const auto& d : merged) {
      if (d.label == LayoutClass::Curly) curly_out.push_back(d);
    }
    std::sort(curly_in.begin(), curly_in.end(), merge_order);
    std::sort(curly_out.begin(), curly_out.end(), merge_order);
    ok = ok && curly_in == curly_out;

    for (std::size_t i = 0; i < merged.size(); ++i) {
      if (merged[i].label == LayoutClass::Curly) continue;
      for (std::size_t j = i + 1; j < merged.size(); ++j) {
        if (merged[j].label != LayoutClass::Curly && iou(merged[i].box, merged[j].box) > 0.3) ok = false;
      }
    }
    for (const auto& d : dets) {
      if (d.label == LayoutClass::Curly) continue;
      ok = ok && std::any_of(merged.begin(), merged.end(), [&](const Detection& m) {
             return m.label != LayoutClass::Curly && m.box.contains(d.box);
           });
    }

    // A pair at exactly the threshold stays apart.
    const double k = 1.0 + static_cast<double>(rng() % 40);
    const double ox = std::floor(pos(rng)), oy = std::floor(pos(rng));
    const Detection a{make_box(ox, oy, ox + 10 * k, oy + 10 * k), LayoutClass::Paragraph, 0.9};
    const Detection b{make_box(ox, oy, ox + 3 * k, oy + 10 * k), LayoutClass::Paragraph, 0.8};
    ok = ok && iou(a.box, b.box) == 0.3 && merge_overlapping({a, b}).size() == 2;

    failures += !ok;
  }
  return {failures == 0, "1000 sets, failures " + std::to_string(failures)};
}

Outcome iou_pixel_oracle() {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> c(0, 64);
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    auto box = [&] {
      int x0 = c(rng), x1 = c(rng), y0 = c(rng), y1 = c(rng);
      if (x0 == x1) ++x1;
      if (y0 == y1) ++y1;
      return make_box(std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1));
    };
    const auto a = box();
    const auto b = box();
    worst = std::max(worst, std::abs(iou(a, b) - testing::pixel_iou(a, b)));
  }
  return {worst < 1e-9, "10000 pairs, max abs error " + std::to_string(worst)};
}

Outcome voc_round_trip() {
  std::mt19937_64 rng(58);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int failures = 0;
  for (int t = 0; t < 500; ++t) {
    PageAnnotation a;
    a.page_id = "voc_" + std::to_string(t);
    a.width = 200 + static_cast<int>(rng() % 1800);
    a.height = 200 + static_cast<int>(rng() % 1800);
    const int n = static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      const double x0 = u(rng) * (a.width - 20), y0 = u(rng) * (a.height - 20);
      const double x1 = x0 + 1 + u(rng) * (a.width - x0 - 2), y1 = y0 + 1 + u(rng) * (a.height - y0 - 2);
      a.elements.push_back({make_box(x0, y0, x1, y1), kAllLayoutClasses[rng() % kLayoutClassCount]});
    }
    const PageAnnotation once = read_voc(write_voc(a));
    const std::string xml = write_voc(once);
    const PageAnnotation twice = read_voc(xml);
    bool ok = twice == once && write_voc(twice) == xml && once.elements.size() == a.elements.size();
    for (std::size_t i = 0; ok && i < a.elements.size(); ++i) {
      ok = once.elements[i].box.contains(a.elements[i].box) &&
           once.elements[i].box.width() - a.elements[i].box.width() < 2.0;
    }
    failures += !ok;
  }
  return {failures == 0, "500 annotations, failures " + std::to_string(failures)};
}

Outcome augmentation_geometry() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> deg(-10, 10), sc(0.9, 1.1), pos(0, 800), len(10, 400);
  double worst = 0.0;
  for (int t = 0; t < 2000; ++t) {
    const double x = pos(rng), y = pos(rng);
    const auto b = make_box(x, y, x + len(rng), y + len(rng));
    const double W = 1405, H = 1988;
    const auto flipped = transform_bbox(b, horizontal_flip(W), W, H);
    const BoundingBox want_flip{W - b.x_max, b.y_min, W - b.x_min, b.y_max};
    worst = std::max({worst, std::abs(flipped->x_min - want_flip.x_min), std::abs(flipped->x_max - want_flip.x_max),
                      std::abs(flipped->y_min - want_flip.y_min), std::abs(flipped->y_max - want_flip.y_max)});

    const double d = deg(rng), s = sc(rng);
    const auto rotated = transform_bbox(b, rotate_scale_about_center(d, s, W, H), W, H);
    const double th = d * std::acos(-1.0) / 180.0;
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (double cx : {b.x_min, b.x_max}) {
      for (double cy : {b.y_min, b.y_max}) {
        const double dx = cx - W / 2, dy = cy - H / 2;
        const double rx = W / 2 + s * (dx * std::cos(th) + dy * std::sin(th));
        const double ry = H / 2 + s * (-dx * std::sin(th) + dy * std::cos(th));
        x0 = std::min(x0, rx);
        x1 = std::max(x1, rx);
        y0 = std::min(y0, ry);
        y1 = std::max(y1, ry);
      }
    }
    BoundingBox want{x0, y0, x1, y1};
    if (clip_to_page(want, W, H) && rotated) {
      worst = std::max({worst, std::abs(rotated->x_min - want.x_min), std::abs(rotated->x_max - want.x_max),
                        std::abs(rotated->y_min - want.y_min), std::abs(rotated->y_max - want.y_max)});
    }
  }

  // Ink of every surviving element, mapped through the page transform, lies
  // in that element's transformed box.
  AugmentParams params;
  params.rotation_min_deg = -10;
  params.rotation_max_deg = 10;
  params.flip_probability = 0.5;
  double worst_page = 1.0;
  long inside_total = 0, ink_total = 0;
  for (int p = 0; p < 50; ++p) {
    SynthConfig cfg;
    cfg.seed = 9300 + p;
    cfg.column_count = 1 + p % 3;
    const auto page = generate_page(cfg, "ink_" + std::to_string(p));
    params.seed = 1000 + p;
    Rng trng(derive_seed(params.seed, "augment", page.annotation.page_id));
    const Affine tf = sample_transform(params, page.image.width(), page.image.height(), trng);
    const int w = page.image.width(), h = page.image.height();
    std::vector<std::optional<BoundingBox>> boxes;
    for (const auto& e : page.annotation.elements) boxes.push_back(transform_bbox(e.box, tf, w, h));
    long inside = 0, ink = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto owner = page.ink_owner[static_cast<std::size_t>(y) * w + x];
        if (!owner || !boxes[owner - 1]) continue;
        const Eigen::Vector2d q = tf * Eigen::Vector2d(x + 0.5, y + 0.5);
        if (q.x() < 0 || q.y() < 0 || q.x() >= w || q.y() >= h) continue;
        const auto& b = *boxes[owner - 1];
        ++ink;
        inside += q.x() >= b.x_min && q.x() <= b.x_max && q.y() >= b.y_min && q.y() <= b.y_max;
      }
    }
    if (ink) worst_page = std::min(worst_page, static_cast<double>(inside) / static_cast<double>(ink));
    inside_total += inside;
    ink_total += ink;
  }
  const double share = static_cast<double>(inside_total) / static_cast<double>(ink_total);
  return {worst < 1e-6 && worst_page >= 0.95,
          "corner error " + std::to_string(worst) + ", ink contained " + fmt(100 * share, 2) +
              "% overall, worst page " + fmt(100 * worst_page, 2) + "%"};
}

Outcome rlsa_recall() {
  SynthConfig cfg;
  cfg.column_count = 1;
  cfg.weights.name_entry = 0.0;
  cfg.seed = 9500;
  const auto m = generate_dataset(cfg, 20, testing::scratch_dir("acc_rlsa"));
  const RlsaDetector det;
  std::size_t top_hit = 0, top_total = 0, all_hit = 0, all_total = 0;
  for (const auto& e : m.entries) {
    const auto truth = read_truth_json(read_text_file(m.resolve(e.transcript_path)));
    const auto found = det.detect(read_image(m.resolve(e.image_path)), e.page_id).detections;
    for (const auto& t : truth.elements) {
      const bool hit = std::any_of(found.begin(), found.end(),
                                   [&](const Detection& d) { return iou(d.box, t.box) >= 0.5; });
      ++all_total;
      all_hit += hit;
      if (t.parent >= 0) continue;
      ++top_total;
      top_hit += hit;
    }
  }
  const double recall = static_cast<double>(top_hit) / static_cast<double>(top_total);
  return {recall >= 0.9, "text-region recall " + fmt(recall) + " over " + std::to_string(top_total) +
                             " regions (every element: " +
                             fmt(static_cast<double>(all_hit) / static_cast<double>(all_total)) + ")"};
}

double round_half_up(double v) { return std::floor(v * 100.0 + 0.5) / 100.0; }

Outcome metrics_fixture_replay() {
  const double acc[] = {0.99, 1, 1, 1, 0.74, 1, 0.80, 0.99, 1, 0.99, 0.99, 0.99, 0.99, 0.97, 1};
  const double prec[] = {0.99, 1, 1, 1, 0.74, 1, 0.56, 0.98, 1, 0.83, 0.99, 0.99, 0.99, 0.82, 1};
  const double rec[] = {0.98, 1, 1, 1, 0.75, 1, 0.69, 0.88, 1, 0.82, 0.97, 0.99, 0.99, 0.78, 1};
  const double f1[] = {0.99, 1, 1, 1, 0.72, 1, 0.57, 0.91, 1, 0.83, 0.98, 0.99, 0.99, 0.80, 1};
  const double bbox[] = {0.91, 0.91, 0.92, 0.92, 0.72, 0.89, 0.88, 0.91, 0.92, 0.93, 0.90, 0.90, 0.88, 0.89, 0.87};
  const fs::path dir = fs::path(SCHEMATIK_FIXTURES_DIR) / "table2";
  const auto detections = read_detections_json(read_text_file(dir / "detections.json"));
  std::vector<PageEval> pages;
  int row_mismatches = 0;
  for (int i = 0; i < 15; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "table2_%02d", i + 1);
    const auto gt = load_voc(dir / (std::string(id) + ".xml"));
    const auto it = std::find_if(detections.begin(), detections.end(),
                                 [&](const PageDetections& p) { return p.page_id == id; });
    const auto e = evaluate_page(gt, it == detections.end() ? std::vector<Detection>{} : it->detections);
    const bool row_ok = round_half_up(e.accuracy) == acc[i] && round_half_up(e.precision) == prec[i] &&
                        round_half_up(e.recall) == rec[i] && round_half_up(e.f1) == f1[i] &&
                        round_half_up(e.bbox_accuracy) == bbox[i];
    row_mismatches += !row_ok;
    pages.push_back(e);
  }
  const auto r = aggregate(pages);
  const bool ok = row_mismatches == 0 && std::abs(r.accuracy - 0.964) <= 0.001 &&
                  std::abs(r.precision - 0.927) <= 0.001 && std::abs(r.recall - 0.923) <= 0.001 &&
                  std::abs(r.f1 - 0.917) <= 0.001 && std::abs(r.bbox_accuracy - 0.889) <= 0.001;
  return {ok, "page rows off " + std::to_string(row_mismatches) + "; means " + fmt(r.accuracy) + " / " +
                  fmt(r.precision) + " / " + fmt(r.recall) + " / " + fmt(r.f1) + " / " + fmt(r.bbox_accuracy)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"cer/wer equal the DP oracle", edit_distance_oracle},
      {"scenario improvement replay", scenario_replay},
      {"closed loop has zero error", closed_loop},
      {"segmentation lowers WER on every page", segmentation_benefit},
      {"merge properties", merge_properties},
      {"IoU agrees with pixel counting", iou_pixel_oracle},
      {"VOC round-trip", voc_round_trip},
      {"augmentation geometry and ink containment", augmentation_geometry},
      {"RLSA text-region recall", rlsa_recall},
      {"metrics fixture replay", metrics_fixture_replay},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  (" << o.detail << ")" << std::endl;
  }
  std::cout << (std::size(criteria) - failed) << "/" << std::size(criteria) << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
