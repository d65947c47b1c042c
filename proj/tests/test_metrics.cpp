#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "doctest.h"
#include "schematik/metrics.hpp"

using namespace schematik;

namespace {

// Plain recursive distance, memoized; no backtrace, no tie rules.
template <class Seq>
std::size_t distance_oracle(const Seq& a, const Seq& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    auto it = memo.find({i, j});
    if (it != memo.end()) return it->second;
    const std::size_t v = std::min({go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1), go(i + 1, j) + 1,
                                    go(i, j + 1) + 1});
    memo[{i, j}] = v;
    return v;
  };
  return go(0, 0);
}

PageAnnotation page(std::vector<AnnotatedElement> els) {
  PageAnnotation a;
  a.page_id = "p";
  a.width = 1000;
  a.height = 1000;
  a.elements = std::move(els);
  return a;
}

Detection det(BoundingBox b, LayoutClass c, double conf = 1.0) { return {b, c, conf}; }

}  // namespace

TEST_CASE("edit counts") {
  auto ec = edit_counts(U"abc", U"abc");
  CHECK(ec == EditCounts{0, 0, 0, 3});
  ec = edit_counts(U"abc", U"abd");
  CHECK(ec == EditCounts{0, 0, 1, 3});
  ec = edit_counts(U"a", U"abc");
  CHECK(ec == EditCounts{2, 0, 0, 1});
  ec = edit_counts(U"abc", U"");
  CHECK(ec == EditCounts{0, 3, 0, 3});
  // Substitution is preferred over an insert/delete pair of the same cost.
  ec = edit_counts(U"ab", U"ba");
  CHECK(ec.errors() == 2);
  CHECK(ec.substitutions == 2);
}

TEST_CASE("edit counts agree with the recursive oracle") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 500; ++t) {
    std::u32string a, b;
    const auto la = rng() % 9, lb = rng() % 9;
    for (std::size_t i = 0; i < la; ++i) a.push_back(U'a' + static_cast<char32_t>(rng() % 3));
    for (std::size_t i = 0; i < lb; ++i) b.push_back(U'a' + static_cast<char32_t>(rng() % 3));
    const auto ec = edit_counts(a, b);
    CHECK(ec.errors() == distance_oracle(a, b));
    CHECK(static_cast<long>(ec.insertions) - static_cast<long>(ec.deletions) ==
          static_cast<long>(b.size()) - static_cast<long>(a.size()));
  }
}

TEST_CASE("cer and wer") {
  CHECK(cer("Pfarre", "Pfarre") == 0.0);
  CHECK(cer("a", "abc") == 2.0);
  CHECK(wer("der alte Mann", "der alte Haus") == doctest::Approx(1.0 / 3.0));
  CHECK(cer("Köln", "Koln") == doctest::Approx(0.25));
  CHECK(wer("a  b\tc\n", "a b c") == 0.0);
  CHECK(wer("Pfarre,", "Pfarre") == 1.0);
  CHECK_THROWS_AS(cer("", "x"), std::invalid_argument);
  CHECK_THROWS_AS(wer("  ", "x"), std::invalid_argument);
}

TEST_CASE("matching") {
  const auto gt = page({{make_box(0, 0, 10, 10), LayoutClass::Paragraph},
                        {make_box(0, 20, 10, 30), LayoutClass::H2}});
  auto m = match_detections(gt, {det(gt.elements[0].box, LayoutClass::Paragraph),
                                 det(gt.elements[1].box, LayoutClass::H2)});
  CHECK(m.matches.size() == 2);
  CHECK(m.unmatched_gt.empty());
  CHECK(m.unmatched_pred.empty());

  m = match_detections(page({{make_box(0, 0, 10, 10), LayoutClass::H1}}), {});
  CHECK(m.unmatched_gt == std::vector<std::size_t>{0});

  // One prediction overlapping two GT boxes goes to the larger overlap.
  const auto two = page({{make_box(0, 0, 10, 10), LayoutClass::H1}, {make_box(10, 0, 20, 10), LayoutClass::H1}});
  m = match_detections(two, {det(make_box(2, 0, 12, 10), LayoutClass::H1)});
  REQUIRE(m.matches.size() == 1);
  CHECK(m.matches[0].gt == 0);
  CHECK(m.unmatched_gt == std::vector<std::size_t>{1});

  // Below the floor nothing matches.
  m = match_detections(page({{make_box(0, 0, 10, 10), LayoutClass::H1}}),
                       {det(make_box(0, 0, 2, 10), LayoutClass::H1)});
  CHECK(m.matches.empty());
  CHECK(m.unmatched_pred == std::vector<std::size_t>{0});
}

TEST_CASE("bbox accuracy") {
  const auto gt = page({{make_box(0, 0, 10, 10), LayoutClass::Paragraph},
                        {make_box(0, 20, 10, 30), LayoutClass::Paragraph}});
  auto m = match_detections(gt, {det(gt.elements[0].box, LayoutClass::Paragraph),
                                 det(gt.elements[1].box, LayoutClass::Paragraph)});
  CHECK(bbox_accuracy(m, 2) == 1.0);
  m = match_detections(gt, {det(gt.elements[0].box, LayoutClass::Paragraph)});
  CHECK(bbox_accuracy(m, 2) == 0.5);
  CHECK_THROWS_AS(bbox_accuracy(m, 0), std::invalid_argument);
}

TEST_CASE("classification scores") {
  std::vector<AnnotatedElement> els;
  std::vector<Detection> preds;
  for (int i = 0; i < 10; ++i) {
    const auto b = make_box(0, 20.0 * i, 10, 20.0 * i + 10);
    els.push_back({b, LayoutClass::Paragraph});
    preds.push_back(det(b, LayoutClass::Paragraph));
  }
  auto gt = page(els);
  auto s = classification_metrics(gt, preds, match_detections(gt, preds));
  CHECK(s.accuracy == 1.0);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 1.0);
  CHECK(s.f1 == 1.0);

  preds[9].label = LayoutClass::H3;
  s = classification_metrics(gt, preds, match_detections(gt, preds));
  CHECK(s.accuracy == doctest::Approx(0.9));
  CHECK(s.decisions == 10);
  // Paragraph: P=1, R=0.9; H3: P=0, R=0 (no H3 ground truth)
  CHECK(s.precision == doctest::Approx(0.5));
  CHECK(s.recall == doctest::Approx(0.45));
  CHECK(s.f1 == doctest::Approx((2 * 0.9 / 1.9) / 2));

  // An unmatched prediction is a decision and a false positive.
  preds[9].label = LayoutClass::Paragraph;
  preds.push_back(det(make_box(500, 500, 600, 600), LayoutClass::Paragraph));
  s = classification_metrics(gt, preds, match_detections(gt, preds));
  CHECK(s.decisions == 11);
  CHECK(s.accuracy == doctest::Approx(10.0 / 11.0));
  CHECK(s.precision == doctest::Approx(10.0 / 11.0));
  CHECK(s.recall == 1.0);
}

TEST_CASE("confusion matrix") {
  std::vector<AnnotatedElement> els;
  std::vector<Detection> preds;
  for (int i = 0; i < 3; ++i) {
    const auto b = make_box(0, 20.0 * i, 10, 20.0 * i + 10);
    els.push_back({b, LayoutClass::Paragraph});
    preds.push_back(det(b, i == 2 ? LayoutClass::H3 : LayoutClass::Paragraph));
  }
  const auto gt = page(els);
  const auto cm = confusion_matrix(gt, preds, match_detections(gt, preds));
  const auto n = cm.normalized();
  CHECK(n[0][0] == doctest::Approx(2.0 / 3.0));
  CHECK(n[0][class_index(LayoutClass::H3)] == doctest::Approx(1.0 / 3.0));
  CHECK(cm.row_present(LayoutClass::Paragraph));
  CHECK_FALSE(cm.row_present(LayoutClass::H1));
  for (double v : n[class_index(LayoutClass::H1)]) CHECK(v == 0.0);
}

namespace {

// Builds `correct` matched predictions of class c plus `incorrect` ones that
// are matched to a different ground-truth class.
void add_confidence_rows(std::vector<AnnotatedElement>& els, std::vector<Detection>& preds,
                         LayoutClass c, int correct, double conf_ok, int incorrect,
                         double conf_bad) {
  for (int i = 0; i < correct + incorrect; ++i) {
    const double y = 20.0 * static_cast<double>(els.size());
    const auto b = make_box(0, y, 10, y + 10);
    const bool ok = i < correct;
    els.push_back({b, ok ? c : LayoutClass::BigParagraph});
    preds.push_back(det(b, c, ok ? conf_ok : conf_bad));
  }
}

}  // namespace

TEST_CASE("confidence stats replay the published per-class averages") {
  std::vector<AnnotatedElement> els;
  std::vector<Detection> preds;
  add_confidence_rows(els, preds, LayoutClass::Paragraph, 77, 0.996, 4, 0.834);
  add_confidence_rows(els, preds, LayoutClass::H2, 7, 0.918, 1, 0.647);
  add_confidence_rows(els, preds, LayoutClass::H4, 33, 0.991, 14, 0.860);
  PageAnnotation gt = page(els);
  gt.height = 10000;
  const auto s = confidence_stats(gt, preds, match_detections(gt, preds));
  const auto& para = s[class_index(LayoutClass::Paragraph)];
  CHECK(*para.any.mean() == doctest::Approx(0.988).epsilon(0.0005));
  CHECK(*para.correct.mean() == doctest::Approx(0.996));
  CHECK(*para.incorrect.mean() == doctest::Approx(0.834));
  const auto& h2 = s[class_index(LayoutClass::H2)];
  CHECK(*h2.any.mean() == doctest::Approx(0.884).epsilon(0.0005));
  const auto& h4 = s[class_index(LayoutClass::H4)];
  CHECK(*h4.any.mean() == doctest::Approx(0.952).epsilon(0.0005));
  CHECK_FALSE(s[class_index(LayoutClass::H1)].any.mean().has_value());
}

TEST_CASE("confidence stats edge cases") {
  const auto gt = page({{make_box(0, 0, 10, 10), LayoutClass::H1}});
  auto s = confidence_stats(gt, {det(gt.elements[0].box, LayoutClass::H1, 1.0)},
                            match_detections(gt, {det(gt.elements[0].box, LayoutClass::H1, 1.0)}));
  CHECK(*s[class_index(LayoutClass::H1)].any.mean() == 1.0);
  CHECK(*s[class_index(LayoutClass::H1)].correct.mean() == 1.0);
  CHECK_FALSE(s[class_index(LayoutClass::H1)].incorrect.mean().has_value());

  const std::vector<Detection> wrong{det(gt.elements[0].box, LayoutClass::H2, 0.6)};
  s = confidence_stats(gt, wrong, match_detections(gt, wrong));
  CHECK(*s[class_index(LayoutClass::H2)].incorrect.mean() == doctest::Approx(0.6));
}

TEST_CASE("improvement") {
  CHECK(std::abs(improvement(19.84, 15.55) - 21.62) <= 0.005);
  CHECK(std::abs(improvement(15.55, 5.56) - 64.24) <= 0.005);
  CHECK(improvement(7.0, 7.0) == 0.0);
  CHECK_THROWS_AS(improvement(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("aggregate and report round-trip") {
  PageEval a, b;
  a.page_id = "b";
  a.accuracy = 1.0;
  a.f1 = 0.5;
  a.cer = 0.1;
  a.wer = 0.3;
  b.page_id = "a";
  b.accuracy = 0.5;
  b.f1 = 1.0;
  b.cer = 0.3;
  b.wer = 0.5;
  auto r = aggregate({a, b});
  CHECK(r.pages[0].page_id == "a");
  CHECK(r.accuracy == 0.75);
  CHECK(*r.cer == doctest::Approx(0.2));
  r.parameters = {{"padding", "4"}};
  const auto back = report_from_json(report_to_json(r));
  CHECK(back.accuracy == r.accuracy);
  CHECK(*back.wer == doctest::Approx(0.4));
  CHECK(back.parameters == r.parameters);
  CHECK(per_page_csv(r).rfind("page_id,accuracy", 0) == 0);

  PageEval no_text;
  no_text.page_id = "c";
  CHECK_FALSE(aggregate({no_text}).cer.has_value());
  CHECK_THROWS_AS(report_from_json("{"), FormatError);
}
