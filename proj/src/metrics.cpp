#include "schematik/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "schematik/utf8.hpp"

namespace schematik {

using nlohmann::json;

// Edit distance --------------------------------------------------------------

namespace {

template <typename Seq>
EditCounts align(const Seq& ref, const Seq& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::size_t> dp((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dp[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i, j - 1) + 1, at(i - 1, j) + 1});
    }
  }
  EditCounts c;
  c.reference_length = n;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        if (!same) ++c.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      ++c.insertions;
      --j;
    } else {
      ++c.deletions;
      --i;
    }
  }
  return c;
}

}  // namespace

EditCounts edit_counts(const std::u32string& reference, const std::u32string& hypothesis) {
  return align(reference, hypothesis);
}

EditCounts edit_counts(const std::vector<std::string>& reference,
                       const std::vector<std::string>& hypothesis) {
  return align(reference, hypothesis);
}

double cer(const std::string& reference, const std::string& hypothesis) {
  const auto c = edit_counts(utf8::decode(reference), utf8::decode(hypothesis));
  if (c.reference_length == 0) throw std::invalid_argument("CER needs a non-empty reference");
  return static_cast<double>(c.errors()) / static_cast<double>(c.reference_length);
}

double wer(const std::string& reference, const std::string& hypothesis) {
  const auto c = edit_counts(utf8::split_words(reference), utf8::split_words(hypothesis));
  if (c.reference_length == 0) throw std::invalid_argument("WER needs at least one reference word");
  return static_cast<double>(c.errors()) / static_cast<double>(c.reference_length);
}

// Matching -------------------------------------------------------------------

MatchResult match_detections(const PageAnnotation& gt, const std::vector<Detection>& preds,
                             double iou_floor) {
  std::vector<Match> pairs;
  for (std::size_t g = 0; g < gt.elements.size(); ++g) {
    for (std::size_t p = 0; p < preds.size(); ++p) {
      const double v = iou(gt.elements[g].box, preds[p].box);
      if (v > 0.0) pairs.push_back({g, p, v});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Match& a, const Match& b) { return a.iou > b.iou; });
  std::vector<bool> gt_used(gt.elements.size(), false);
  std::vector<bool> pred_used(preds.size(), false);
  MatchResult r;
  for (const auto& m : pairs) {
    if (gt_used[m.gt] || pred_used[m.pred]) continue;
    gt_used[m.gt] = true;
    pred_used[m.pred] = true;
    // A best pair below the floor is broken rather than kept.
    if (m.iou >= iou_floor) r.matches.push_back(m);
    else {
      r.unmatched_gt.push_back(m.gt);
      r.unmatched_pred.push_back(m.pred);
    }
  }
  for (std::size_t g = 0; g < gt_used.size(); ++g) {
    if (!gt_used[g]) r.unmatched_gt.push_back(g);
  }
  for (std::size_t p = 0; p < pred_used.size(); ++p) {
    if (!pred_used[p]) r.unmatched_pred.push_back(p);
  }
  std::sort(r.matches.begin(), r.matches.end(),
            [](const Match& a, const Match& b) { return a.gt < b.gt; });
  std::sort(r.unmatched_gt.begin(), r.unmatched_gt.end());
  std::sort(r.unmatched_pred.begin(), r.unmatched_pred.end());
  return r;
}

double bbox_accuracy(const MatchResult& m, std::size_t gt_count) {
  if (gt_count == 0) throw std::invalid_argument("bbox accuracy needs ground truth");
  double sum = 0.0;
  for (const auto& x : m.matches) sum += x.iou;
  return sum / static_cast<double>(gt_count);
}

// Classification -------------------------------------------------------------

ClassificationScores classification_metrics(const PageAnnotation& gt,
                                            const std::vector<Detection>& preds,
                                            const MatchResult& m) {
  ClassificationScores s;
  std::size_t correct = 0;
  for (const auto& x : m.matches) {
    const auto g = class_index(gt.elements[x.gt].label);
    const auto p = class_index(preds[x.pred].label);
    if (g == p) {
      ++s.counts[g].tp;
      ++correct;
    } else {
      ++s.counts[p].fp;
      ++s.counts[g].fn;
    }
  }
  for (auto g : m.unmatched_gt) ++s.counts[class_index(gt.elements[g].label)].fn;
  for (auto p : m.unmatched_pred) ++s.counts[class_index(preds[p].label)].fp;
  s.decisions = m.matches.size() + m.unmatched_gt.size() + m.unmatched_pred.size();
  if (s.decisions == 0) throw std::invalid_argument("classification metrics need a decision");

  for (const auto& e : gt.elements) s.present[class_index(e.label)] = true;
  for (const auto& d : preds) s.present[class_index(d.label)] = true;

  auto ratio = [](std::size_t a, std::size_t b) {
    return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
  };
  std::size_t classes = 0;
  for (std::size_t c = 0; c < kLayoutClassCount; ++c) {
    auto& k = s.counts[c];
    k.tn = s.decisions - k.tp - k.fp - k.fn;
    if (!s.present[c]) continue;
    ++classes;
    const double p = ratio(k.tp, k.tp + k.fp);
    const double r = ratio(k.tp, k.tp + k.fn);
    s.class_precision[c] = p;
    s.class_recall[c] = r;
    s.class_f1[c] = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    s.precision += p;
    s.recall += r;
    s.f1 += s.class_f1[c];
  }
  s.precision /= static_cast<double>(classes);
  s.recall /= static_cast<double>(classes);
  s.f1 /= static_cast<double>(classes);
  s.accuracy = ratio(correct, s.decisions);
  return s;
}

void ConfusionMatrix::add(const ConfusionMatrix& other) {
  for (std::size_t g = 0; g < kLayoutClassCount; ++g) {
    for (std::size_t p = 0; p < kLayoutClassCount; ++p) counts[g][p] += other.counts[g][p];
  }
}

std::array<std::array<double, kLayoutClassCount>, kLayoutClassCount> ConfusionMatrix::normalized()
    const {
  std::array<std::array<double, kLayoutClassCount>, kLayoutClassCount> out{};
  for (std::size_t g = 0; g < kLayoutClassCount; ++g) {
    std::size_t total = 0;
    for (auto v : counts[g]) total += v;
    if (total == 0) continue;
    for (std::size_t p = 0; p < kLayoutClassCount; ++p) {
      out[g][p] = static_cast<double>(counts[g][p]) / static_cast<double>(total);
    }
  }
  return out;
}

bool ConfusionMatrix::row_present(LayoutClass gt) const {
  const auto& row = counts[class_index(gt)];
  return std::any_of(row.begin(), row.end(), [](std::size_t v) { return v > 0; });
}

ConfusionMatrix confusion_matrix(const PageAnnotation& gt, const std::vector<Detection>& preds,
                                 const MatchResult& m) {
  ConfusionMatrix c;
  for (const auto& x : m.matches) {
    ++c.counts[class_index(gt.elements[x.gt].label)][class_index(preds[x.pred].label)];
  }
  return c;
}

ConfidenceStats confidence_stats(const PageAnnotation& gt, const std::vector<Detection>& preds,
                                 const MatchResult& m) {
  ConfidenceStats s{};
  auto add = [](ConfidenceAccumulator& a, double v) {
    a.sum += v;
    ++a.count;
  };
  for (const auto& x : m.matches) {
    const auto& d = preds[x.pred];
    auto& c = s[class_index(d.label)];
    add(c.any, d.confidence);
    add(d.label == gt.elements[x.gt].label ? c.correct : c.incorrect, d.confidence);
  }
  for (auto p : m.unmatched_pred) {
    const auto& d = preds[p];
    auto& c = s[class_index(d.label)];
    add(c.any, d.confidence);
    add(c.incorrect, d.confidence);
  }
  return s;
}

void accumulate(ConfidenceStats& into, const ConfidenceStats& from) {
  for (std::size_t c = 0; c < kLayoutClassCount; ++c) {
    for (auto [dst, src] : {std::pair{&into[c].any, &from[c].any},
                            std::pair{&into[c].correct, &from[c].correct},
                            std::pair{&into[c].incorrect, &from[c].incorrect}}) {
      dst->sum += src->sum;
      dst->count += src->count;
    }
  }
}

double improvement(double old_rate, double new_rate) {
  if (old_rate == 0.0) throw std::invalid_argument("improvement needs a non-zero old rate");
  return 100.0 * (old_rate - new_rate) / old_rate;
}

// Reports --------------------------------------------------------------------

PageEval evaluate_page(const PageAnnotation& gt, const std::vector<Detection>& preds) {
  const auto m = match_detections(gt, preds);
  const auto s = classification_metrics(gt, preds, m);
  PageEval e;
  e.page_id = gt.page_id;
  e.accuracy = s.accuracy;
  e.precision = s.precision;
  e.recall = s.recall;
  e.f1 = s.f1;
  e.bbox_accuracy = bbox_accuracy(m, gt.elements.size());
  e.confusion = confusion_matrix(gt, preds, m);
  e.confidence = confidence_stats(gt, preds, m);
  return e;
}

EvalReport aggregate(std::vector<PageEval> pages) {
  std::sort(pages.begin(), pages.end(),
            [](const PageEval& a, const PageEval& b) { return a.page_id < b.page_id; });
  EvalReport r;
  const double n = static_cast<double>(pages.size());
  double cer_sum = 0.0;
  double wer_sum = 0.0;
  std::size_t cer_n = 0;
  std::size_t wer_n = 0;
  for (const auto& p : pages) {
    r.accuracy += p.accuracy / n;
    r.precision += p.precision / n;
    r.recall += p.recall / n;
    r.f1 += p.f1 / n;
    r.bbox_accuracy += p.bbox_accuracy / n;
    if (p.cer) {
      cer_sum += *p.cer;
      ++cer_n;
    }
    if (p.wer) {
      wer_sum += *p.wer;
      ++wer_n;
    }
    r.confusion.add(p.confusion);
    accumulate(r.confidence, p.confidence);
  }
  if (cer_n) r.cer = cer_sum / static_cast<double>(cer_n);
  if (wer_n) r.wer = wer_sum / static_cast<double>(wer_n);
  r.pages = std::move(pages);
  return r;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json pages = json::array();
  for (const auto& p : r.pages) {
    pages.push_back({{"page_id", p.page_id},
                     {"accuracy", p.accuracy},
                     {"precision", p.precision},
                     {"recall", p.recall},
                     {"f1", p.f1},
                     {"bbox_accuracy", p.bbox_accuracy},
                     {"cer", optional_json(p.cer)},
                     {"wer", optional_json(p.wer)}});
  }
  json names = json::array();
  for (auto c : kAllLayoutClasses) names.push_back(std::string(to_string(c)));
  json counts = json::array();
  json rows = json::array();
  const auto norm = r.confusion.normalized();
  for (std::size_t g = 0; g < kLayoutClassCount; ++g) {
    counts.push_back(r.confusion.counts[g]);
    rows.push_back(norm[g]);
  }
  json conf = json::object();
  for (auto c : kAllLayoutClasses) {
    const auto& s = r.confidence[class_index(c)];
    if (!s.any.count) continue;
    conf[std::string(to_string(c))] = {
        {"any", optional_json(s.any.mean())},
        {"correct", optional_json(s.correct.mean())},
        {"incorrect", optional_json(s.incorrect.mean())},
        {"counts", {s.any.count, s.correct.count, s.incorrect.count}},
        {"sums", {s.any.sum, s.correct.sum, s.incorrect.sum}}};
  }
  json params = json::object();
  for (const auto& [k, v] : r.parameters) params[k] = v;
  json j{{"accuracy", r.accuracy},
         {"precision", r.precision},
         {"recall", r.recall},
         {"f1", r.f1},
         {"bbox_accuracy", r.bbox_accuracy},
         {"cer", optional_json(r.cer)},
         {"wer", optional_json(r.wer)},
         {"classes", names},
         {"confusion_counts", counts},
         {"confusion", rows},
         {"confidence", conf},
         {"parameters", params},
         {"pages", pages}};
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    std::vector<PageEval> pages;
    for (const auto& p : j.at("pages")) {
      PageEval e;
      e.page_id = p.at("page_id").get<std::string>();
      e.accuracy = p.value("accuracy", 0.0);
      e.precision = p.value("precision", 0.0);
      e.recall = p.value("recall", 0.0);
      e.f1 = p.value("f1", 0.0);
      e.bbox_accuracy = p.value("bbox_accuracy", 0.0);
      e.cer = optional_from(p, "cer");
      e.wer = optional_from(p, "wer");
      pages.push_back(std::move(e));
    }
    EvalReport r = aggregate(std::move(pages));
    if (j.contains("confusion_counts")) {
      const auto& counts = j.at("confusion_counts");
      for (std::size_t g = 0; g < kLayoutClassCount && g < counts.size(); ++g) {
        for (std::size_t c = 0; c < kLayoutClassCount && c < counts[g].size(); ++c) {
          r.confusion.counts[g][c] = counts[g][c].get<std::size_t>();
        }
      }
    }
    if (j.contains("confidence")) {
      for (const auto& [name, v] : j.at("confidence").items()) {
        auto& s = r.confidence[class_index(layout_class_from_string(name))];
        ConfidenceAccumulator* acc[3] = {&s.any, &s.correct, &s.incorrect};
        for (int k = 0; k < 3; ++k) {
          acc[k]->count = v.at("counts").at(k).get<std::size_t>();
          acc[k]->sum = v.at("sums").at(k).get<double>();
        }
      }
    }
    if (j.contains("parameters")) {
      for (const auto& [k, v] : j.at("parameters").items()) {
        r.parameters.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
      }
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("evaluation report: ") + e.what());
  }
}

std::string per_page_csv(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  os << "page_id,accuracy,precision,recall,f1,bbox_accuracy,cer,wer\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  for (const auto& p : r.pages) {
    os << p.page_id << ',' << p.accuracy << ',' << p.precision << ',' << p.recall << ',' << p.f1
       << ',' << p.bbox_accuracy << ',';
    opt(p.cer);
    os << ',';
    opt(p.wer);
    os << '\n';
  }
  return os.str();
}

}  // namespace schematik
