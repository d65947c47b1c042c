#include "schematik/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "schematik/parallel.hpp"

namespace schematik {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> PipelineOptions::describe() const {
  return {{"detector", detector},
          {"oracle_jitter_sigma", num(perturbation.jitter_sigma)},
          {"oracle_label_flip_prob", num(perturbation.label_flip_prob)},
          {"oracle_confidence_correct", num(perturbation.confidence_correct)},
          {"oracle_confidence_flipped", num(perturbation.confidence_flipped)},
          {"oracle_confidence_spread", num(perturbation.confidence_spread)},
          {"rlsa_horizontal_threshold_1", std::to_string(rlsa.horizontal_threshold_1)},
          {"rlsa_vertical_threshold", std::to_string(rlsa.vertical_threshold)},
          {"rlsa_horizontal_threshold_2", std::to_string(rlsa.horizontal_threshold_2)},
          {"rlsa_horizontal_factor_1", num(rlsa.horizontal_factor_1)},
          {"rlsa_vertical_factor", num(rlsa.vertical_factor)},
          {"rlsa_horizontal_factor_2", num(rlsa.horizontal_factor_2)},
          {"confidence_threshold", num(confidence_threshold)},
          {"merge_iou", num(merge_iou)},
          {"padding", num(padding)},
          {"scale", num(scale)},
          {"engine", engine},
          {"substitution", num(corruption.substitution)},
          {"insertion", num(corruption.insertion)},
          {"deletion", num(corruption.deletion)},
          {"scramble_full_pages", corruption.scramble_full_pages ? "true" : "false"},
          {"ocr_command", ocr_command},
          {"ocr_flags", ocr_flags},
          {"full_page", full_page ? "true" : "false"},
          {"workers", std::to_string(workers)},
          {"seed", std::to_string(seed)}};
}

std::unique_ptr<Detector> make_detector(const std::string& spec, const DatasetManifest& m,
                                        const OraclePerturbation& perturbation,
                                        const RlsaParams& rlsa, std::uint64_t seed) {
  if (spec == "oracle") {
    std::map<std::string, PageAnnotation> truth;
    for (const auto& e : m.entries) truth.emplace(e.page_id, load_voc(m.resolve(e.annotation_path)));
    return std::make_unique<OracleDetector>(std::move(truth), perturbation, seed);
  }
  if (spec == "rlsa") return std::make_unique<RlsaDetector>(rlsa);
  if (spec.rfind("external:", 0) == 0 && spec.size() > 9) {
    return std::make_unique<ExternalDetector>(spec.substr(9));
  }
  throw std::invalid_argument("unknown detector '" + spec + "'");
}

std::vector<DetectorOutput> detect_all(const DatasetManifest& m, const Detector& detector,
                                       int workers) {
  std::vector<DetectorOutput> out(m.entries.size());
  parallel_for(m.entries.size(), workers, [&](std::size_t i) {
    const auto& e = m.entries[i];
    out[i] = detector.detect(read_image(m.resolve(e.image_path)), e.page_id);
  });
  return out;
}

namespace {

std::unique_ptr<OcrEngine> make_engine(const PipelineOptions& o,
                                       const std::map<std::string, PageTruth>& truths,
                                       const std::filesystem::path& work_dir) {
  if (o.engine == "mock") {
    CorruptionModel model = o.corruption;
    model.seed = o.seed;
    return std::make_unique<MockEngine>(truths, model);
  }
  if (o.engine == "external") {
    std::filesystem::create_directories(work_dir);
    if (!o.ocr_command.empty()) {
      return std::make_unique<ExternalEngine>(o.ocr_command, o.ocr_flags, work_dir);
    }
    return std::make_unique<ExternalEngine>(ExternalEngine::from_environment(o.ocr_flags, work_dir));
  }
  throw std::invalid_argument("unknown OCR engine '" + o.engine + "'");
}

struct PageStages {
  std::vector<Detection> raw;
  std::vector<Detection> filtered;
  std::vector<Detection> merged;
};

PageStages postprocess_page(const DetectorOutput& d, const PipelineOptions& o) {
  PageStages s;
  s.raw = d.detections;
  s.filtered = filter_confidence(s.raw, o.confidence_threshold);
  s.merged = merge_overlapping(s.filtered, o.merge_iou);
  return s;
}

std::string ordered_jsonl(const std::vector<std::pair<std::string, std::vector<Detection>>>& pages) {
  std::string out;
  for (const auto& [page_id, dets] : pages) {
    for (std::size_t k = 0; k < dets.size(); ++k) {
      const auto& d = dets[k];
      out += json{{"page_id", page_id},
                  {"order_index", k},
                  {"label", std::string(to_string(d.label))},
                  {"confidence", d.confidence},
                  {"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}}}
                 .dump() +
             "\n";
    }
  }
  return out;
}

void write_stage(const std::filesystem::path& path, const std::vector<std::string>& ids,
                 const std::vector<std::vector<Detection>>& dets) {
  std::vector<PageDetections> pages;
  for (std::size_t i = 0; i < ids.size(); ++i) pages.push_back({ids[i], dets[i]});
  write_text_file(path, write_detections_json(pages));
}

std::optional<std::pair<double, double>> ocr_rates(const std::string& reference,
                                                   const std::string& hypothesis) {
  if (reference.empty()) return std::nullopt;
  return std::pair{cer(reference, hypothesis), wer(reference, hypothesis)};
}

}  // namespace

EvalReport run_pipeline(const DatasetManifest& m, const PipelineOptions& o,
                        const std::filesystem::path& out_dir) {
  o.corruption.validate();
  std::filesystem::create_directories(out_dir);
  const auto detector = make_detector(o.detector, m, o.perturbation, o.rlsa, o.seed);
  const auto truths = load_truths(m);
  if (o.full_page && truths.size() != m.entries.size()) {
    throw std::invalid_argument("full-page OCR needs a transcript for every page");
  }
  const auto engine = make_engine(o, truths, out_dir / "ocr_work");
  CorruptionModel full_model = o.corruption;
  full_model.seed = o.seed;

  const std::size_t n = m.entries.size();
  std::vector<std::string> ids(n);
  std::vector<PageStages> stages(n);
  std::vector<std::vector<Detection>> ordered(n);
  std::vector<std::vector<OcrResult>> results(n);
  std::vector<std::string> hypotheses(n);
  std::vector<PageEval> evals(n);

  parallel_for(n, o.workers, [&](std::size_t i) {
    const auto& e = m.entries[i];
    ids[i] = e.page_id;
    const PageImage image = read_image(m.resolve(e.image_path));
    const PageAnnotation gt = load_voc(m.resolve(e.annotation_path));
    stages[i] = postprocess_page(detector->detect(image, e.page_id), o);
    const auto& merged = stages[i].merged;
    for (auto k : reading_order(merged, image.width())) ordered[i].push_back(merged[k]);

    evals[i] = evaluate_page(gt, merged);
    const auto truth = truths.find(e.page_id);
    if (o.full_page) {
      hypotheses[i] = full_page_mock(truth->second, full_model);
    } else {
      const auto snippets = extract_snippets(image, e.page_id, ordered[i], o.padding, o.scale);
      if (o.export_snippets) export_snippets(snippets, out_dir / "snippets");
      results[i] = ocr(snippets, *engine, 1);
      hypotheses[i] = join_page_text(results[i]);
    }
    if (truth != truths.end()) {
      if (auto r = ocr_rates(truth->second.reading_text(), hypotheses[i])) {
        evals[i].cer = r->first;
        evals[i].wer = r->second;
      }
    }
  });

  std::vector<std::vector<Detection>> raw(n), filtered(n), merged(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = stages[i].raw;
    filtered[i] = stages[i].filtered;
    merged[i] = stages[i].merged;
  }
  write_stage(out_dir / "detections_raw.json", ids, raw);
  write_stage(out_dir / "detections_filtered.json", ids, filtered);
  write_stage(out_dir / "detections_merged.json", ids, merged);
  std::vector<std::pair<std::string, std::vector<Detection>>> ordered_pages;
  for (std::size_t i = 0; i < n; ++i) ordered_pages.emplace_back(ids[i], ordered[i]);
  write_text_file(out_dir / "detections_ordered.jsonl", ordered_jsonl(ordered_pages));

  std::vector<OcrResult> all_results;
  std::string texts;
  for (std::size_t i = 0; i < n; ++i) {
    all_results.insert(all_results.end(), results[i].begin(), results[i].end());
    const auto truth = truths.find(ids[i]);
    texts += json{{"page_id", ids[i]},
                  {"reference", truth != truths.end() ? truth->second.reading_text() : ""},
                  {"hypothesis", hypotheses[i]}}
                 .dump() +
             "\n";
  }
  write_text_file(out_dir / "ocr_results.jsonl", write_ocr_results_jsonl(all_results));
  write_text_file(out_dir / "page_texts.jsonl", texts);

  EvalReport report = aggregate(std::move(evals));
  report.parameters = o.describe();
  report.parameters.emplace_back("engine_id", o.full_page ? "full-page-mock" : engine->id());
  write_text_file(out_dir / "report.json", report_to_json(report));
  write_text_file(out_dir / "per_page.csv", per_page_csv(report));

  json params = json::object();
  for (const auto& [k, v] : report.parameters) params[k] = v;
  json seeds = json::object();
  for (const auto& id : ids) {
    seeds[id] = {{"oracle", derive_seed(o.seed, "oracle", id)},
                 {"full_page_ocr", derive_seed(o.seed, "full-page-ocr", id)}};
  }
  json manifest{{"parameters", params},
                {"dataset", (m.root / "manifest.jsonl").string()},
                {"pages", ids},
                {"derived_seeds", seeds},
                {"outputs",
                 {"detections_raw.json", "detections_filtered.json", "detections_merged.json",
                  "detections_ordered.jsonl", "ocr_results.jsonl", "page_texts.jsonl",
                  "report.json", "per_page.csv"}}};
  write_text_file(out_dir / "run_manifest.json", manifest.dump(2));
  return report;
}

std::string matrix_csv(const std::vector<double>& rows, const std::vector<double>& cols,
                       const std::vector<std::vector<double>>& values) {
  std::ostringstream os;
  os << "padding\\scale";
  for (double c : cols) os << ',' << c;
  os << '\n' << std::setprecision(6) << std::fixed;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    os << std::defaultfloat << rows[r] << std::fixed;
    for (double v : values[r]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

PageImage heatmap(const std::vector<std::vector<double>>& values, int cell) {
  if (values.empty() || values.front().empty()) throw std::invalid_argument("empty heatmap");
  double lo = values[0][0];
  double hi = values[0][0];
  for (const auto& row : values) {
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const int rows = static_cast<int>(values.size());
  const int cols = static_cast<int>(values.front().size());
  PageImage img(cols * cell, rows * cell);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double t = hi > lo ? (values[r][c] - lo) / (hi - lo) : 0.5;
      const auto gray = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t)));
      img.fill_rect(c * cell, r * cell, (c + 1) * cell, (r + 1) * cell, gray);
    }
  }
  return img;
}

SweepResult run_sweep(const DatasetManifest& m, const PipelineOptions& o,
                      const std::vector<double>& paddings, const std::vector<double>& scales,
                      const std::filesystem::path& out_dir) {
  if (paddings.empty() || scales.empty()) throw std::invalid_argument("sweep needs paddings and scales");
  std::filesystem::create_directories(out_dir);
  const auto detector = make_detector(o.detector, m, o.perturbation, o.rlsa, o.seed);
  const auto truths = load_truths(m);
  const auto engine = make_engine(o, truths, out_dir / "ocr_work");

  const std::size_t n = m.entries.size();
  std::vector<PageImage> images(n);
  std::vector<std::vector<Detection>> ordered(n);
  parallel_for(n, o.workers, [&](std::size_t i) {
    const auto& e = m.entries[i];
    images[i] = read_image(m.resolve(e.image_path));
    const auto merged = postprocess_page(detector->detect(images[i], e.page_id), o).merged;
    for (auto k : reading_order(merged, images[i].width())) ordered[i].push_back(merged[k]);
  });

  SweepResult r{paddings, scales, {}, {}};
  r.cer.assign(paddings.size(), std::vector<double>(scales.size(), 0.0));
  r.wer = r.cer;
  for (std::size_t p = 0; p < paddings.size(); ++p) {
    for (std::size_t s = 0; s < scales.size(); ++s) {
      std::vector<std::optional<std::pair<double, double>>> rates(n);
      parallel_for(n, o.workers, [&](std::size_t i) {
        const auto& id = m.entries[i].page_id;
        const auto truth = truths.find(id);
        if (truth == truths.end()) return;
        const auto snippets = extract_snippets(images[i], id, ordered[i], paddings[p], scales[s]);
        rates[i] = ocr_rates(truth->second.reading_text(), join_page_text(ocr(snippets, *engine, 1)));
      });
      double cer_sum = 0.0;
      double wer_sum = 0.0;
      std::size_t count = 0;
      for (const auto& x : rates) {
        if (!x) continue;
        cer_sum += x->first;
        wer_sum += x->second;
        ++count;
      }
      if (count == 0) throw std::invalid_argument("sweep needs pages with transcripts");
      r.cer[p][s] = cer_sum / static_cast<double>(count);
      r.wer[p][s] = wer_sum / static_cast<double>(count);
    }
  }
  write_text_file(out_dir / "cer_matrix.csv", matrix_csv(paddings, scales, r.cer));
  write_text_file(out_dir / "wer_matrix.csv", matrix_csv(paddings, scales, r.wer));
  write_image(out_dir / "cer_matrix.png", heatmap(r.cer));
  write_image(out_dir / "wer_matrix.png", heatmap(r.wer));
  json params = json::object();
  for (const auto& [k, v] : o.describe()) params[k] = v;
  params["engine_id"] = engine->id();
  write_text_file(out_dir / "run_manifest.json",
                  json{{"parameters", params}, {"paddings", paddings}, {"scales", scales}}.dump(2));
  return r;
}

Comparison compare_scenarios(const std::vector<Scenario>& scenarios) {
  if (scenarios.empty()) throw std::invalid_argument("report needs at least one scenario");
  auto page_set = [](const EvalReport& r) {
    std::set<std::string> ids;
    for (const auto& p : r.pages) ids.insert(p.page_id);
    return ids;
  };
  const auto reference = page_set(scenarios.front().report);
  Comparison c;
  for (const auto& s : scenarios) {
    if (page_set(s.report) != reference) {
      throw std::invalid_argument("scenario '" + s.name + "' covers a different page set");
    }
    if (!s.report.cer || !s.report.wer) {
      throw std::invalid_argument("scenario '" + s.name + "' has no OCR error rates");
    }
    c.rows.push_back({s.name, *s.report.cer, *s.report.wer});
  }
  for (std::size_t j = 1; j < c.rows.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      c.improvements.push_back({c.rows[i].name, c.rows[j].name,
                                improvement(c.rows[i].cer, c.rows[j].cer),
                                improvement(c.rows[i].wer, c.rows[j].wer)});
    }
  }
  return c;
}

std::string comparison_text(const Comparison& c) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "| scenario | CER | WER |\n|---|---|---|\n";
  for (const auto& r : c.rows) os << "| " << r.name << " | " << r.cer << " | " << r.wer << " |\n";
  if (!c.improvements.empty()) {
    os << std::setprecision(2);
    os << "\n| from | to | CER improvement % | WER improvement % |\n|---|---|---|---|\n";
    for (const auto& r : c.improvements) {
      os << "| " << r.from << " | " << r.to << " | " << r.cer_pct << " | " << r.wer_pct << " |\n";
    }
  }
  return os.str();
}

std::string comparison_csv(const Comparison& c) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "scenario,cer,wer\n";
  for (const auto& r : c.rows) os << r.name << ',' << r.cer << ',' << r.wer << '\n';
  if (!c.improvements.empty()) {
    os << "\nfrom,to,cer_improvement_pct,wer_improvement_pct\n";
    for (const auto& r : c.improvements) {
      os << r.from << ',' << r.to << ',' << r.cer_pct << ',' << r.wer_pct << '\n';
    }
  }
  return os.str();
}

}  // namespace schematik
