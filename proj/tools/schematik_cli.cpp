#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "schematik/augment.hpp"
#include "schematik/parallel.hpp"
#include "schematik/pipeline.hpp"
#include "schematik/synthgen.hpp"

namespace fs = std::filesystem;
using namespace schematik;

namespace {

DatasetManifest load_pages(const fs::path& p) {
  return load_manifest(fs::is_directory(p) ? p / "manifest.jsonl" : p);
}

void add_detector_options(CLI::App& cmd, PipelineOptions& o) {
  cmd.add_option("--detector", o.detector, "oracle, rlsa or external:FILE")->capture_default_str();
  cmd.add_option("--jitter", o.perturbation.jitter_sigma, "oracle box jitter stddev in px");
  cmd.add_option("--flip", o.perturbation.label_flip_prob, "oracle label flip probability");
  cmd.add_option("--conf-correct", o.perturbation.confidence_correct);
  cmd.add_option("--conf-flipped", o.perturbation.confidence_flipped);
  cmd.add_option("--conf-spread", o.perturbation.confidence_spread);
  cmd.add_option("--rlsa-h1", o.rlsa.horizontal_threshold_1, "first horizontal run length, 0 = derived");
  cmd.add_option("--rlsa-v", o.rlsa.vertical_threshold, "vertical run length, 0 = derived");
  cmd.add_option("--rlsa-h2", o.rlsa.horizontal_threshold_2, "second horizontal run length, 0 = derived");
  cmd.add_option("--seed", o.seed)->capture_default_str();
  cmd.add_option("--workers", o.workers)->check(CLI::PositiveNumber)->capture_default_str();
}

void add_ocr_options(CLI::App& cmd, PipelineOptions& o) {
  cmd.add_option("--confidence", o.confidence_threshold)->capture_default_str();
  cmd.add_option("--merge-iou", o.merge_iou)->capture_default_str();
  cmd.add_option("--engine", o.engine, "mock or external")->capture_default_str();
  cmd.add_option("--sub", o.corruption.substitution, "mock substitution rate");
  cmd.add_option("--ins", o.corruption.insertion, "mock insertion rate");
  cmd.add_option("--del", o.corruption.deletion, "mock deletion rate");
  cmd.add_flag("--scramble", o.corruption.scramble_full_pages,
               "full-page mock reads lines row-major across columns");
  cmd.add_option("--ocr-cmd", o.ocr_command, "command template, defaults to $SCHEMATIK_OCR_CMD");
  cmd.add_option("--ocr-flags", o.ocr_flags, "substituted for {flags}");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic layout data, segmentation and OCR evaluation"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "render a synthetic annotated dataset");
  int n_pages = 0;
  std::string gen_config;
  fs::path gen_out;
  std::uint64_t gen_seed = 0;
  bool gen_seed_set = false;
  double split = -1.0;
  DatasetOptions gen_opts;
  gen->add_option("-n", n_pages, "number of pages")->required()->check(CLI::PositiveNumber);
  gen->add_option("--config", gen_config, "SynthConfig JSON")->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out)->required();
  auto* seed_opt = gen->add_option("--seed", gen_seed);
  gen->add_option("--split", split, "train fraction for a stratified train/val split")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_flag("--pgm", gen_opts.write_pgm, "write PGM instead of PNG");
  gen->add_option("--prefix", gen_opts.page_prefix)->capture_default_str();
  gen->add_option("--workers", gen_opts.workers)->check(CLI::PositiveNumber);

  // detect
  auto* det = app.add_subcommand("detect", "run a detector over a dataset");
  fs::path det_pages, det_out;
  PipelineOptions det_opts;
  det->add_option("pages", det_pages, "dataset directory or manifest")->required();
  det->add_option("--out", det_out, "interchange JSON, stdout when omitted");
  add_detector_options(*det, det_opts);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "detect, post-process, snip, OCR and evaluate");
  fs::path pipe_pages, pipe_out;
  PipelineOptions pipe_opts;
  pipe->add_option("pages", pipe_pages, "dataset directory or manifest")->required();
  pipe->add_option("--out", pipe_out)->required();
  pipe->add_option("--padding", pipe_opts.padding)->capture_default_str();
  pipe->add_option("--scale", pipe_opts.scale)->capture_default_str();
  pipe->add_flag("--full-page", pipe_opts.full_page, "OCR whole pages with the mock instead of snippets");
  pipe->add_flag("--export-snippets", pipe_opts.export_snippets);
  add_detector_options(*pipe, pipe_opts);
  add_ocr_options(*pipe, pipe_opts);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "CER/WER over a padding x scale grid");
  fs::path sweep_pages, sweep_out;
  PipelineOptions sweep_opts;
  std::vector<double> paddings, scales;
  sweep->add_option("pages", sweep_pages, "dataset directory or manifest")->required();
  sweep->add_option("--out", sweep_out)->required();
  sweep->add_option("--paddings", paddings)->required()->delimiter(',');
  sweep->add_option("--scales", scales)->required()->delimiter(',');
  add_detector_options(*sweep, sweep_opts);
  add_ocr_options(*sweep, sweep_opts);

  // report
  auto* rep = app.add_subcommand("report", "compare scenario reports");
  std::vector<std::string> rep_inputs;
  fs::path rep_csv;
  rep->add_option("reports", rep_inputs, "report.json files or run directories, optionally NAME=PATH")
      ->required();
  rep->add_option("--csv", rep_csv, "also write the comparison as CSV");

  // augment
  auto* aug = app.add_subcommand("augment", "write an augmented copy of a dataset");
  fs::path aug_pages, aug_out;
  std::string aug_params_path;
  std::uint64_t aug_seed = 0;
  int aug_workers = 1;
  aug->add_option("pages", aug_pages, "dataset directory or manifest")->required();
  aug->add_option("--out", aug_out)->required();
  aug->add_option("--params", aug_params_path, "AugmentParams JSON")->check(CLI::ExistingFile);
  auto* aug_seed_opt = aug->add_option("--seed", aug_seed);
  aug->add_option("--workers", aug_workers)->check(CLI::PositiveNumber);

  // validate
  auto* val = app.add_subcommand("validate", "check a manifest or detection interchange file");
  fs::path val_path;
  val->add_option("path", val_path)->required()->check(CLI::ExistingPath);

  CLI11_PARSE(app, argc, argv);
  gen_seed_set = seed_opt->count() > 0;

  try {
    if (gen->parsed()) {
      SynthConfig cfg;
      if (!gen_config.empty()) cfg = synth_config_from_json(read_text_file(gen_config));
      if (gen_seed_set) cfg.seed = gen_seed;
      DatasetManifest m = generate_dataset(cfg, n_pages, gen_out, gen_opts);
      if (split >= 0.0) {
        m = stratified_split(m, split, cfg.seed);
        save_manifest(gen_out / "manifest.jsonl", m);
      }
      write_text_file(gen_out / "config.json", synth_config_to_json(cfg));
      std::cout << "wrote " << m.entries.size() << " pages to " << gen_out.string() << "\n";
    } else if (det->parsed()) {
      const DatasetManifest m = load_pages(det_pages);
      const auto detector =
          make_detector(det_opts.detector, m, det_opts.perturbation, det_opts.rlsa, det_opts.seed);
      const std::string json = write_detections_json(detect_all(m, *detector, det_opts.workers));
      if (det_out.empty()) {
        std::cout << json << "\n";
      } else {
        write_text_file(det_out, json);
      }
    } else if (pipe->parsed()) {
      const EvalReport r = run_pipeline(load_pages(pipe_pages), pipe_opts, pipe_out);
      std::cout << "pages " << r.pages.size() << "  accuracy " << r.accuracy << "  f1 " << r.f1
                << "  bbox " << r.bbox_accuracy;
      if (r.cer) std::cout << "  cer " << *r.cer << "  wer " << *r.wer;
      std::cout << "\n";
    } else if (sweep->parsed()) {
      const SweepResult r = run_sweep(load_pages(sweep_pages), sweep_opts, paddings, scales, sweep_out);
      std::cout << "CER\n" << matrix_csv(r.paddings, r.scales, r.cer) << "WER\n"
                << matrix_csv(r.paddings, r.scales, r.wer);
    } else if (rep->parsed()) {
      std::vector<Scenario> scenarios;
      for (const auto& in : rep_inputs) {
        std::string name;
        fs::path path = in;
        if (const auto eq = in.find('='); eq != std::string::npos) {
          name = in.substr(0, eq);
          path = in.substr(eq + 1);
        }
        if (fs::is_directory(path)) path /= "report.json";
        if (name.empty()) {
          name = path.filename() == "report.json" ? path.parent_path().filename().string()
                                                  : path.stem().string();
        }
        scenarios.push_back({name, report_from_json(read_text_file(path))});
      }
      const Comparison c = compare_scenarios(scenarios);
      std::cout << comparison_text(c);
      if (!rep_csv.empty()) write_text_file(rep_csv, comparison_csv(c));
    } else if (aug->parsed()) {
      AugmentParams params;
      if (!aug_params_path.empty()) params = augment_params_from_json(read_text_file(aug_params_path));
      if (aug_seed_opt->count() > 0) params.seed = aug_seed;
      params.validate();
      const DatasetManifest in = load_pages(aug_pages);
      DatasetManifest out;
      out.root = aug_out;
      out.entries.resize(in.entries.size());
      fs::create_directories(aug_out / "images");
      fs::create_directories(aug_out / "annotations");
      parallel_for(in.entries.size(), aug_workers, [&](std::size_t i) {
        const auto& e = in.entries[i];
        const auto r = augment(read_image(in.resolve(e.image_path)),
                               load_voc(in.resolve(e.annotation_path)), params);
        ManifestEntry o;
        o.page_id = e.page_id;
        o.split = e.split;
        o.image_path = "images/" + e.page_id + fs::path(e.image_path).extension().string();
        o.annotation_path = "annotations/" + e.page_id + ".xml";
        o.class_histogram = class_histogram(r.annotation);
        write_image(aug_out / o.image_path, r.image);
        save_voc(aug_out / o.annotation_path, r.annotation);
        out.entries[i] = std::move(o);
      });
      save_manifest(aug_out / "manifest.jsonl", out);
      write_text_file(aug_out / "augment_params.json", augment_params_to_json(params));
      std::cout << "augmented " << out.entries.size() << " pages\n";
    } else if (val->parsed()) {
      const bool manifest = fs::is_directory(val_path) || val_path.extension() == ".jsonl";
      if (manifest) {
        validate_manifest(load_pages(val_path));
        std::cout << "manifest ok\n";
      } else {
        const auto problems = validate_detections_json(read_text_file(val_path));
        for (const auto& p : problems) std::cerr << p << "\n";
        if (!problems.empty()) return 1;
        std::cout << "detections ok\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
