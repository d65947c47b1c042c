#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "schematik/random.hpp"
#include "schematik/snippets.hpp"
#include "schematik/synthgen.hpp"

namespace schematik {

struct CorruptionModel {
  double substitution = 0.0;
  double insertion = 0.0;
  double deletion = 0.0;
  bool scramble_full_pages = false;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument unless every rate is in [0,1].
  void validate() const;
};

/// Characters used for substitutions and insertions.
const std::u32string& corruption_alphabet();

/// Per character: delete with p_d, otherwise substitute with p_s by a
/// different alphabet character; then insert a random character with p_i.
std::string mock_ocr(const std::string& text, const CorruptionModel& m, Rng& rng);
/// Same, seeded from the model alone.
std::string mock_ocr(const std::string& text, const CorruptionModel& m);

/// Simulated full-page OCR: text lines in row-major order across columns
/// when `scramble_full_pages` is set, reading order otherwise, then
/// character corruption.
std::string full_page_mock(const PageTruth& truth, const CorruptionModel& m);

struct OcrResult {
  std::string page_id;
  int order_index = 0;
  LayoutClass label = LayoutClass::Paragraph;
  std::string text;
  std::string engine_id;
  /// Empty on success.
  std::string error;
};

class OcrEngine {
 public:
  virtual ~OcrEngine() = default;
  virtual std::string id() const = 0;
  /// Throws on failure; safe for concurrent calls.
  virtual std::string recognize(const Snippet& s) const = 0;
};

/// Returns the transcript of the ground-truth element best overlapping the
/// snippet (IoU >= 0.5), corrupted per snippet with a seed derived from
/// (model.seed, page_id, order_index).
class MockEngine : public OcrEngine {
 public:
  MockEngine(std::map<std::string, PageTruth> truths, CorruptionModel model);
  std::string id() const override;
  std::string recognize(const Snippet& s) const override;

 private:
  std::map<std::string, PageTruth> truths_;
  CorruptionModel model_;
};

/// Runs a shell command template per snippet. `{input}` is replaced by the
/// snippet PNG path, `{output}` by the text file the engine must write and
/// `{flags}` by the pass-through flags.
class ExternalEngine : public OcrEngine {
 public:
  ExternalEngine(std::string command_template, std::string flags,
                 std::filesystem::path work_dir);
  /// Template from SCHEMATIK_OCR_CMD; throws when the variable is unset.
  static ExternalEngine from_environment(std::string flags, std::filesystem::path work_dir);

  std::string id() const override;
  std::string recognize(const Snippet& s) const override;
  const std::string& command_template() const { return template_; }
  const std::string& flags() const { return flags_; }

 private:
  std::string template_;
  std::string flags_;
  std::filesystem::path work_dir_;
};

inline constexpr const char* kOcrCommandEnv = "SCHEMATIK_OCR_CMD";

/// One result per snippet in input order. Curly snippets hold no text of
/// their own and are not sent to the engine. Engine failures are recorded
/// per snippet.
std::vector<OcrResult> ocr(const std::vector<Snippet>& snippets, const OcrEngine& engine,
                           int workers = 1);

/// Non-empty texts joined by single spaces.
std::string join_page_text(const std::vector<OcrResult>& results);

std::string write_ocr_results_jsonl(const std::vector<OcrResult>& results);
std::vector<OcrResult> read_ocr_results_jsonl(const std::string& text);

}  // namespace schematik
