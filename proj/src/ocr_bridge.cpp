#include "schematik/ocr_bridge.hpp"

#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "schematik/parallel.hpp"
#include "schematik/utf8.hpp"

extern char** environ;

namespace schematik {

using nlohmann::json;

void CorruptionModel::validate() const {
  for (double r : {substitution, insertion, deletion}) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("corruption rates must be in [0,1]");
  }
}

const std::u32string& corruption_alphabet() {
  static const std::u32string alphabet =
      U"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789äöüß.,;:-";
  return alphabet;
}

std::string mock_ocr(const std::string& text, const CorruptionModel& m, Rng& rng) {
  m.validate();
  const auto& alphabet = corruption_alphabet();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::u32string out;
  for (char32_t c : utf8::decode(text)) {
    const double del = unit(rng);
    const double sub = unit(rng);
    const double ins = unit(rng);
    if (del >= m.deletion) {
      if (sub < m.substitution) {
        char32_t r = alphabet[pick(rng)];
        while (r == c) r = alphabet[pick(rng)];
        out.push_back(r);
      } else {
        out.push_back(c);
      }
    }
    if (ins < m.insertion) out.push_back(alphabet[pick(rng)]);
  }
  return utf8::encode(out);
}

std::string mock_ocr(const std::string& text, const CorruptionModel& m) {
  Rng rng(derive_seed(m.seed, "mock-ocr"));
  return mock_ocr(text, m, rng);
}

std::string full_page_mock(const PageTruth& truth, const CorruptionModel& m) {
  std::string plain;
  if (!m.scramble_full_pages) {
    plain = truth.reading_text();
  } else {
    std::vector<const TextLine*> lines;
    for (const auto& e : truth.elements) {
      for (const auto& l : e.lines) lines.push_back(&l);
    }
    std::stable_sort(lines.begin(), lines.end(), [](const TextLine* a, const TextLine* b) {
      return a->box.center_y() < b->box.center_y();
    });
    // Lines whose vertical centers fall within half a line height of a row's
    // first line share that row; rows read left to right.
    std::vector<std::vector<const TextLine*>> rows;
    for (const auto* l : lines) {
      if (!rows.empty()) {
        const auto* head = rows.back().front();
        if (l->box.center_y() - head->box.center_y() < 0.5 * head->box.height()) {
          rows.back().push_back(l);
          continue;
        }
      }
      rows.push_back({l});
    }
    for (auto& row : rows) {
      std::stable_sort(row.begin(), row.end(), [](const TextLine* a, const TextLine* b) {
        return a->box.x_min < b->box.x_min;
      });
      for (const auto* l : row) {
        if (l->text.empty()) continue;
        if (!plain.empty()) plain += ' ';
        plain += l->text;
      }
    }
  }
  Rng rng(derive_seed(m.seed, "full-page-ocr", truth.page_id));
  return mock_ocr(plain, m, rng);
}

// Mock engine ----------------------------------------------------------------

MockEngine::MockEngine(std::map<std::string, PageTruth> truths, CorruptionModel model)
    : truths_(std::move(truths)), model_(model) {
  model_.validate();
}

std::string MockEngine::id() const {
  std::ostringstream os;
  os << "mock(s=" << model_.substitution << ",i=" << model_.insertion << ",d=" << model_.deletion
     << ",seed=" << model_.seed << ")";
  return os.str();
}

std::string MockEngine::recognize(const Snippet& s) const {
  const auto it = truths_.find(s.page_id);
  if (it == truths_.end()) throw std::runtime_error("mock OCR: no transcript for " + s.page_id);
  const TruthElement* best = nullptr;
  double best_iou = 0.5;
  for (const auto& e : it->second.elements) {
    const double v = iou(e.box, s.source_box);
    if (v >= best_iou) {
      best_iou = v;
      best = &e;
    }
  }
  if (!best) return {};
  Rng rng(derive_seed(model_.seed, "mock-ocr", s.page_id, static_cast<std::uint64_t>(s.order_index)));
  return mock_ocr(best->text, model_, rng);
}

// External engine ------------------------------------------------------------

ExternalEngine::ExternalEngine(std::string command_template, std::string flags,
                               std::filesystem::path work_dir)
    : template_(std::move(command_template)), flags_(std::move(flags)),
      work_dir_(std::move(work_dir)) {
  if (template_.find("{input}") == std::string::npos ||
      template_.find("{output}") == std::string::npos) {
    throw std::invalid_argument("OCR command template needs {input} and {output}");
  }
  if (!flags_.empty() && template_.find("{flags}") == std::string::npos) {
    throw std::invalid_argument("OCR flags given but the template has no {flags}");
  }
}

ExternalEngine ExternalEngine::from_environment(std::string flags, std::filesystem::path work_dir) {
  const char* cmd = std::getenv(kOcrCommandEnv);
  if (!cmd || !*cmd) throw std::runtime_error(std::string(kOcrCommandEnv) + " is not set");
  return ExternalEngine(cmd, std::move(flags), std::move(work_dir));
}

std::string ExternalEngine::id() const { return "external(" + template_ + ")"; }

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

int run_shell(const std::string& command) {
  const char* argv[] = {"sh", "-c", command.c_str(), nullptr};
  pid_t pid = 0;
  if (posix_spawn(&pid, "/bin/sh", nullptr, nullptr, const_cast<char**>(argv), environ) != 0) {
    throw std::runtime_error("cannot launch OCR command");
  }
  int status = 0;
  if (waitpid(pid, &status, 0) < 0) throw std::runtime_error("waiting for OCR command failed");
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
}

}  // namespace

std::string ExternalEngine::recognize(const Snippet& s) const {
  const std::string stem = snippet_filename(s);
  const auto input = work_dir_ / stem;
  const auto output = work_dir_ / (stem.substr(0, stem.size() - 4) + ".txt");
  write_image(input, s.image);
  std::filesystem::remove(output);
  std::string cmd = template_;
  replace_all(cmd, "{input}", shell_quote(input.string()));
  replace_all(cmd, "{output}", shell_quote(output.string()));
  replace_all(cmd, "{flags}", flags_);
  const int code = run_shell(cmd);
  if (code != 0) throw std::runtime_error("OCR command exited with status " + std::to_string(code));
  if (!std::filesystem::exists(output)) throw std::runtime_error("OCR command wrote no output");
  std::string text = read_text_file(output);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == '\f')) {
    text.pop_back();
  }
  if (!utf8::is_valid(text)) throw std::runtime_error("OCR output is not valid UTF-8");
  return text;
}

// Driver ---------------------------------------------------------------------

std::vector<OcrResult> ocr(const std::vector<Snippet>& snippets, const OcrEngine& engine,
                           int workers) {
  std::vector<OcrResult> out(snippets.size());
  const std::string engine_id = engine.id();
  parallel_for(snippets.size(), workers, [&](std::size_t i) {
    const Snippet& s = snippets[i];
    OcrResult& r = out[i];
    r.page_id = s.page_id;
    r.order_index = s.order_index;
    r.label = s.label;
    r.engine_id = engine_id;
    if (s.label == LayoutClass::Curly) return;
    try {
      r.text = engine.recognize(s);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });
  return out;
}

std::string join_page_text(const std::vector<OcrResult>& results) {
  std::string out;
  for (const auto& r : results) {
    if (r.text.empty()) continue;
    if (!out.empty()) out += ' ';
    out += r.text;
  }
  return out;
}

std::string write_ocr_results_jsonl(const std::vector<OcrResult>& results) {
  std::string out;
  for (const auto& r : results) {
    json j{{"page_id", r.page_id},
           {"order_index", r.order_index},
           {"label", std::string(to_string(r.label))},
           {"text", r.text},
           {"engine_id", r.engine_id}};
    if (!r.error.empty()) j["error"] = r.error;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<OcrResult> read_ocr_results_jsonl(const std::string& text) {
  std::vector<OcrResult> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      OcrResult r;
      r.page_id = j.at("page_id").get<std::string>();
      r.order_index = j.at("order_index").get<int>();
      r.label = layout_class_from_string(j.at("label").get<std::string>());
      r.text = j.at("text").get<std::string>();
      r.engine_id = j.value("engine_id", "");
      r.error = j.value("error", "");
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw FormatError("OCR results line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace schematik
