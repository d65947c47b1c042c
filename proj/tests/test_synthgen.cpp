#include <algorithm>
#include <cctype>

#include "doctest.h"
#include "schematik/synthgen.hpp"
#include "support.hpp"

using namespace schematik;

namespace {

SynthConfig only(LayoutClass c, int columns = 3) {
  SynthConfig cfg;
  cfg.column_count = columns;
  for (auto k : kAllLayoutClasses) cfg.weights.set(k, 0.0);
  cfg.weights.set(c, 1.0);
  return cfg;
}

std::string tree_digest(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) {
    all += std::filesystem::relative(f, dir).string() + "\n";
    const auto bytes = read_file_bytes(f);
    all.append(bytes.begin(), bytes.end());
  }
  return all;
}

}  // namespace

TEST_CASE("sample text shapes") {
  const auto pools = default_text_pools();
  const auto symbols = default_symbol_map();
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto para = sample_text(pools, symbols, LayoutClass::Paragraph, rng);
    REQUIRE(!para.empty());
    CHECK(para.front().style == FontStyle::Bold);
    CHECK(para.back().text.back() == '.');

    const auto entry = sample_text(pools, symbols, LayoutClass::NameEntry, rng);
    const auto refs = std::count_if(entry.begin(), entry.end(), [](const TextRun& r) {
      return r.right_aligned && !r.text.empty() &&
             std::all_of(r.text.begin(), r.text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == ',' || c == ' '; });
    });
    CHECK(refs >= 1);
  }
}

TEST_CASE("symbol map must be injective") {
  CHECK_THROWS_AS(SymbolMap({{"cross", 0xE000}, {"star", 0xE000}}), std::invalid_argument);
  const auto m = default_symbol_map();
  CHECK(m.code_points().size() == m.mapping().size());
}

TEST_CASE("config validation and JSON") {
  SynthConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.column_count = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.size_h2 = cfg.size_h1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SynthConfig{};
  for (auto k : kAllLayoutClasses) cfg.weights.set(k, 0.0);
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = SynthConfig{};
  cfg.column_count = 2;
  cfg.seed = 42;
  cfg.weights.curly = 0.0;
  const auto back = synth_config_from_json(synth_config_to_json(cfg));
  CHECK(back.column_count == 2);
  CHECK(back.seed == 42);
  CHECK(back.weights.curly == 0.0);
  CHECK(back.weights.paragraph == cfg.weights.paragraph);
  CHECK_THROWS(synth_config_from_json("{\"column_count\": \"three\"}"));
}

TEST_CASE("generation is deterministic") {
  SynthConfig cfg;
  cfg.seed = 21;
  const auto a = generate_page(cfg, "d");
  const auto b = generate_page(cfg, "d");
  CHECK(a.image == b.image);
  CHECK(a.annotation == b.annotation);
  cfg.seed = 22;
  CHECK_FALSE(generate_page(cfg, "d").annotation == a.annotation);
}

TEST_CASE("three-column geometry") {
  SynthConfig cfg;
  cfg.seed = 7;
  const auto page = generate_page(cfg, "g");
  validate_annotation(page.annotation);
  CHECK(containment_violations(page.annotation).empty());
  for (const auto& e : page.annotation.elements) {
    if (e.label == LayoutClass::H1) CHECK(e.box.width() > 0.8 * cfg.text_width());
    if (e.label == LayoutClass::Paragraph) CHECK(e.box.width() < cfg.column_width() + 4);
  }
}

TEST_CASE("H1-only pages stack full-width headings") {
  auto cfg = only(LayoutClass::H1);
  cfg.seed = 3;
  const auto page = generate_page(cfg, "h1");
  REQUIRE(page.annotation.elements.size() >= 3);
  double last_bottom = 0;
  for (const auto& e : page.annotation.elements) {
    CHECK(e.label == LayoutClass::H1);
    CHECK(e.box.width() > 0.8 * cfg.text_width());
    CHECK(e.box.y_min >= last_bottom);
    last_bottom = e.box.y_max;
  }
}

TEST_CASE("truth lines and ink agree with the boxes") {
  SynthConfig cfg;
  cfg.seed = 31;
  const auto page = generate_page(cfg, "t");
  REQUIRE(page.truth.elements.size() == page.annotation.elements.size());
  const int w = page.image.width();
  for (int y = 0; y < page.image.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      const auto owner = page.ink_owner[static_cast<std::size_t>(y) * w + x];
      CHECK((owner == 0) == (page.image.at(x, y) == 255));
      if (owner) {
        const auto& b = page.annotation.elements[owner - 1].box;
        CHECK(b.contains(make_box(x, y, x + 1, y + 1)));
      }
    }
  }
  for (const auto& e : page.truth.elements) {
    if (e.parent >= 0) CHECK(page.truth.elements[e.parent].box.contains(e.box));
    if (e.label == LayoutClass::Curly) {
      CHECK(e.text.empty());
      continue;
    }
    for (const auto& l : e.lines) CHECK(e.box.contains(l.box));
  }
  const auto back = read_truth_json(write_truth_json(page.truth));
  CHECK(back.reading_text() == page.truth.reading_text());
  CHECK(back.annotation() == page.annotation);
}

TEST_CASE("datasets") {
  SynthConfig cfg;
  cfg.seed = 1;
  const auto one = testing::scratch_dir("ds_one");
  const auto m = generate_dataset(cfg, 1, one);
  REQUIRE(m.entries.size() == 1);
  CHECK(std::filesystem::exists(one / m.entries[0].image_path));
  CHECK(std::filesystem::exists(one / "manifest.jsonl"));
  validate_manifest(load_manifest(one / "manifest.jsonl"));
  CHECK(load_truths(m).size() == 1);
  CHECK_THROWS_AS(generate_dataset(cfg, 0, one), std::invalid_argument);

  const auto a = testing::scratch_dir("ds_a");
  const auto b = testing::scratch_dir("ds_b");
  DatasetOptions serial;
  DatasetOptions pooled;
  pooled.workers = 4;
  generate_dataset(cfg, 50, a, serial);
  generate_dataset(cfg, 50, b, pooled);
  CHECK(tree_digest(a) == tree_digest(b));
}

TEST_CASE("class shares follow the weights") {
  SynthConfig cfg;
  std::array<double, kLayoutClassCount> counts{};
  double total = 0;
  for (std::uint64_t s = 0; s < 40; ++s) {
    cfg.seed = 500 + s;
    const auto page = generate_page(cfg);
    // Curly members and keywords are drawn inside their group.
    for (const auto& e : page.truth.elements) {
      if (e.parent >= 0) continue;
      counts[class_index(e.label)] += 1;
      total += 1;
    }
  }
  double wsum = 0;
  for (auto c : kAllLayoutClasses) wsum += cfg.weights.weight(c);
  for (auto c : kAllLayoutClasses) {
    const double share = counts[class_index(c)] / total;
    const double expected = cfg.weights.weight(c) / wsum;
    CHECK_MESSAGE(std::abs(share - expected) < 0.3 * expected + 0.01, to_string(c));
  }
}
