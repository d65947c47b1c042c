#include <algorithm>
#include <set>
#include <stdexcept>

#include "schematik/synthgen.hpp"
#include "schematik/utf8.hpp"

namespace schematik {

SymbolMap::SymbolMap(std::map<std::string, char32_t> mapping) : mapping_(std::move(mapping)) {
  std::set<char32_t> targets;
  for (const auto& [name, cp] : mapping_) {
    if (name.empty()) throw std::invalid_argument("symbol with empty identifier");
    if (!targets.insert(cp).second) {
      throw std::invalid_argument("symbol map is not injective at '" + name + "'");
    }
  }
}

std::u32string SymbolMap::code_points() const {
  std::u32string out;
  for (const auto& [name, cp] : mapping_) out.push_back(cp);
  return out;
}

// Placeholder inventory of decoration marks; the private-use targets are
// rendered by the procedural atlas.
SymbolMap default_symbol_map() {
  return SymbolMap({
      {"golden_fleece", 0xE000},
      {"st_stephen", 0xE001},
      {"leopold", 0xE002},
      {"iron_crown", 0xE003},
      {"franz_joseph", 0xE004},
      {"elisabeth", 0xE005},
      {"military_merit", 0xE006},
      {"civil_merit", 0xE007},
      {"war_decoration", 0xE008},
      {"jubilee_medal", 0xE009},
      {"red_cross", 0xE00A},
      {"swords", 0xE00B},
  });
}

void TextPools::validate() const {
  auto check = [](const std::vector<std::string>& pool, const char* name) {
    if (pool.empty()) throw std::invalid_argument(std::string("text pool '") + name + "' is empty");
    for (const auto& s : pool) {
      if (s.empty()) throw std::invalid_argument(std::string("empty string in pool '") + name + "'");
    }
  };
  check(surnames, "surnames");
  check(forenames, "forenames");
  check(abbreviations, "abbreviations");
  check(order_names, "order_names");
  check(municipality_names, "municipality_names");
  if (year_min > year_max) throw std::invalid_argument("empty year range");
}

std::u32string TextPools::code_points() const {
  std::set<char32_t> cps;
  for (const auto* pool : {&surnames, &forenames, &abbreviations, &order_names, &municipality_names}) {
    for (const auto& s : *pool) {
      for (char32_t c : utf8::decode(s)) cps.insert(c);
    }
  }
  return std::u32string(cps.begin(), cps.end());
}

TextPools default_text_pools() {
  TextPools p;
  p.surnames = {
      "Auersperg", "Bauer", "Berger", "Brunner", "Csáky", "Dietrichstein", "Eder", "Egger",
      "Esterházy", "Fischer", "Fuchs", "Gruber", "Haas", "Hafner", "Hofer", "Huber",
      "Hoyos", "Jäger", "Kaiser", "Kinsky", "Koller", "Kraus", "Lang", "Lechner",
      "Leitner", "Lobkowitz", "Mayer", "Moser", "Müller", "Nagy", "Neumann", "Pichler",
      "Pallavicini", "Reiter", "Riedl", "Schmid", "Schneider", "Schwarz", "Schwarzenberg", "Steiner",
      "Stadler", "Szapáry", "Thun", "Trauttmansdorff", "Unger", "Vogel", "Wagner", "Weber",
      "Wimmer", "Windischgrätz", "Winkler", "Wolf", "Zichy", "Zimmermann", "Baumgartner", "Brandstätter",
      "Fellner", "Grünwald", "Hartmann", "Hauser", "Keller", "Köhler", "Landolt", "Meier",
      "Merian", "Ott", "Pfister", "Rüegg", "Sulzer", "Tobler", "Bodmer", "Escher",
      "Horváth", "Kovács", "Tóth", "Szabó", "Varga", "Kiss", "Molnár", "Németh",
  };
  p.forenames = {
      "Adolf", "Albert", "Alois", "Anton", "August", "Carl", "Eduard", "Emil",
      "Ernst", "Ferdinand", "Franz", "Friedrich", "Georg", "Gustav", "Heinrich", "Hermann",
      "Ignaz", "Johann", "Josef", "Julius", "Karl", "Leopold", "Ludwig", "Maximilian",
      "Moritz", "Otto", "Paul", "Richard", "Rudolf", "Stefan", "Theodor", "Viktor",
      "Wilhelm", "Béla", "Géza", "Lajos", "Ödön", "Zoltán", "Konrad", "Ulrich",
  };
  p.abbreviations = {
      "k. k. Kämmerer", "Geheimer Rat", "Truchseß", "Kaiserlicher Rat",
      "Doktor der Rechte", "Doktor der gesamten Heilkunde", "Doktor der Philosophie",
      "Ritter des Ordens der Eisernen Krone dritter Klasse",
      "Komturkreuz des Franz Joseph-Ordens mit dem Stern",
      "Offizierskreuz des Franz Joseph-Ordens",
      "Ritterkreuz des Leopold-Ordens",
      "Besitzer des goldenen Verdienstkreuzes mit der Krone",
      "Inhaber des Militär-Verdienstkreuzes mit der Kriegsdekoration",
      "Besitzer der Kriegsmedaille", "Besitzer der Jubiläums-Erinnerungsmedaille",
      "Mitglied des Herrenhauses", "Mitglied des Abgeordnetenhauses",
      "Ehrenbürger der Stadt", "Ehrenritter des souveränen Malteser-Ritter-Ordens",
      "Hofrat", "Regierungsrat", "Sektionschef", "Ministerialrat", "Oberbaurat",
      "Oberlandesgerichtsrat", "Landesgerichtsrat", "Bezirkshauptmann", "Statthaltereirat",
      "Finanzrat", "Rechnungsrat", "Oberkommissär", "Konzipist", "Offizial",
      "Kanzlist", "Professor an der Universität", "Reserve-Offizier",
      "Landtagsabgeordneter", "Gemeinderat", "Notar", "Advokat",
      "emeritierter Dekan der Fakultät", "Großkreuz des Elisabeth-Ordens",
  };
  p.order_names = {
      "Orden vom Goldenen Vlies", "Militär-Maria-Theresien-Orden",
      "Königlich Ungarischer Sankt Stephans-Orden", "Österreichisch-kaiserlicher Leopold-Orden",
      "Orden der Eisernen Krone", "Franz Joseph-Orden", "Elisabeth-Orden",
      "Sternkreuz-Orden", "Ehrenzeichen für Kunst und Wissenschaft",
      "Militär-Verdienstkreuz", "Goldenes Verdienstkreuz mit der Krone",
      "Ehrenzeichen vom Roten Kreuze", "Kriegsmedaille", "Jubiläums-Erinnerungsmedaille",
      "Militär-Verdienstmedaille", "Elisabeth-Theresien-Militär-Stiftung",
  };
  p.municipality_names = {
      "Wien", "Graz", "Linz", "Salzburg", "Innsbruck", "Klagenfurt", "Bregenz",
      "Eisenstadt", "Sankt Pölten", "Baden", "Wels", "Steyr", "Leoben", "Villach",
      "Krems", "Wiener Neustadt", "Bruck an der Mur", "Feldkirch", "Kufstein", "Hallein",
      "Amstetten", "Mödling", "Gmunden", "Bad Ischl", "Judenburg", "Lienz", "Zwettl",
      "Melk", "Tulln", "Braunau", "Ried", "Schärding", "Kitzbühel", "Dornbirn",
      "Pressburg", "Ödenburg", "Troppau", "Brünn", "Olmütz", "Laibach", "Triest",
      "Görz", "Czernowitz", "Lemberg", "Krakau", "Prag", "Pilsen", "Budweis",
  };
  p.year_min = 1848;
  p.year_max = 1918;
  return p;
}

double ClassWeights::weight(LayoutClass c) const {
  switch (c) {
    case LayoutClass::Paragraph: return paragraph;
    case LayoutClass::BigParagraph: return big_paragraph;
    case LayoutClass::H1: return h1;
    case LayoutClass::H2: return h2;
    case LayoutClass::H3: return h3;
    case LayoutClass::H4: return h4;
    case LayoutClass::NameEntry: return name_entry;
    case LayoutClass::Curly: return curly;
  }
  return 0.0;
}

void ClassWeights::set(LayoutClass c, double w) {
  switch (c) {
    case LayoutClass::Paragraph: paragraph = w; break;
    case LayoutClass::BigParagraph: big_paragraph = w; break;
    case LayoutClass::H1: h1 = w; break;
    case LayoutClass::H2: h2 = w; break;
    case LayoutClass::H3: h3 = w; break;
    case LayoutClass::H4: h4 = w; break;
    case LayoutClass::NameEntry: name_entry = w; break;
    case LayoutClass::Curly: curly = w; break;
  }
}

namespace {

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

// Short municipality names only, so a keyword leaves room beside a brace.
std::string short_municipality(const TextPools& pools, Rng& rng) {
  for (int attempt = 0; attempt < 16; ++attempt) {
    const auto& m = pick(pools.municipality_names, rng);
    if (utf8::decode(m).size() <= 9) return m;
  }
  return pick(pools.municipality_names, rng);
}

}  // namespace

std::vector<TextRun> sample_text(const TextPools& pools, const SymbolMap& symbols,
                                 LayoutClass kind, Rng& rng) {
  std::vector<TextRun> runs;
  switch (kind) {
    case LayoutClass::Paragraph:
    case LayoutClass::BigParagraph: {
      std::string bold = pick(pools.surnames, rng);
      if (chance(rng, 0.25)) bold += " " + pick(pools.surnames, rng);
      runs.push_back({bold, FontStyle::Bold});
      std::string rest;
      if (chance(rng, 0.85)) rest = pick(pools.forenames, rng) + ",";
      const int fragments = uniform(rng, 1, 6);
      for (int i = 0; i < fragments; ++i) {
        if (!rest.empty()) rest += " ";
        rest += pick(pools.abbreviations, rng);
        if (!symbols.mapping().empty() && chance(rng, 0.2)) {
          auto it = symbols.mapping().begin();
          std::advance(it, uniform(rng, 0, static_cast<int>(symbols.mapping().size()) - 1));
          rest += " " + utf8::encode(it->second);
        }
        if (i + 1 < fragments) rest += ",";
      }
      if (rest.back() != '.') rest += ".";
      runs.push_back({rest, FontStyle::Regular});
      break;
    }
    case LayoutClass::H1:
      runs.push_back({pick(pools.order_names, rng), FontStyle::Bold});
      break;
    case LayoutClass::H2: {
      const int year = uniform(rng, pools.year_min, pools.year_max);
      const int form = uniform(rng, 0, 2);
      if (form == 0) {
        runs.push_back({std::to_string(year), FontStyle::Regular});
      } else if (form == 1) {
        runs.push_back({pick(pools.municipality_names, rng), FontStyle::Regular});
      } else {
        runs.push_back({pick(pools.municipality_names, rng) + " " + std::to_string(year),
                        FontStyle::Regular});
      }
      break;
    }
    case LayoutClass::H3:
    case LayoutClass::Curly:
      runs.push_back({short_municipality(pools, rng), FontStyle::Regular});
      break;
    case LayoutClass::H4:
      runs.push_back({"(" + pick(pools.municipality_names, rng) + ")", FontStyle::Italic});
      break;
    case LayoutClass::NameEntry: {
      // A leading rule stands in for a repeated surname.
      if (chance(rng, 0.2)) {
        runs.push_back({"—", FontStyle::Regular});
      } else {
        runs.push_back({pick(pools.surnames, rng), FontStyle::Bold});
      }
      runs.push_back({pick(pools.forenames, rng), FontStyle::Regular});
      const int refs = uniform(rng, 1, 3);
      std::string numbers;
      for (int i = 0; i < refs; ++i) {
        if (i > 0) numbers += ", ";
        numbers += std::to_string(uniform(rng, 1, 1200));
      }
      runs.push_back({numbers, FontStyle::Regular, true});
      break;
    }
  }
  return runs;
}

std::string runs_to_text(const std::vector<TextRun>& runs) {
  std::string out;
  for (const auto& r : runs) {
    for (const auto& w : utf8::split_words(r.text)) {
      if (!out.empty()) out += ' ';
      out += w;
    }
  }
  return out;
}

}  // namespace schematik
