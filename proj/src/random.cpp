#include "schematik/random.hpp"

namespace schematik {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view stage,
                          std::string_view page_id, std::uint64_t extra) {
  std::uint64_t h = mix64(base);
  h = mix64(h ^ hash_string(stage));
  h = mix64(h ^ hash_string(page_id));
  return mix64(h ^ extra);
}

}  // namespace schematik
