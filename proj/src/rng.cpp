#include "schedlab/rng.hpp"

namespace schedlab {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t SeedTree::derive(std::string_view name, std::uint64_t index) const {
  return mix(mix(master_ ^ fnv1a(name)) + mix(index + 0x632be59bd9b4e019ULL));
}

Rng SeedTree::stream(std::string_view name, std::uint64_t index) const {
  const std::uint64_t d = derive(name, index);
  std::seed_seq seq{static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d >> 32),
                    static_cast<std::uint32_t>(master_), static_cast<std::uint32_t>(master_ >> 32)};
  return Rng(seq);
}

SeedTree SeedTree::child(std::string_view name, std::uint64_t index) const {
  return SeedTree(derive(name, index));
}

}  // namespace schedlab
