#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace schedlab {

using Rng = std::mt19937_64;

/// Fans one master seed out into named, independent sub-streams
/// ("channel", "arrivals", "init", "exploration", "sampling", ...), so that
/// toggling one component never shifts the random numbers of another.
class SeedTree {
 public:
  explicit SeedTree(std::uint64_t master) : master_(master) {}

  std::uint64_t master() const { return master_; }

  Rng stream(std::string_view name, std::uint64_t index = 0) const;

  /// Derived tree, e.g. one per evaluation episode.
  SeedTree child(std::string_view name, std::uint64_t index = 0) const;

 private:
  std::uint64_t derive(std::string_view name, std::uint64_t index) const;

  std::uint64_t master_;
};

}  // namespace schedlab
