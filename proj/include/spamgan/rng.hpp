#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace spamgan {

/// One root seed, many independent named substreams. A stream depends only on
/// (root, name), so adding a consumer never shifts the draws of another.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t root) : root_(root) {}

  std::mt19937_64 stream(std::string_view name) const;
  std::uint64_t root() const { return root_; }

 private:
  std::uint64_t root_;
};

/// Stable 64-bit mix of a seed and a name (FNV-1a followed by splitmix64).
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

}  // namespace spamgan
