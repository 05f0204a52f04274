#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace sqlctx {

/// Seeded generator with platform-independent draws. std::mt19937_64 output is
/// fixed by the standard; the distributions are not, so bounded draws and
/// shuffles are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Independent child seed for a named sub-stream (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sqlctx
