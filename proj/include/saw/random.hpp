#ifndef SAW_RANDOM_HPP
#define SAW_RANDOM_HPP

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace saw {

/// SplitMix64 finalizer. Used to derive independent seeds from a master seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based seed derivation: the result depends only on (seed, tag, indices).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                    std::initializer_list<std::uint64_t> indices = {}) noexcept {
  std::uint64_t s = mix64(seed ^ mix64(hash_tag(tag)));
  for (std::uint64_t i : indices) s = mix64(s ^ mix64(i + 0x632be59bd9b4e019ULL));
  return s;
}

/// Explicit random source. Every stochastic operation in the library takes one of
/// these by reference; there is no global generator.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

  /// Independent child stream keyed by (this stream's seed, tag, indices).
  [[nodiscard]] RandomStream substream(std::string_view tag,
                                       std::initializer_list<std::uint64_t> indices = {}) const {
    return RandomStream(derive_seed(seed_, tag, indices));
  }

  double normal() { return normal_(engine_); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace saw

#endif  // SAW_RANDOM_HPP
