#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace awapd {

// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Order-sensitive hash of a sequence of words, used to derive independent
// stream keys such as hash(master_seed, class, run_id, edge, pulse).
constexpr std::uint64_t hash_words(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t w : words) h = mix64(h ^ mix64(w + 0x632BE59BD9B4E019ULL));
  return h;
}

// Counter-based generator: output k is mix64(key + k * golden). Streams with
// different keys are independent and any draw is reproducible from (key, k)
// alone, so results do not depend on scheduling order.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    return mix64(key_ + 0x9E3779B97F4A7C15ULL * (counter_++) + 0xD1B54A32D192ED03ULL);
  }

  // Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  constexpr std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace awapd
