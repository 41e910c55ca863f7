#pragma once

#include <cstdint>
#include <initializer_list>

namespace qfldp {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based stream: the value depends only on (seed, words), so any
// entry can be regenerated without replaying a sequence.
inline std::uint64_t hash_words(std::uint64_t seed,
                                std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = splitmix64(seed);
  for (auto w : words) h = splitmix64(h ^ w);
  return h;
}

// uniform on [0,1) with 53 random bits
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline std::uint64_t sample_seed(std::uint64_t base, std::uint64_t index) {
  return base ^ index;
}

// Small sequential generator for tests and random instance construction.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() { return splitmix64(state_++ * 0x2545f4914f6cdd1dULL); }
  double uniform() { return to_unit(next()); }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::uint64_t state_;
};

}  // namespace qfldp
