#ifndef DHN_RNG_HPP
#define DHN_RNG_HPP

#include <cstdint>

namespace dhn::prob {

// Seedable, splittable random stream built on the splitmix64 mixer.
//
// A stream is identified by an immutable 64-bit key; draws advance a counter
// and hash (key, counter), so identical keys always produce identical
// sequences regardless of what other streams did. derive() forms a child key
// from the parent key plus up to three tags, which is how training assigns
// one independent stream per (epoch, batch, row, head) without any draw-order
// coupling between them.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(mix(seed ^ kKeyTweak)) {}

  RngStream derive(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    std::uint64_t k = key_;
    k = mix(k ^ mix(a + 0x9e3779b97f4a7c15ULL));
    k = mix(k ^ mix(b + 0x6a09e667f3bcc909ULL));
    k = mix(k ^ mix(c + 0xbb67ae8584caa73bULL));
    RngStream child(0);
    child.key_ = k;
    child.counter_ = 0;
    child.has_spare_ = false;
    return child;
  }

  std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Uniform on (0, 1]; never returns 0 so log(uniform()) is always finite.
  double uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second draw of each pair is cached.
  double normal();

  // Exact Poisson draw. Large rates are split into chunks of rate <= 30 and
  // summed (Poisson additivity), so no approximation is involved.
  long long poisson(double lambda);

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t kKeyTweak = 0x8f462907353e2af2ULL;

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dhn::prob

#endif
