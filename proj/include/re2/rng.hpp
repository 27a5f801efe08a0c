#pragma once

#include <cstdint>
#include <initializer_list>

namespace re2 {

// Counter-based random stream. Every draw is a pure function of (key, counter),
// so streams keyed by (master seed, query, prefix, continuation) produce the
// same values no matter which worker consumes them or in what order streams
// are created. The mixer is the splitmix64 finalizer over key + n*golden.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() {
    std::uint64_t z = key_ + (++counter_) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection-free modulo is fine here: n is tiny
  // (vocab sizes, branch counts) so the bias is < 2^-50.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Derives a stream key from a path of indices under a master seed. Distinct
// paths give statistically independent streams.
inline std::uint64_t stream_key(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = master ^ 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : path) {
    h ^= p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
  }
  return h;
}

inline RngStream make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return RngStream(stream_key(master, path));
}

// Fixed tags that keep unrelated sub-streams of one experiment apart.
namespace stream_tag {
inline constexpr std::uint64_t kWorldGen = 0x01;
inline constexpr std::uint64_t kPrefix = 0x02;
inline constexpr std::uint64_t kContinuation = 0x03;
inline constexpr std::uint64_t kBatchSelect = 0x04;
inline constexpr std::uint64_t kEval = 0x05;
inline constexpr std::uint64_t kEstimator = 0x06;
}  // namespace stream_tag

}  // namespace re2
