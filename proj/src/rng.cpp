#include "edpt/rng.hpp"

namespace edpt {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

}  // namespace

RngStream::RngStream(const SeedSpec& seed, std::uint32_t substream) {
  key_[0] = static_cast<std::uint32_t>(seed.master_seed);
  key_[1] = static_cast<std::uint32_t>(seed.master_seed >> 32);
  ctr_hi_[0] = static_cast<std::uint32_t>(seed.stream_id >> 32);
  ctr_hi_[1] = static_cast<std::uint32_t>(seed.stream_id);
  ctr_hi_[2] = substream;
}

void RngStream::refill() {
  std::uint32_t x0 = ctr_hi_[0];
  std::uint32_t x1 = ctr_hi_[1];
  std::uint32_t x2 = ctr_hi_[2];
  std::uint32_t x3 = block_;
  std::uint32_t k0 = key_[0];
  std::uint32_t k1 = key_[1];
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, x0, hi0, lo0);
    mulhilo(kPhiloxM1, x2, hi1, lo1);
    std::uint32_t y0 = hi1 ^ x1 ^ k0;
    std::uint32_t y1 = lo1;
    std::uint32_t y2 = hi0 ^ x3 ^ k1;
    std::uint32_t y3 = lo0;
    x0 = y0;
    x1 = y1;
    x2 = y2;
    x3 = y3;
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  buf_[0] = x0;
  buf_[1] = x1;
  buf_[2] = x2;
  buf_[3] = x3;
  ++block_;
  pos_ = 0;
}

std::uint32_t RngStream::next_u32() {
  if (pos_ == 4) refill();
  return buf_[pos_++];
}

std::uint64_t RngStream::next_u64() {
  std::uint64_t hi = next_u32();
  std::uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint32_t RngStream::uniform_below(std::uint32_t bound) {
  // Lemire's multiply-shift rejection method.
  std::uint32_t x = next_u32();
  std::uint64_t m = static_cast<std::uint64_t>(x) * bound;
  std::uint32_t lo = static_cast<std::uint32_t>(m);
  if (lo < bound) {
    std::uint32_t threshold = (0u - bound) % bound;
    while (lo < threshold) {
      x = next_u32();
      m = static_cast<std::uint64_t>(x) * bound;
      lo = static_cast<std::uint32_t>(m);
    }
  }
  return static_cast<std::uint32_t>(m >> 32);
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

}  // namespace edpt
