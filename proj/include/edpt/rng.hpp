#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace edpt {

// Identifies one random stream: (master_seed, stream_id) -> stream is an
// injective, stateless map. Substreams subdivide a stream further so that
// e.g. each permutation inside a replicate owns independent draws.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;
};

// Counter-based random stream (Philox4x32-10). The key is the master seed
// and the 128-bit counter is laid out as
//   [stream_id (64) | substream (32) | block index (32)],
// so streams and substreams never overlap and any (seed, stream, substream,
// position) is reachable without sequential generation. Each substream
// yields 2^34 32-bit words.
class RngStream {
 public:
  RngStream() : RngStream(SeedSpec{}, 0) {}
  explicit RngStream(const SeedSpec& seed, std::uint32_t substream = 0);
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id,
            std::uint32_t substream = 0)
      : RngStream(SeedSpec{master_seed, stream_id}, substream) {}

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  // Uniform on the open interval (0, 1); safe to feed to quantile functions.
  double uniform_open();
  // Uniform integer in [0, bound); bound >= 1. Unbiased (rejection method).
  std::uint32_t uniform_below(std::uint32_t bound);
  bool bernoulli(double p);

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = uniform_below(static_cast<std::uint32_t>(i));
      T tmp = values[i - 1];
      values[i - 1] = values[j];
      values[j] = tmp;
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& values) {
    shuffle(std::span<T>(values));
  }

 private:
  void refill();

  std::uint32_t key_[2];
  std::uint32_t ctr_hi_[3];  // stream hi, stream lo, substream
  std::uint32_t block_ = 0;
  std::uint32_t buf_[4];
  int pos_ = 4;
};

}  // namespace edpt
