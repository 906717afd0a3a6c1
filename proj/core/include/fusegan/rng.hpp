#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "fusegan/tensor.hpp"

namespace fusegan {

/// Seeded random stream: mt19937_64 plus an explicit Box-Muller normal
/// sampler so the full state (including the cached spare) serializes and
/// resumes bit-exactly.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be positive.
  int64_t uniform_int(int64_t n);

  /// Standard normal via Box-Muller.
  double normal();

  void fill_normal(Tensor& t, float mean = 0.0f, float stddev = 1.0f);
  void fill_uniform(Tensor& t, float lo, float hi);

  /// Fisher-Yates shuffle of [0, n).
  std::vector<int64_t> permutation(int64_t n);

  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fusegan
