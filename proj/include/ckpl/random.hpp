#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "ckpl/tensor.hpp"

namespace ckpl {

// splitmix64 finalizer; used to derive independent sub-stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
// FNV-1a over the bytes of `text`, stable across platforms and runs.
std::uint64_t stable_hash(std::string_view text);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

  Tensor gaussian(Shape shape, double stddev, bool requires_grad = false);

 private:
  std::mt19937_64 engine_;
};

}  // namespace ckpl
