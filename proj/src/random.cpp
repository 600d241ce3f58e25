#include "ckpl/random.hpp"

namespace ckpl {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Tensor Rng::gaussian(Shape shape, double stddev, bool requires_grad) {
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = normal(0.0, stddev);
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

}  // namespace ckpl
