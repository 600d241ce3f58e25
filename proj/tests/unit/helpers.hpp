#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ckpl/random.hpp"
#include "ckpl/synthetic.hpp"
#include "ckpl/tensor.hpp"
#include "ckpl/two_stage.hpp"

namespace ckpl::test {

inline Tensor randn(Rng& rng, Shape shape, bool grad = true, double stddev = 1.0) {
  return rng.gaussian(std::move(shape), stddev, grad);
}

inline std::vector<double> to_vec(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Small task so training tests stay quick.
inline SyntheticTaskSpec tiny_spec(std::uint64_t seed, std::size_t per_class = 12) {
  SyntheticTaskSpec spec;
  spec.seed = seed;
  spec.samples_per_class = per_class;
  return spec;
}

inline AdaptationTask tiny_task(std::uint64_t seed, std::size_t per_class = 12) {
  return prepare_task(generate_task(tiny_spec(seed, per_class)));
}

inline TrainConfig quick_config(std::uint64_t seed, std::size_t epochs = 3) {
  TrainConfig c;
  c.seed = seed;
  c.epochs = epochs;
  c.batch_size = 8;
  return c;
}

}  // namespace ckpl::test
