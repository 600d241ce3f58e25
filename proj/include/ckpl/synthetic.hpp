#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ckpl/encoders.hpp"
#include "ckpl/prompt.hpp"
#include "ckpl/tensor.hpp"
#include "ckpl/two_stage.hpp"

namespace ckpl {

// Pre-patchified Gaussian-mixture classification task.
//
// Every class has an appearance mean and a weaker class signature, both
// [E, d]. A core sample is mean + signature + noise. A hard-tail sample is
// pulled a fraction t in [hard_shift_min, hard_shift_max] of the way towards
// its class's confuser (one fixed confuser per class) while keeping its own
// signature. The tail is a coherent second mode: a nearest-centroid rule on
// the frozen features misreads it but a trained classifier can carve it out.
struct SyntheticTaskSpec {
  std::size_t num_classes = 4;
  std::size_t samples_per_class = 100;  // generated per class, before the train/test split
  std::size_t num_patches = 4;
  std::size_t embed_dim = 16;
  std::size_t num_layers = 2;
  std::size_t num_heads = 2;
  double cluster_spread = 0.3;
  double signature_scale = 0.3;
  double hard_tail_fraction = 0.5;
  double hard_shift_min = 0.8;
  double hard_shift_max = 1.0;
  double label_noise = 0.0;
  double test_fraction = 0.3;
  std::uint64_t seed = 1;

  // Throws ValidationError for infeasible settings.
  void validate() const;
  VisionEncoderConfig encoder_config() const;
};

struct SyntheticSample {
  Tensor patches;  // [E, d]
  std::size_t label = 0;
  bool hard_tail = false;
};

struct SyntheticTask {
  SyntheticTaskSpec spec;
  std::vector<std::string> class_names;
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> test;
};

// Deterministic for a fixed spec; the split is stratified per class.
SyntheticTask generate_task(const SyntheticTaskSpec& spec);

// Builds the frozen encoders for the task and caches every sample's c_L.
AdaptationTask prepare_task(const SyntheticTask& task);

// Fraction of test samples the frozen nearest-centroid base learner gets wrong.
double base_error(const AdaptationTask& task);

}  // namespace ckpl
