#include "ckpl/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string_view>

#include "ckpl/corrective_knowledge.hpp"
#include "ckpl/errors.hpp"
#include "ckpl/random.hpp"

namespace ckpl {

namespace {

constexpr std::array<std::string_view, 12> kClassNames = {
    "rose", "tulip", "daisy", "orchid", "lily", "iris",
    "poppy", "lotus", "peony", "violet", "aster", "dahlia"};

std::string class_name(std::size_t c) {
  if (c < kClassNames.size()) return std::string(kClassNames[c]);
  return "class_" + std::to_string(c);
}

}  // namespace

void SyntheticTaskSpec::validate() const {
  if (num_classes < 2) throw ValidationError("a task needs at least two classes");
  if (samples_per_class < 2) throw ValidationError("samples_per_class must be at least 2");
  if (num_patches == 0 || embed_dim == 0) throw ValidationError("patch grid must be non-empty");
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(hard_tail_fraction) || !unit(label_noise)) {
    throw ValidationError("hard_tail_fraction and label_noise must lie in [0, 1]");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("test_fraction must lie in (0, 1)");
  }
  if (cluster_spread < 0.0 || signature_scale < 0.0) {
    throw ValidationError("cluster_spread and signature_scale must be nonnegative");
  }
  if (hard_shift_min > hard_shift_max || hard_shift_min < 0.0 || hard_shift_max > 1.0) {
    throw ValidationError("hard shift range must satisfy 0 <= min <= max <= 1");
  }
  encoder_config().validate();
}

VisionEncoderConfig SyntheticTaskSpec::encoder_config() const {
  return {num_layers, embed_dim, num_patches, num_heads, mix_seed(seed, stable_hash("vit"))};
}

SyntheticTask generate_task(const SyntheticTaskSpec& spec) {
  spec.validate();
  const std::size_t c_count = spec.num_classes;
  const std::size_t e = spec.num_patches, d = spec.embed_dim, n = e * d;
  Rng rng(mix_seed(spec.seed, stable_hash("synthetic.task")));

  std::vector<std::vector<double>> means(c_count, std::vector<double>(n));
  std::vector<std::vector<double>> signatures(c_count, std::vector<double>(n));
  for (auto& m : means)
    for (auto& v : m) v = rng.normal();
  for (auto& s : signatures)
    for (auto& v : s) v = rng.normal(0.0, spec.signature_scale);

  SyntheticTask task;
  task.spec = spec;
  for (std::size_t c = 0; c < c_count; ++c) task.class_names.push_back(class_name(c));

  const auto hard_per_class = static_cast<std::size_t>(
      std::lround(spec.hard_tail_fraction * static_cast<double>(spec.samples_per_class)));
  const auto test_per_class = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(spec.test_fraction * spec.samples_per_class)));
  if (test_per_class >= spec.samples_per_class) {
    throw ValidationError("test split leaves no training samples");
  }

  std::vector<std::size_t> confusers(c_count);
  for (std::size_t c = 0; c < c_count; ++c) confusers[c] = (c + 1 + rng.index(c_count - 1)) % c_count;

  for (std::size_t c = 0; c < c_count; ++c) {
    std::vector<SyntheticSample> generated;
    for (std::size_t k = 0; k < spec.samples_per_class; ++k) {
      const bool hard = k < hard_per_class;
      std::vector<double> x(n);
      std::size_t confuser = c;
      double t = 0.0;
      if (hard) {
        confuser = confusers[c];
        t = rng.uniform(spec.hard_shift_min, spec.hard_shift_max);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double appearance = means[c][i] + t * (means[confuser][i] - means[c][i]);
        x[i] = appearance + signatures[c][i] + rng.normal(0.0, spec.cluster_spread);
      }
      std::size_t label = c;
      if (spec.label_noise > 0.0 && rng.uniform() < spec.label_noise) {
        label = (c + 1 + rng.index(c_count - 1)) % c_count;
      }
      generated.push_back({Tensor::matrix(e, d, std::move(x)), label, hard});
    }
    std::vector<std::size_t> order(generated.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t k = 0; k < order.size(); ++k) {
      auto& dst = k < test_per_class ? task.test : task.train;
      dst.push_back(std::move(generated[order[k]]));
    }
  }
  return task;
}

AdaptationTask prepare_task(const SyntheticTask& task) {
  AdaptationTask out;
  out.base = std::make_shared<const BaseLearner>(task.spec.encoder_config());
  out.class_names = task.class_names;
  out.prompt_template = default_photo_template();
  out.encoder = std::make_shared<const KnowledgeEncoder>(
      task.spec.embed_dim, task.class_names.size(), std::vector<PromptTemplate>{out.prompt_template},
      mix_seed(task.spec.seed, stable_hash("knowledge")));
  auto prepare = [&](const std::vector<SyntheticSample>& src, std::vector<PreparedSample>& dst) {
    dst.reserve(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst.push_back({i, src[i].patches, encode_image(*out.base, src[i].patches).cls, src[i].label});
    }
  };
  prepare(task.train, out.train);
  prepare(task.test, out.test);
  return out;
}

double base_error(const AdaptationTask& task) {
  const auto view = base_view(task);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < task.test.size(); ++i) {
    wrong += view.test_predictions[i] != task.test[i].label;
  }
  return task.test.empty() ? 0.0 : static_cast<double>(wrong) / task.test.size();
}

}  // namespace ckpl
