#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ckpl/corrective_knowledge.hpp"
#include "ckpl/curriculum.hpp"
#include "ckpl/encoders.hpp"
#include "ckpl/params.hpp"
#include "ckpl/selection.hpp"

namespace ckpl {

struct TrainConfig {
  double lambda = 0.2;
  double tau = kDefaultTau;
  std::size_t prompt_length = kDefaultPromptLength;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr_initial = 0.003;
  double lr_final = 0.0001;
  double lr_initial_hard_stage = 0.0005;
  std::uint64_t seed = 0;
  // Blocks receiving the aggregated prompt; unset means every block.
  std::optional<std::set<std::size_t>> inject_depth;
  // Scale of the centroid-initialized classifier rows.
  double classifier_init_scale = 10.0;

  void validate() const;
  PromptDepth depth(std::size_t num_layers) const;
};

// Linear head over c'_L.
struct Classifier {
  Tensor weight;  // [C, d]
  Tensor bias;    // [C]

  Tensor logits(const Tensor& feature) const;
  std::size_t num_classes() const { return bias.size(); }
};

// Linear form of the Euclidean nearest-centroid rule over `centroids`, with
// logits scaled so the mean centered-centroid norm maps to `scale`.
Classifier classifier_from_centroids(const ClassCentroids& centroids, double scale);

// A sample with its frozen plain-forward feature c_L cached.
struct PreparedSample {
  std::size_t id = 0;
  Tensor image;         // [E, d]
  Tensor base_feature;  // c_L
  std::size_t label = 0;
};

std::vector<Tensor> base_features(std::span<const PreparedSample> samples);
std::vector<std::size_t> labels_of(std::span<const PreparedSample> samples);

// Everything the two-pass forward produces for one sample.
struct ForwardResult {
  Tensor m_hat;
  MatchDistribution dist;
  AggregatedPrompt prompt;
  Tensor feature;  // c'_L
  Tensor logits;
};

// The adapted model: frozen base learner plus the trainable White Box state.
class IotaModel {
 public:
  IotaModel(std::shared_ptr<const BaseLearner> base, KnowledgePromptSet prompts, MatchHead head,
            Classifier classifier, PromptDepth depth, double tau);

  const BaseLearner& base() const { return *base_; }
  std::shared_ptr<const BaseLearner> base_ptr() const { return base_; }
  const KnowledgePromptSet& prompts() const { return prompts_; }
  const MatchHead& head() const { return head_; }
  const NCLSToken& ncls() const { return ncls_; }
  NCLSToken& ncls() { return ncls_; }
  const Classifier& classifier() const { return classifier_; }
  Classifier& classifier() { return classifier_; }
  const PromptDepth& depth() const { return depth_; }
  double tau() const { return tau_; }

  // Pass 1 consumes the cached c_L, pass 2 the prompted forward.
  ForwardResult forward(const Tensor& base_feature, const Tensor& image) const;
  ForwardResult forward(const PreparedSample& sample) const;
  std::size_t predict(const PreparedSample& sample) const;
  // c'_L without building a gradient graph's consumers (values only).
  Tensor infer_feature(const PreparedSample& sample) const;

  ParameterList trainable_parameters() const;
  ParameterList frozen_parameters() const;
  // Deep copy of the trainable state; the frozen base learner is shared.
  IotaModel clone() const;

 private:
  std::shared_ptr<const BaseLearner> base_;
  KnowledgePromptSet prompts_;
  MatchHead head_;
  NCLSToken ncls_;
  Classifier classifier_;
  PromptDepth depth_;
  double tau_;
};

// Builds the initial model: prompt set from the knowledge encoder, seeded
// MATCH head and prompts, NCLS = c_0, classifier from `centroids`.
IotaModel create_model(std::shared_ptr<const BaseLearner> base, const KnowledgeEncoder& encoder,
                       std::span<const std::string> class_names, const PromptTemplate& tmpl,
                       const ClassCentroids& centroids, const TrainConfig& config);

// Re-seeds the classifier from class centroids of the model's own prompted
// features c'_L over `samples`, so training starts from the nearest-centroid
// rule in the space the classifier actually reads.
void init_classifier_from_features(IotaModel& model, std::span<const PreparedSample> samples,
                                   double scale);

struct LossTerms {
  Tensor total;
  Tensor cls;
  Tensor ckg;
};

// L = CE(logits, label) + lambda * L_ckg(dist, A, B); A, B are entry indices.
LossTerms total_loss(const Tensor& logits, std::size_t label, const MatchDistribution& dist,
                     std::size_t true_entry, std::size_t wrong_entry, double lambda);

// Batch-mean loss of the full objective; the graph reaches every trainable.
LossTerms batch_objective(const IotaModel& model, std::span<const PreparedSample> batch,
                          const TripletIndex& triplets, double lambda,
                          std::vector<std::size_t>* predictions = nullptr);

struct StepLosses {
  double total = 0.0;
  double cls = 0.0;
  double ckg = 0.0;
};

// One SGD step (no momentum, no weight decay) on the batch-mean objective.
// Frozen parameters are never touched. Throws LookupError if a sample has no
// triplet.
StepLosses train_step(IotaModel& model, std::span<const PreparedSample> batch,
                      const TripletIndex& triplets, const TrainConfig& config, double lr,
                      std::vector<std::size_t>* predictions = nullptr);

// lr_final + (lr_initial - lr_final) (1 + cos(pi step / total)) / 2;
// total_steps == 0 returns lr_initial.
double cosine_lr(std::size_t step, std::size_t total_steps, double lr_initial, double lr_final);

struct Metrics {
  double accuracy = 0.0;
  double loss_cls = 0.0;
  double loss_ckg = 0.0;
  std::optional<double> correction_rate;  // absent when the base learner made no error
  std::size_t wrong_subset_size = 0;
  std::vector<double> per_class_accuracy;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

// Accuracy, and accuracy on the samples where base_predictions != labels.
Metrics metrics_from_predictions(std::span<const std::size_t> labels,
                                 std::span<const std::size_t> predictions,
                                 std::span<const std::size_t> base_predictions,
                                 std::size_t num_classes);

struct Evaluation {
  Metrics metrics;
  std::vector<std::size_t> predictions;
};

// Evaluates on `samples`; base_predictions come from predict_base on the
// same frozen base learner and also define the triplets for loss_ckg.
Evaluation evaluate(const IotaModel& model, std::span<const PreparedSample> samples,
                    std::span<const std::size_t> base_predictions, double lambda);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_cls = 0.0;
  double loss_ckg = 0.0;
  double accuracy = 0.0;
  std::optional<double> correction_rate;
};

// Runs config.epochs epochs of shuffled mini-batch SGD with a cosine
// schedule from lr_initial to lr_final over all steps. The per-epoch log
// reports running means over the epoch's training batches.
std::vector<EpochLog> train(IotaModel& model, std::span<const PreparedSample> samples,
                            const TripletIndex& triplets, const TrainConfig& config,
                            double lr_initial, double lr_final,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

// Gradient norm reaching the MATCH head from each loss term separately.
struct GradientPathNorms {
  double head_from_cls = 0.0;
  double head_from_ckg = 0.0;
};
GradientPathNorms head_gradient_paths(const IotaModel& model, std::span<const PreparedSample> batch,
                                      const TripletIndex& triplets, double lambda);

}  // namespace ckpl
