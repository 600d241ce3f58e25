#include "ckpl/two_stage.hpp"

#include <algorithm>
#include <set>

#include "ckpl/errors.hpp"

namespace ckpl {

BaseView base_view(const AdaptationTask& task) {
  auto features = base_features(task.train);
  auto labels = labels_of(task.train);
  auto centroids = class_centroids(features, labels, task.num_classes());
  auto train_preds = predict_base(features, centroids);
  auto test_preds = predict_base(base_features(task.test), centroids);
  return {std::move(centroids), std::move(train_preds), std::move(test_preds)};
}

IotaModel create_task_model(const AdaptationTask& task, const BaseView& view,
                            const TrainConfig& config) {
  auto model = create_model(task.base, *task.encoder, task.class_names, task.prompt_template,
                            view.centroids, config);
  init_classifier_from_features(model, task.train, config.classifier_init_scale);
  return model;
}

std::vector<PreparedSample> gather(std::span<const PreparedSample> samples,
                                   std::span<const std::size_t> ids) {
  std::vector<PreparedSample> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    if (id >= samples.size()) throw LookupError("no sample with id " + std::to_string(id));
    out.push_back(samples[id]);
  }
  return out;
}

StageOutcome train_stage(IotaModel& model, const AdaptationTask& task,
                         std::span<const std::size_t> train_ids,
                         std::span<const std::size_t> stage_predictions,
                         std::span<const std::size_t> base_test_predictions,
                         const TrainConfig& config, double lr_initial, double lr_final,
                         const std::string& stage_name, const EpochCallback& on_epoch) {
  if (stage_predictions.size() != task.train.size()) {
    throw DimensionError("stage predictions must cover the whole training pool");
  }
  auto samples = gather(task.train, train_ids);
  std::vector<CorrectiveTriplet> triplets;
  for (auto id : train_ids) triplets.push_back({id, task.train[id].label, stage_predictions[id]});
  auto index = index_triplets(triplets);
  StageOutcome out;
  out.triplets = triplets;
  out.log = train(model, samples, index, config, lr_initial, lr_final,
                  [&](const EpochLog& log) {
                    if (on_epoch) on_epoch(stage_name, log);
                  });
  out.test = evaluate(model, task.test, base_test_predictions, config.lambda);
  return out;
}

SingleStageResult run_single_stage(const AdaptationTask& task, const BaseView& view,
                                   const TrainConfig& config,
                                   std::span<const std::size_t> train_ids,
                                   const std::string& stage_name, const EpochCallback& on_epoch) {
  SingleStageResult r{create_task_model(task, view, config), {}};
  r.outcome = train_stage(r.model, task, train_ids, view.train_predictions, view.test_predictions,
                          config, config.lr_initial, config.lr_final, stage_name, on_epoch);
  return r;
}

TwoStageResult run_two_stage(const AdaptationTask& task, const TrainConfig& config, std::size_t n,
                             const TwoStageOptions& options, const EpochCallback& on_epoch) {
  if (n == 0) throw ParameterError("samples per stage must be at least 1");
  config.validate();
  TwoStageResult result;
  const auto view = base_view(task);
  const auto labels = labels_of(task.train);
  const auto frozen_features = base_features(task.train);
  result.base_test_predictions = view.test_predictions;

  // Stage 1: the frozen base learner ranks the pool.
  auto easy = select_easy(frozen_features, labels, view.centroids, n);
  result.warnings.insert(result.warnings.end(), easy.warnings.begin(), easy.warnings.end());
  const auto scores_e = difficulty_scores(frozen_features, labels, view.centroids);
  auto easy_ids = easy.flatten();

  auto single = run_single_stage(task, view, config, easy_ids, "easy", on_epoch);
  IotaModel& model_e = single.model;
  auto& stage_e = single.outcome;
  result.triplets_e = stage_e.triplets;
  result.metrics_e = stage_e.test.metrics;
  result.test_predictions_e = stage_e.test.predictions;
  result.log_e = std::move(stage_e.log);

  // Stage 2: the adapted model is the updated base learner.
  std::vector<Tensor> adapted_features;
  std::vector<std::size_t> adapted_predictions;
  adapted_features.reserve(task.train.size());
  for (const auto& s : task.train) {
    auto r = model_e.forward(s);
    adapted_features.push_back(r.feature.detach());
    auto lv = r.logits.values();
    adapted_predictions.push_back(
        static_cast<std::size_t>(std::max_element(lv.begin(), lv.end()) - lv.begin()));
  }
  auto adapted_centroids = class_centroids(adapted_features, labels, task.num_classes());
  std::set<std::size_t> exclude;
  if (options.exclude_easy_from_hard) exclude.insert(easy_ids.begin(), easy_ids.end());
  auto hard = select_hard(adapted_features, labels, adapted_centroids, n, exclude);
  result.warnings.insert(result.warnings.end(), hard.warnings.begin(), hard.warnings.end());
  const auto scores_h = difficulty_scores(adapted_features, labels, adapted_centroids);
  auto hard_ids = hard.flatten();

  IotaModel model_h = model_e.clone();
  auto stage_h = train_stage(model_h, task, hard_ids, adapted_predictions, view.test_predictions,
                             config, config.lr_initial_hard_stage, config.lr_final, "hard",
                             on_epoch);
  result.metrics_h = stage_h.test.metrics;
  result.test_predictions_h = stage_h.test.predictions;
  result.log_h = std::move(stage_h.log);
  result.triplets_h = std::move(stage_h.triplets);
  result.model_e = std::move(model_e);
  result.model_h = std::move(model_h);

  result.split.easy_ids = easy.per_class;
  result.split.hard_ids = hard.per_class;
  std::set<std::size_t> hard_set(hard_ids.begin(), hard_ids.end());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    result.split.scores[i] = hard_set.count(i) ? scores_h[i] : scores_e[i];
  }
  return result;
}

}  // namespace ckpl
