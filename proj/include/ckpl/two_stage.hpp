#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ckpl/curriculum.hpp"
#include "ckpl/encoders.hpp"
#include "ckpl/prompt.hpp"
#include "ckpl/training.hpp"

namespace ckpl {

// A downstream task ready for adaptation: frozen encoders plus samples with
// cached plain-forward features. Train sample ids are their positions.
struct AdaptationTask {
  std::shared_ptr<const BaseLearner> base;
  std::shared_ptr<const KnowledgeEncoder> encoder;
  std::vector<std::string> class_names;
  PromptTemplate prompt_template = default_photo_template();
  std::vector<PreparedSample> train;
  std::vector<PreparedSample> test;

  std::size_t num_classes() const { return class_names.size(); }
};

// The frozen base learner's view of a task: centroids over the whole
// training pool and nearest-centroid predictions for both splits.
struct BaseView {
  ClassCentroids centroids;
  std::vector<std::size_t> train_predictions;
  std::vector<std::size_t> test_predictions;
};
BaseView base_view(const AdaptationTask& task);

// create_model plus a classifier seeded from prompted features over the
// whole training pool.
IotaModel create_task_model(const AdaptationTask& task, const BaseView& view,
                            const TrainConfig& config);

std::vector<PreparedSample> gather(std::span<const PreparedSample> samples,
                                   std::span<const std::size_t> ids);

using EpochCallback = std::function<void(const std::string& stage, const EpochLog&)>;

struct StageOutcome {
  std::vector<CorrectiveTriplet> triplets;
  std::vector<EpochLog> log;
  Evaluation test;
};

// Trains `model` on the given train ids, with triplets (label, B) where B is
// taken from `stage_predictions` (indexed by train id), then evaluates on
// the test split against the frozen base learner's test predictions.
StageOutcome train_stage(IotaModel& model, const AdaptationTask& task,
                         std::span<const std::size_t> train_ids,
                         std::span<const std::size_t> stage_predictions,
                         std::span<const std::size_t> base_test_predictions,
                         const TrainConfig& config, double lr_initial, double lr_final,
                         const std::string& stage_name, const EpochCallback& on_epoch = {});

struct SingleStageResult {
  IotaModel model;
  StageOutcome outcome;
};

// Fresh model trained on `train_ids` with triplets from the frozen base
// learner. Few-shot runs and the easy stage both go through here.
SingleStageResult run_single_stage(const AdaptationTask& task, const BaseView& view,
                                   const TrainConfig& config,
                                   std::span<const std::size_t> train_ids,
                                   const std::string& stage_name,
                                   const EpochCallback& on_epoch = {});

struct TwoStageOptions {
  // Skip stage-1 samples when picking the hard set.
  bool exclude_easy_from_hard = true;
};

struct TwoStageResult {
  Metrics metrics_e;
  Metrics metrics_h;
  CurriculumSplit split;
  std::vector<std::string> warnings;
  std::vector<EpochLog> log_e;
  std::vector<EpochLog> log_h;
  std::vector<std::size_t> test_predictions_e;
  std::vector<std::size_t> test_predictions_h;
  std::vector<std::size_t> base_test_predictions;
  std::vector<CorrectiveTriplet> triplets_e;
  std::vector<CorrectiveTriplet> triplets_h;
  std::optional<IotaModel> model_e;
  std::optional<IotaModel> model_h;
};

// Easy stage: rank by the frozen features, train on the N easiest per class.
// Hard stage: the easy-stage model becomes the base learner; its features,
// centroids and predictions rank and label the N hardest per class, and
// training continues from its parameters at lr_initial_hard_stage.
// Throws ParameterError for n == 0.
TwoStageResult run_two_stage(const AdaptationTask& task, const TrainConfig& config, std::size_t n,
                             const TwoStageOptions& options = {},
                             const EpochCallback& on_epoch = {});

}  // namespace ckpl
