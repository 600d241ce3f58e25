#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ckpl/grad_check.hpp"
#include "ckpl/synthetic.hpp"
#include "ckpl/training.hpp"
#include "ckpl/two_stage.hpp"

namespace ckpl {

inline constexpr std::string_view kConfigHeader = "CKPL-CONFIG-v1";

enum class Mode { kFewshot, kEasyToHard };
std::string_view mode_name(Mode mode);
Mode parse_mode(std::string_view text);

struct ExperimentConfig {
  SyntheticTaskSpec task;
  TrainConfig train = desk_train_config();
  Mode mode = Mode::kFewshot;
  std::size_t shots = 16;  // per class; per stage in e2h mode
  bool exclude_easy_from_hard = true;
  // Ablation sweeps; each list is nonempty when present.
  std::optional<std::vector<double>> sweep_lambda;
  std::optional<std::vector<std::size_t>> sweep_prompt_length;
  std::optional<std::vector<std::string>> sweep_depth;  // depth specs, e.g. "1", "1-2"
  std::string output_dir = "runs/default";

  // Throws ValidationError.
  void validate() const;

  // Schedule for the toy encoder. The TrainConfig defaults (batch 32, 0.003
  // then 0.0005) barely move a 16-wide random ViT in 100 steps; this uses
  // batch 8 and keeps the 6:1 ratio at 0.05 and 0.0083.
  static TrainConfig desk_train_config();
};

// Flat text format:
//   CKPL-CONFIG-v1
//   key = value        one per line; '#' starts a comment line
// Keys: mode, shots, exclude_easy_from_hard, output_dir, task.<field>,
// train.<field>, sweep.lambda, sweep.prompt_length (comma lists) and
// sweep.inject_depth (';' list of depth specs). Missing keys keep defaults,
// unknown keys are a ValidationError.
void write_config(std::ostream& os, const ExperimentConfig& config);
ExperimentConfig read_config(std::istream& is);
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

// Seeded N-per-class draw from the training pool, ids sorted. A class with
// fewer than N samples contributes all of them and a warning.
Selection sample_shots(std::span<const std::size_t> labels, std::size_t num_classes,
                       std::size_t n, std::uint64_t seed);

struct MetricsRow {
  std::string stage;  // fewshot, easy or hard
  Metrics metrics;
};

struct RunSummary {
  std::vector<MetricsRow> rows;
  double base_error = 0.0;
  std::string base_sha256_before;
  std::string base_sha256_after;
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

// Builds the task, trains in the configured mode and writes into
// config.output_dir: config.txt, epochs.jsonl, metrics.csv, params.ckpl,
// triplets.jsonl, predictions.csv and, in e2h mode, split.csv.
// Throws IoError when the directory cannot be written.
RunSummary run(const ExperimentConfig& config);

// Metrics CSV (RFC 4180): stage,accuracy,correction_rate,wrong_subset_size,
// loss_cls,loss_ckg,class_<k>_accuracy... An absent correction rate is empty.
void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows,
                       std::size_t num_classes);

struct SweepRow {
  std::string sweep;  // lambda, prompt_length or inject_depth
  std::string value;
  RunSummary summary;
};

// Runs every sweep point as its own run in <output_dir>/<sweep>_<value> and
// writes <output_dir>/ablation.csv. Points run on up to `threads` workers
// (CKPL_THREADS when 0); results do not depend on the worker count.
std::vector<SweepRow> ablate(const ExperimentConfig& config, std::size_t threads = 0);

// Re-evaluates a finished run directory from its config.txt and params.ckpl
// and writes eval_metrics.csv next to them.
Metrics evaluate_run(const std::filesystem::path& run_dir);

struct TaskSummary {
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double base_error = 0.0;
  double hard_tail_share = 0.0;
};
// Writes the generated task as CSV: split,sample_id,label,hard_tail,x0..x{E*d-1}.
TaskSummary write_task(const SyntheticTaskSpec& spec, const std::filesystem::path& path);

// Gradient fidelity of the objective on one seeded toy instance (L=2, d=16,
// C=S=4, prompt length 2): L_ckg against the MATCH head, and the full loss
// against every trainable parameter.
struct ObjectiveGradCheck {
  GradCheckReport ckg;
  GradCheckReport total;
};
ObjectiveGradCheck check_objective_gradients(std::uint64_t seed, double ckg_tol = 1e-4,
                                             double total_tol = 1e-3);

// CKPL_THREADS if set and positive, else hardware concurrency (at least 1).
std::size_t default_threads();

}  // namespace ckpl
