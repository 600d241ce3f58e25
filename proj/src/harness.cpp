#include "ckpl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "ckpl/errors.hpp"
#include "ckpl/io.hpp"
#include "ckpl/ops.hpp"
#include "ckpl/params.hpp"
#include "ckpl/random.hpp"

namespace ckpl {

namespace fs = std::filesystem;

std::string_view mode_name(Mode mode) {
  return mode == Mode::kFewshot ? "fewshot" : "e2h";
}

Mode parse_mode(std::string_view text) {
  if (text == "fewshot") return Mode::kFewshot;
  if (text == "e2h") return Mode::kEasyToHard;
  throw ValidationError("unknown mode '" + std::string(text) + "' (fewshot or e2h)");
}

TrainConfig ExperimentConfig::desk_train_config() {
  TrainConfig t;
  t.batch_size = 8;
  t.lr_initial = 0.05;
  t.lr_initial_hard_stage = 0.0083;
  return t;
}

void ExperimentConfig::validate() const {
  task.validate();
  try {
    train.validate();
    train.depth(task.num_layers);
  } catch (const Error& e) {
    throw ValidationError(std::string("train: ") + e.what());
  }
  if (shots == 0) throw ValidationError("shots must be at least 1");
  if (output_dir.empty()) throw ValidationError("output_dir is empty");
  if (sweep_lambda) {
    if (sweep_lambda->empty()) throw ValidationError("sweep.lambda is empty");
    for (double l : *sweep_lambda) {
      if (!(l >= 0.0)) throw ValidationError("sweep.lambda values must be nonnegative");
    }
  }
  if (sweep_prompt_length) {
    if (sweep_prompt_length->empty()) throw ValidationError("sweep.prompt_length is empty");
    for (auto p : *sweep_prompt_length) {
      if (p == 0) throw ValidationError("sweep.prompt_length values must be positive");
    }
  }
  if (sweep_depth) {
    if (sweep_depth->empty()) throw ValidationError("sweep.inject_depth is empty");
    for (const auto& d : *sweep_depth) {
      try {
        parse_depth_spec(d, task.num_layers);
      } catch (const Error& e) {
        throw ValidationError(std::string("sweep.inject_depth: ") + e.what());
      }
    }
  }
}

// --- config text -----------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ValidationError("config key '" + key + "': '" + v + "' is not a number");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ValidationError("config key '" + key + "': '" + v + "' is not an unsigned integer");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::string depth_text(const TrainConfig& t) {
  if (!t.inject_depth) return "all";
  return PromptDepth(*t.inject_depth).to_string();
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, char sep, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += fmt(xs[i]);
  }
  return out;
}

}  // namespace

void write_config(std::ostream& os, const ExperimentConfig& c) {
  const auto& t = c.task;
  const auto& r = c.train;
  auto real = [](double v) { return format_real(v); };
  os << kConfigHeader << '\n';
  os << "mode = " << mode_name(c.mode) << '\n';
  os << "shots = " << c.shots << '\n';
  os << "exclude_easy_from_hard = " << (c.exclude_easy_from_hard ? "true" : "false") << '\n';
  os << "output_dir = " << c.output_dir << '\n';
  os << "task.num_classes = " << t.num_classes << '\n';
  os << "task.samples_per_class = " << t.samples_per_class << '\n';
  os << "task.num_patches = " << t.num_patches << '\n';
  os << "task.embed_dim = " << t.embed_dim << '\n';
  os << "task.num_layers = " << t.num_layers << '\n';
  os << "task.num_heads = " << t.num_heads << '\n';
  os << "task.cluster_spread = " << real(t.cluster_spread) << '\n';
  os << "task.signature_scale = " << real(t.signature_scale) << '\n';
  os << "task.hard_tail_fraction = " << real(t.hard_tail_fraction) << '\n';
  os << "task.hard_shift_min = " << real(t.hard_shift_min) << '\n';
  os << "task.hard_shift_max = " << real(t.hard_shift_max) << '\n';
  os << "task.label_noise = " << real(t.label_noise) << '\n';
  os << "task.test_fraction = " << real(t.test_fraction) << '\n';
  os << "task.seed = " << t.seed << '\n';
  os << "train.lambda = " << real(r.lambda) << '\n';
  os << "train.tau = " << real(r.tau) << '\n';
  os << "train.prompt_length = " << r.prompt_length << '\n';
  os << "train.epochs = " << r.epochs << '\n';
  os << "train.batch_size = " << r.batch_size << '\n';
  os << "train.lr_initial = " << real(r.lr_initial) << '\n';
  os << "train.lr_final = " << real(r.lr_final) << '\n';
  os << "train.lr_initial_hard_stage = " << real(r.lr_initial_hard_stage) << '\n';
  os << "train.seed = " << r.seed << '\n';
  os << "train.inject_depth = " << depth_text(r) << '\n';
  os << "train.classifier_init_scale = " << real(r.classifier_init_scale) << '\n';
  if (c.sweep_lambda) os << "sweep.lambda = " << join(*c.sweep_lambda, ',', real) << '\n';
  if (c.sweep_prompt_length) {
    os << "sweep.prompt_length = "
       << join(*c.sweep_prompt_length, ',', [](std::size_t v) { return std::to_string(v); })
       << '\n';
  }
  if (c.sweep_depth) {
    os << "sweep.inject_depth = " << join(*c.sweep_depth, ';', [](const std::string& s) { return s; })
       << '\n';
  }
}

ExperimentConfig read_config(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != kConfigHeader) {
    throw ValidationError("config does not start with " + std::string(kConfigHeader));
  }
  std::map<std::string, std::string> kv;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    auto text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    auto key = trim(std::string_view(text).substr(0, eq));
    auto value = trim(std::string_view(text).substr(eq + 1));
    if (!kv.emplace(key, value).second) {
      throw ValidationError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }

  ExperimentConfig c;
  auto& t = c.task;
  auto& r = c.train;
  std::optional<std::string> depth;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto size = [](std::size_t& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = to_uint(k, v); };
  };
  auto real = [](double& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = to_real(k, v); };
  };
  const std::map<std::string, Setter> setters = {
      {"mode", [&](const std::string&, const std::string& v) { c.mode = parse_mode(v); }},
      {"shots", size(c.shots)},
      {"exclude_easy_from_hard",
       [&](const std::string& k, const std::string& v) { c.exclude_easy_from_hard = to_bool(k, v); }},
      {"output_dir", [&](const std::string&, const std::string& v) { c.output_dir = v; }},
      {"task.num_classes", size(t.num_classes)},
      {"task.samples_per_class", size(t.samples_per_class)},
      {"task.num_patches", size(t.num_patches)},
      {"task.embed_dim", size(t.embed_dim)},
      {"task.num_layers", size(t.num_layers)},
      {"task.num_heads", size(t.num_heads)},
      {"task.cluster_spread", real(t.cluster_spread)},
      {"task.signature_scale", real(t.signature_scale)},
      {"task.hard_tail_fraction", real(t.hard_tail_fraction)},
      {"task.hard_shift_min", real(t.hard_shift_min)},
      {"task.hard_shift_max", real(t.hard_shift_max)},
      {"task.label_noise", real(t.label_noise)},
      {"task.test_fraction", real(t.test_fraction)},
      {"task.seed", [&](const std::string& k, const std::string& v) { t.seed = to_uint(k, v); }},
      {"train.lambda", real(r.lambda)},
      {"train.tau", real(r.tau)},
      {"train.prompt_length", size(r.prompt_length)},
      {"train.epochs", size(r.epochs)},
      {"train.batch_size", size(r.batch_size)},
      {"train.lr_initial", real(r.lr_initial)},
      {"train.lr_final", real(r.lr_final)},
      {"train.lr_initial_hard_stage", real(r.lr_initial_hard_stage)},
      {"train.seed", [&](const std::string& k, const std::string& v) { r.seed = to_uint(k, v); }},
      {"train.inject_depth", [&](const std::string&, const std::string& v) { depth = v; }},
      {"train.classifier_init_scale", real(r.classifier_init_scale)},
      {"sweep.lambda",
       [&](const std::string& k, const std::string& v) {
         std::vector<double> xs;
         for (const auto& s : split(v, ',')) xs.push_back(to_real(k, s));
         c.sweep_lambda = xs;
       }},
      {"sweep.prompt_length",
       [&](const std::string& k, const std::string& v) {
         std::vector<std::size_t> xs;
         for (const auto& s : split(v, ',')) xs.push_back(to_uint(k, s));
         c.sweep_prompt_length = xs;
       }},
      {"sweep.inject_depth",
       [&](const std::string&, const std::string& v) { c.sweep_depth = split(v, ';'); }},
  };
  for (const auto& [k, v] : kv) {
    auto it = setters.find(k);
    if (it == setters.end()) throw ValidationError("unknown config key '" + k + "'");
    it->second(k, v);
  }
  if (depth && *depth != "all") {
    try {
      r.inject_depth = parse_depth_spec(*depth, t.num_layers).layers();
    } catch (const Error& e) {
      throw ValidationError(std::string("train.inject_depth: ") + e.what());
    }
  }
  c.validate();
  return c;
}

void save_config(const fs::path& path, const ExperimentConfig& config) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  write_config(os, config);
  if (!os) throw IoError("failed writing " + path.string());
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  return read_config(is);
}

// --- runs ------------------------------------------------------------------

Selection sample_shots(std::span<const std::size_t> labels, std::size_t num_classes,
                       std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ParameterError("shots must be at least 1");
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw IndexError("label out of range");
    by_class[labels[i]].push_back(i);
  }
  Rng rng(mix_seed(seed, stable_hash("fewshot")));
  Selection sel;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto ids = by_class[c];
    std::shuffle(ids.begin(), ids.end(), rng.engine());
    if (ids.size() < n) {
      sel.warnings.push_back("class " + std::to_string(c) + " has " + std::to_string(ids.size()) +
                             " samples, fewer than " + std::to_string(n));
    } else {
      ids.resize(n);
    }
    std::sort(ids.begin(), ids.end());
    sel.per_class.push_back(std::move(ids));
  }
  return sel;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  }
}

nlohmann::ordered_json epoch_json(const std::string& stage, const EpochLog& log) {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["epoch"] = log.epoch;
  j["lr"] = log.lr;
  j["loss_cls"] = log.loss_cls;
  j["loss_ckg"] = log.loss_ckg;
  j["accuracy"] = log.accuracy;
  if (log.correction_rate) {
    j["correction_rate"] = *log.correction_rate;
  } else {
    j["correction_rate"] = nullptr;
  }
  return j;
}

std::string rate_text(const std::optional<double>& r) { return r ? format_real(*r) : std::string(); }

}  // namespace

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows,
                       std::size_t num_classes) {
  CsvWriter csv(os);
  std::vector<std::string> header{"stage",    "accuracy", "correction_rate", "wrong_subset_size",
                                  "loss_cls", "loss_ckg"};
  for (std::size_t c = 0; c < num_classes; ++c) {
    header.push_back("class_" + std::to_string(c) + "_accuracy");
  }
  csv.row(header);
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    std::vector<std::string> f{r.stage,
                               format_real(m.accuracy),
                               rate_text(m.correction_rate),
                               std::to_string(m.wrong_subset_size),
                               format_real(m.loss_cls),
                               format_real(m.loss_ckg)};
    for (std::size_t c = 0; c < num_classes; ++c) {
      f.push_back(c < m.per_class_accuracy.size() ? format_real(m.per_class_accuracy[c]) : "");
    }
    csv.row(f);
  }
}

RunSummary run(const ExperimentConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out(config.output_dir);
  ensure_dir(out);
  save_config(out / "config.txt", config);

  RunSummary summary;
  const auto task = prepare_task(generate_task(config.task));
  summary.base_sha256_before = params_sha256(task.base->parameters());
  const auto view = base_view(task);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < task.test.size(); ++i) {
    wrong += view.test_predictions[i] != task.test[i].label;
  }
  summary.base_error = static_cast<double>(wrong) / static_cast<double>(task.test.size());

  auto epochs = open_out(out / "epochs.jsonl");
  auto on_epoch = [&](const std::string& stage, const EpochLog& log) {
    epochs << epoch_json(stage, log).dump() << '\n';
  };

  std::optional<IotaModel> final_model;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> prediction_columns;
  std::vector<std::pair<std::string, std::vector<CorrectiveTriplet>>> triplet_sets;
  if (config.mode == Mode::kFewshot) {
    auto shots = sample_shots(labels_of(task.train), task.num_classes(), config.shots,
                              config.train.seed);
    summary.warnings = shots.warnings;
    auto ids = shots.flatten();
    auto r = run_single_stage(task, view, config.train, ids, "fewshot", on_epoch);
    summary.rows.push_back({"fewshot", r.outcome.test.metrics});
    prediction_columns.push_back({"prediction", r.outcome.test.predictions});
    triplet_sets.push_back({"fewshot", r.outcome.triplets});
    final_model = std::move(r.model);
  } else {
    auto r = run_two_stage(task, config.train, config.shots, {config.exclude_easy_from_hard},
                           on_epoch);
    summary.warnings = r.warnings;
    summary.rows.push_back({"easy", r.metrics_e});
    summary.rows.push_back({"hard", r.metrics_h});
    prediction_columns.push_back({"prediction_easy", r.test_predictions_e});
    prediction_columns.push_back({"prediction_hard", r.test_predictions_h});
    triplet_sets.push_back({"easy", r.triplets_e});
    triplet_sets.push_back({"hard", r.triplets_h});
    auto split_csv = open_out(out / "split.csv");
    write_split_csv(split_csv, r.split, labels_of(task.train));
    final_model = std::move(r.model_h);
  }
  epochs.close();

  {
    auto os = open_out(out / "metrics.csv");
    write_metrics_csv(os, summary.rows, task.num_classes());
  }
  save_params(out / "params.ckpl", final_model->trainable_parameters());
  {
    auto os = open_out(out / "triplets.jsonl");
    for (const auto& [stage, triplets] : triplet_sets) {
      for (const auto& t : triplets) {
        const auto v = verbalize(t, task.prompt_template, task.class_names);
        nlohmann::ordered_json j;
        j["stage"] = stage;
        j["sample_id"] = t.sample_id;
        j["A"] = t.true_class;
        j["B"] = t.predicted_class;
        j["true_text"] = v.true_prompt.text;
        j["wrong_text"] = v.wrong_prompt ? v.wrong_prompt->text : std::string();
        os << j.dump() << '\n';
      }
    }
  }
  {
    auto os = open_out(out / "predictions.csv");
    CsvWriter csv(os);
    std::vector<std::string> header{"sample_id", "label", "base_prediction"};
    for (const auto& [name, _] : prediction_columns) header.push_back(name);
    csv.row(header);
    for (std::size_t i = 0; i < task.test.size(); ++i) {
      std::vector<std::string> f{std::to_string(i), std::to_string(task.test[i].label),
                                 std::to_string(view.test_predictions[i])};
      for (const auto& [_, preds] : prediction_columns) f.push_back(std::to_string(preds[i]));
      csv.row(f);
    }
  }
  summary.base_sha256_after = params_sha256(task.base->parameters());
  summary.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (config.mode == Mode::kFewshot && summary.seconds > 300.0) {
    summary.warnings.push_back("few-shot run took " + format_real(summary.seconds) +
                               " s, over the 5 minute budget");
  }
  for (const auto& w : summary.warnings) std::cerr << "warning: " << w << '\n';
  return summary;
}

// --- sweeps ----------------------------------------------------------------

std::size_t default_threads() {
  if (const char* env = std::getenv("CKPL_THREADS")) {
    std::size_t n = 0;
    std::string_view s(env);
    auto res = std::from_chars(s.data(), s.data() + s.size(), n);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size() && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SweepRow> ablate(const ExperimentConfig& config, std::size_t threads) {
  config.validate();
  if (!config.sweep_lambda && !config.sweep_prompt_length && !config.sweep_depth) {
    throw ValidationError("ablate needs at least one sweep list");
  }
  const fs::path out(config.output_dir);
  ensure_dir(out);
  save_config(out / "config.txt", config);

  struct Point {
    std::string sweep, value;
    ExperimentConfig config;
  };
  std::vector<Point> points;
  auto add = [&](const std::string& sweep, const std::string& value, auto&& edit) {
    ExperimentConfig c = config;
    c.sweep_lambda.reset();
    c.sweep_prompt_length.reset();
    c.sweep_depth.reset();
    edit(c);
    std::string dir = sweep + "_" + value;
    std::replace(dir.begin(), dir.end(), ',', '+');
    c.output_dir = (out / dir).string();
    points.push_back({sweep, value, std::move(c)});
  };
  if (config.sweep_lambda) {
    for (double l : *config.sweep_lambda) {
      add("lambda", format_real(l), [l](ExperimentConfig& c) { c.train.lambda = l; });
    }
  }
  if (config.sweep_prompt_length) {
    for (auto p : *config.sweep_prompt_length) {
      add("prompt_length", std::to_string(p),
          [p](ExperimentConfig& c) { c.train.prompt_length = p; });
    }
  }
  if (config.sweep_depth) {
    for (const auto& d : *config.sweep_depth) {
      const auto depth = parse_depth_spec(d, config.task.num_layers);
      add("inject_depth", depth.to_string(), [&depth](ExperimentConfig& c) {
        c.train.inject_depth = depth.layers();
      });
    }
  }

  std::vector<std::optional<RunSummary>> results(points.size());
  std::vector<std::string> errors(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        results[i] = run(points[i].config);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t n_workers =
      std::min(points.size(), threads == 0 ? default_threads() : threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!results[i]) {
      throw Error("sweep point " + points[i].sweep + "=" + points[i].value + " failed: " + errors[i]);
    }
  }

  std::vector<SweepRow> rows;
  auto os = open_out(out / "ablation.csv");
  CsvWriter csv(os);
  csv.row({"sweep", "value", "stage", "accuracy", "correction_rate"});
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (const auto& r : results[i]->rows) {
      csv.row({points[i].sweep, points[i].value, r.stage, format_real(r.metrics.accuracy),
               rate_text(r.metrics.correction_rate)});
    }
    rows.push_back({points[i].sweep, points[i].value, std::move(*results[i])});
  }
  return rows;
}

Metrics evaluate_run(const fs::path& run_dir) {
  const auto config = load_config(run_dir / "config.txt");
  const auto task = prepare_task(generate_task(config.task));
  const auto view = base_view(task);
  auto model = create_task_model(task, view, config.train);
  assign_params(model.trainable_parameters(), load_params(run_dir / "params.ckpl"));
  auto ev = evaluate(model, task.test, view.test_predictions, config.train.lambda);
  auto os = open_out(run_dir / "eval_metrics.csv");
  write_metrics_csv(os, {{"eval", ev.metrics}}, task.num_classes());
  return ev.metrics;
}

TaskSummary write_task(const SyntheticTaskSpec& spec, const fs::path& path) {
  const auto task = generate_task(spec);
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  auto os = open_out(path);
  CsvWriter csv(os);
  const std::size_t n = spec.num_patches * spec.embed_dim;
  std::vector<std::string> header{"split", "sample_id", "label", "hard_tail"};
  for (std::size_t i = 0; i < n; ++i) header.push_back("x" + std::to_string(i));
  csv.row(header);
  TaskSummary s;
  std::size_t hard = 0;
  auto dump = [&](const char* split_name, const std::vector<SyntheticSample>& samples) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      std::vector<std::string> f{split_name, std::to_string(i), std::to_string(samples[i].label),
                                 samples[i].hard_tail ? "1" : "0"};
      for (double v : samples[i].patches.values()) f.push_back(format_real(v));
      csv.row(f);
      hard += samples[i].hard_tail;
    }
  };
  dump("train", task.train);
  dump("test", task.test);
  s.train_size = task.train.size();
  s.test_size = task.test.size();
  s.hard_tail_share = static_cast<double>(hard) / static_cast<double>(s.train_size + s.test_size);
  s.base_error = base_error(prepare_task(task));
  return s;
}

// --- gradient fidelity -----------------------------------------------------

ObjectiveGradCheck check_objective_gradients(std::uint64_t seed, double ckg_tol,
                                             double total_tol) {
  SyntheticTaskSpec spec;
  spec.num_classes = 4;
  spec.samples_per_class = 4;
  spec.test_fraction = 0.25;
  spec.seed = seed;
  const auto task = prepare_task(generate_task(spec));
  TrainConfig cfg;
  cfg.seed = seed;
  Rng rng(mix_seed(seed, stable_hash("gradcheck")));
  cfg.lambda = rng.uniform(0.1, 2.0);
  auto model = create_task_model(task, base_view(task), cfg);
  // Move off the symmetric initialization so every path carries signal.
  for (auto& p : model.trainable_parameters()) {
    for (auto& v : p.tensor.mutable_values()) v += rng.normal(0.0, 0.05);
  }

  std::vector<PreparedSample> batch{task.train[rng.index(task.train.size())],
                                    task.train[rng.index(task.train.size())]};
  batch[1].id = batch[0].id + 1;
  std::vector<CorrectiveTriplet> triplets;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t a = batch[i].label;
    const std::size_t b = i == 0 ? (a + 1 + rng.index(spec.num_classes - 1)) % spec.num_classes : a;
    triplets.push_back({batch[i].id, a, b});
  }
  const auto index = index_triplets(triplets);

  auto tensors = [](const ParameterList& ps) {
    std::vector<Tensor> out;
    for (const auto& p : ps) out.push_back(p.tensor);
    return out;
  };
  ObjectiveGradCheck out;
  auto ckg = [&] {
    std::vector<Tensor> terms;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto m = compute_match_token(model.head(), batch[i].base_feature);
      auto dist = match_distribution(m, model.prompts(), model.tau());
      terms.push_back(ckg_loss(dist, model.prompts().class_index_of(triplets[i].true_class),
                               model.prompts().class_index_of(triplets[i].predicted_class)));
    }
    return scale(add_n(terms), 1.0 / static_cast<double>(terms.size()));
  };
  out.ckg = grad_check(ckg, tensors(model.head().parameters()), 1e-5, ckg_tol);
  auto total = [&] { return batch_objective(model, batch, index, cfg.lambda).total; };
  out.total = grad_check(total, tensors(model.trainable_parameters()), 1e-5, total_tol);
  return out;
}

}  // namespace ckpl
