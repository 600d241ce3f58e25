#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ckpl/errors.hpp"
#include "ckpl/harness.hpp"
#include "ckpl/ops.hpp"
#include "ckpl/selection.hpp"

namespace py = pybind11;
using namespace ckpl;

namespace {

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["correction_rate"] = m.correction_rate ? py::cast(*m.correction_rate) : py::none();
  d["wrong_subset_size"] = m.wrong_subset_size;
  d["loss_cls"] = m.loss_cls;
  d["loss_ckg"] = m.loss_ckg;
  d["per_class_accuracy"] = m.per_class_accuracy;
  return d;
}

py::dict summary_dict(const RunSummary& s) {
  py::dict d;
  py::dict rows;
  for (const auto& r : s.rows) rows[py::str(r.stage)] = metrics_dict(r.metrics);
  d["metrics"] = rows;
  d["base_error"] = s.base_error;
  d["base_sha256_before"] = s.base_sha256_before;
  d["base_sha256_after"] = s.base_sha256_after;
  d["warnings"] = s.warnings;
  d["seconds"] = s.seconds;
  return d;
}

py::dict report_dict(const GradCheckReport& r) {
  py::dict d;
  d["passed"] = r.passed();
  d["entries_checked"] = r.entries_checked;
  d["max_rel_error"] = r.max_rel_error;
  d["tolerance"] = r.tolerance;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ckpl, m) {
  m.doc() = "Corrective-knowledge prompt learning on a desk-scale toy encoder";

  py::register_exception<Error>(m, "CkplError", PyExc_ValueError);

  py::enum_<Mode>(m, "Mode").value("FEWSHOT", Mode::kFewshot).value("EASY_TO_HARD", Mode::kEasyToHard);

  py::class_<SyntheticTaskSpec>(m, "SyntheticTaskSpec")
      .def(py::init<>())
      .def_readwrite("num_classes", &SyntheticTaskSpec::num_classes)
      .def_readwrite("samples_per_class", &SyntheticTaskSpec::samples_per_class)
      .def_readwrite("num_patches", &SyntheticTaskSpec::num_patches)
      .def_readwrite("embed_dim", &SyntheticTaskSpec::embed_dim)
      .def_readwrite("num_layers", &SyntheticTaskSpec::num_layers)
      .def_readwrite("num_heads", &SyntheticTaskSpec::num_heads)
      .def_readwrite("cluster_spread", &SyntheticTaskSpec::cluster_spread)
      .def_readwrite("signature_scale", &SyntheticTaskSpec::signature_scale)
      .def_readwrite("hard_tail_fraction", &SyntheticTaskSpec::hard_tail_fraction)
      .def_readwrite("hard_shift_min", &SyntheticTaskSpec::hard_shift_min)
      .def_readwrite("hard_shift_max", &SyntheticTaskSpec::hard_shift_max)
      .def_readwrite("label_noise", &SyntheticTaskSpec::label_noise)
      .def_readwrite("test_fraction", &SyntheticTaskSpec::test_fraction)
      .def_readwrite("seed", &SyntheticTaskSpec::seed)
      .def("validate", &SyntheticTaskSpec::validate);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lambda_", &TrainConfig::lambda)
      .def_readwrite("tau", &TrainConfig::tau)
      .def_readwrite("prompt_length", &TrainConfig::prompt_length)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("lr_initial", &TrainConfig::lr_initial)
      .def_readwrite("lr_final", &TrainConfig::lr_final)
      .def_readwrite("lr_initial_hard_stage", &TrainConfig::lr_initial_hard_stage)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("inject_depth", &TrainConfig::inject_depth)
      .def_readwrite("classifier_init_scale", &TrainConfig::classifier_init_scale)
      .def("validate", &TrainConfig::validate);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("task", &ExperimentConfig::task)
      .def_readwrite("train", &ExperimentConfig::train)
      .def_readwrite("mode", &ExperimentConfig::mode)
      .def_readwrite("shots", &ExperimentConfig::shots)
      .def_readwrite("exclude_easy_from_hard", &ExperimentConfig::exclude_easy_from_hard)
      .def_readwrite("sweep_lambda", &ExperimentConfig::sweep_lambda)
      .def_readwrite("sweep_prompt_length", &ExperimentConfig::sweep_prompt_length)
      .def_readwrite("sweep_depth", &ExperimentConfig::sweep_depth)
      .def_readwrite("output_dir", &ExperimentConfig::output_dir)
      .def("validate", &ExperimentConfig::validate)
      .def("to_text", [](const ExperimentConfig& c) {
        std::ostringstream os;
        write_config(os, c);
        return os.str();
      })
      .def_static("from_text", [](const std::string& text) {
        std::istringstream is(text);
        return read_config(is);
      })
      .def_static("desk_train_config", &ExperimentConfig::desk_train_config);

  m.def("load_config", &load_config, py::arg("path"));
  m.def("save_config", &save_config, py::arg("path"), py::arg("config"));

  m.def("run", [](const ExperimentConfig& c) {
    RunSummary s;
    {
      py::gil_scoped_release release;
      s = run(c);
    }
    return summary_dict(s);
  }, py::arg("config"), "Train in the configured mode and write the run directory.");

  m.def("ablate", [](const ExperimentConfig& c, std::size_t threads) {
    std::vector<SweepRow> rows;
    {
      py::gil_scoped_release release;
      rows = ablate(c, threads);
    }
    py::list out;
    for (const auto& r : rows) {
      py::dict d;
      d["sweep"] = r.sweep;
      d["value"] = r.value;
      d["summary"] = summary_dict(r.summary);
      out.append(d);
    }
    return out;
  }, py::arg("config"), py::arg("threads") = 0);

  m.def("evaluate_run", [](const std::filesystem::path& dir) { return metrics_dict(evaluate_run(dir)); },
        py::arg("run_dir"));

  m.def("check_objective_gradients", [](std::uint64_t seed, double ckg_tol, double total_tol) {
    auto r = check_objective_gradients(seed, ckg_tol, total_tol);
    py::dict d;
    d["ckg"] = report_dict(r.ckg);
    d["total"] = report_dict(r.total);
    return d;
  }, py::arg("seed"), py::arg("ckg_tol") = 1e-4, py::arg("total_tol") = 1e-3);

  m.def("base_error", [](const SyntheticTaskSpec& spec) {
    return base_error(prepare_task(generate_task(spec)));
  }, py::arg("spec"));

  m.def("write_task", [](const SyntheticTaskSpec& spec, const std::filesystem::path& path) {
    auto s = write_task(spec, path);
    py::dict d;
    d["train_size"] = s.train_size;
    d["test_size"] = s.test_size;
    d["base_error"] = s.base_error;
    d["hard_tail_share"] = s.hard_tail_share;
    return d;
  }, py::arg("spec"), py::arg("path"));

  m.def("softmax_with_temperature",
        [](const std::vector<double>& logits, double tau) { return softmax_with_temperature(logits, tau); },
        py::arg("logits"), py::arg("tau"));
  m.def("cosine_similarity",
        [](const std::vector<double>& u, const std::vector<double>& v) { return cosine_similarity(u, v); },
        py::arg("u"), py::arg("v"));
  m.def("ckg_loss", [](const std::vector<double>& probs, std::size_t a, std::size_t b) {
    return ckg_loss({Tensor::vector(probs), kDefaultTau}, a, b).item();
  }, py::arg("probs"), py::arg("true_entry"), py::arg("wrong_entry"));
  m.def("difficulty",
        [](const std::vector<double>& e, const std::vector<double>& o) { return difficulty(e, o); },
        py::arg("feature"), py::arg("centroid"));
  m.def("cosine_lr", &cosine_lr, py::arg("step"), py::arg("total_steps"), py::arg("lr_initial"),
        py::arg("lr_final"));
}
