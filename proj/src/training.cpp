#include "ckpl/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ckpl/errors.hpp"
#include "ckpl/ops.hpp"
#include "ckpl/random.hpp"

namespace ckpl {

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be nonnegative");
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  if (prompt_length == 0) throw ParameterError("prompt_length must be at least 1");
  if (epochs == 0) throw ParameterError("epochs must be at least 1");
  if (batch_size == 0) throw ParameterError("batch_size must be at least 1");
  if (lr_initial < 0.0 || lr_final < 0.0 || lr_initial_hard_stage < 0.0) {
    throw ParameterError("learning rates must be nonnegative");
  }
  if (lr_final > lr_initial) throw ParameterError("lr_final must not exceed lr_initial");
}

PromptDepth TrainConfig::depth(std::size_t num_layers) const {
  if (!inject_depth) return PromptDepth::all(num_layers);
  PromptDepth d(*inject_depth);
  d.validate(num_layers);
  return d;
}

Tensor Classifier::logits(const Tensor& feature) const {
  return linear(feature, transpose(weight), bias);
}

Classifier classifier_from_centroids(const ClassCentroids& centroids, double scale) {
  const std::size_t c = centroids.num_classes();
  const std::size_t d = centroids.centroid(0).size();
  std::vector<double> mean(d, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    auto v = centroids.centroid(k).values();
    for (std::size_t j = 0; j < d; ++j) mean[j] += v[j] / static_cast<double>(c);
  }
  // w_k = o_k - m, b_k = -(o_k - m).(o_k + m) / 2 reproduces the Euclidean
  // nearest-centroid rule; one shared factor keeps the argmax intact.
  double spread = 0.0;
  std::vector<double> w(c * d), b(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    auto v = centroids.centroid(k).values();
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      w[k * d + j] = v[j] - mean[j];
      b[k] -= 0.5 * (v[j] - mean[j]) * (v[j] + mean[j]);
      norm += (v[j] - mean[j]) * (v[j] - mean[j]);
    }
    spread += std::sqrt(norm) / static_cast<double>(c);
  }
  const double factor = spread < kDegenerateNorm ? 0.0 : scale / (spread * spread);
  for (auto& x : w) x *= factor;
  for (auto& x : b) x *= factor;
  return {Tensor::matrix(c, d, std::move(w), true), Tensor::vector(std::move(b), true)};
}

std::vector<Tensor> base_features(std::span<const PreparedSample> samples) {
  std::vector<Tensor> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.base_feature);
  return out;
}

std::vector<std::size_t> labels_of(std::span<const PreparedSample> samples) {
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

IotaModel::IotaModel(std::shared_ptr<const BaseLearner> base, KnowledgePromptSet prompts,
                     MatchHead head, Classifier classifier, PromptDepth depth, double tau)
    : base_(std::move(base)),
      prompts_(std::move(prompts)),
      head_(std::move(head)),
      ncls_(*base_),
      classifier_(std::move(classifier)),
      depth_(std::move(depth)),
      tau_(tau) {
  depth_.validate(base_->num_layers());
  if (prompts_.dim() != base_->embed_dim() || head_.dim() != base_->embed_dim()) {
    throw DimensionError("prompt set or MATCH head dimension differs from the base learner");
  }
}

ForwardResult IotaModel::forward(const Tensor& base_feature, const Tensor& image) const {
  ForwardResult r;
  r.m_hat = compute_match_token(head_, base_feature);
  r.dist = match_distribution(r.m_hat, prompts_, tau_);
  r.prompt = aggregate_prompt(r.dist.probs, prompts_);
  r.feature = forward_with_prompts(*base_, ncls_, r.prompt.v_hat, image, depth_);
  r.logits = classifier_.logits(r.feature);
  return r;
}

ForwardResult IotaModel::forward(const PreparedSample& sample) const {
  return forward(sample.base_feature, sample.image);
}

namespace {

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::size_t IotaModel::predict(const PreparedSample& sample) const {
  return argmax(forward(sample).logits.values());
}

Tensor IotaModel::infer_feature(const PreparedSample& sample) const {
  return forward(sample).feature.detach();
}

ParameterList IotaModel::trainable_parameters() const {
  ParameterList out = head_.parameters();
  auto prompts = prompts_.parameters();
  out.insert(out.end(), prompts.begin(), prompts.end());
  out.push_back({"ncls.c_prime", ncls_.c_prime});
  out.push_back({"classifier.weight", classifier_.weight});
  out.push_back({"classifier.bias", classifier_.bias});
  return out;
}

ParameterList IotaModel::frozen_parameters() const {
  ParameterList out = base_->parameters();
  for (std::size_t j = 0; j < prompts_.size(); ++j) {
    out.push_back({"prompts.k." + std::to_string(j), prompts_.entry(j).key});
  }
  return out;
}

IotaModel IotaModel::clone() const {
  auto copy = [](const Tensor& t) {
    Tensor c = t.detach();
    c.set_requires_grad(true);
    return c;
  };
  IotaModel m(base_, prompts_.clone(), head_.clone(),
              Classifier{copy(classifier_.weight), copy(classifier_.bias)}, depth_, tau_);
  m.ncls_.c_prime = copy(ncls_.c_prime);
  return m;
}

IotaModel create_model(std::shared_ptr<const BaseLearner> base, const KnowledgeEncoder& encoder,
                       std::span<const std::string> class_names, const PromptTemplate& tmpl,
                       const ClassCentroids& centroids, const TrainConfig& config) {
  config.validate();
  const std::size_t d = base->embed_dim();
  auto prompts = build_prompt_set(class_names, tmpl, encoder, config.prompt_length, d,
                                  mix_seed(config.seed, 1));
  auto head = MatchHead::create(d, 0, mix_seed(config.seed, 2));
  auto classifier = classifier_from_centroids(centroids, config.classifier_init_scale);
  if (classifier.num_classes() != class_names.size()) {
    throw DimensionError("centroid count differs from class count");
  }
  auto depth = config.depth(base->num_layers());
  return IotaModel(std::move(base), std::move(prompts), std::move(head), std::move(classifier),
                   std::move(depth), config.tau);
}

void init_classifier_from_features(IotaModel& model, std::span<const PreparedSample> samples,
                                   double scale) {
  if (samples.empty()) throw DimensionError("no samples to seed the classifier from");
  std::vector<Tensor> features;
  features.reserve(samples.size());
  for (const auto& s : samples) features.push_back(model.infer_feature(s));
  auto centroids =
      class_centroids(features, labels_of(samples), model.classifier().num_classes());
  model.classifier() = classifier_from_centroids(centroids, scale);
}

LossTerms total_loss(const Tensor& logits, std::size_t label, const MatchDistribution& dist,
                     std::size_t true_entry, std::size_t wrong_entry, double lambda) {
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be nonnegative");
  LossTerms t;
  t.cls = cross_entropy(logits, label);
  t.ckg = ckg_loss(dist, true_entry, wrong_entry);
  t.total = lambda == 0.0 ? t.cls : add(t.cls, scale(t.ckg, lambda));
  return t;
}

namespace {

const CorrectiveTriplet& triplet_for(const TripletIndex& triplets, std::size_t id) {
  auto it = triplets.find(id);
  if (it == triplets.end()) {
    throw LookupError("no corrective triplet for sample " + std::to_string(id));
  }
  return it->second;
}

}  // namespace

LossTerms batch_objective(const IotaModel& model, std::span<const PreparedSample> batch,
                          const TripletIndex& triplets, double lambda,
                          std::vector<std::size_t>* predictions) {
  if (batch.empty()) throw DimensionError("empty batch");
  std::vector<Tensor> totals, cls, ckg;
  for (const auto& s : batch) {
    const auto& t = triplet_for(triplets, s.id);
    auto r = model.forward(s);
    if (predictions) predictions->push_back(argmax(r.logits.values()));
    auto terms = total_loss(r.logits, s.label, r.dist, model.prompts().class_index_of(t.true_class),
                            model.prompts().class_index_of(t.predicted_class), lambda);
    totals.push_back(terms.total);
    cls.push_back(terms.cls);
    ckg.push_back(terms.ckg);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  return {scale(add_n(totals), inv), scale(add_n(cls), inv), scale(add_n(ckg), inv)};
}

StepLosses train_step(IotaModel& model, std::span<const PreparedSample> batch,
                      const TripletIndex& triplets, const TrainConfig& config, double lr,
                      std::vector<std::size_t>* predictions) {
  auto params = model.trainable_parameters();
  for (auto& p : params) p.tensor.zero_grad();
  auto terms = batch_objective(model, batch, triplets, config.lambda, predictions);
  backward(terms.total);
  for (auto& p : params) {
    if (lr != 0.0 && p.tensor.has_grad()) {
      auto values = p.tensor.mutable_values();
      auto grad = p.tensor.grad();
      for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * grad[i];
    }
    p.tensor.zero_grad();
  }
  return {terms.total.item(), terms.cls.item(), terms.ckg.item()};
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr_initial, double lr_final) {
  if (total_steps == 0) return lr_initial;
  if (step > total_steps) throw ParameterError("step beyond total_steps");
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_final + 0.5 * (lr_initial - lr_final) * (1.0 + std::cos(std::numbers::pi * progress));
}

Metrics metrics_from_predictions(std::span<const std::size_t> labels,
                                 std::span<const std::size_t> predictions,
                                 std::span<const std::size_t> base_predictions,
                                 std::size_t num_classes) {
  if (labels.size() != predictions.size() || labels.size() != base_predictions.size()) {
    throw DimensionError("labels, predictions and base predictions differ in length");
  }
  Metrics m;
  std::size_t correct = 0, wrong_total = 0, wrong_fixed = 0;
  std::vector<std::size_t> class_total(num_classes, 0), class_correct(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool ok = predictions[i] == labels[i];
    correct += ok;
    if (labels[i] >= num_classes) throw IndexError("label out of range");
    ++class_total[labels[i]];
    class_correct[labels[i]] += ok;
    if (base_predictions[i] != labels[i]) {
      ++wrong_total;
      wrong_fixed += ok;
    }
  }
  m.accuracy = labels.empty() ? 0.0 : static_cast<double>(correct) / labels.size();
  m.wrong_subset_size = wrong_total;
  if (wrong_total > 0) m.correction_rate = static_cast<double>(wrong_fixed) / wrong_total;
  m.per_class_accuracy.resize(num_classes, 0.0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (class_total[c]) m.per_class_accuracy[c] = static_cast<double>(class_correct[c]) / class_total[c];
  }
  return m;
}

Evaluation evaluate(const IotaModel& model, std::span<const PreparedSample> samples,
                    std::span<const std::size_t> base_predictions, double lambda) {
  if (samples.size() != base_predictions.size()) {
    throw DimensionError("evaluate: samples and base predictions differ in length");
  }
  Evaluation ev;
  double cls = 0.0, ckg = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto r = model.forward(samples[i]);
    ev.predictions.push_back(argmax(r.logits.values()));
    auto terms = total_loss(r.logits, samples[i].label, r.dist,
                            model.prompts().class_index_of(samples[i].label),
                            model.prompts().class_index_of(base_predictions[i]), lambda);
    cls += terms.cls.item();
    ckg += terms.ckg.item();
  }
  ev.metrics = metrics_from_predictions(labels_of(samples), ev.predictions, base_predictions,
                                        model.classifier().num_classes());
  if (!samples.empty()) {
    ev.metrics.loss_cls = cls / samples.size();
    ev.metrics.loss_ckg = ckg / samples.size();
  }
  return ev;
}

std::vector<EpochLog> train(IotaModel& model, std::span<const PreparedSample> samples,
                            const TripletIndex& triplets, const TrainConfig& config,
                            double lr_initial, double lr_final,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  if (samples.empty()) throw DimensionError("training set is empty");
  const std::size_t n = samples.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  std::vector<std::size_t> order(n);
  std::vector<EpochLog> logs;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(config.seed, 1000 + epoch));
    std::shuffle(order.begin(), order.end(), rng.engine());

    EpochLog log;
    log.epoch = epoch + 1;
    log.lr = cosine_lr(step, total_steps, lr_initial, lr_final);
    std::size_t correct = 0, wrong_total = 0, wrong_fixed = 0;
    for (std::size_t b = 0; b < n; b += config.batch_size) {
      std::vector<PreparedSample> batch;
      for (std::size_t i = b; i < std::min(n, b + config.batch_size); ++i) {
        batch.push_back(samples[order[i]]);
      }
      std::vector<std::size_t> preds;
      const double lr = cosine_lr(step, total_steps, lr_initial, lr_final);
      auto losses = train_step(model, batch, triplets, config, lr, &preds);
      ++step;
      const double w = static_cast<double>(batch.size()) / n;
      log.loss_total += w * losses.total;
      log.loss_cls += w * losses.cls;
      log.loss_ckg += w * losses.ckg;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const bool ok = preds[i] == batch[i].label;
        correct += ok;
        const auto& t = triplets.at(batch[i].id);
        if (!t.is_correct()) {
          ++wrong_total;
          wrong_fixed += ok;
        }
      }
    }
    log.accuracy = static_cast<double>(correct) / n;
    if (wrong_total) log.correction_rate = static_cast<double>(wrong_fixed) / wrong_total;
    if (on_epoch) on_epoch(log);
    logs.push_back(log);
  }
  return logs;
}

namespace {

double head_grad_norm(const MatchHead& head) {
  double s = 0.0;
  for (const auto& p : head.parameters()) {
    for (double g : p.tensor.grad()) s += g * g;
  }
  return std::sqrt(s);
}

}  // namespace

GradientPathNorms head_gradient_paths(const IotaModel& model, std::span<const PreparedSample> batch,
                                      const TripletIndex& triplets, double lambda) {
  auto params = model.trainable_parameters();
  GradientPathNorms out;
  for (auto& p : params) p.tensor.zero_grad();
  {
    auto terms = batch_objective(model, batch, triplets, lambda);
    backward(terms.cls);
    out.head_from_cls = head_grad_norm(model.head());
  }
  for (auto& p : params) p.tensor.zero_grad();
  {
    auto terms = batch_objective(model, batch, triplets, lambda);
    backward(scale(terms.ckg, lambda));
    out.head_from_ckg = head_grad_norm(model.head());
  }
  for (auto& p : params) p.tensor.zero_grad();
  return out;
}

}  // namespace ckpl
