#include <cmath>
#include <numbers>

#include "ckpl/errors.hpp"
#include "ckpl/harness.hpp"
#include "ckpl/ops.hpp"
#include "ckpl/params.hpp"
#include "ckpl/training.hpp"
#include "ckpl/two_stage.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace ckpl;

namespace {

struct Fixture {
  AdaptationTask task;
  BaseView view;
  TrainConfig config;
  TripletIndex triplets;

  explicit Fixture(std::uint64_t seed, std::size_t epochs = 3)
      : task(test::tiny_task(seed)), view(base_view(task)), config(test::quick_config(seed, epochs)) {
    auto ts = build_triplets(labels_of(task.train), view.train_predictions);
    triplets = index_triplets(ts);
  }

  IotaModel model() const { return create_task_model(task, view, config); }
  std::span<const PreparedSample> batch(std::size_t n) const {
    return std::span<const PreparedSample>(task.train).first(n);
  }
};

std::vector<std::vector<double>> snapshot(const ParameterList& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.push_back(test::to_vec(p.tensor));
  return out;
}

}  // namespace

TEST_CASE("train config defaults and validation") {
  TrainConfig c;
  CHECK(c.lambda == 0.2);
  CHECK(c.tau == 0.1);
  CHECK(c.prompt_length == 2);
  CHECK(c.epochs == 50);
  CHECK(c.batch_size == 32);
  CHECK(c.lr_initial == 0.003);
  CHECK(c.lr_final == 0.0001);
  CHECK(c.lr_initial_hard_stage == 0.0005);
  CHECK(c.lr_final <= c.lr_initial);
  CHECK_NOTHROW(c.validate());
  c.lr_final = 0.1;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = TrainConfig{};
  c.tau = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("cosine schedule examples") {
  CHECK(cosine_lr(0, 100, 0.003, 0.0001) == 0.003);
  CHECK(std::abs(cosine_lr(100, 100, 0.003, 0.0001) - 0.0001) < 1e-15);
  CHECK(std::abs(cosine_lr(50, 100, 0.003, 0.0001) - (0.003 + 0.0001) / 2) < 1e-12);
  CHECK(cosine_lr(0, 0, 0.5, 0.1) == 0.5);
  double prev = 1.0;
  for (std::size_t s = 0; s <= 40; ++s) {
    double lr = cosine_lr(s, 40, 0.9, 0.1);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("total loss examples") {
  // logits [a, 0] with label 0 give CE = log(1 + e^-a); pick a so CE = 1
  double a = -std::log(std::numbers::e - 1.0);
  Tensor logits = Tensor::vector({a, 0.0});
  MatchDistribution dist{Tensor::vector({std::exp(-0.5), 1.0 - std::exp(-0.5)}), 0.1};
  auto t = total_loss(logits, 0, dist, 0, 0, 0.2);
  CHECK(std::abs(t.cls.item() - 1.0) < 1e-12);
  CHECK(std::abs(t.ckg.item() - 0.5) < 1e-12);
  CHECK(std::abs(t.total.item() - 1.1) < 1e-12);
  auto zero = total_loss(logits, 0, dist, 0, 1, 0.0);
  CHECK(zero.total.item() == zero.cls.item());
}

TEST_CASE("classifier from centroids is the nearest-centroid rule") {
  Rng rng(17);
  std::vector<std::optional<Tensor>> cs;
  std::vector<Tensor> raw;
  for (int k = 0; k < 4; ++k) {
    raw.push_back(rng.gaussian({6}, 1.0));
    cs.emplace_back(raw.back());
  }
  ClassCentroids cents(cs, {1, 1, 1, 1});
  auto clf = classifier_from_centroids(cents, 10.0);
  CHECK(clf.num_classes() == 4);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor x = rng.gaussian({6}, 1.5);
    auto logits = clf.logits(x);
    std::size_t arg = 0, near = 0;
    double best = 1e300;
    for (std::size_t k = 0; k < 4; ++k) {
      if (logits[k] > logits[arg]) arg = k;
      double d = 0.0;
      for (std::size_t i = 0; i < 6; ++i) d += (x[i] - raw[k][i]) * (x[i] - raw[k][i]);
      if (d < best) {
        best = d;
        near = k;
      }
    }
    CHECK(arg == near);
  }
}

TEST_CASE("zero learning rate leaves every parameter bit-identical") {
  Fixture fx(1);
  auto model = fx.model();
  auto before = snapshot(model.trainable_parameters());
  auto frozen_before = params_sha256(model.frozen_parameters());
  train_step(model, fx.batch(8), fx.triplets, fx.config, 0.0);
  CHECK(snapshot(model.trainable_parameters()) == before);
  CHECK(params_sha256(model.frozen_parameters()) == frozen_before);
}

TEST_CASE("one SGD step at lr 0.003 lowers the batch loss on average") {
  double total_drop = 0.0;
  int drops = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Fixture fx(seed);
    auto model = fx.model();
    auto b = fx.batch(8);
    double first = train_step(model, b, fx.triplets, fx.config, 0.003).total;
    double second = batch_objective(model, b, fx.triplets, fx.config.lambda).total.item();
    total_drop += first - second;
    drops += second < first;
  }
  CHECK(total_drop > 0.0);
  CHECK(drops >= 8);
}

TEST_CASE("NCLS moves away from c_0 after a step") {
  Fixture fx(2);
  auto model = fx.model();
  auto c0 = test::to_vec(model.base().cls_token());
  CHECK(test::to_vec(model.ncls().c_prime) == c0);
  train_step(model, fx.batch(8), fx.triplets, fx.config, 0.05);
  double moved = 0.0;
  for (std::size_t i = 0; i < c0.size(); ++i) moved += std::abs(model.ncls().c_prime[i] - c0[i]);
  CHECK(moved > 0.0);
}

TEST_CASE("trainable parameters are a small share of the total") {
  Fixture fx(3);
  auto model = fx.model();
  auto trainable = count_values(model.trainable_parameters());
  auto frozen = count_values(model.frozen_parameters());
  MESSAGE("trainable " << trainable << " frozen " << frozen);
  CHECK(trainable > 0);
  CHECK(trainable < frozen);
  for (const auto& p : model.frozen_parameters()) CHECK_FALSE(p.tensor.requires_grad());
  for (const auto& p : model.trainable_parameters()) CHECK(p.tensor.requires_grad());
}

TEST_CASE("frozen hash, loss decomposition and determinism over a training run") {
  Fixture fx(4, 6);
  auto run_once = [&] {
    auto model = fx.model();
    auto before = params_sha256(model.frozen_parameters());
    auto log = train(model, fx.task.train, fx.triplets, fx.config, fx.config.lr_initial,
                     fx.config.lr_final);
    CHECK(params_sha256(model.frozen_parameters()) == before);
    for (const auto& e : log) {
      CHECK(std::abs(e.loss_total - (e.loss_cls + fx.config.lambda * e.loss_ckg)) < 1e-9);
    }
    return evaluate(model, fx.task.test, fx.view.test_predictions, fx.config.lambda);
  };
  auto a = run_once();
  auto b = run_once();
  CHECK(a.metrics == b.metrics);
  CHECK(a.predictions == b.predictions);
}

TEST_CASE("with lambda 0 the ckg path sends nothing to the match head") {
  Fixture fx(5);
  auto model = fx.model();
  auto zero = head_gradient_paths(model, fx.batch(8), fx.triplets, 0.0);
  CHECK(zero.head_from_ckg == 0.0);
  CHECK(zero.head_from_cls > 0.0);
  auto live = head_gradient_paths(model, fx.batch(8), fx.triplets, 0.2);
  CHECK(live.head_from_ckg > 0.0);
}

TEST_CASE("metrics examples") {
  std::vector<std::size_t> labels{0, 1, 2, 3, 1};
  std::vector<std::size_t> base{0, 2, 2, 1, 1};
  auto perfect = metrics_from_predictions(labels, labels, base, 4);
  CHECK(perfect.accuracy == 1.0);
  REQUIRE(perfect.correction_rate.has_value());
  CHECK(*perfect.correction_rate == 1.0);
  CHECK(perfect.wrong_subset_size == 2);
  auto same = metrics_from_predictions(labels, base, base, 4);
  CHECK(*same.correction_rate == 0.0);
  auto none_wrong = metrics_from_predictions(labels, labels, labels, 4);
  CHECK_FALSE(none_wrong.correction_rate.has_value());
  CHECK(same.per_class_accuracy == std::vector<double>{1.0, 0.5, 1.0, 0.0});
}

TEST_CASE("full objective gradient check") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto r = check_objective_gradients(seed);
    CAPTURE(seed);
    CHECK(r.ckg.passed());
    CHECK(r.total.passed());
    CHECK(r.total.entries_checked > 100);
  }
}

TEST_CASE("a sample without a triplet is rejected") {
  Fixture fx(6);
  auto model = fx.model();
  TripletIndex empty;
  CHECK_THROWS_AS(train_step(model, fx.batch(2), empty, fx.config, 0.01), LookupError);
}
