#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "ckpl/curriculum.hpp"
#include "ckpl/errors.hpp"
#include "ckpl/io.hpp"
#include "ckpl/ops.hpp"
#include "ckpl/two_stage.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace ckpl;

namespace {

struct Pool {
  std::vector<Tensor> features;
  std::vector<std::size_t> labels;
};

Pool clustered_pool(std::uint64_t seed, std::size_t n, std::size_t classes, std::size_t d) {
  Rng rng(seed);
  std::vector<Tensor> means;
  for (std::size_t k = 0; k < classes; ++k) means.push_back(rng.gaussian({d}, 1.0));
  Pool p;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = rng.index(classes);
    Tensor noise = rng.gaussian({d}, 0.8);
    std::vector<double> v(d);
    for (std::size_t j = 0; j < d; ++j) v[j] = means[k][j] + noise[j];
    p.features.push_back(Tensor::vector(v));
    p.labels.push_back(k);
  }
  return p;
}

double brute_cos_distance(const Tensor& a, const Tensor& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

// Full sort per class, ties by id.
std::vector<std::vector<std::size_t>> sort_oracle(const Pool& p, const std::vector<double>& d,
                                                  std::size_t classes, std::size_t n, bool hard) {
  std::vector<std::vector<std::size_t>> out(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < p.labels.size(); ++i) {
      if (p.labels[i] == k) ids.push_back(i);
    }
    std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
      return hard ? d[a] > d[b] : d[a] < d[b];
    });
    ids.resize(std::min(n, ids.size()));
    out[k] = ids;
  }
  return out;
}

}  // namespace

TEST_CASE("centroid examples") {
  std::vector<Tensor> f{Tensor::vector({1, 2}), Tensor::vector({3, 4})};
  std::vector<std::size_t> l{0, 1};
  auto c = class_centroids(f, l, 3);
  CHECK(test::to_vec(c.centroid(0)) == std::vector<double>{1, 2});
  CHECK(test::to_vec(c.centroid(1)) == std::vector<double>{3, 4});
  CHECK_FALSE(c.has(2));
  CHECK_THROWS_AS(c.centroid(2), MissingCentroidError);

  std::vector<Tensor> sym{Tensor::vector({1, -2}), Tensor::vector({-1, 2})};
  std::vector<std::size_t> same{0, 0};
  auto z = class_centroids(sym, same, 1);
  CHECK(test::to_vec(z.centroid(0)) == std::vector<double>{0, 0});
  CHECK(difficulty(Tensor::vector({1, 0}), z.centroid(0)) == 1.0);

  auto pool = clustered_pool(9, 120, 4, 5);
  auto cs = class_centroids(pool.features, pool.labels, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<double> mean(5, 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < pool.labels.size(); ++i) {
      if (pool.labels[i] != k) continue;
      ++n;
      for (std::size_t j = 0; j < 5; ++j) mean[j] += pool.features[i][j];
    }
    CHECK(cs.count(k) == n);
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(cs.centroid(k)[j] - mean[j] / n) < 1e-12);
  }
}

TEST_CASE("difficulty examples and scale invariance") {
  Tensor o = Tensor::vector({0.3, -1.2, 2.0});
  CHECK(std::abs(difficulty(o, o)) < 1e-15);
  CHECK(std::abs(difficulty(scale(o, -1.0), o) - 2.0) < 1e-15);
  CHECK(std::abs(difficulty(Tensor::vector({1, 0}), Tensor::vector({1, 1})) - 0.29289) < 1e-5);
  CHECK(std::abs(difficulty(Tensor::vector({1, 0}), Tensor::vector({1, 1})) - (1 - 1 / std::sqrt(2.0))) <
        1e-15);
  Rng rng(13);
  for (int t = 0; t < 100; ++t) {
    Tensor e = rng.gaussian({7}, 1.0), c = rng.gaussian({7}, 1.0);
    double alpha = rng.uniform(0.01, 50), beta = rng.uniform(0.01, 50);
    CHECK(std::abs(difficulty(scale(e, alpha), scale(c, beta)) - difficulty(e, c)) < 1e-12);
  }
}

TEST_CASE("selection examples") {
  // three samples with D = 0.1, 0.5, 0.9 against a unit centroid along x
  Tensor o = Tensor::vector({1, 0});
  std::vector<Tensor> f;
  for (double d : {0.1, 0.5, 0.9}) {
    double c = 1.0 - d;
    f.push_back(Tensor::vector({c, std::sqrt(1 - c * c)}));
  }
  std::vector<std::size_t> l{0, 0, 0};
  auto cents = class_centroids(std::vector<Tensor>{o}, std::vector<std::size_t>{0}, 1);
  CHECK(select_easy(f, l, cents, 1).per_class[0] == std::vector<std::size_t>{0});
  CHECK(select_hard(f, l, cents, 1).per_class[0] == std::vector<std::size_t>{2});
  auto all = select_easy(f, l, cents, 3).flatten();
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::size_t>{0, 1, 2});
  auto short_class = select_easy(f, l, cents, 5);
  CHECK(short_class.per_class[0].size() == 3);
  CHECK_FALSE(short_class.warnings.empty());
  CHECK(select_hard(f, l, cents, 2, {2}).per_class[0] == std::vector<std::size_t>{1, 0});
}

TEST_CASE("ranking and selection match sort oracles on 20 instances") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto pool = clustered_pool(seed + 500, 100 + seed * 5, 4, 6);
    auto cents = class_centroids(pool.features, pool.labels, 4);
    auto scores = difficulty_scores(pool.features, pool.labels, cents);
    std::vector<double> brute(pool.labels.size());
    for (std::size_t i = 0; i < brute.size(); ++i) {
      brute[i] = brute_cos_distance(pool.features[i], cents.centroid(pool.labels[i]));
      CHECK(std::abs(scores[i] - brute[i]) < 1e-12);
    }
    std::size_t n = 8;
    CHECK(select_easy(pool.features, pool.labels, cents, n).per_class ==
          sort_oracle(pool, scores, 4, n, false));
    CHECK(select_hard(pool.features, pool.labels, cents, n).per_class ==
          sort_oracle(pool, scores, 4, n, true));
  }
}

TEST_CASE("easy and hard sets are disjoint and ordered by D") {
  auto pool = clustered_pool(77, 160, 4, 6);
  auto cents = class_centroids(pool.features, pool.labels, 4);
  auto scores = difficulty_scores(pool.features, pool.labels, cents);
  auto easy = select_easy(pool.features, pool.labels, cents, 10);
  auto hard = select_hard(pool.features, pool.labels, cents, 10);
  for (std::size_t k = 0; k < 4; ++k) {
    std::set<std::size_t> e(easy.per_class[k].begin(), easy.per_class[k].end());
    double max_easy = 0.0, min_hard = 3.0;
    for (auto id : easy.per_class[k]) max_easy = std::max(max_easy, scores[id]);
    for (auto id : hard.per_class[k]) {
      CHECK(e.count(id) == 0);
      min_hard = std::min(min_hard, scores[id]);
    }
    CHECK(max_easy <= min_hard);
  }
}

TEST_CASE("selection does not depend on dataset order") {
  auto pool = clustered_pool(31, 90, 3, 5);
  auto cents = class_centroids(pool.features, pool.labels, 3);
  auto easy = select_easy(pool.features, pool.labels, cents, 6);
  std::vector<std::size_t> perm(pool.labels.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(4);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  Pool shuffled;
  for (auto i : perm) {
    shuffled.features.push_back(pool.features[i]);
    shuffled.labels.push_back(pool.labels[i]);
  }
  auto easy2 = select_easy(shuffled.features, shuffled.labels, cents, 6);
  for (std::size_t k = 0; k < 3; ++k) {
    std::set<std::size_t> a(easy.per_class[k].begin(), easy.per_class[k].end()), b;
    for (auto id : easy2.per_class[k]) b.insert(perm[id]);
    CHECK(a == b);
  }
}

TEST_CASE("two-stage protocol") {
  auto task = test::tiny_task(3, 20);
  auto cfg = test::quick_config(3, 2);
  CHECK_THROWS_AS(run_two_stage(task, cfg, 0), ParameterError);

  auto r = run_two_stage(task, cfg, 4);
  for (std::size_t k = 0; k < task.num_classes(); ++k) {
    std::set<std::size_t> e(r.split.easy_ids[k].begin(), r.split.easy_ids[k].end());
    CHECK(r.split.easy_ids[k].size() == 4);
    CHECK(r.split.hard_ids[k].size() == 4);
    for (auto id : r.split.hard_ids[k]) CHECK(e.count(id) == 0);
  }
  std::ostringstream os;
  write_split_csv(os, r.split, labels_of(task.train));
  auto rows = parse_csv(os.str());
  CHECK(rows.front() == std::vector<std::string>{"sample_id", "class", "D", "stage"});
  CHECK(rows.size() == task.train.size() + 1);
}

TEST_CASE("zero learning rates give identical stage metrics") {
  auto task = test::tiny_task(8, 16);
  auto cfg = test::quick_config(8, 2);
  cfg.lr_initial = cfg.lr_final = cfg.lr_initial_hard_stage = 0.0;
  auto r = run_two_stage(task, cfg, 4);
  CHECK(r.metrics_e == r.metrics_h);
  CHECK(r.test_predictions_e == r.test_predictions_h);
}

TEST_CASE("single-stage run equals the easy stage of the two-stage run") {
  auto task = test::tiny_task(5, 16);
  auto cfg = test::quick_config(5, 2);
  auto view = base_view(task);
  auto r = run_two_stage(task, cfg, 3);
  std::vector<std::size_t> ids = Selection{r.split.easy_ids, {}}.flatten();
  auto single = run_single_stage(task, view, cfg, ids, "easy");
  CHECK(single.outcome.test.metrics == r.metrics_e);
}
