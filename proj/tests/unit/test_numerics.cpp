#include <cmath>
#include <functional>
#include <numbers>

#include "ckpl/errors.hpp"
#include "ckpl/grad_check.hpp"
#include "ckpl/ops.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace ckpl;
using ckpl::test::randn;

TEST_CASE("matmul examples") {
  Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor b = Tensor::matrix(2, 2, {3, 4, 5, 6});
  CHECK(test::to_vec(matmul(eye, b)) == std::vector<double>{3, 4, 5, 6});
  Tensor r = matmul(Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(2, 1, {3, 4}));
  CHECK(r.shape() == Shape{1, 1});
  CHECK(r[0] == 11.0);
  CHECK_THROWS_AS(matmul(Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(1, 2, {1, 2})),
                  DimensionError);
}

TEST_CASE("matmul gradient of sum is b transposed broadcast") {
  Rng rng(7);
  Tensor a = randn(rng, {3, 4});
  Tensor b = randn(rng, {4, 2}, false);
  backward(sum(matmul(a, b)));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      double expect = b.at(k, 0) + b.at(k, 1);
      CHECK(a.grad()[i * 4 + k] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  auto report = grad_check([&] { return sum(matmul(a, b)); }, {a}, 1e-5, 1e-6);
  CHECK(report.passed());
}

TEST_CASE("softmax with temperature examples") {
  auto half = softmax_with_temperature(std::vector<double>{0, 0}, 1.0);
  CHECK(half[0] == doctest::Approx(0.5));
  CHECK(half[1] == doctest::Approx(0.5));
  auto one = softmax_with_temperature(std::vector<double>{5}, 0.1);
  CHECK(one[0] == 1.0);
  auto sharp = softmax_with_temperature(std::vector<double>{1, 0}, 0.1);
  CHECK(std::abs(sharp[0] - 0.9999546) < 1e-6);
  CHECK(std::abs(sharp[1] - 0.0000454) < 1e-6);
  // oracle for the closed form
  CHECK(std::abs(sharp[0] - 1.0 / (1.0 + std::exp(-10.0))) < 1e-15);
  CHECK_THROWS_AS(softmax_with_temperature(std::vector<double>{1, 2}, 0.0), ParameterError);
  CHECK_THROWS_AS(softmax_with_temperature(std::vector<double>{}, 1.0), DimensionError);
}

TEST_CASE("softmax sums to one and ignores a constant shift") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng.index(9);
    double tau = rng.uniform(0.01, 3.0);
    std::vector<double> z(n);
    for (auto& v : z) v = rng.normal(0.0, 5.0);
    auto p = softmax_with_temperature(z, tau);
    double total = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
    double c = rng.normal(0.0, 10.0);
    std::vector<double> shifted = z;
    for (auto& v : shifted) v += c;
    auto q = softmax_with_temperature(shifted, tau);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-12);
  }
}

TEST_CASE("cosine similarity examples and properties") {
  std::vector<double> u{1, 2, 3}, v{4, 5, 6};
  CHECK(std::abs(cosine_similarity(u, v) - 0.974631846) < 1e-8);
  CHECK(std::abs(cosine_similarity(u, v) - 32.0 / (std::sqrt(14.0) * std::sqrt(77.0))) < 1e-15);
  CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
  CHECK(cosine_similarity(u, u) == doctest::Approx(1.0).epsilon(1e-15));

  Tensor zero = Tensor::zeros({3}, true);
  Tensor other = Tensor::vector({1, 2, 3}, true);
  Tensor c = cosine_similarity(zero, other);
  CHECK(c.item() == 0.0);
  backward(c);
  for (double g : zero.grad()) CHECK(g == 0.0);
  for (double g : other.grad()) CHECK(g == 0.0);

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(6), b(6);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    double base = cosine_similarity(a, b);
    CHECK(std::abs(base - cosine_similarity(b, a)) < 1e-12);
    double alpha = rng.uniform(0.01, 100.0), beta = rng.uniform(0.01, 100.0);
    auto as = a, bs = b;
    for (auto& x : as) x *= alpha;
    for (auto& x : bs) x *= beta;
    CHECK(std::abs(base - cosine_similarity(as, bs)) < 1e-12);
  }
}

TEST_CASE("relu, l2_normalize and cross entropy examples") {
  CHECK(test::to_vec(relu(Tensor::vector({-1, 2}))) == std::vector<double>{0, 2});
  Tensor n = l2_normalize(Tensor::vector({3, 4}));
  CHECK(std::abs(n[0] - 0.6) < 1e-15);
  CHECK(std::abs(n[1] - 0.8) < 1e-15);
  for (std::size_t c : {2u, 4u, 10u}) {
    Tensor logits = Tensor::full({c}, 0.37);
    for (std::size_t label = 0; label < c; ++label) {
      CHECK(std::abs(cross_entropy(logits, label).item() - std::log(double(c))) < 1e-12);
    }
    CHECK_THROWS_AS(cross_entropy(logits, c), IndexError);
  }
}

TEST_CASE("grad_check examples") {
  Rng rng(5);
  Tensor x = randn(rng, {8});
  auto report = grad_check([&] { return sum(mul(x, x)); }, {x}, 1e-5, 1e-6);
  CHECK(report.passed());
  CHECK(report.entries_checked == 8);

  Tensor bad = randn(rng, {2});
  auto nan_fn = [&] { return log(scale(sum(mul(bad, bad)), -1.0)); };
  CHECK_THROWS_AS(grad_check(nan_fn, {bad}), EvaluationError);
}

TEST_CASE("frozen tensors get no gradient") {
  Rng rng(9);
  Tensor frozen = randn(rng, {3, 3}, false);
  Tensor live = randn(rng, {3, 3});
  backward(sum(matmul(frozen, live)));
  CHECK_FALSE(frozen.has_grad());
  CHECK(live.has_grad());
}

namespace {

using Builder = std::function<Tensor(const std::vector<Tensor>&)>;

struct OpCase {
  const char* name;
  std::function<std::vector<Tensor>(Rng&)> make_inputs;
  Builder apply;
};

Tensor positive(Rng& rng, Shape shape) {
  Tensor t = rng.gaussian(std::move(shape), 1.0, true);
  for (auto& v : t.mutable_values()) v = 0.5 + std::abs(v);
  return t;
}

std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  auto mk = [](std::vector<Shape> shapes) {
    return [shapes](Rng& rng) {
      std::vector<Tensor> out;
      for (const auto& s : shapes) out.push_back(rng.gaussian(s, 1.0, true));
      return out;
    };
  };
  cases.push_back({"matmul", mk({{3, 4}, {4, 2}}),
                   [](const auto& p) { return matmul(p[0], p[1]); }});
  cases.push_back({"transpose", mk({{3, 2}}), [](const auto& p) { return transpose(p[0]); }});
  cases.push_back({"add", mk({{2, 3}, {2, 3}}), [](const auto& p) { return add(p[0], p[1]); }});
  cases.push_back({"sub", mk({{4}, {4}}), [](const auto& p) { return sub(p[0], p[1]); }});
  cases.push_back({"mul", mk({{2, 3}, {2, 3}}), [](const auto& p) { return mul(p[0], p[1]); }});
  cases.push_back({"scale", mk({{5}}), [](const auto& p) { return scale(p[0], -1.7); }});
  cases.push_back({"add_n", mk({{3}, {3}, {3}}),
                   [](const auto& p) { return add_n(std::span<const Tensor>(p)); }});
  cases.push_back({"linear", mk({{3, 4}, {4, 5}, {5}}),
                   [](const auto& p) { return linear(p[0], p[1], p[2]); }});
  cases.push_back({"linear_vec", mk({{4}, {4, 2}, {2}}),
                   [](const auto& p) { return linear(p[0], p[1], p[2]); }});
  cases.push_back({"relu", mk({{6}}), [](const auto& p) { return relu(p[0]); }});
  cases.push_back({"gelu", mk({{6}}), [](const auto& p) { return gelu(p[0]); }});
  cases.push_back({"log", [](Rng& rng) { return std::vector<Tensor>{positive(rng, {5})}; },
                   [](const auto& p) { return log(p[0]); }});
  cases.push_back({"sum", mk({{2, 3}}), [](const auto& p) { return sum(p[0]); }});
  cases.push_back({"layer_norm", mk({{3, 6}, {6}, {6}}),
                   [](const auto& p) { return layer_norm(p[0], p[1], p[2]); }});
  cases.push_back({"layer_norm_vec", mk({{6}, {6}, {6}}),
                   [](const auto& p) { return layer_norm(p[0], p[1], p[2]); }});
  cases.push_back({"softmax_rows", mk({{3, 4}}), [](const auto& p) { return softmax_rows(p[0]); }});
  cases.push_back({"softmax_tau", mk({{5}}),
                   [](const auto& p) { return softmax_with_temperature(p[0], 0.3); }});
  cases.push_back({"cosine", mk({{5}, {5}}),
                   [](const auto& p) { return cosine_similarity(p[0], p[1]); }});
  cases.push_back({"l2_normalize", mk({{5}}), [](const auto& p) { return l2_normalize(p[0]); }});
  cases.push_back({"l2_normalize_rows", mk({{3, 4}}),
                   [](const auto& p) { return l2_normalize_rows(p[0]); }});
  cases.push_back({"cross_entropy", mk({{5}}),
                   [](const auto& p) { return cross_entropy(p[0], 2); }});
  cases.push_back({"select", mk({{4}}), [](const auto& p) { return select(p[0], 3); }});
  cases.push_back({"stack", mk({{}, {}, {}}),
                   [](const auto& p) { return stack(std::span<const Tensor>(p)); }});
  cases.push_back({"reshape", mk({{2, 3}}), [](const auto& p) { return reshape(p[0], {3, 2}); }});
  cases.push_back({"concat_rows", mk({{2, 3}, {3}, {1, 3}}),
                   [](const auto& p) { return concat_rows(std::span<const Tensor>(p)); }});
  cases.push_back({"slice_rows", mk({{4, 3}}), [](const auto& p) { return slice_rows(p[0], 1, 3); }});
  cases.push_back({"row", mk({{4, 3}}), [](const auto& p) { return row(p[0], 2); }});
  cases.push_back({"slice_cols", mk({{3, 5}}), [](const auto& p) { return slice_cols(p[0], 1, 4); }});
  cases.push_back({"concat_cols", mk({{3, 2}, {3, 1}}),
                   [](const auto& p) { return concat_cols(std::span<const Tensor>(p)); }});
  cases.push_back({"weighted_sum", mk({{3}, {2, 4}, {2, 4}, {2, 4}}), [](const auto& p) {
                     std::vector<Tensor> items(p.begin() + 1, p.end());
                     return weighted_sum(p[0], items);
                   }});
  return cases;
}

}  // namespace

TEST_CASE("every op matches central differences on 100 random instances") {
  for (const auto& op : op_cases()) {
    CAPTURE(op.name);
    double worst = 0.0;
    bool all_pass = true;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
      Rng rng(mix_seed(trial, stable_hash(op.name)));
      auto inputs = op.make_inputs(rng);
      Tensor probe = op.apply(inputs);
      Tensor w = rng.gaussian(probe.shape(), 1.0, false);
      auto f = [&] { return sum(mul(op.apply(inputs), w)); };
      auto report = grad_check(f, inputs, 1e-5, 1e-4);
      worst = std::max(worst, report.max_rel_error);
      all_pass = all_pass && report.passed();
    }
    CAPTURE(worst);
    CHECK(all_pass);
  }
}

TEST_CASE("tape visits each node once") {
  Rng rng(2);
  Tensor x = randn(rng, {3});
  Tensor y = mul(x, x);
  Tensor loss = sum(add(y, y));
  Tape tape(loss);
  std::size_t visited = tape.backward();
  CHECK(visited == tape.size());
  for (std::size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(4.0 * x[i]));
}
