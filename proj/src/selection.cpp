#include "ckpl/selection.hpp"

#include <cmath>

#include "ckpl/errors.hpp"
#include "ckpl/ops.hpp"
#include "ckpl/random.hpp"

namespace ckpl {

MatchHead MatchHead::create(std::size_t dim, std::size_t hidden, std::uint64_t seed) {
  if (dim == 0) throw ParameterError("match head dimension must be positive");
  if (hidden == 0) hidden = dim;
  Rng rng(mix_seed(seed, stable_hash("match_head")));
  MatchHead h;
  h.fc1_weight = rng.gaussian({dim, hidden}, 1.0 / std::sqrt(static_cast<double>(dim)), true);
  h.fc1_bias = Tensor::zeros({hidden}, true);
  h.fc2_weight = rng.gaussian({hidden, dim}, 1.0 / std::sqrt(static_cast<double>(hidden)), true);
  h.fc2_bias = Tensor::zeros({dim}, true);
  h.norm_gamma = Tensor::full({dim}, 1.0, true);
  h.norm_beta = Tensor::zeros({dim}, true);
  return h;
}

ParameterList MatchHead::parameters() const {
  return {{"match.fc1_weight", fc1_weight}, {"match.fc1_bias", fc1_bias},
          {"match.fc2_weight", fc2_weight}, {"match.fc2_bias", fc2_bias},
          {"match.norm_gamma", norm_gamma}, {"match.norm_beta", norm_beta}};
}

MatchHead MatchHead::clone() const {
  auto copy = [](const Tensor& t) {
    Tensor c = t.detach();
    c.set_requires_grad(true);
    return c;
  };
  return {copy(fc1_weight), copy(fc1_bias), copy(fc2_weight),
          copy(fc2_bias),   copy(norm_gamma), copy(norm_beta)};
}

Tensor compute_match_token(const MatchHead& head, const Tensor& c_l) {
  if (c_l.rank() != 1 || c_l.size() != head.dim()) {
    throw DimensionError("match head expects a [" + std::to_string(head.dim()) +
                         "] token, got " + shape_str(c_l.shape()));
  }
  Tensor hidden = gelu(linear(c_l, head.fc1_weight, head.fc1_bias));
  Tensor delta = relu(layer_norm(linear(hidden, head.fc2_weight, head.fc2_bias), head.norm_gamma,
                                 head.norm_beta));
  return add(c_l, delta);
}

Tensor match_similarities(const Tensor& m_hat, const KnowledgePromptSet& prompt_set) {
  if (m_hat.size() != prompt_set.dim()) {
    throw DimensionError("MATCH token of shape " + shape_str(m_hat.shape()) +
                         " does not match knowledge dim " + std::to_string(prompt_set.dim()));
  }
  std::vector<Tensor> sims;
  sims.reserve(prompt_set.size());
  for (const auto& e : prompt_set.entries()) sims.push_back(cosine_similarity(m_hat, e.key));
  return stack(sims);
}

MatchDistribution match_distribution(const Tensor& m_hat, const KnowledgePromptSet& prompt_set,
                                     double tau) {
  if (!(tau > 0.0)) throw ParameterError("temperature must be positive, got " + std::to_string(tau));
  return {softmax_with_temperature(match_similarities(m_hat, prompt_set), tau), tau};
}

Tensor ckg_loss(const MatchDistribution& dist, std::size_t true_entry, std::size_t wrong_entry) {
  const std::size_t s = dist.probs.size();
  if (true_entry >= s || wrong_entry >= s) {
    throw IndexError("ckg_loss: entries (" + std::to_string(true_entry) + ", " +
                     std::to_string(wrong_entry) + ") out of range for " + std::to_string(s) +
                     " prompts");
  }
  Tensor loss = scale(log(select(dist.probs, true_entry)), -1.0);
  if (true_entry == wrong_entry) return loss;
  // log(1 - P_B + eps) built as log(eps + 1 - P_B) with the constant folded in.
  Tensor one_minus = add(scale(select(dist.probs, wrong_entry), -1.0),
                         Tensor::scalar(1.0 + kCkgEpsilon));
  return sub(loss, log(one_minus));
}

AggregatedPrompt aggregate_prompt(const Tensor& weights, const KnowledgePromptSet& prompt_set) {
  if (weights.rank() != 1 || weights.size() != prompt_set.size()) {
    throw DimensionError("aggregation weights of shape " + shape_str(weights.shape()) + " for " +
                         std::to_string(prompt_set.size()) + " prompts");
  }
  std::vector<Tensor> normalized;
  normalized.reserve(prompt_set.size());
  for (const auto& e : prompt_set.entries()) normalized.push_back(l2_normalize_rows(e.prompt));
  return {weighted_sum(weights, normalized), weights};
}

AggregatedPrompt aggregate_prompt(const Tensor& m_hat, const KnowledgePromptSet& prompt_set,
                                  double tau) {
  return aggregate_prompt(match_distribution(m_hat, prompt_set, tau).probs, prompt_set);
}

}  // namespace ckpl
