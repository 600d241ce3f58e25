#pragma once

#include <cstddef>
#include <cstdint>

#include "ckpl/corrective_knowledge.hpp"
#include "ckpl/params.hpp"
#include "ckpl/tensor.hpp"

namespace ckpl {

// Stabilizer inside log(1 - P(k_B) + eps) of the corrective-knowledge loss.
inline constexpr double kCkgEpsilon = 1e-8;
inline constexpr double kDefaultTau = 0.1;

// Parameters of the MATCH head: a two-layer MLP (GELU between the layers)
// followed by a layer norm. All tensors are trainable.
struct MatchHead {
  Tensor fc1_weight, fc1_bias;  // [d, hidden], [hidden]
  Tensor fc2_weight, fc2_bias;  // [hidden, d], [d]
  Tensor norm_gamma, norm_beta;  // [d]

  // hidden == 0 selects hidden = d.
  static MatchHead create(std::size_t dim, std::size_t hidden, std::uint64_t seed);

  std::size_t dim() const { return norm_gamma.size(); }
  ParameterList parameters() const;
  MatchHead clone() const;
};

// m = c_L + relu(layer_norm(mlp(c_L))).
Tensor compute_match_token(const MatchHead& head, const Tensor& c_l);

// Cosine similarity of m_hat with every k_j, as a [S] tensor.
Tensor match_similarities(const Tensor& m_hat, const KnowledgePromptSet& prompt_set);

struct MatchDistribution {
  Tensor probs;  // [S]
  double tau = kDefaultTau;
};

// P(k_j | m) = softmax_j(cos(m, k_j) / tau). Throws ParameterError for tau <= 0.
MatchDistribution match_distribution(const Tensor& m_hat, const KnowledgePromptSet& prompt_set,
                                     double tau);

// -log P(k_A) - [A != B] log(1 - P(k_B) + eps), A and B being entry indices.
Tensor ckg_loss(const MatchDistribution& dist, std::size_t true_entry, std::size_t wrong_entry);

struct AggregatedPrompt {
  Tensor v_hat;    // [prompt_length, d]
  Tensor weights;  // [S]
};

// v_hat = sum_j w_j * l2_normalize_rows(v_j) with w = match_distribution(...).probs.
AggregatedPrompt aggregate_prompt(const Tensor& m_hat, const KnowledgePromptSet& prompt_set,
                                  double tau);
// Same aggregation with weights already computed (e.g. MatchDistribution::probs).
AggregatedPrompt aggregate_prompt(const Tensor& weights, const KnowledgePromptSet& prompt_set);

}  // namespace ckpl
