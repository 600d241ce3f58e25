#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ckpl/curriculum.hpp"
#include "ckpl/encoders.hpp"
#include "ckpl/params.hpp"
#include "ckpl/prompt.hpp"
#include "ckpl/tensor.hpp"

namespace ckpl {

inline constexpr std::size_t kDefaultPromptLength = 2;
inline constexpr double kPromptInitStd = 0.02;

// Nearest centroid by cosine similarity; ties go to the lowest class index.
std::vector<std::size_t> predict_base(std::span<const Tensor> features,
                                      const ClassCentroids& centroids);
std::size_t predict_base(const Tensor& feature, const ClassCentroids& centroids);

// {sample, true class A, predicted class B}; A == B is a correct prediction.
struct CorrectiveTriplet {
  std::size_t sample_id = 0;
  std::size_t true_class = 0;
  std::size_t predicted_class = 0;

  bool is_correct() const { return true_class == predicted_class; }
  friend bool operator==(const CorrectiveTriplet&, const CorrectiveTriplet&) = default;
};

// One triplet per sample, in order; sample_id is the position.
std::vector<CorrectiveTriplet> build_triplets(std::span<const std::size_t> labels,
                                              std::span<const std::size_t> predictions);

using TripletIndex = std::unordered_map<std::size_t, CorrectiveTriplet>;
TripletIndex index_triplets(std::span<const CorrectiveTriplet> triplets);

struct VerbalizedKnowledge {
  HumanPrompt true_prompt;
  std::optional<HumanPrompt> wrong_prompt;  // present iff A != B
};

// Throws LookupError when a class name is missing.
VerbalizedKnowledge verbalize(const CorrectiveTriplet& triplet, const PromptTemplate& tmpl,
                              std::span<const std::string> class_names);

struct PromptEntry {
  Tensor key;     // k_j, frozen, unit norm, [d]
  Tensor prompt;  // v_j, trainable, [prompt_length, d]
};

// The task's knowledge prompt set: one (k_j, v_j) pair per class.
class KnowledgePromptSet {
 public:
  KnowledgePromptSet(std::vector<PromptEntry> entries, std::vector<std::size_t> class_to_entry);

  std::size_t size() const { return entries_.size(); }
  const PromptEntry& entry(std::size_t j) const { return entries_.at(j); }
  const std::vector<PromptEntry>& entries() const { return entries_; }
  // Throws IndexError for an unknown class.
  std::size_t class_index_of(std::size_t cls) const;
  std::size_t prompt_length() const { return entries_.front().prompt.dim(0); }
  std::size_t dim() const { return entries_.front().key.size(); }

  std::vector<Tensor> keys() const;
  std::vector<Tensor> prompts() const;
  // Trainable v_j tensors keyed "prompts.v.<j>".
  ParameterList parameters() const;
  // Copy with freshly allocated prompt tensors (keys are shared, they are frozen).
  KnowledgePromptSet clone() const;

 private:
  std::vector<PromptEntry> entries_;
  std::vector<std::size_t> class_to_entry_;
};

// k_j = encode_prompt(render(class j)); v_j ~ N(0, 0.02^2), seeded.
// Throws ConstructionError on duplicate or missing class names.
KnowledgePromptSet build_prompt_set(std::span<const std::string> class_names,
                                    const PromptTemplate& tmpl, const KnowledgeEncoder& encoder,
                                    std::size_t prompt_length, std::size_t embed_dim,
                                    std::uint64_t seed);

// One JSON object per line: sample_id, A, B, true_text, wrong_text ("" when A == B).
void write_triplets_jsonl(std::ostream& os, std::span<const CorrectiveTriplet> triplets,
                          const PromptTemplate& tmpl, std::span<const std::string> class_names);

}  // namespace ckpl
