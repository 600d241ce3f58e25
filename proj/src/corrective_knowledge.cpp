#include "ckpl/corrective_knowledge.hpp"

#include <ostream>
#include <set>

#include "json.hpp"

#include "ckpl/errors.hpp"
#include "ckpl/ops.hpp"
#include "ckpl/random.hpp"

namespace ckpl {

std::size_t predict_base(const Tensor& feature, const ClassCentroids& centroids) {
  std::size_t best = 0;
  double best_sim = 0.0;
  for (std::size_t c = 0; c < centroids.num_classes(); ++c) {
    const double sim = cosine_similarity(feature.values(), centroids.centroid(c).values());
    if (c == 0 || sim > best_sim) {
      best = c;
      best_sim = sim;
    }
  }
  return best;
}

std::vector<std::size_t> predict_base(std::span<const Tensor> features,
                                      const ClassCentroids& centroids) {
  std::vector<std::size_t> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(predict_base(f, centroids));
  return out;
}

std::vector<CorrectiveTriplet> build_triplets(std::span<const std::size_t> labels,
                                              std::span<const std::size_t> predictions) {
  if (labels.size() != predictions.size()) {
    throw DimensionError("build_triplets: " + std::to_string(labels.size()) + " labels, " +
                         std::to_string(predictions.size()) + " predictions");
  }
  std::vector<CorrectiveTriplet> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out.push_back({i, labels[i], predictions[i]});
  return out;
}

TripletIndex index_triplets(std::span<const CorrectiveTriplet> triplets) {
  TripletIndex index;
  for (const auto& t : triplets) index.emplace(t.sample_id, t);
  return index;
}

namespace {

const std::string& class_name(std::span<const std::string> names, std::size_t cls) {
  if (cls >= names.size()) throw LookupError("no class name for class " + std::to_string(cls));
  return names[cls];
}

}  // namespace

VerbalizedKnowledge verbalize(const CorrectiveTriplet& triplet, const PromptTemplate& tmpl,
                              std::span<const std::string> class_names) {
  VerbalizedKnowledge out;
  out.true_prompt = {tmpl.render(class_name(class_names, triplet.true_class)), triplet.true_class,
                     tmpl.id(), Polarity::kTrue};
  if (!triplet.is_correct()) {
    out.wrong_prompt = HumanPrompt{tmpl.render(class_name(class_names, triplet.predicted_class)),
                                   triplet.predicted_class, tmpl.id(), Polarity::kWrong};
  }
  return out;
}

KnowledgePromptSet::KnowledgePromptSet(std::vector<PromptEntry> entries,
                                       std::vector<std::size_t> class_to_entry)
    : entries_(std::move(entries)), class_to_entry_(std::move(class_to_entry)) {
  if (entries_.empty()) throw ConstructionError("knowledge prompt set is empty");
  std::set<std::size_t> targets(class_to_entry_.begin(), class_to_entry_.end());
  if (targets.size() != class_to_entry_.size() || class_to_entry_.size() != entries_.size() ||
      *targets.rbegin() >= entries_.size()) {
    throw ConstructionError("class to entry map is not a bijection");
  }
  const auto shape = entries_.front().prompt.shape();
  for (const auto& e : entries_) {
    if (e.prompt.shape() != shape || e.key.size() != shape.at(1)) {
      throw DimensionError("prompt set entries have inconsistent shapes");
    }
  }
}

std::size_t KnowledgePromptSet::class_index_of(std::size_t cls) const {
  if (cls >= class_to_entry_.size()) {
    throw IndexError("class " + std::to_string(cls) + " has no prompt set entry");
  }
  return class_to_entry_[cls];
}

std::vector<Tensor> KnowledgePromptSet::keys() const {
  std::vector<Tensor> out;
  for (const auto& e : entries_) out.push_back(e.key);
  return out;
}

std::vector<Tensor> KnowledgePromptSet::prompts() const {
  std::vector<Tensor> out;
  for (const auto& e : entries_) out.push_back(e.prompt);
  return out;
}

ParameterList KnowledgePromptSet::parameters() const {
  ParameterList out;
  for (std::size_t j = 0; j < entries_.size(); ++j) {
    out.push_back({"prompts.v." + std::to_string(j), entries_[j].prompt});
  }
  return out;
}

KnowledgePromptSet KnowledgePromptSet::clone() const {
  std::vector<PromptEntry> copy;
  for (const auto& e : entries_) {
    Tensor p = e.prompt.detach();
    p.set_requires_grad(true);
    copy.push_back({e.key, p});
  }
  return KnowledgePromptSet(std::move(copy), class_to_entry_);
}

KnowledgePromptSet build_prompt_set(std::span<const std::string> class_names,
                                    const PromptTemplate& tmpl, const KnowledgeEncoder& encoder,
                                    std::size_t prompt_length, std::size_t embed_dim,
                                    std::uint64_t seed) {
  if (class_names.empty()) throw ConstructionError("prompt set needs at least one class");
  if (prompt_length == 0) throw ParameterError("prompt length must be at least 1");
  if (encoder.dim() != embed_dim) {
    throw DimensionError("knowledge dim " + std::to_string(encoder.dim()) +
                         " differs from embed dim " + std::to_string(embed_dim));
  }
  std::set<std::string> seen;
  for (const auto& n : class_names) {
    if (!seen.insert(n).second) throw ConstructionError("duplicate class name '" + n + "'");
  }
  Rng rng(mix_seed(seed, stable_hash("prompt_set.v")));
  std::vector<PromptEntry> entries;
  std::vector<std::size_t> class_to_entry;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    HumanPrompt prompt{tmpl.render(class_names[c]), c, tmpl.id(), Polarity::kTrue};
    entries.push_back({encode_prompt(encoder, prompt),
                       rng.gaussian({prompt_length, embed_dim}, kPromptInitStd, true)});
    class_to_entry.push_back(c);
  }
  return KnowledgePromptSet(std::move(entries), std::move(class_to_entry));
}

void write_triplets_jsonl(std::ostream& os, std::span<const CorrectiveTriplet> triplets,
                          const PromptTemplate& tmpl, std::span<const std::string> class_names) {
  for (const auto& t : triplets) {
    const auto v = verbalize(t, tmpl, class_names);
    nlohmann::ordered_json j;
    j["sample_id"] = t.sample_id;
    j["A"] = t.true_class;
    j["B"] = t.predicted_class;
    j["true_text"] = v.true_prompt.text;
    j["wrong_text"] = v.wrong_prompt ? v.wrong_prompt->text : std::string();
    os << j.dump() << '\n';
  }
}

}  // namespace ckpl
