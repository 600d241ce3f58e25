#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ckpl/params.hpp"
#include "ckpl/prompt.hpp"
#include "ckpl/tensor.hpp"

namespace ckpl {

struct VisionEncoderConfig {
  std::size_t num_layers = 2;
  std::size_t embed_dim = 16;
  std::size_t num_patches = 4;
  std::size_t num_heads = 2;
  std::uint64_t seed = 42;

  // Throws ValidationError on zero sizes or embed_dim % num_heads != 0.
  void validate() const;
};

// Pre-norm transformer block: x + attn(ln1(x)), then h + mlp(ln2(h)).
struct TransformerBlock {
  Tensor ln1_gamma, ln1_beta;
  Tensor qkv_weight, qkv_bias;  // [d, 3d], [3d]
  Tensor out_weight, out_bias;  // [d, d], [d]
  Tensor ln2_gamma, ln2_beta;
  Tensor fc1_weight, fc1_bias;  // [d, 4d], [4d]
  Tensor fc2_weight, fc2_bias;  // [4d, d], [d]
};

// The frozen vision transformer. Every parameter is created with
// requires_grad = false and never changes after construction.
class BaseLearner {
 public:
  explicit BaseLearner(VisionEncoderConfig config);

  const VisionEncoderConfig& config() const { return config_; }
  std::size_t num_layers() const { return blocks_.size(); }
  std::size_t embed_dim() const { return config_.embed_dim; }
  const Tensor& cls_token() const { return cls_token_; }

  // Patch projection plus the positional table, [E, d] -> [E, d].
  Tensor embed_patches(const Tensor& image) const;
  // Block `index` is zero based.
  Tensor run_block(std::size_t index, const Tensor& tokens) const;

  ParameterList parameters() const;

 private:
  VisionEncoderConfig config_;
  Tensor patch_weight_, patch_bias_, positional_, cls_token_;
  std::vector<TransformerBlock> blocks_;
};

struct EncodedImage {
  Tensor cls;           // c_L, [d]
  Tensor patch_tokens;  // [E, d]
};

// Plain forward: [c_0, x^p] through all blocks.
EncodedImage encode_image(const BaseLearner& model, const Tensor& image);

// Blocks (1-based) at which the aggregated prompt is (re)inserted. A block
// outside the set propagates whatever prompt tokens the previous block
// produced; before the first listed block there are no prompt tokens.
class PromptDepth {
 public:
  PromptDepth() = default;
  explicit PromptDepth(std::set<std::size_t> layers) : layers_(std::move(layers)) {}

  static PromptDepth all(std::size_t num_layers);
  static PromptDepth none() { return PromptDepth(); }

  const std::set<std::size_t>& layers() const { return layers_; }
  bool contains(std::size_t block) const { return layers_.count(block) != 0; }
  bool empty() const { return layers_.empty(); }
  // Throws ParameterError unless every entry lies in 1..num_layers.
  void validate(std::size_t num_layers) const;
  // "none" or a compact list such as "1-2" or "1,3".
  std::string to_string() const;

  friend bool operator==(const PromptDepth&, const PromptDepth&) = default;

 private:
  std::set<std::size_t> layers_;
};

// Validated depth for `model`; throws ParameterError for an index outside 1..L.
PromptDepth inject_depth_config(const BaseLearner& model, std::set<std::size_t> layers);
// Accepts "all", "none", ranges "a-b" and comma lists, e.g. "1,3-4".
PromptDepth parse_depth_spec(std::string_view spec, std::size_t num_layers);

// The trainable clone of the CLS token used by the prompted forward pass.
struct NCLSToken {
  Tensor c_prime;

  explicit NCLSToken(const BaseLearner& model);
};

// Runs [c', v_hat, x^p] through the blocks, inserting v_hat ([P, d]) at the
// blocks named by `depth`, and returns c'_L. Gradients reach ncls and v_hat
// only.
Tensor forward_with_prompts(const BaseLearner& model, const NCLSToken& ncls, const Tensor& v_hat,
                            const Tensor& image, const PromptDepth& depth);
Tensor forward_with_prompts(const BaseLearner& model, const NCLSToken& ncls, const Tensor& v_hat,
                            const Tensor& image);

// The frozen knowledge encoder: a seeded class table and template table
// mixed by a fixed projection, output l2-normalized.
class KnowledgeEncoder {
 public:
  KnowledgeEncoder(std::size_t dim, std::size_t num_classes, std::vector<PromptTemplate> templates,
                   std::uint64_t seed);

  std::size_t dim() const { return dim_; }
  std::size_t num_classes() const { return class_embeddings_.size(); }
  bool has_template(const std::string& id) const { return template_embeddings_.count(id) != 0; }

  Tensor encode(std::size_t class_id, const std::string& template_id) const;

  ParameterList parameters() const;

 private:
  std::size_t dim_;
  std::vector<Tensor> class_embeddings_;
  std::unordered_map<std::string, Tensor> template_embeddings_;
  std::vector<std::string> template_order_;
  Tensor mixing_;
};

// k = psi(Z). Throws LookupError for an unknown class or template.
Tensor encode_prompt(const KnowledgeEncoder& encoder, const HumanPrompt& prompt);

}  // namespace ckpl
