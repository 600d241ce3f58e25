#include "ckpl/encoders.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "ckpl/errors.hpp"
#include "ckpl/ops.hpp"
#include "ckpl/random.hpp"

namespace ckpl {

namespace {

constexpr std::size_t kMlpRatio = 4;
constexpr double kClsInitStd = 1.0;
constexpr double kPositionalStd = 0.1;

Tensor ones(std::size_t n) { return Tensor::full({n}, 1.0); }
Tensor zeros(std::size_t n) { return Tensor::zeros({n}); }

}  // namespace

void VisionEncoderConfig::validate() const {
  if (embed_dim == 0 || num_patches == 0 || num_heads == 0) {
    throw ValidationError("vision encoder sizes must be positive");
  }
  if (embed_dim % num_heads != 0) {
    throw ValidationError("embed_dim " + std::to_string(embed_dim) +
                          " is not divisible by num_heads " + std::to_string(num_heads));
  }
}

BaseLearner::BaseLearner(VisionEncoderConfig config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.embed_dim;
  const std::size_t hidden = kMlpRatio * d;
  Rng rng(mix_seed(config_.seed, stable_hash("base_learner")));
  const double fan_in = 1.0 / std::sqrt(static_cast<double>(d));

  patch_weight_ = rng.gaussian({d, d}, fan_in);
  patch_bias_ = zeros(d);
  positional_ = rng.gaussian({config_.num_patches, d}, kPositionalStd);
  cls_token_ = rng.gaussian({d}, kClsInitStd);
  blocks_.reserve(config_.num_layers);
  for (std::size_t i = 0; i < config_.num_layers; ++i) {
    TransformerBlock b;
    b.ln1_gamma = ones(d);
    b.ln1_beta = zeros(d);
    b.qkv_weight = rng.gaussian({d, 3 * d}, fan_in);
    b.qkv_bias = zeros(3 * d);
    b.out_weight = rng.gaussian({d, d}, fan_in);
    b.out_bias = zeros(d);
    b.ln2_gamma = ones(d);
    b.ln2_beta = zeros(d);
    b.fc1_weight = rng.gaussian({d, hidden}, fan_in);
    b.fc1_bias = zeros(hidden);
    b.fc2_weight = rng.gaussian({hidden, d}, 1.0 / std::sqrt(static_cast<double>(hidden)));
    b.fc2_bias = zeros(d);
    blocks_.push_back(std::move(b));
  }
}

Tensor BaseLearner::embed_patches(const Tensor& image) const {
  if (image.rank() != 2 || image.dim(0) != config_.num_patches ||
      image.dim(1) != config_.embed_dim) {
    throw DimensionError("image of shape " + shape_str(image.shape()) + " does not match [" +
                         std::to_string(config_.num_patches) + "," +
                         std::to_string(config_.embed_dim) + "] patches");
  }
  return add(linear(image, patch_weight_, patch_bias_), positional_);
}

Tensor BaseLearner::run_block(std::size_t index, const Tensor& tokens) const {
  const auto& b = blocks_.at(index);
  const std::size_t d = config_.embed_dim;
  const std::size_t heads = config_.num_heads;
  const std::size_t hd = d / heads;
  const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));

  Tensor h = layer_norm(tokens, b.ln1_gamma, b.ln1_beta);
  Tensor qkv = linear(h, b.qkv_weight, b.qkv_bias);
  std::vector<Tensor> head_out;
  head_out.reserve(heads);
  for (std::size_t k = 0; k < heads; ++k) {
    Tensor q = slice_cols(qkv, k * hd, (k + 1) * hd);
    Tensor key = slice_cols(qkv, d + k * hd, d + (k + 1) * hd);
    Tensor v = slice_cols(qkv, 2 * d + k * hd, 2 * d + (k + 1) * hd);
    Tensor attn = softmax_rows(scale(matmul(q, transpose(key)), inv_sqrt_hd));
    head_out.push_back(matmul(attn, v));
  }
  Tensor mixed = heads == 1 ? head_out[0] : concat_cols(head_out);
  Tensor x = add(tokens, linear(mixed, b.out_weight, b.out_bias));
  Tensor m = linear(gelu(linear(layer_norm(x, b.ln2_gamma, b.ln2_beta), b.fc1_weight,
                                b.fc1_bias)),
                    b.fc2_weight, b.fc2_bias);
  return add(x, m);
}

ParameterList BaseLearner::parameters() const {
  ParameterList out{{"base.patch_weight", patch_weight_},
                    {"base.patch_bias", patch_bias_},
                    {"base.positional", positional_},
                    {"base.cls_token", cls_token_}};
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::string p = "base.blocks." + std::to_string(i) + ".";
    out.push_back({p + "ln1_gamma", b.ln1_gamma});
    out.push_back({p + "ln1_beta", b.ln1_beta});
    out.push_back({p + "qkv_weight", b.qkv_weight});
    out.push_back({p + "qkv_bias", b.qkv_bias});
    out.push_back({p + "out_weight", b.out_weight});
    out.push_back({p + "out_bias", b.out_bias});
    out.push_back({p + "ln2_gamma", b.ln2_gamma});
    out.push_back({p + "ln2_beta", b.ln2_beta});
    out.push_back({p + "fc1_weight", b.fc1_weight});
    out.push_back({p + "fc1_bias", b.fc1_bias});
    out.push_back({p + "fc2_weight", b.fc2_weight});
    out.push_back({p + "fc2_bias", b.fc2_bias});
  }
  return out;
}

EncodedImage encode_image(const BaseLearner& model, const Tensor& image) {
  const std::size_t d = model.embed_dim();
  std::vector<Tensor> parts{reshape(model.cls_token(), {1, d}), model.embed_patches(image)};
  Tensor tokens = concat_rows(parts);
  for (std::size_t i = 0; i < model.num_layers(); ++i) tokens = model.run_block(i, tokens);
  return {row(tokens, 0), slice_rows(tokens, 1, tokens.rows())};
}

PromptDepth PromptDepth::all(std::size_t num_layers) {
  std::set<std::size_t> layers;
  for (std::size_t i = 1; i <= num_layers; ++i) layers.insert(i);
  return PromptDepth(std::move(layers));
}

void PromptDepth::validate(std::size_t num_layers) const {
  for (auto l : layers_) {
    if (l < 1 || l > num_layers) {
      throw ParameterError("prompt depth index " + std::to_string(l) + " outside 1.." +
                           std::to_string(num_layers));
    }
  }
}

std::string PromptDepth::to_string() const {
  if (layers_.empty()) return "none";
  std::ostringstream os;
  bool first = true;
  for (auto it = layers_.begin(); it != layers_.end();) {
    std::size_t lo = *it, hi = lo;
    ++it;
    while (it != layers_.end() && *it == hi + 1) hi = *it++;
    if (!first) os << ',';
    first = false;
    os << lo;
    if (hi != lo) os << '-' << hi;
  }
  return os.str();
}

PromptDepth inject_depth_config(const BaseLearner& model, std::set<std::size_t> layers) {
  PromptDepth depth(std::move(layers));
  depth.validate(model.num_layers());
  return depth;
}

PromptDepth parse_depth_spec(std::string_view spec, std::size_t num_layers) {
  if (spec == "all") return PromptDepth::all(num_layers);
  if (spec == "none" || spec.empty()) return PromptDepth::none();
  auto parse_index = [&](std::string_view tok) {
    std::size_t v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      throw ParameterError("malformed depth spec '" + std::string(spec) + "'");
    }
    return v;
  };
  std::set<std::size_t> layers;
  while (!spec.empty()) {
    auto comma = spec.find(',');
    auto item = spec.substr(0, comma);
    auto dash = item.find('-');
    if (dash == std::string_view::npos) {
      layers.insert(parse_index(item));
    } else {
      auto lo = parse_index(item.substr(0, dash));
      auto hi = parse_index(item.substr(dash + 1));
      if (lo > hi) throw ParameterError("empty depth range '" + std::string(item) + "'");
      for (auto i = lo; i <= hi; ++i) layers.insert(i);
    }
    if (comma == std::string_view::npos) break;
    spec.remove_prefix(comma + 1);
  }
  PromptDepth depth(std::move(layers));
  depth.validate(num_layers);
  return depth;
}

NCLSToken::NCLSToken(const BaseLearner& model)
    : c_prime(model.cls_token().shape(),
              std::vector<double>(model.cls_token().values().begin(),
                                  model.cls_token().values().end()),
              true) {}

Tensor forward_with_prompts(const BaseLearner& model, const NCLSToken& ncls, const Tensor& v_hat,
                            const Tensor& image, const PromptDepth& depth) {
  const std::size_t d = model.embed_dim();
  depth.validate(model.num_layers());
  if (!v_hat.defined() || v_hat.rank() != 2 || v_hat.dim(1) != d) {
    throw DimensionError("prompt tokens must be [P, " + std::to_string(d) + "], got " +
                         (v_hat.defined() ? shape_str(v_hat.shape()) : std::string("undefined")));
  }
  if (ncls.c_prime.size() != d) {
    throw DimensionError("NCLS token of shape " + shape_str(ncls.c_prime.shape()) +
                         " does not match embed_dim " + std::to_string(d));
  }
  const std::size_t prompt_len = v_hat.dim(0);
  Tensor cls = reshape(ncls.c_prime, {1, d});
  Tensor patches = model.embed_patches(image);
  Tensor prompts;
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    if (depth.contains(i + 1)) prompts = v_hat;
    std::vector<Tensor> parts{cls};
    if (prompts.defined()) parts.push_back(prompts);
    parts.push_back(patches);
    Tensor out = model.run_block(i, concat_rows(parts));
    cls = slice_rows(out, 0, 1);
    std::size_t offset = 1;
    if (prompts.defined()) {
      prompts = slice_rows(out, 1, 1 + prompt_len);
      offset += prompt_len;
    }
    patches = slice_rows(out, offset, out.rows());
  }
  return reshape(cls, {d});
}

Tensor forward_with_prompts(const BaseLearner& model, const NCLSToken& ncls, const Tensor& v_hat,
                            const Tensor& image) {
  return forward_with_prompts(model, ncls, v_hat, image, PromptDepth::all(model.num_layers()));
}

KnowledgeEncoder::KnowledgeEncoder(std::size_t dim, std::size_t num_classes,
                                   std::vector<PromptTemplate> templates, std::uint64_t seed)
    : dim_(dim) {
  if (dim == 0 || num_classes == 0) {
    throw ConstructionError("knowledge encoder needs positive dim and class count");
  }
  Rng class_rng(mix_seed(seed, stable_hash("knowledge.classes")));
  class_embeddings_.reserve(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) class_embeddings_.push_back(class_rng.gaussian({dim}, 1.0));
  for (const auto& t : templates) {
    if (template_embeddings_.count(t.id())) {
      throw ConstructionError("duplicate template id '" + t.id() + "'");
    }
    Rng trng(mix_seed(seed, stable_hash("knowledge.template." + t.pattern())));
    template_embeddings_.emplace(t.id(), trng.gaussian({dim}, 0.5));
    template_order_.push_back(t.id());
  }
  Rng mix_rng(mix_seed(seed, stable_hash("knowledge.mixing")));
  mixing_ = mix_rng.gaussian({dim, dim}, 1.0 / std::sqrt(static_cast<double>(dim)));
}

Tensor KnowledgeEncoder::encode(std::size_t class_id, const std::string& template_id) const {
  if (class_id >= class_embeddings_.size()) {
    throw LookupError("knowledge encoder has no class " + std::to_string(class_id));
  }
  auto it = template_embeddings_.find(template_id);
  if (it == template_embeddings_.end()) {
    throw LookupError("knowledge encoder has no template '" + template_id + "'");
  }
  Tensor summed = reshape(add(class_embeddings_[class_id], it->second), {1, dim_});
  return l2_normalize(reshape(matmul(summed, mixing_), {dim_}));
}

ParameterList KnowledgeEncoder::parameters() const {
  ParameterList out;
  for (std::size_t c = 0; c < class_embeddings_.size(); ++c) {
    out.push_back({"knowledge.classes." + std::to_string(c), class_embeddings_[c]});
  }
  for (const auto& id : template_order_) {
    out.push_back({"knowledge.templates." + id, template_embeddings_.at(id)});
  }
  out.push_back({"knowledge.mixing", mixing_});
  return out;
}

Tensor encode_prompt(const KnowledgeEncoder& encoder, const HumanPrompt& prompt) {
  return encoder.encode(prompt.class_id, prompt.template_id);
}

}  // namespace ckpl
