#include "ckpl/prompt.hpp"

#include "ckpl/errors.hpp"

namespace ckpl {

PromptTemplate::PromptTemplate(std::string id, std::string pattern)
    : id_(std::move(id)), pattern_(std::move(pattern)) {
  auto first = pattern_.find(kClassPlaceholder);
  if (first == std::string::npos) {
    throw ValidationError("prompt template '" + id_ + "' has no [CLASS] placeholder");
  }
  if (pattern_.find(kClassPlaceholder, first + 1) != std::string::npos) {
    throw ValidationError("prompt template '" + id_ + "' has more than one [CLASS] placeholder");
  }
  placeholder_ = first;
}

std::string PromptTemplate::render(std::string_view class_name) const {
  std::string out = pattern_.substr(0, placeholder_);
  out += class_name;
  out += pattern_.substr(placeholder_ + kClassPlaceholder.size());
  return out;
}

std::string PromptTemplate::parse_class_name(std::string_view text) const {
  std::string_view prefix(pattern_.data(), placeholder_);
  std::string_view suffix(pattern_.data() + placeholder_ + kClassPlaceholder.size(),
                          pattern_.size() - placeholder_ - kClassPlaceholder.size());
  if (text.size() < prefix.size() + suffix.size() || !text.starts_with(prefix) ||
      !text.ends_with(suffix)) {
    throw ValidationError("text does not match prompt template '" + id_ + "'");
  }
  return std::string(text.substr(prefix.size(), text.size() - prefix.size() - suffix.size()));
}

PromptTemplate default_photo_template() {
  return PromptTemplate("photo", "This is a photo of a [CLASS].");
}

PromptTemplate flower_template() {
  return PromptTemplate("flower", "This is a photo of a [CLASS], a type of flower.");
}

}  // namespace ckpl
