#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace ckpl {

inline constexpr std::string_view kClassPlaceholder = "[CLASS]";

// A human prompt pattern with exactly one [CLASS] placeholder, e.g.
// "This is a photo of a [CLASS], a type of flower."
class PromptTemplate {
 public:
  // Throws ValidationError unless `pattern` holds exactly one placeholder.
  PromptTemplate(std::string id, std::string pattern);

  const std::string& id() const { return id_; }
  const std::string& pattern() const { return pattern_; }

  std::string render(std::string_view class_name) const;
  // Inverse of render(): the class name embedded in `text`. Throws
  // ValidationError if `text` does not match the pattern.
  std::string parse_class_name(std::string_view text) const;

 private:
  std::string id_;
  std::string pattern_;
  std::size_t placeholder_ = 0;
};

enum class Polarity { kTrue, kWrong };

struct HumanPrompt {
  std::string text;
  std::size_t class_id = 0;
  std::string template_id;
  Polarity polarity = Polarity::kTrue;
};

// Templates used by the synthetic tasks and the CLI.
PromptTemplate default_photo_template();
PromptTemplate flower_template();

}  // namespace ckpl
