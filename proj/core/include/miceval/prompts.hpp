#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace miceval::prompts {

/// Prompt templates loaded from a directory of .txt files; the template id
/// is the file stem. Placeholders use {name}; literal braces are written
/// {{ and }}.
class TemplateStore {
 public:
  static TemplateStore load_default();  // resources/prompts
  static TemplateStore load(const std::filesystem::path& dir);

  bool contains(std::string_view id) const;
  const std::string& raw(std::string_view id) const;
  std::string render(
      std::string_view id,
      const std::map<std::string, std::string, std::less<>>& vars) const;

  static std::string render_text(
      std::string_view tpl,
      const std::map<std::string, std::string, std::less<>>& vars);

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

}  // namespace miceval::prompts
