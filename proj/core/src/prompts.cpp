#include "miceval/prompts.hpp"

#include <fstream>
#include <sstream>

#include "miceval/errors.hpp"
#include "miceval/resources.hpp"

namespace miceval::prompts {

namespace fs = std::filesystem;

TemplateStore TemplateStore::load_default() {
  return load(resources::dir() / "prompts");
}

TemplateStore TemplateStore::load(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw IoError("prompt template directory not found: " + dir.string());
  TemplateStore store;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt")
      continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    // Templates are stored with a trailing newline for editor hygiene;
    // the rendered prompt must end exactly where the template ends.
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
      text.pop_back();
    store.templates_[entry.path().stem().string()] = std::move(text);
  }
  if (store.templates_.empty())
    throw IoError("no .txt templates in " + dir.string());
  return store;
}

bool TemplateStore::contains(std::string_view id) const {
  return templates_.find(id) != templates_.end();
}

const std::string& TemplateStore::raw(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end())
    throw ConfigError("unknown prompt template: " + std::string(id));
  return it->second;
}

std::string TemplateStore::render(
    std::string_view id,
    const std::map<std::string, std::string, std::less<>>& vars) const {
  return render_text(raw(id), vars);
}

std::string TemplateStore::render_text(
    std::string_view tpl,
    const std::map<std::string, std::string, std::less<>>& vars) {
  std::string out;
  out.reserve(tpl.size());
  for (std::size_t i = 0; i < tpl.size();) {
    const char c = tpl[i];
    if (c == '{') {
      if (i + 1 < tpl.size() && tpl[i + 1] == '{') {
        out.push_back('{');
        i += 2;
        continue;
      }
      const std::size_t close = tpl.find('}', i + 1);
      if (close == std::string_view::npos)
        throw ConfigError("unterminated placeholder in template");
      const std::string_view name = tpl.substr(i + 1, close - i - 1);
      auto it = vars.find(name);
      if (it == vars.end())
        throw ConfigError("unresolved placeholder {" + std::string(name) +
                          "} in template");
      out += it->second;
      i = close + 1;
      continue;
    }
    if (c == '}') {
      if (i + 1 < tpl.size() && tpl[i + 1] == '}') {
        out.push_back('}');
        i += 2;
        continue;
      }
      throw ConfigError("stray '}' in template; write }} for a literal brace");
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

}  // namespace miceval::prompts
