#include "miceval/resources.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "miceval/buildinfo.hpp"
#include "miceval/errors.hpp"

namespace miceval::resources {

namespace fs = std::filesystem;

std::filesystem::path dir() {
  if (const char* env = std::getenv("MICEVAL_RESOURCES")) {
    return fs::path(env);
  }
  fs::path source_dir(MICEVAL_SOURCE_RESOURCE_DIR);
  if (fs::exists(source_dir)) return source_dir;
  std::error_code ec;
  fs::path exe = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    fs::path installed = exe.parent_path().parent_path() / "share" / "miceval" / "resources";
    if (fs::exists(installed)) return installed;
  }
  throw IoError("resource directory not found; set MICEVAL_RESOURCES");
}

std::string load_text(std::string_view relative) {
  const fs::path p = dir() / fs::path(relative);
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open resource file: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> load_lines(std::string_view relative) {
  const std::string text = load_text(relative);
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    line = line.substr(start);
    if (line[0] == '#') continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace miceval::resources
