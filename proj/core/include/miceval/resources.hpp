#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace miceval::resources {

/// Resource root, resolved in order: MICEVAL_RESOURCES env var, then the
/// source-tree resources directory baked in at build time, then
/// ../share/miceval/resources next to the running binary.
std::filesystem::path dir();

/// Read a resource file relative to dir(). Throws IoError when missing.
std::string load_text(std::string_view relative);

/// Non-empty, non-comment ('#') lines of a resource file, trimmed.
std::vector<std::string> load_lines(std::string_view relative);

}  // namespace miceval::resources
