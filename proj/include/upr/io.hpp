#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

namespace upr {

/// Writes through a sibling temp file and renames it over `path` once the
/// writer returns, so readers never observe a half-written file.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& writer);

/// Calls `fn(line, line_number)` for each line (1-based, trailing '\r' dropped).
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(const std::string&, std::size_t)>& fn);

}  // namespace upr
