#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rectidistill {

/// Flat `key=value` text. Blank lines and lines starting with '#' are
/// ignored; whitespace around keys and values is trimmed.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues read_key_values(std::istream& in);
KeyValues load_key_values(const std::filesystem::path& path);
void write_key_values(const KeyValues& kv, std::ostream& out);

/// "2,64,4" -> {2, 64, 4}. Throws config on anything else.
std::vector<std::size_t> parse_dims(std::string_view text);
std::string format_dims(const std::vector<std::size_t>& dims);

/// Output root: $RECTIDISTILL_OUT if set and non-empty, else "runs".
std::filesystem::path default_output_root();

}  // namespace rectidistill
