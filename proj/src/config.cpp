#include "rectidistill/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#include "rectidistill/error.hpp"

namespace rectidistill {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

KeyValues read_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::config, "line " + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) fail(ErrorCode::config, "line " + std::to_string(line_no) + ": empty key");
    kv.emplace_back(std::move(key), trim(std::string_view(body).substr(eq + 1)));
  }
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::config, "cannot open config file " + path.string());
  return read_key_values(in);
}

void write_key_values(const KeyValues& kv, std::ostream& out) {
  for (const auto& [key, value] : kv) out << key << '=' << value << '\n';
}

std::vector<std::size_t> parse_dims(std::string_view text) {
  std::vector<std::size_t> dims;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto stop = comma == std::string_view::npos ? text.size() : comma;
    const std::string part = trim(text.substr(start, stop - start));
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (part.empty() || ec != std::errc() || ptr != part.data() + part.size() || value == 0) {
      fail(ErrorCode::config, "bad layer widths '" + std::string(text) + "'");
    }
    dims.push_back(value);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (dims.size() < 2) fail(ErrorCode::config, "need at least an input and an output width");
  return dims;
}

std::string format_dims(const std::vector<std::size_t>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(dims[i]);
  }
  return out;
}

std::filesystem::path default_output_root() {
  const char* env = std::getenv("RECTIDISTILL_OUT");
  if (env && *env) return env;
  return "runs";
}

}  // namespace rectidistill
