// Checkpoint text format, one token group per line:
//
//   rectidistill-mlp 1
//   dims <w0> <w1> ... <wL>
//   layer <index> <out> <in>
//   weights
//   <out lines of `in` values, row-major>
//   bias
//   <one line of `out` values>
//   ... (one block per layer)
//   end
//
// Values are printed with 17 significant digits so doubles round-trip exactly.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rectidistill/error.hpp"
#include "rectidistill/model.hpp"

namespace rectidistill {

namespace {

constexpr const char* kMagic = "rectidistill-mlp";
constexpr int kVersion = 1;

void write_double(std::ostream& out, double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  out.write(buf, res.ptr - buf);
}

void write_row(std::ostream& out, const double* values, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out << ' ';
    write_double(out, values[i]);
  }
  out << '\n';
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::vector<std::string> next_tokens() {
    std::string line;
    if (!std::getline(in_, line)) error("unexpected end of file");
    ++line_no_;
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    for (std::string tok; ss >> tok;) tokens.push_back(tok);
    return tokens;
  }

  void expect(const std::vector<std::string>& tokens, std::size_t count, const char* what) {
    if (tokens.size() != count) {
      error(std::string("expected ") + what + " (" + std::to_string(count) + " tokens), got " +
            std::to_string(tokens.size()));
    }
  }

  std::size_t to_size(const std::string& tok) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) error("bad integer '" + tok + "'");
    return v;
  }

  double to_double(const std::string& tok, std::size_t column) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      error("bad number '" + tok + "' at token " + std::to_string(column));
    }
    return v;
  }

  [[noreturn]] void error(const std::string& message) const {
    fail(ErrorCode::checkpoint_parse, "line " + std::to_string(line_no_) + ": " + message);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace

void write_checkpoint(const MlpParams& p, std::ostream& out) {
  p.validate();
  out << kMagic << ' ' << kVersion << '\n';
  out << "dims";
  for (std::size_t w : p.dims()) out << ' ' << w;
  out << '\n';
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    out << "layer " << l << ' ' << layer.out << ' ' << layer.in << '\n';
    out << "weights\n";
    for (std::size_t r = 0; r < layer.out; ++r) write_row(out, layer.weights.data() + r * layer.in, layer.in);
    out << "bias\n";
    write_row(out, layer.bias.data(), layer.out);
  }
  out << "end\n";
}

MlpParams read_checkpoint(std::istream& in) {
  LineReader reader(in);
  auto tokens = reader.next_tokens();
  if (tokens.size() != 2 || tokens[0] != kMagic || tokens[1] != std::to_string(kVersion)) {
    reader.error("not a rectidistill-mlp version 1 checkpoint");
  }
  tokens = reader.next_tokens();
  if (tokens.size() < 3 || tokens[0] != "dims") reader.error("expected 'dims' with at least two widths");
  std::vector<std::size_t> dims;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    dims.push_back(reader.to_size(tokens[i]));
    if (dims.back() == 0) reader.error("zero layer width");
  }

  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    tokens = reader.next_tokens();
    reader.expect(tokens, 4, "'layer <index> <out> <in>'");
    if (tokens[0] != "layer" || reader.to_size(tokens[1]) != l || reader.to_size(tokens[2]) != dims[l + 1] ||
        reader.to_size(tokens[3]) != dims[l]) {
      reader.error("layer header does not match dims");
    }
    DenseLayer layer(dims[l], dims[l + 1]);
    tokens = reader.next_tokens();
    if (tokens.size() != 1 || tokens[0] != "weights") reader.error("expected 'weights'");
    for (std::size_t r = 0; r < layer.out; ++r) {
      tokens = reader.next_tokens();
      reader.expect(tokens, layer.in, "a weight row");
      for (std::size_t c = 0; c < layer.in; ++c) layer.w(r, c) = reader.to_double(tokens[c], c);
    }
    tokens = reader.next_tokens();
    if (tokens.size() != 1 || tokens[0] != "bias") reader.error("expected 'bias'");
    tokens = reader.next_tokens();
    reader.expect(tokens, layer.out, "the bias row");
    for (std::size_t r = 0; r < layer.out; ++r) layer.bias[r] = reader.to_double(tokens[r], r);
    p.layers.push_back(std::move(layer));
  }
  tokens = reader.next_tokens();
  if (tokens.size() != 1 || tokens[0] != "end") reader.error("expected 'end'");
  try {
    p.validate();
  } catch (const Error& e) {
    reader.error(e.detail());
  }
  return p;
}

void save_checkpoint(const MlpParams& p, const std::filesystem::path& path) {
  std::ostringstream buffer;
  write_checkpoint(p, buffer);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path.string() + " for writing");
  out << buffer.str();
  if (!out) fail(ErrorCode::io, "failed writing " + path.string());
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace rectidistill
