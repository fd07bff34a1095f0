#include "ugpl/data/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace ugpl {
namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string token;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string discard;
      std::getline(in, discard);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(ch);
  }
  return token;
}

std::size_t header_number(std::istream& in, const std::filesystem::path& path, const char* what) {
  const std::string tok = header_token(in);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw PgmError(path.string() + ": bad PGM " + what + " '" + tok + "'");
  }
  return std::stoul(tok);
}

}  // namespace

Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PgmError(path.string() + ": cannot open");
  if (header_token(in) != "P5") throw PgmError(path.string() + ": not a binary PGM (P5)");
  const std::size_t width = header_number(in, path, "width");
  const std::size_t height = header_number(in, path, "height");
  const std::size_t maxval = header_number(in, path, "maxval");
  if (width == 0 || height == 0) throw PgmError(path.string() + ": empty image");
  if (maxval == 0 || maxval > 255) throw PgmError(path.string() + ": unsupported maxval " + std::to_string(maxval));
  std::vector<unsigned char> bytes(width * height);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw PgmError(path.string() + ": truncated pixel data");
  Tensor out(Shape{height, width});
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = static_cast<double>(bytes[i]) / static_cast<double>(maxval);
  return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  const Shape& s = image.shape();
  if (!(s.size() == 2 || (s.size() == 3 && s[2] == 1))) {
    throw ShapeError("write_pgm", "expected [H, W] or [H, W, 1], got " + shape_str(s));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PgmError(path.string() + ": cannot open for writing");
  out << "P5\n" << s[1] << ' ' << s[0] << "\n255\n";
  std::vector<unsigned char> bytes(image.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp(image[i], 0.0, 1.0);
    bytes[i] = static_cast<unsigned char>(std::lround(255.0 * v));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PgmError(path.string() + ": write failed");
}

}  // namespace ugpl
