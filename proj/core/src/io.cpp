#include "freedisc/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace freedisc {
namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error(path + ": " + what);
}

bool parse_double(const std::string& text, double* out) {
  const char* s = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s) return false;
  while (*end != '\0') {
    if (!std::isspace(static_cast<unsigned char>(*end))) return false;
    ++end;
  }
  *out = v;
  return true;
}

// PGM token reader: whitespace separated, '#' starts a comment to end of line.
bool next_token(std::istream& is, std::string* tok) {
  tok->clear();
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      break;
    }
  }
  if (c == EOF) return false;
  do {
    tok->push_back(static_cast<char>(c));
  } while ((c = is.get()) != EOF && !std::isspace(c) && c != '#');
  if (c == '#') is.unget();
  return true;
}

int next_int(std::istream& is, const std::string& path, const char* what,
             int lo, int hi) {
  std::string tok;
  if (!next_token(is, &tok)) fail(path, std::string("missing ") + what);
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0')
    fail(path, std::string("bad ") + what + " '" + tok + "'");
  if (v < lo || v > hi)
    fail(path, std::string(what) + " " + tok + " outside [" +
                   std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

}  // namespace

Vector read_signal_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open");
  std::vector<double> values;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = true;
    for (char ch : line)
      if (!std::isspace(static_cast<unsigned char>(ch))) blank = false;
    if (blank) continue;
    double v;
    if (!parse_double(line, &v)) {
      if (lineno == 1 && values.empty()) continue;  // header line
      fail(path, "line " + std::to_string(lineno) + ": not a number");
    }
    if (!std::isfinite(v))
      fail(path, "line " + std::to_string(lineno) + ": non-finite sample");
    values.push_back(v);
  }
  if (values.empty()) fail(path, "no samples");
  Vector out(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = values[i];
  return out;
}

void write_signal_csv(const std::string& path, const Vector& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  char buf[64];
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", values[i]);
    out << buf;
  }
  if (!out) fail(path, "write failed");
}

void write_columns_csv(const std::string& path,
                       const std::vector<std::string>& names,
                       const std::vector<Vector>& columns) {
  if (names.size() != columns.size())
    throw std::invalid_argument("write_columns_csv: names/columns mismatch");
  if (columns.empty())
    throw std::invalid_argument("write_columns_csv: no columns");
  const Eigen::Index rows = columns.front().size();
  for (const Vector& c : columns)
    if (c.size() != rows)
      throw std::invalid_argument("write_columns_csv: ragged columns");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  for (std::size_t j = 0; j < names.size(); ++j)
    out << (j ? "," : "") << names[j];
  out << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      std::snprintf(buf, sizeof(buf), j ? ",%.17g" : "%.17g", columns[j][i]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) fail(path, "write failed");
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), j ? ",%.17g" : "%.17g", m(i, j));
      out << buf;
    }
    out << '\n';
  }
  if (!out) fail(path, "write failed");
}

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  std::string magic;
  if (!next_token(in, &magic)) fail(path, "empty file");
  if (magic != "P2" && magic != "P5") fail(path, "not a P2/P5 PGM");
  Image img;
  img.width = next_int(in, path, "width", 1, 1 << 15);
  img.height = next_int(in, path, "height", 1, 1 << 15);
  img.maxval = next_int(in, path, "maxval", 1, 255);
  const long count = static_cast<long>(img.width) * img.height;
  img.pixels.resize(count);
  if (magic == "P5") {
    // binary samples start after exactly one whitespace byte
    std::string raw(static_cast<std::size_t>(count), '\0');
    in.read(raw.data(), count);
    if (in.gcount() != count) fail(path, "truncated pixel data");
    for (long k = 0; k < count; ++k) {
      const int v = static_cast<unsigned char>(raw[static_cast<std::size_t>(k)]);
      if (v > img.maxval) fail(path, "sample above maxval");
      img.pixels[k] = v;
    }
  } else {
    for (long k = 0; k < count; ++k)
      img.pixels[k] = next_int(in, path, "sample", 0, img.maxval);
  }
  return img;
}

void write_pgm(const std::string& path, const Image& img, bool binary) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != static_cast<Eigen::Index>(img.width) * img.height)
    throw std::invalid_argument("write_pgm: inconsistent image");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << (binary ? "P5" : "P2") << '\n'
      << img.width << ' ' << img.height << '\n'
      << 255 << '\n';
  const long count = static_cast<long>(img.width) * img.height;
  auto quantize = [](double v) {
    const double c = v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v);
    return static_cast<int>(std::lround(c));
  };
  if (binary) {
    std::string raw(static_cast<std::size_t>(count), '\0');
    for (long k = 0; k < count; ++k)
      raw[static_cast<std::size_t>(k)] =
          static_cast<char>(static_cast<unsigned char>(quantize(img.pixels[k])));
    out.write(raw.data(), count);
  } else {
    // keep lines short; some P2 readers expect lines under 70 characters
    for (long k = 0; k < count; ++k) {
      out << quantize(img.pixels[k]);
      out << ((k % 16 == 15 || k + 1 == count) ? '\n' : ' ');
    }
  }
  if (!out) fail(path, "write failed");
}

}  // namespace freedisc
