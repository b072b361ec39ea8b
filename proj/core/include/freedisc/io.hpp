#pragma once

#include <string>
#include <vector>

#include "freedisc/operators.hpp"

namespace freedisc {

// Signal files hold one value per line. On read, a single leading line that
// does not parse as a number is treated as a header and skipped; every other
// line must be a finite value. All errors surface as std::runtime_error.
Vector read_signal_csv(const std::string& path);
void write_signal_csv(const std::string& path, const Vector& values);

// Side-by-side table with a header row; all columns must have equal length.
// Values are printed with "%.17g" so repeated runs are byte-identical.
void write_columns_csv(const std::string& path,
                       const std::vector<std::string>& names,
                       const std::vector<Vector>& columns);

// Dense matrix dump for debugging, one row per line.
void write_matrix_csv(const std::string& path, const Matrix& m);

// Grayscale raster, row-major, raw sample values in [0, maxval].
struct Image {
  int width = 0;
  int height = 0;
  int maxval = 255;
  Vector pixels;

  double operator()(int i, int j) const { return pixels[i * width + j]; }
  double& operator()(int i, int j) { return pixels[i * width + j]; }
};

// Reads P2 (ASCII) or P5 (single-byte binary); maxval must be in [1, 255].
Image read_pgm(const std::string& path);

// Writes maxval 255; pixels are clamped to [0, 255] and rounded. P5 by
// default, P2 when binary is false.
void write_pgm(const std::string& path, const Image& img, bool binary = true);

}  // namespace freedisc
