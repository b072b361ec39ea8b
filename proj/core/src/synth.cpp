#include "freedisc/synth.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace freedisc {
namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  // 53-bit mantissa draw; avoids distribution objects so the stream is easy
  // to reason about
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double gaussian(std::mt19937_64& rng) {
  // Box-Muller, fresh pair each call
  double u1 = uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace

SyntheticSignal make_test_signal(int n, std::uint64_t seed, double sigma) {
  if (n < 16) throw std::invalid_argument("make_test_signal: n < 16");
  if (sigma < 0.0) throw std::invalid_argument("make_test_signal: sigma < 0");
  std::mt19937_64 rng(seed);

  const int segments = 5;
  const int min_gap = std::max(2, n / 16);
  std::vector<int> breaks;  // first sample index of each new segment
  for (int attempt = 0; attempt < 10000 && static_cast<int>(breaks.size()) <
                                               segments - 1;
       ++attempt) {
    const int b = min_gap + static_cast<int>(rng() % static_cast<std::uint64_t>(
                                                 n - 2 * min_gap));
    bool ok = true;
    for (int e : breaks)
      if (std::abs(e - b) < min_gap) ok = false;
    if (ok) breaks.push_back(b);
  }
  if (static_cast<int>(breaks.size()) != segments - 1)
    throw std::runtime_error("make_test_signal: could not place breakpoints");
  std::sort(breaks.begin(), breaks.end());

  SyntheticSignal out;
  out.clean.resize(n);
  out.noisy.resize(n);
  for (int b : breaks) out.jumps.push_back(b - 1);

  double level = uniform(rng, -0.5, 0.5);
  int seg_start = 0;
  std::size_t next_break = 0;
  double slope = uniform(rng, -1.2, 1.2);
  double curve = uniform(rng, -1.0, 1.0);
  for (int i = 0; i < n; ++i) {
    if (next_break < breaks.size() && i == breaks[next_break]) {
      // close the old segment at the break and jump from its end value
      const double t = (breaks[next_break] - seg_start) / double(n);
      const double end_value = level + slope * t + curve * t * t;
      const double height = uniform(rng, 0.35, 1.2);
      const double sign = rng() & 1u ? 1.0 : -1.0;
      level = end_value + sign * height;
      seg_start = i;
      slope = uniform(rng, -1.2, 1.2);
      curve = uniform(rng, -1.0, 1.0);
      ++next_break;
    }
    const double t = (i - seg_start + 0.5) / double(n);
    out.clean[i] = level + slope * t + curve * t * t;
  }
  for (int i = 0; i < n; ++i)
    out.noisy[i] = out.clean[i] + (sigma > 0.0 ? sigma * gaussian(rng) : 0.0);
  return out;
}

SyntheticImage make_blocks_image(int n, std::uint64_t seed, double sigma) {
  if (n < 8) throw std::invalid_argument("make_blocks_image: n < 8");
  if (sigma < 0.0) throw std::invalid_argument("make_blocks_image: sigma < 0");
  std::mt19937_64 rng(seed);

  SyntheticImage out;
  out.clean.width = out.clean.height = n;
  out.clean.maxval = 255;
  out.clean.pixels = Vector::Constant(static_cast<Eigen::Index>(n) * n, 80.0);

  // well separated levels: any pair differs by at least 50 gray steps
  int palette[4] = {30, 150, 210, 255};
  for (int k = 3; k > 0; --k)
    std::swap(palette[k], palette[rng() % static_cast<std::uint64_t>(k + 1)]);
  const int rects = 3;
  for (int rect = 0; rect < rects; ++rect) {
    const int w = n / 5 + static_cast<int>(rng() % std::uint64_t(n / 4));
    const int h = n / 5 + static_cast<int>(rng() % std::uint64_t(n / 4));
    const int i0 = 1 + static_cast<int>(rng() % std::uint64_t(n - h - 2));
    const int j0 = 1 + static_cast<int>(rng() % std::uint64_t(n - w - 2));
    const double level = palette[rect];
    for (int i = i0; i < i0 + h; ++i)
      for (int j = j0; j < j0 + w; ++j) out.clean(i, j) = level;
  }

  out.noisy = out.clean;
  if (sigma > 0.0)
    for (Eigen::Index k = 0; k < out.noisy.pixels.size(); ++k)
      out.noisy.pixels[k] += sigma * gaussian(rng);
  return out;
}

Image make_vertical_edge_image(int n, int left_level, int right_level) {
  if (n < 2) throw std::invalid_argument("make_vertical_edge_image: n < 2");
  Image img;
  img.width = img.height = n;
  img.maxval = 255;
  img.pixels.resize(static_cast<Eigen::Index>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      img(i, j) = j < n / 2 ? left_level : right_level;
  return img;
}

Image make_centered_hole_mask(int n, int hole) {
  if (hole < 1 || hole >= n)
    throw std::invalid_argument("make_centered_hole_mask: bad hole size");
  Image mask;
  mask.width = mask.height = n;
  mask.maxval = 255;
  mask.pixels = Vector::Constant(static_cast<Eigen::Index>(n) * n, 255.0);
  const int start = (n - hole) / 2;
  for (int i = start; i < start + hole; ++i)
    for (int j = start; j < start + hole; ++j) mask(i, j) = 0.0;
  return mask;
}

namespace {

void check_fill_args(const Image& img, const Image& mask) {
  if (img.width != mask.width || img.height != mask.height)
    throw std::invalid_argument("fill: image/mask size mismatch");
  if (img.width < 1 || img.height < 1)
    throw std::invalid_argument("fill: empty image");
}

}  // namespace

Image harmonic_fill(const Image& img, const Image& mask) {
  check_fill_args(img, mask);
  const int w = img.width;
  const int h = img.height;
  std::vector<int> index(static_cast<std::size_t>(w) * h, -1);
  int unknowns = 0;
  for (int k = 0; k < w * h; ++k)
    if (mask.pixels[k] == 0.0) index[static_cast<std::size_t>(k)] = unknowns++;
  Image out = img;
  if (unknowns == 0) return out;

  Eigen::SparseMatrix<double> A(unknowns, unknowns);
  Vector b = Vector::Zero(unknowns);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(unknowns) * 5);
  const int di[4] = {-1, 1, 0, 0};
  const int dj[4] = {0, 0, -1, 1};
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const int row = index[static_cast<std::size_t>(i) * w + j];
      if (row < 0) continue;
      int degree = 0;
      for (int d = 0; d < 4; ++d) {
        const int ni = i + di[d];
        const int nj = j + dj[d];
        if (ni < 0 || ni >= h || nj < 0 || nj >= w) continue;
        ++degree;
        const int col = index[static_cast<std::size_t>(ni) * w + nj];
        if (col >= 0)
          trip.emplace_back(row, col, -1.0);
        else
          b[row] += img.pixels[ni * w + nj];
      }
      trip.emplace_back(row, row, static_cast<double>(degree));
    }
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("harmonic_fill: factorization failed");
  const Vector x = solver.solve(b);
  if (solver.info() != Eigen::Success || !x.allFinite() ||
      (A * x - b).lpNorm<Eigen::Infinity>() >
          1e-8 * (1.0 + b.lpNorm<Eigen::Infinity>()))
    throw std::runtime_error(
        "harmonic_fill: missing region has no observed boundary");
  for (int k = 0; k < w * h; ++k)
    if (index[static_cast<std::size_t>(k)] >= 0)
      out.pixels[k] = x[index[static_cast<std::size_t>(k)]];
  return out;
}

Image nearest_fill(const Image& img, const Image& mask) {
  check_fill_args(img, mask);
  const int w = img.width;
  const int h = img.height;
  Image out = img;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      if (mask.pixels[i * w + j] != 0.0) continue;
      bool found = false;
      for (int d = 1; d < std::max(w, h) && !found; ++d) {
        // same row first, left before right on ties
        if (j - d >= 0 && mask.pixels[i * w + (j - d)] != 0.0) {
          out(i, j) = img(i, j - d);
          found = true;
        } else if (j + d < w && mask.pixels[i * w + (j + d)] != 0.0) {
          out(i, j) = img(i, j + d);
          found = true;
        } else if (i - d >= 0 && mask.pixels[(i - d) * w + j] != 0.0) {
          out(i, j) = img(i - d, j);
          found = true;
        } else if (i + d < h && mask.pixels[(i + d) * w + j] != 0.0) {
          out(i, j) = img(i + d, j);
          found = true;
        }
      }
      if (!found)
        throw std::runtime_error("nearest_fill: no observed sample in line");
    }
  return out;
}

}  // namespace freedisc
