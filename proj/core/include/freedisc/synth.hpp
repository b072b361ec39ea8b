#pragma once

#include <cstdint>
#include <vector>

#include "freedisc/io.hpp"
#include "freedisc/operators.hpp"

namespace freedisc {

// Seeded test data for the run commands. Everything here is deterministic
// given (size, seed): repeated runs must produce byte-identical artifacts.

struct SyntheticSignal {
  Vector clean;
  Vector noisy;
  std::vector<int> jumps;  // derivative positions: jump between i and i+1
};

// Piecewise-quadratic signal on [0, 1] with a few interior jumps. Segment
// slopes stay below 2 so only the deliberate jumps produce large divided
// differences at n around 256; jump heights are at least 0.35.
SyntheticSignal make_test_signal(int n, std::uint64_t seed,
                                 double sigma = 0.004);

struct SyntheticImage {
  Image clean;
  Image noisy;
};

// Flat base with a few overlapping rectangles at well-separated gray levels.
// sigma is additive Gaussian noise in raw gray levels (0 disables it).
SyntheticImage make_blocks_image(int n, std::uint64_t seed, double sigma = 0.0);

// Two flat half-planes split between columns n/2 - 1 and n/2.
Image make_vertical_edge_image(int n, int left_level = 51,
                               int right_level = 204);

// Observation mask with a centered hole x hole square of zeros (missing);
// everything else is 255 (observed).
Image make_centered_hole_mask(int n, int hole);

// Fills of the missing region (mask sample 0) from the observed data.
// harmonic_fill solves the discrete Laplace equation on the missing pixels
// with observed values as boundary data; nearest_fill copies the nearest
// observed sample in the same row (falling back to the same column).
Image harmonic_fill(const Image& img, const Image& mask);
Image nearest_fill(const Image& img, const Image& mask);

}  // namespace freedisc
