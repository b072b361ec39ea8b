#pragma once

#include "freedisc/solver.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace freedisc {

struct OracleResult {
  Vector minimizer;
  double value = 0.0;
  std::vector<int> saturated;  // subset whose penalties sit at r^p
  long long subsets = 0;       // 2^N states enumerated
  bool least_norm = false;     // a rank-deficient inner solve was resolved
                               // by the minimum-norm least-squares solution
};

// Exact global minimum by enumerating saturation subsets: for each S the
// inner problem min ||Tu-g||^2 + gamma sum_{i not in S} |u_i|^p + gamma|S|r^p
// is convex and solved exactly (p == 2: linear system; p in {1, 1.5}:
// shrink iteration to 1e-13). Dense unconstrained models only; N <= 20 for
// p == 2, N <= 12 otherwise. Ties resolve to the smallest subset mask.
OracleResult global_min_enumerate(const Problem& prob);

// The enumerated global minimizer must be stationary for the thresholded
// iteration; returns the verify_fixed_point verdict at tol.
bool check_global_is_fixed_point(const Problem& prob, double tol = 1e-6);

// Isolation probe: perturbs `point` within ||dh|| <= radius and re-iterates;
// true iff every run converges back to `point` within return_tol. A point on
// a continuum of minimizers fails (the flow settles elsewhere nearby).
bool check_isolated(const Problem& prob, const Vector& point, int trials,
                    double radius, std::uint64_t seed,
                    double return_tol = 1e-6);

struct BasinMap {
  std::array<double, 4> rect{};  // x0, x1, y0, y1
  int res = 0;
  std::vector<int> label;          // res*res, y-major scan, -1 = no limit
  std::vector<Vector> equilibria;  // first-seen order
  std::vector<double> value;       // objective at each equilibrium
  std::vector<int> hits;           // grid starts attracted to each
};

// Runs the iteration from every grid start of a 2-unknown dense instance and
// groups the limits (l-inf tolerance 1e-6). Deterministic for fixed inputs
// regardless of thread count: dedup happens sequentially in scan order.
BasinMap basin_map(const Problem& prob, const std::array<double, 4>& rect,
                   int res, const IterationConfig& config = {},
                   int threads = 1);

// Rows "x,y,label" in scan order, one header row.
void write_basin_csv(const BasinMap& map, std::ostream& os);

}  // namespace freedisc
