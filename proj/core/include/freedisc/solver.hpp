#pragma once

#include "freedisc/operators.hpp"
#include "freedisc/threshold.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <vector>

namespace freedisc {

// One instance of min ||T u - g||^2 + gamma * sum_i min{|u_i|^p, r^p}.
// A non-null constraint restricts iterates to discrete gradient fields
// (range of the 2D difference operator) and selects the projected loop.
struct Problem {
  ForwardModel model;
  ThresholdSpec spec;
  std::shared_ptr<const GradientOperator2D> constraint;
};

// Validates the spec and, when the norm estimate of the model reaches 1,
// folds a scale into (T, g, gamma) so the effective norm drops below 1.
// The fold multiplies the whole objective by a constant, so minimizers are
// unchanged; it needs p == 2 because the weight lands in the threshold.
Problem make_problem(
    ForwardModel model, ThresholdSpec spec,
    std::shared_ptr<const GradientOperator2D> constraint = nullptr);

double objective(const Vector& u, const Problem& prob);

struct IterationConfig {
  int max_iters = 10000;
  double step_tol = 1e-10;
  // Stop only once the support partition also held this many steps in a row.
  int stable_window = 10;
  bool record_objective = true;
  bool record_partitions = false;  // per-step I1 index lists (small runs)
  bool record_iterates = false;    // full iterate history (small runs)
  bool record_constraint = true;   // projected runs: per-step ||Q u||_inf
};

struct IterationTrace {
  Vector final_iterate;
  bool converged = false;
  int iterations = 0;      // thresholding steps taken
  int fixation_step = 0;   // last step whose partition differs from its
                           // predecessor (0: never changed from u0's)
  double lambda_prime = 0.0;
  double delta = 0.0;

  std::vector<double> objective;       // J(u^0..u^m) when recorded
  std::vector<double> step_norm;       // ||u^k - u^{k-1}||, k = 1..m
  std::vector<int> partition_size;     // |I1(u^k)|, k = 0..m
  std::vector<std::vector<int>> partitions;  // optional, k = 0..m
  std::vector<Vector> iterates;              // optional, k = 0..m
  std::vector<double> constraint_residual;   // projected runs, k = 0..m
};

// Thresholded gradient iteration u <- H(u + T*(g - T u)). Convergence is a
// reported state, never an exception.
IterationTrace iterate_unconstrained(const Problem& prob, const Vector& u0,
                                     const IterationConfig& config = {});

// Projected variant u <- P H(u + T*(g - T u)) for gradient-field-constrained
// instances (p == 2 only). u0 must already satisfy the constraint.
IterationTrace iterate_projected(const Problem& prob, const Vector& u0,
                                 const IterationConfig& config = {});

// Columns: iteration, objective, step_norm, partition_size
// (+ constraint_residual when present). One header row.
void write_trace_csv(const IterationTrace& trace, std::ostream& os);

struct FixedPointReport {
  bool is_fixed_point = false;
  double tol = 0.0;
  double lambda_prime = 0.0;
  double delta = 0.0;
  // max |[T*(g - T u)]_i| over components classified large
  double residual_identity = 0.0;
  // worst defect of the shrink-branch stationarity condition
  double residual_shrink = 0.0;
  // p == 1 only: same defect with the branch split moved from r + 1/4 down
  // to r - 1/4 (the two agree on exact fixed points); -1 when not applicable
  double residual_shrink_alt = -1.0;
  double separation_low = 0.0;  // max |u_i| over small components
  double separation_high = std::numeric_limits<double>::infinity();
  double map_residual = 0.0;  // ||u - H(u + T*(g - T u))||_inf
  int large_count = 0;
};

// Checks the componentwise stationarity system of the thresholded iteration
// at u (unconstrained problems only): identity branch [T*(g-Tu)]_i = 0,
// shrink branch [T*(g-Tu)]_i = F_p(u_i) - u_i (gamma*u_i for p == 2, the
// soft/hard conditions for p == 1), plus the separation margins around the
// jump. Components are classified large when |u_i| > lambda' - delta/2.
FixedPointReport verify_fixed_point(const Vector& u, const Problem& prob,
                                    double tol = 1e-6);

// Samples `trials` perturbations with ||dh|| <= radius and checks
// J(u + dh) >= J(u) - 1e-12. radius must not exceed local_min_radius(spec).
bool verify_local_min(const Vector& u, const Problem& prob, int trials,
                      double radius, std::uint64_t seed);

}  // namespace freedisc
