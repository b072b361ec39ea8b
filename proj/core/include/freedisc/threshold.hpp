#pragma once

#include <iosfwd>
#include <vector>

namespace freedisc {

// Parameters of the truncated-power penalty min{|t|^p, r^p} together with the
// weight gamma of the quadratic coupling. gamma != 1 is only defined for
// p == 2, where it folds into the shrink factor of the scalar minimizer map.
struct ThresholdSpec {
  double p = 2.0;
  double r = 1.0;
  double gamma = 1.0;

  // Throws std::domain_error (p < 1) or std::invalid_argument (r <= 0,
  // gamma <= 0, gamma != 1 with p != 2, non-finite fields).
  void validate() const;
};

// F_p(t) = t + (p/2) sgn(t) |t|^{p-1}. Odd and strictly increasing for p > 1.
// Throws std::domain_error for p < 1.
double f_p(double t, double p);

// Inverse of F_p on the reals, p > 1. Closed forms at p == 2 (lambda/2) and
// p == 1.5 (positive root of a quadratic in sqrt|t|), safeguarded Newton
// otherwise. 0 <= F_p^{-1}(lambda) <= lambda for lambda >= 0.
double f_p_inverse(double lambda, double p, double tol = 1e-12);

namespace detail {

// Newton-with-bisection-fallback path for any p > 1, exposed so the closed
// forms can be checked against it. Throws std::runtime_error if 100
// iterations do not reach tol.
double f_p_inverse_generic(double lambda, double p, double tol = 1e-12);

// S_p(lambda) = (F_p^{-1}(lambda) - lambda)^2 + |F_p^{-1}(lambda)|^p,
// strictly increasing in lambda >= 0; its value at the jump equals r^p.
double s_p(double lambda, double p);

// Threshold evaluated through the generic inverse and the bisected jump
// location even when closed forms exist (cross-check hook). gamma must be 1.
double threshold_generic(double lambda, const ThresholdSpec& spec);

}  // namespace detail

// Location lambda' of the jump of the scalar minimizer map: at |lambda| <=
// lambda' the shrunken branch wins, above it the identity branch. For p > 1,
// gamma == 1 it is the unique root of S_p = r^p inside
// (r, r + (p/2) r^{p-1}); for p == 1 it is r + 1/4 (r >= 1/4) or sqrt(r);
// for p == 2, gamma != 1 it has a closed form.
double jump_location(const ThresholdSpec& spec);

// delta = lambda' - H(lambda'): the map never outputs magnitudes inside
// (lambda' - delta, lambda'].
double jump_size(const ThresholdSpec& spec);

// Largest perturbation radius under which a verified fixed point is
// guaranteed to stay a local minimizer: min{lambda' - r, r - H(lambda')}.
double local_min_radius(const ThresholdSpec& spec);

// Scalar minimizer of (t - lambda)^2 + gamma min{|t|^p, r^p}; the shrunken
// branch wins the tie at |lambda| == lambda'. Odd in lambda.
double threshold(double lambda, const ThresholdSpec& spec);

// 0 inside [-cut, cut], identity outside.
double hard_threshold(double lambda, double cut);

// sgn(lambda) * max(|lambda| - cut, 0).
double soft_threshold(double lambda, double cut);

// Threshold map with the jump location resolved once. Use this inside
// iteration loops; threshold() above rebuilds it per call.
class ThresholdMap {
 public:
  explicit ThresholdMap(const ThresholdSpec& spec);

  double operator()(double lambda) const;
  double jump_location() const { return lambda_prime_; }
  double jump_size() const { return delta_; }
  const ThresholdSpec& spec() const { return spec_; }

 private:
  enum class Branch { p1_soft, p1_hard, p2_shrink, p15_closed, generic };
  ThresholdSpec spec_;
  double lambda_prime_ = 0.0;
  double delta_ = 0.0;
  double shrink_ = 0.5;  // p == 2 lower-branch factor 1/(1+gamma)
  Branch branch_ = Branch::p2_shrink;
};

// Tabulated threshold for p without a closed-form inverse: uniform nodes on
// (0, lambda'], linear interpolation between them, identity above lambda'.
// The map's curvature is unbounded near 0 (except at p == 2), so lookups in
// a short prefix of segments that cannot meet a 1e-6 chord-error budget are
// evaluated exactly; the prefix is found once at construction. Total error
// stays below 1e-6 for p in [1.1, 3] at 4096 nodes.
class ThresholdCurve {
 public:
  explicit ThresholdCurve(const ThresholdSpec& spec, int samples = 4096);

  double operator()(double lambda) const;
  double jump_location() const { return map_.jump_location(); }
  double jump_size() const { return map_.jump_size(); }
  const ThresholdSpec& spec() const { return map_.spec(); }
  int samples() const { return static_cast<int>(nodes_.size()); }

  // Two-column CSV "lambda,value", one node per line, no header.
  void write_csv(std::ostream& os) const;

 private:
  ThresholdMap map_;
  std::vector<double> nodes_;   // strictly increasing, last == lambda'
  std::vector<double> values_;  // lower-branch values at nodes_
  double exact_below_ = 0.0;    // lookups under this go through map_
};

}  // namespace freedisc
