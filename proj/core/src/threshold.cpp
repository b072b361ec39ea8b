#include "freedisc/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace freedisc {
namespace {

double sgn(double t) { return (t > 0.0) - (t < 0.0); }

bool finite(double x) { return std::isfinite(x); }

// Root of S_p(lambda) = r^p inside (r, r + (p/2) r^{p-1}), by bisection to
// absolute tolerance 1e-12. S_p is strictly increasing on the bracket.
double bisect_jump(double r, double p) {
  const double target = std::pow(r, p);
  double lo = r;
  double hi = r + 0.5 * p * std::pow(r, p - 1.0);
  // S_p(lo) < target < S_p(hi) holds analytically; keep the bracket honest
  // against rounding at the ends.
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (detail::s_p(mid, p) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

void ThresholdSpec::validate() const {
  if (!finite(p) || !finite(r) || !finite(gamma))
    throw std::invalid_argument("ThresholdSpec: non-finite field");
  if (p < 1.0) throw std::domain_error("ThresholdSpec: p must be >= 1");
  if (r <= 0.0) throw std::invalid_argument("ThresholdSpec: r must be > 0");
  if (gamma <= 0.0)
    throw std::invalid_argument("ThresholdSpec: gamma must be > 0");
  if (gamma != 1.0 && p != 2.0)
    throw std::invalid_argument("ThresholdSpec: gamma != 1 requires p == 2");
}

double f_p(double t, double p) {
  if (p < 1.0) throw std::domain_error("f_p: p must be >= 1");
  if (t == 0.0) return 0.0;
  return t + 0.5 * p * sgn(t) * std::pow(std::abs(t), p - 1.0);
}

namespace detail {

double f_p_inverse_generic(double lambda, double p, double tol) {
  if (p <= 1.0) throw std::domain_error("f_p_inverse: p must be > 1");
  if (lambda == 0.0) return 0.0;
  const double s = sgn(lambda);
  const double a = std::abs(lambda);

  if (p < 2.0) {
    // For p below 2 the residual slope in t blows up as t -> 0 and the root
    // itself can be absurdly small (a^{1/(p-1)} scale), so iterate in
    // x = t^{p-1} instead: x^{1/(p-1)} + (p/2) x = a has slope >= p/2
    // everywhere and the residual is still F_p(t) - a, which bounds the
    // error in t from above since F_p' >= 1.
    const double q = 1.0 / (p - 1.0);
    double lo = 0.0;
    double hi = std::min(std::pow(a, p - 1.0), 2.0 * a / p);
    double x = hi;  // residual at both upper bounds is >= 0
    for (int it = 0; it < 200; ++it) {
      const double t = std::pow(x, q);
      const double res = t + 0.5 * p * x - a;
      if (std::abs(res) <= tol) return s * t;
      if (res > 0.0)
        hi = x;
      else
        lo = x;
      const double slope = 0.5 * p + (x > 0.0 ? q * std::pow(x, q - 1.0) : 0.0);
      double next = x - res / slope;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      x = next;
    }
  } else {
    // Solve t + (p/2) t^{p-1} = a on [0, a]. The residual is increasing with
    // slope >= 1, so |residual| bounds the error in t.
    double lo = 0.0, hi = a;
    double t = a;  // F_p(a) >= a, so the root sits at or below a
    for (int it = 0; it < 100; ++it) {
      const double res = t + 0.5 * p * std::pow(t, p - 1.0) - a;
      if (std::abs(res) <= tol) return s * t;
      if (res > 0.0)
        hi = t;
      else
        lo = t;
      const double slope = 1.0 + 0.5 * p * (p - 1.0) * std::pow(t, p - 2.0);
      double next = t - res / slope;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      t = next;
    }
  }
  throw std::runtime_error("f_p_inverse: no convergence (lambda=" +
                           std::to_string(lambda) + ", p=" + std::to_string(p) +
                           ")");
}

double s_p(double lambda, double p) {
  const double t = f_p_inverse(lambda, p);
  const double d = t - lambda;
  return d * d + std::pow(std::abs(t), p);
}

double threshold_generic(double lambda, const ThresholdSpec& spec) {
  spec.validate();
  if (spec.gamma != 1.0)
    throw std::invalid_argument("threshold_generic: gamma must be 1");
  if (spec.p <= 1.0)
    throw std::invalid_argument("threshold_generic: p must be > 1");
  const double lp = bisect_jump(spec.r, spec.p);
  const double a = std::abs(lambda);
  if (a > lp) return lambda;
  return sgn(lambda) * f_p_inverse_generic(a, spec.p);
}

}  // namespace detail

double f_p_inverse(double lambda, double p, double tol) {
  if (p <= 1.0) throw std::domain_error("f_p_inverse: p must be > 1");
  if (lambda == 0.0) return 0.0;
  if (p == 2.0) return 0.5 * lambda;
  if (p == 1.5) {
    // t + (3/4) sqrt(t) = |lambda|: substitute x = sqrt(t).
    const double a = std::abs(lambda);
    const double x = 0.5 * (-0.75 + std::sqrt(0.5625 + 4.0 * a));
    return sgn(lambda) * x * x;
  }
  return detail::f_p_inverse_generic(lambda, p, tol);
}

double jump_location(const ThresholdSpec& spec) {
  spec.validate();
  if (spec.p == 1.0) {
    // r >= 1/4 keeps the soft branch; below it the map is a hard threshold.
    // The two formulas agree at r == 1/4.
    return spec.r >= 0.25 ? spec.r + 0.25 : std::sqrt(spec.r);
  }
  if (spec.p == 2.0 && spec.gamma != 1.0) {
    const double g = spec.gamma;
    const double q = 2.0 / ((1.0 + g) * (1.0 + g)) + 1.0 - 2.0 / (1.0 + g);
    return spec.r / std::sqrt(q);
  }
  return bisect_jump(spec.r, spec.p);
}

double jump_size(const ThresholdSpec& spec) {
  const double lp = jump_location(spec);
  if (spec.p == 1.0) return spec.r >= 0.25 ? 0.5 : lp;
  if (spec.p == 2.0) return lp * spec.gamma / (1.0 + spec.gamma);
  return lp - f_p_inverse(lp, spec.p);
}

double local_min_radius(const ThresholdSpec& spec) {
  const double lp = jump_location(spec);
  const double lower = lp - jump_size(spec);
  return std::min(lp - spec.r, spec.r - lower);
}

ThresholdMap::ThresholdMap(const ThresholdSpec& spec) : spec_(spec) {
  spec_.validate();
  lambda_prime_ = freedisc::jump_location(spec_);
  delta_ = freedisc::jump_size(spec_);
  if (spec_.p == 1.0) {
    branch_ = spec_.r >= 0.25 ? Branch::p1_soft : Branch::p1_hard;
  } else if (spec_.p == 2.0) {
    branch_ = Branch::p2_shrink;
    shrink_ = 1.0 / (1.0 + spec_.gamma);
  } else if (spec_.p == 1.5) {
    branch_ = Branch::p15_closed;
  } else {
    branch_ = Branch::generic;
  }
}

double ThresholdMap::operator()(double lambda) const {
  const double a = std::abs(lambda);
  if (a > lambda_prime_) return lambda;
  switch (branch_) {
    case Branch::p1_soft:
      return a <= 0.5 ? 0.0 : sgn(lambda) * (a - 0.5);
    case Branch::p1_hard:
      return 0.0;
    case Branch::p2_shrink:
      return lambda * shrink_;
    case Branch::p15_closed:
    case Branch::generic:
      return f_p_inverse(lambda, spec_.p);
  }
  return lambda;  // unreachable
}

double threshold(double lambda, const ThresholdSpec& spec) {
  return ThresholdMap(spec)(lambda);
}

double hard_threshold(double lambda, double cut) {
  if (cut < 0.0) throw std::invalid_argument("hard_threshold: cut < 0");
  return std::abs(lambda) <= cut ? 0.0 : lambda;
}

double soft_threshold(double lambda, double cut) {
  if (cut < 0.0) throw std::invalid_argument("soft_threshold: cut < 0");
  const double a = std::abs(lambda) - cut;
  return a > 0.0 ? sgn(lambda) * a : 0.0;
}

ThresholdCurve::ThresholdCurve(const ThresholdSpec& spec, int samples)
    : map_(spec) {
  if (samples < 2) throw std::invalid_argument("ThresholdCurve: samples < 2");
  const double lp = map_.jump_location();
  nodes_.resize(samples);
  values_.resize(samples);
  for (int j = 0; j < samples; ++j) {
    // nodes on (0, lambda'], the last one exactly at the jump
    const double lam = lp * static_cast<double>(j + 1) / samples;
    nodes_[j] = lam;
    values_[j] = map_(lam);
  }
  nodes_.back() = lp;

  // Chord error shrinks with distance from 0, where the map's curvature
  // concentrates; find the largest segment that misses half the 1e-6 budget
  // and mark everything below its upper node for exact evaluation.
  for (int k = samples - 1; k >= 0; --k) {
    const double x0 = k == 0 ? 0.0 : nodes_[k - 1];
    const double y0 = k == 0 ? 0.0 : values_[k - 1];
    double worst = 0.0;
    for (double w : {0.25, 0.5, 0.75}) {
      const double lam = x0 + w * (nodes_[k] - x0);
      const double chord = y0 + w * (values_[k] - y0);
      worst = std::max(worst, std::abs(chord - map_(lam)));
    }
    if (worst > 5e-7) {
      exact_below_ = nodes_[k];
      break;
    }
  }
}

double ThresholdCurve::operator()(double lambda) const {
  const double lp = map_.jump_location();
  const double a = std::abs(lambda);
  if (a > lp) return lambda;
  if (a < exact_below_) return lambda < 0.0 ? -map_(a) : map_(a);
  const int m = static_cast<int>(nodes_.size());
  const double step = lp / m;
  int k = static_cast<int>(a / step);  // segment [k*step, (k+1)*step)
  if (k >= m) k = m - 1;
  const double x0 = k == 0 ? 0.0 : nodes_[k - 1];
  const double y0 = k == 0 ? 0.0 : values_[k - 1];
  const double x1 = nodes_[k];
  const double y1 = values_[k];
  const double w = x1 > x0 ? (a - x0) / (x1 - x0) : 0.0;
  const double v = y0 + w * (y1 - y0);
  return lambda < 0.0 ? -v : v;
}

void ThresholdCurve::write_csv(std::ostream& os) const {
  char buf[64];
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", nodes_[j], values_[j]);
    os << buf;
  }
}

}  // namespace freedisc
