#include "freedisc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>

namespace freedisc {
namespace {

double penalty_sum(const Vector& u, const ThresholdSpec& spec) {
  const double rp = std::pow(spec.r, spec.p);
  double acc = 0.0;
  if (spec.p == 2.0) {
    for (Eigen::Index i = 0; i < u.size(); ++i)
      acc += std::min(u[i] * u[i], rp);
  } else {
    for (Eigen::Index i = 0; i < u.size(); ++i)
      acc += std::min(std::pow(std::abs(u[i]), spec.p), rp);
  }
  return acc;
}

std::vector<char> partition_of(const Vector& u, double lambda_prime) {
  std::vector<char> part(static_cast<std::size_t>(u.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i)
    part[static_cast<std::size_t>(i)] = std::abs(u[i]) > lambda_prime ? 1 : 0;
  return part;
}

std::vector<int> large_indices(const std::vector<char>& part) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < part.size(); ++i)
    if (part[i]) idx.push_back(static_cast<int>(i));
  return idx;
}

IterationTrace run_iteration(const Problem& prob, const Vector& u0,
                             const IterationConfig& config, bool projected) {
  prob.spec.validate();
  if (config.max_iters < 1)
    throw std::invalid_argument("iterate: max_iters < 1");
  if (u0.size() != prob.model.cols())
    throw std::invalid_argument("iterate: u0 size mismatch");
  if (projected) {
    if (!prob.constraint)
      throw std::invalid_argument("iterate_projected: no constraint operator");
    if (prob.constraint->deriv_size() != prob.model.cols())
      throw std::invalid_argument("iterate_projected: constraint size mismatch");
    if (prob.constraint->constraint_residual(u0) > 1e-6)
      throw std::invalid_argument("iterate_projected: u0 violates constraint");
  } else if (prob.constraint) {
    throw std::invalid_argument(
        "iterate_unconstrained: constrained problem, use iterate_projected");
  }

  const ThresholdMap H(prob.spec);
  IterationTrace trace;
  trace.lambda_prime = H.jump_location();
  trace.delta = H.jump_size();

  Vector u = u0;
  std::vector<char> part = partition_of(u, trace.lambda_prime);
  trace.partition_size.push_back(
      static_cast<int>(std::count(part.begin(), part.end(), char(1))));
  if (config.record_partitions) trace.partitions.push_back(large_indices(part));
  if (config.record_iterates) trace.iterates.push_back(u);
  if (projected && config.record_constraint)
    trace.constraint_residual.push_back(prob.constraint->constraint_residual(u));

  int stable = 0;
  Vector unew(u.size());
  for (int k = 1; k <= config.max_iters; ++k) {
    const Vector Tu = prob.model.apply(u);
    const Vector resid = prob.model.data() - Tu;
    if (config.record_objective)
      trace.objective.push_back(resid.squaredNorm() +
                                prob.spec.gamma * penalty_sum(u, prob.spec));
    Vector lam = u + prob.model.apply_adjoint(resid);
    for (Eigen::Index i = 0; i < lam.size(); ++i) unew[i] = H(lam[i]);
    if (projected) unew = prob.constraint->project(unew);

    const double step = (unew - u).norm();
    std::vector<char> newpart = partition_of(unew, trace.lambda_prime);
    const bool changed = newpart != part;

    trace.step_norm.push_back(step);
    trace.partition_size.push_back(
        static_cast<int>(std::count(newpart.begin(), newpart.end(), char(1))));
    if (config.record_partitions)
      trace.partitions.push_back(large_indices(newpart));
    if (config.record_iterates) trace.iterates.push_back(unew);
    if (projected && config.record_constraint)
      trace.constraint_residual.push_back(
          prob.constraint->constraint_residual(unew));

    u.swap(unew);
    part.swap(newpart);
    trace.iterations = k;
    if (changed) {
      trace.fixation_step = k;
      stable = 0;
    } else {
      ++stable;
    }
    if (step <= config.step_tol && stable >= config.stable_window) {
      trace.converged = true;
      break;
    }
  }
  if (config.record_objective) {
    const Vector resid = prob.model.data() - prob.model.apply(u);
    trace.objective.push_back(resid.squaredNorm() +
                              prob.spec.gamma * penalty_sum(u, prob.spec));
  }
  trace.final_iterate = std::move(u);
  return trace;
}

}  // namespace

Problem make_problem(ForwardModel model, ThresholdSpec spec,
                     std::shared_ptr<const GradientOperator2D> constraint) {
  spec.validate();
  if (constraint && spec.p != 2.0)
    throw std::invalid_argument("make_problem: constrained instances need p=2");
  const double nb = model.norm_bound();
  if (nb >= 0.995) {
    if (spec.p != 2.0)
      throw std::invalid_argument(
          "make_problem: operator norm >= 1 requires p == 2 to rescale");
    const double weight = 0.9405 / (nb * nb);  // 0.99 * safety 0.95
    model.rescale(std::sqrt(weight));
    spec.gamma *= weight;
    if (model.norm_bound() >= 1.0)
      throw std::runtime_error("make_problem: rescaling failed to contract");
  }
  return Problem{std::move(model), spec, std::move(constraint)};
}

double objective(const Vector& u, const Problem& prob) {
  if (u.size() != prob.model.cols())
    throw std::invalid_argument("objective: size mismatch");
  const Vector resid = prob.model.data() - prob.model.apply(u);
  return resid.squaredNorm() + prob.spec.gamma * penalty_sum(u, prob.spec);
}

IterationTrace iterate_unconstrained(const Problem& prob, const Vector& u0,
                                     const IterationConfig& config) {
  return run_iteration(prob, u0, config, false);
}

IterationTrace iterate_projected(const Problem& prob, const Vector& u0,
                                 const IterationConfig& config) {
  return run_iteration(prob, u0, config, true);
}

void write_trace_csv(const IterationTrace& trace, std::ostream& os) {
  const bool constrained = !trace.constraint_residual.empty();
  os << "iteration,objective,step_norm,partition_size";
  if (constrained) os << ",constraint_residual";
  os << "\n";
  char buf[128];
  const std::size_t rows = trace.partition_size.size();
  for (std::size_t k = 0; k < rows; ++k) {
    const double obj = k < trace.objective.size() ? trace.objective[k] : 0.0;
    const double step = k > 0 && k - 1 < trace.step_norm.size()
                            ? trace.step_norm[k - 1]
                            : 0.0;
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%d", k, obj, step,
                  trace.partition_size[k]);
    os << buf;
    if (constrained) {
      std::snprintf(buf, sizeof(buf), ",%.17g", trace.constraint_residual[k]);
      os << buf;
    }
    os << "\n";
  }
}

FixedPointReport verify_fixed_point(const Vector& u, const Problem& prob,
                                    double tol) {
  prob.spec.validate();
  if (prob.constraint)
    throw std::invalid_argument("verify_fixed_point: unconstrained only");
  if (u.size() != prob.model.cols())
    throw std::invalid_argument("verify_fixed_point: size mismatch");
  if (!(tol > 0.0)) throw std::invalid_argument("verify_fixed_point: tol <= 0");

  const ThresholdMap H(prob.spec);
  const double lp = H.jump_location();
  const double delta = H.jump_size();
  const double split = lp - 0.5 * delta;  // robust large/small classifier
  const double p = prob.spec.p;
  const double r = prob.spec.r;

  FixedPointReport rep;
  rep.tol = tol;
  rep.lambda_prime = lp;
  rep.delta = delta;

  const Vector w = prob.model.apply_adjoint(prob.model.data() -
                                            prob.model.apply(u));
  const bool hard = (p == 1.0 && r < 0.25);
  double alt = -1.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double a = std::abs(u[i]);
    const double s = (u[i] > 0.0) - (u[i] < 0.0);
    if (a > split) {
      rep.large_count += 1;
      rep.residual_identity = std::max(rep.residual_identity, std::abs(w[i]));
      rep.separation_high = std::min(rep.separation_high, a);
    } else {
      rep.separation_low = std::max(rep.separation_low, a);
      double defect;
      if (p == 1.0) {
        if (hard)
          // valid outputs are exactly zero or above the jump, so any
          // in-between magnitude is itself the violation
          defect = a <= tol ? std::max(0.0, std::abs(w[i]) - lp) : a;
        else
          defect = a <= tol ? std::max(0.0, std::abs(w[i]) - 0.5)
                            : std::abs(w[i] - 0.5 * s);
      } else if (p == 2.0) {
        defect = std::abs(w[i] - prob.spec.gamma * u[i]);
      } else {
        defect = std::abs(w[i] - 0.5 * p * s * std::pow(a, p - 1.0));
      }
      rep.residual_shrink = std::max(rep.residual_shrink, defect);
    }
    if (p == 1.0 && !hard) {
      // alternate split: identity condition already from r - 1/4 up
      double d;
      if (a <= tol)
        d = std::max(0.0, std::abs(w[i]) - 0.5);
      else if (a <= r - 0.25)
        d = std::abs(w[i] - 0.5 * s);
      else
        d = std::abs(w[i]);
      alt = std::max(alt, d);
    }
  }
  rep.residual_shrink_alt = p == 1.0 && !hard ? std::max(alt, 0.0) : -1.0;

  Vector mapped(u.size());
  const Vector lam = u + w;
  for (Eigen::Index i = 0; i < u.size(); ++i) mapped[i] = H(lam[i]);
  rep.map_residual = (u - mapped).lpNorm<Eigen::Infinity>();

  const bool sep_ok = rep.separation_low <= lp - delta + tol &&
                      (rep.large_count == 0 || rep.separation_high >= lp - tol);
  rep.is_fixed_point = rep.residual_identity <= tol &&
                       rep.residual_shrink <= tol && sep_ok;
  return rep;
}

bool verify_local_min(const Vector& u, const Problem& prob, int trials,
                      double radius, std::uint64_t seed) {
  prob.spec.validate();
  if (trials < 1) throw std::invalid_argument("verify_local_min: trials < 1");
  const double bound = local_min_radius(prob.spec);
  if (!(radius > 0.0) || radius > bound * (1.0 + 1e-12))
    throw std::invalid_argument(
        "verify_local_min: radius outside (0, local_min_radius]");
  const double j0 = objective(u, prob);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double n = static_cast<double>(u.size());
  Vector dir(u.size());
  for (int t = 0; t < trials; ++t) {
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
    const double norm = dir.norm();
    if (norm == 0.0) continue;
    const double mag = radius * std::pow(unif(rng), 1.0 / n);
    const Vector probe = u + dir * (mag / norm);
    if (objective(probe, prob) < j0 - 1e-12) return false;
  }
  return true;
}

}  // namespace freedisc
