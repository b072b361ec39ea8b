#include "freedisc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

namespace freedisc {
namespace {

// Inner convex problem for a fixed saturation subset, p in {1, 1.5}:
// shrink iteration on min ||Tu-g||^2 + sum_{i not in S} |u_i|^p. The free
// (saturated) coordinates follow the plain gradient step.
Vector inner_solve_shrink(const Matrix& T, const Vector& g,
                          std::uint32_t sat_mask, double p) {
  const Eigen::Index n = T.cols();
  Vector u = Vector::Zero(n);
  Vector lam(n);
  for (int it = 0; it < 500000; ++it) {
    lam = u + T.transpose() * (g - T * u);
    double step_sq = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double next;
      if (sat_mask >> i & 1u)
        next = lam[i];
      else if (p == 1.0)
        next = soft_threshold(lam[i], 0.5);
      else
        next = f_p_inverse(lam[i], p);
      const double d = next - u[i];
      step_sq += d * d;
      u[i] = next;
    }
    if (std::sqrt(step_sq) <= 1e-13 * (1.0 + u.norm())) return u;
  }
  throw std::runtime_error("global_min_enumerate: inner solve stalled");
}

double subset_value(const Matrix& T, const Vector& g, const Vector& u,
                    std::uint32_t sat_mask, double p, double gamma, double rp) {
  double value = (T * u - g).squaredNorm();
  for (Eigen::Index i = 0; i < u.size(); ++i)
    value += gamma * (sat_mask >> i & 1u ? rp
                                         : std::pow(std::abs(u[i]), p));
  return value;
}

}  // namespace

OracleResult global_min_enumerate(const Problem& prob) {
  prob.spec.validate();
  if (prob.constraint)
    throw std::invalid_argument("global_min_enumerate: unconstrained only");
  if (!prob.model.is_dense())
    throw std::invalid_argument("global_min_enumerate: dense models only");
  const Matrix& T = prob.model.dense();
  const Vector& g = prob.model.data();
  const Eigen::Index n = T.cols();
  const double p = prob.spec.p;
  const int limit = p == 2.0 ? 20 : 12;
  if (n > limit)
    throw std::invalid_argument("global_min_enumerate: too many unknowns");
  if (p != 2.0 && p != 1.0 && p != 1.5)
    throw std::invalid_argument(
        "global_min_enumerate: p must be one of {1, 1.5, 2}");

  const double gamma = prob.spec.gamma;
  const double rp = std::pow(prob.spec.r, p);
  const Matrix TtT = T.transpose() * T;
  const Vector Ttg = T.transpose() * g;
  const double scale = std::max(1.0, Ttg.lpNorm<Eigen::Infinity>());

  OracleResult best;
  best.subsets = 1LL << n;
  best.value = std::numeric_limits<double>::infinity();

  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    Vector u;
    bool least_norm = false;
    if (p == 2.0) {
      Matrix A = TtT;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!(mask >> i & 1u)) A(i, i) += gamma;
      bool ok = false;
      Eigen::LDLT<Matrix> ldlt(A);
      if (ldlt.info() == Eigen::Success) {
        u = ldlt.solve(Ttg);
        ok = u.allFinite() &&
             (A * u - Ttg).lpNorm<Eigen::Infinity>() <= 1e-9 * scale;
      }
      if (!ok) {
        // Singular normal matrix (kernel directions inside the saturated
        // set): fall back to the minimum-norm least-squares solution.
        u = A.completeOrthogonalDecomposition().solve(Ttg);
        least_norm = true;
      }
    } else {
      u = inner_solve_shrink(T, g, mask, p);
    }
    const double value = subset_value(T, g, u, mask, p, gamma, rp);
    if (value < best.value) {
      best.value = value;
      best.minimizer = u;
      best.least_norm = least_norm;
      best.saturated.clear();
      for (Eigen::Index i = 0; i < n; ++i)
        if (mask >> i & 1u) best.saturated.push_back(static_cast<int>(i));
    }
  }
  return best;
}

bool check_global_is_fixed_point(const Problem& prob, double tol) {
  const OracleResult o = global_min_enumerate(prob);
  return verify_fixed_point(o.minimizer, prob, tol).is_fixed_point;
}

bool check_isolated(const Problem& prob, const Vector& point, int trials,
                    double radius, std::uint64_t seed, double return_tol) {
  prob.spec.validate();
  if (trials < 1) throw std::invalid_argument("check_isolated: trials < 1");
  const double bound = local_min_radius(prob.spec);
  if (!(radius > 0.0) || radius > bound * (1.0 + 1e-12))
    throw std::invalid_argument(
        "check_isolated: radius outside (0, local_min_radius]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  IterationConfig config;
  config.max_iters = 20000;
  config.step_tol = 1e-12;
  config.record_objective = false;
  const double dim = static_cast<double>(point.size());
  Vector dir(point.size());
  for (int t = 0; t < trials; ++t) {
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
    const double norm = dir.norm();
    if (norm == 0.0) continue;
    const double mag = radius * std::pow(unif(rng), 1.0 / dim);
    // The return contraction degrades with the smallest singular value of T,
    // so one fixed budget cannot fit every instance: extend it in chunks
    // while the trajectory still makes clear progress toward the point, and
    // settle a stalled trajectory by where it stalled.
    Vector cur = point + dir * (mag / norm);
    double prev_dist = std::numeric_limits<double>::infinity();
    bool returned = false;
    for (long long spent = 0; spent < 2000000; ) {
      const IterationTrace tr = iterate_unconstrained(prob, cur, config);
      spent += tr.iterations;
      cur = tr.final_iterate;
      const double d = (cur - point).lpNorm<Eigen::Infinity>();
      if (tr.converged || d > 0.98 * prev_dist) {
        returned = d <= return_tol;
        break;
      }
      prev_dist = d;
    }
    if (!returned) return false;
  }
  return true;
}

BasinMap basin_map(const Problem& prob, const std::array<double, 4>& rect,
                   int res, const IterationConfig& config, int threads) {
  prob.spec.validate();
  if (prob.constraint || !prob.model.is_dense() || prob.model.cols() != 2)
    throw std::invalid_argument("basin_map: dense 2-unknown instances only");
  if (res < 2) throw std::invalid_argument("basin_map: res < 2");
  if (!(rect[0] < rect[1]) || !(rect[2] < rect[3]))
    throw std::invalid_argument("basin_map: empty rectangle");

  const int total = res * res;
  std::vector<double> limits(static_cast<std::size_t>(total) * 2);
  std::vector<char> ok(total, 0);

  IterationConfig point_config = config;
  point_config.record_objective = false;
  point_config.record_partitions = false;
  point_config.record_iterates = false;

  auto sweep = [&](int row_begin, int row_end) {
    for (int iy = row_begin; iy < row_end; ++iy) {
      const double y = rect[2] + (rect[3] - rect[2]) * iy / (res - 1);
      for (int ix = 0; ix < res; ++ix) {
        const double x = rect[0] + (rect[1] - rect[0]) * ix / (res - 1);
        Vector u0(2);
        u0 << x, y;
        const IterationTrace tr =
            iterate_unconstrained(prob, u0, point_config);
        const int k = iy * res + ix;
        ok[k] = tr.converged ? 1 : 0;
        limits[2 * std::size_t(k)] = tr.final_iterate[0];
        limits[2 * std::size_t(k) + 1] = tr.final_iterate[1];
      }
    }
  };

  threads = std::max(1, std::min(threads, res));
  if (threads == 1) {
    sweep(0, res);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (res + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int lo = t * chunk;
      const int hi = std::min(res, lo + chunk);
      if (lo < hi) pool.emplace_back(sweep, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  BasinMap map;
  map.rect = rect;
  map.res = res;
  map.label.assign(total, -1);
  for (int k = 0; k < total; ++k) {
    if (!ok[k]) continue;
    Vector lim(2);
    lim << limits[2 * std::size_t(k)], limits[2 * std::size_t(k) + 1];
    int found = -1;
    for (std::size_t e = 0; e < map.equilibria.size(); ++e) {
      if ((map.equilibria[e] - lim).lpNorm<Eigen::Infinity>() <= 1e-6) {
        found = static_cast<int>(e);
        break;
      }
    }
    if (found < 0) {
      found = static_cast<int>(map.equilibria.size());
      map.equilibria.push_back(lim);
      map.value.push_back(objective(lim, prob));
      map.hits.push_back(0);
    }
    map.label[k] = found;
    map.hits[found] += 1;
  }
  return map;
}

void write_basin_csv(const BasinMap& map, std::ostream& os) {
  os << "x,y,label\n";
  char buf[96];
  for (int iy = 0; iy < map.res; ++iy) {
    const double y =
        map.rect[2] + (map.rect[3] - map.rect[2]) * iy / (map.res - 1);
    for (int ix = 0; ix < map.res; ++ix) {
      const double x =
          map.rect[0] + (map.rect[1] - map.rect[0]) * ix / (map.res - 1);
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d\n", x, y,
                    map.label[iy * map.res + ix]);
      os << buf;
    }
  }
}

}  // namespace freedisc
