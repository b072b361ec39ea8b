// End-to-end property checks for the library and the bundled CLI.
// Each check prints exactly one PASS/FAIL line; the exit code is the
// number of failures. Checks use fixed seeds so reruns are comparable.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "freedisc/io.hpp"
#include "freedisc/oracle.hpp"
#include "freedisc/solver.hpp"
#include "freedisc/synth.hpp"
#include "freedisc/threshold.hpp"

using namespace freedisc;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& note = "") {
  std::printf("%s %2d %s%s%s\n", ok ? "PASS" : "FAIL", id, name,
              note.empty() ? "" : ": ", note.c_str());
  if (!ok) ++failures;
}

double truncated_objective(double t, double lambda, const ThresholdSpec& s) {
  const double pen =
      std::min(std::pow(std::abs(t), s.p), std::pow(s.r, s.p));
  return (t - lambda) * (t - lambda) + s.gamma * pen;
}

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix T(rows, cols);
  for (Eigen::Index i = 0; i < T.size(); ++i) T(i) = dist(rng);
  return T;
}

Matrix scaled_to_norm(Matrix T, double eta) {
  Eigen::JacobiSVD<Matrix> svd(T);
  return T * (eta / svd.singularValues()[0]);
}

// ---------------------------------------------------------------- 1

void criterion_threshold_anchors() {
  bool ok = true;
  std::string note;
  auto expect = [&](bool cond, const char* what) {
    if (!cond && ok) {
      ok = false;
      note = what;
    }
  };

  expect(threshold(1.0, {2.0, 1.0, 1.0}) == 0.5, "H_21(1.0)");
  expect(threshold(1.5, {2.0, 1.0, 1.0}) == 1.5, "H_21(1.5)");
  expect(std::abs(jump_location({2.0, 1.0, 1.0}) - std::sqrt(2.0)) <= 1e-10,
         "jump location p2 r1");
  expect(threshold(1.0, {1.0, 1.0, 1.0}) == 0.5, "H_11(1.0)");
  expect(threshold(0.4, {1.0, 1.0, 1.0}) == 0.0, "H_11(0.4)");
  expect(jump_location({1.0, 1.0, 1.0}) == 1.25, "jump location p1 r1");
  expect(std::abs(jump_location({1.0, 0.16, 1.0}) - 0.4) <= 1e-10,
         "jump location p1 r0.16");

  for (double p : {1.5, 2.0}) {
    const ThresholdSpec spec{p, 1.0, 1.0};
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const double lam = -5.0 + 10.0 * k / 9999.0;
      worst = std::max(worst, std::abs(detail::threshold_generic(lam, spec) -
                                       threshold(lam, spec)));
    }
    expect(worst <= 1e-10, p == 1.5 ? "generic path p=1.5"
                                    : "generic path p=2");
  }
  report(1, "threshold anchors", ok, note);
}

// ---------------------------------------------------------------- 2

void criterion_threshold_minimizes() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> lam_d(-2.5, 2.5);
  std::uniform_real_distribution<double> r_d(0.2, 2.5);
  std::uniform_real_distribution<double> p_d(1.0, 3.0);
  bool ok = true;
  double worst = 0.0;
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const ThresholdSpec spec{p_d(rng), r_d(rng), 1.0};
    const double lam = lam_d(rng);
    const double at = truncated_objective(threshold(lam, spec), lam, spec);
    double grid_min = 1e300;
    const double lim = std::abs(lam) + 0.2;
    for (double t = -lim; t <= lim; t += 1e-4)
      grid_min = std::min(grid_min, truncated_objective(t, lam, spec));
    worst = std::max(worst, at - grid_min);
    if (at > grid_min + 2e-4) ok = false;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "max excess %.2e", worst);
  report(2, "threshold is the scalar minimizer", ok, buf);
}

// ---------------------------------------------------------------- 3

void criterion_operator_anchors() {
  bool ok = true;
  std::string note;
  for (int n = 2; n <= 256 && ok; ++n) {
    const auto op = build_gradient_1d(n);
    const double right_err =
        (op.forward * op.pinv - Matrix::Identity(n - 1, n - 1))
            .cwiseAbs()
            .maxCoeff();
    const double frob_err = std::abs(
        pinv_frobenius_sq(op) - (1.0 / 6.0 - 1.0 / (6.0 * n * n)));
    if (right_err > 1e-12) {
      ok = false;
      note = "right inverse n=" + std::to_string(n);
    }
    if (frob_err > 1e-12) {
      ok = false;
      note = "frobenius n=" + std::to_string(n);
    }
  }
  for (int n : {2, 8, 32, 128, 256}) {
    const auto op = build_gradient_1d(n);
    Eigen::BDCSVD<Matrix> svd(op.pinv);
    if (svd.singularValues()[0] > 1.0 / std::sqrt(6.0) + 1e-12) {
      ok = false;
      note = "spectral bound n=" + std::to_string(n);
    }
  }
  report(3, "difference operator anchors", ok, note);
}

// ---------------------------------------------------------------- 4 / 5 / 6

struct RandomRun {
  Problem prob;
  IterationTrace trace;
  double eta = 0.0;
};

RandomRun run_random_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ndist(2, 32);
  std::uniform_real_distribution<double> rdist(0.3, 2.5);
  std::uniform_real_distribution<double> etadist(0.5, 0.95);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);

  const int N = ndist(rng);
  const int M = N + ndist(rng) % 7;
  const double eta = etadist(rng);
  const Matrix T = scaled_to_norm(random_matrix(M, N, rng), eta);
  Vector g(M);
  for (int i = 0; i < M; ++i) g[i] = 3.0 * dist(rng);

  // gamma 1 throughout: only there is the map the exact scalar minimizer,
  // which the descent and stationarity statements assume.
  const double ps[] = {1.0, 1.5, 2.0};
  ThresholdSpec spec{ps[seed % 3], rdist(rng), 1.0};

  RandomRun run{make_problem(ForwardModel(T, g), spec), {}, eta};
  Vector u0 = Vector::Zero(N);
  if (seed % 5 == 0)
    for (int i = 0; i < N; ++i) u0[i] = 2.0 * dist(rng);

  IterationConfig cfg;
  cfg.max_iters = 20000;
  cfg.step_tol = 1e-11;
  cfg.record_partitions = true;
  run.trace = iterate_unconstrained(run.prob, u0, cfg);
  return run;
}

void criteria_random_runs() {
  bool descent_ok = true, fixation_ok = true, fixed_point_ok = true;
  int converged = 0;
  std::string note4, note5, note6;

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto run = run_random_instance(seed);
    const auto& tr = run.trace;

    const double denom = 1.0 - run.eta * run.eta;
    for (int k = 0; k < tr.iterations; ++k) {
      const double drop = tr.objective[k] - tr.objective[k + 1];
      if (drop < -1e-12) {
        descent_ok = false;
        note4 = "objective rose, seed " + std::to_string(seed);
      }
      const double s = tr.step_norm[k];
      if (s * s > drop / denom + 1e-12) {
        descent_ok = false;
        note4 = "step energy, seed " + std::to_string(seed);
      }
    }

    if (!tr.converged) continue;
    ++converged;

    for (std::size_t k = tr.fixation_step; k < tr.partitions.size(); ++k)
      if (tr.partitions[k] != tr.partitions.back()) {
        fixation_ok = false;
        note5 = "partition moved after fixation, seed " + std::to_string(seed);
      }
    const double lo = tr.lambda_prime - tr.delta;
    for (Eigen::Index i = 0; i < tr.final_iterate.size(); ++i) {
      const double m = std::abs(tr.final_iterate[i]);
      if (m > lo && m <= tr.lambda_prime) {
        const double depth = std::min(m - lo, tr.lambda_prime - m);
        if (depth > 1e-8) {
          fixation_ok = false;
          note5 = "limit in the forbidden band, seed " + std::to_string(seed);
        }
      }
    }

    const auto rep = verify_fixed_point(tr.final_iterate, run.prob, 1e-6);
    if (!rep.is_fixed_point) {
      fixed_point_ok = false;
      note6 = "stationarity, seed " + std::to_string(seed);
    }
    const double radius = local_min_radius(run.prob.spec);
    if (!verify_local_min(tr.final_iterate, run.prob, 1000, radius, seed)) {
      fixed_point_ok = false;
      note6 = "local minimality, seed " + std::to_string(seed);
    }
  }

  const std::string count = std::to_string(converged) + "/100 converged";
  if (converged < 90) {
    descent_ok = fixation_ok = fixed_point_ok = false;
    note4 = note5 = note6 = count;
  }
  report(4, "descent and step energy", descent_ok,
         note4.empty() ? count : note4);
  report(5, "fixation and separation", fixation_ok, note5);
  report(6, "limits verify as fixed points and local minima", fixed_point_ok,
         note6);
}

// ---------------------------------------------------------------- 7 / 8

void criteria_oracle() {
  bool oracle_ok = true, one_sided_ok = true;
  std::string note7, note8;

  for (std::uint64_t seed = 1000; seed < 1200; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> ndist(2, 8);
    std::uniform_real_distribution<double> rdist(0.3, 2.2);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);

    const int N = ndist(rng);
    const int M = N + ndist(rng) % 4;
    const double eta = 0.5 + 0.45 * (double(seed % 10) / 9.0);
    const Matrix T = scaled_to_norm(random_matrix(M, N, rng), eta);
    Vector g(M);
    for (int i = 0; i < M; ++i) g[i] = 3.0 * dist(rng);
    const ThresholdSpec spec{2.0, rdist(rng), 1.0};
    const auto prob = make_problem(ForwardModel(T, g), spec);
    const auto res = global_min_enumerate(prob);

    if (!verify_fixed_point(res.minimizer, prob, 1e-6).is_fixed_point) {
      oracle_ok = false;
      note7 = "global not stationary, seed " + std::to_string(seed);
    }
    const double radius = local_min_radius(prob.spec);
    if (!check_isolated(prob, res.minimizer, 50, radius, seed)) {
      oracle_ok = false;
      note7 = "global not isolated, seed " + std::to_string(seed);
    }

    IterationConfig cfg;
    cfg.max_iters = 30000;
    cfg.step_tol = 1e-12;
    Vector u0 = Vector::Zero(N);
    for (int start = 0; start < 2; ++start) {
      const auto tr = iterate_unconstrained(prob, u0, cfg);
      if (tr.converged &&
          objective(tr.final_iterate, prob) < res.value - 1e-8) {
        one_sided_ok = false;
        note8 = "limit beats oracle, seed " + std::to_string(seed);
      }
      for (int i = 0; i < N; ++i) u0[i] = 2.0 * dist(rng);
    }
  }

  // the hand-solved one-unknown instance
  {
    Matrix T(1, 1);
    T << 0.5;
    Vector g(1);
    g << 4.0;
    const auto prob =
        make_problem(ForwardModel(T, g), ThresholdSpec{2.0, 1.0, 1.0});
    const auto res = global_min_enumerate(prob);
    if (std::abs(res.value - 1.0) > 1e-10 ||
        std::abs(res.minimizer[0] - 8.0) > 1e-8) {
      oracle_ok = false;
      note7 = "scalar anchor";
    }
    Vector u0(1);
    u0 << 8.0;
    IterationConfig cfg;
    cfg.step_tol = 1e-12;
    const auto tr = iterate_unconstrained(prob, u0, cfg);
    if (!tr.converged || std::abs(tr.final_iterate[0] - 8.0) > 1e-9) {
      oracle_ok = false;
      note7 = "scalar anchor drifts under iteration";
    }
  }

  report(7, "enumerated global minimizers are isolated fixed points",
         oracle_ok, note7);
  report(8, "iterative limits never beat the oracle", one_sided_ok, note8);
}

// ---------------------------------------------------------------- 9

void criterion_contraction() {
  bool ok = true;
  std::string note;
  for (std::uint64_t seed = 3000; seed < 3020 && ok; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> tdist(0.6, 0.9);
    std::uniform_real_distribution<double> gdist(-4.0, 4.0);
    std::uniform_real_distribution<double> rdist(0.5, 2.0);

    const int N = 6;
    Matrix T = Matrix::Zero(N, N);
    double min_t = 1.0;
    for (int i = 0; i < N; ++i) {
      const double t = tdist(rng);
      T(i, i) = t;
      min_t = std::min(min_t, t);
    }
    Vector g(N);
    for (int i = 0; i < N; ++i) g[i] = gdist(rng);
    const double p = seed % 2 == 0 ? 2.0 : 1.0;
    const auto prob =
        make_problem(ForwardModel(T, g), ThresholdSpec{p, rdist(rng), 1.0});

    IterationConfig cfg;
    cfg.max_iters = 320;
    cfg.step_tol = 1e-300;
    cfg.record_iterates = true;
    Vector u0(N);
    for (int i = 0; i < N; ++i) u0[i] = gdist(rng);
    const auto tr = iterate_unconstrained(prob, u0, cfg);

    const double delta = min_t * min_t;  // smallest eigenvalue of T*T
    const Vector& ref = tr.iterates.back();
    for (std::size_t m = std::size_t(tr.fixation_step) + 1;
         m + 41 < tr.iterates.size(); ++m) {
      const double e0 = (tr.iterates[m] - ref).norm();
      const double e1 = (tr.iterates[m + 1] - ref).norm();
      if (e0 <= 1e-12) break;
      if (e1 > (1.0 - delta) * e0 + 1e-14) {
        ok = false;
        note = "rate violated, seed " + std::to_string(seed);
        break;
      }
    }
  }
  report(9, "post-fixation contraction rate", ok, note);
}

// ---------------------------------------------------------------- 10

void criterion_constrained_2d() {
  bool ok = true;
  std::string note;

  // projector algebra: dense at a mid size, probed at the run size
  {
    GradientOperator2D op(32);
    const Matrix P = op.dense_projector();
    if ((P * P - P).cwiseAbs().maxCoeff() > 1e-10 ||
        (P - P.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
      ok = false;
      note = "dense projector algebra";
    }
  }
  {
    GradientOperator2D op(80);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int probe = 0; probe < 10; ++probe) {
      Vector a(op.deriv_size()), b(op.deriv_size());
      for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = dist(rng);
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = dist(rng);
      a.normalize();
      b.normalize();
      const Vector Pa = op.project(a);
      if ((op.project(Pa) - Pa).lpNorm<Eigen::Infinity>() > 1e-10) {
        ok = false;
        note = "projector not idempotent at n=80";
      }
      if (std::abs(Pa.dot(b) - a.dot(op.project(b))) > 1e-10) {
        ok = false;
        note = "projector not symmetric at n=80";
      }
    }
  }

  auto check_run = [&](const IterationTrace& tr, const char* tag) {
    if (!tr.converged || tr.iterations > 10000) {
      ok = false;
      note = std::string(tag) + " did not converge in budget";
      return;
    }
    if (tr.step_norm.back() > 1e-8) {
      ok = false;
      note = std::string(tag) + " step norm";
    }
    for (double r : tr.constraint_residual)
      if (r > 1e-8) {
        ok = false;
        note = std::string(tag) + " constraint residual";
      }
  };

  {
    auto op = build_gradient_2d(80);
    const auto img = make_blocks_image(80, 1, 0.0);
    const Vector samples = img.noisy.pixels / 255.0;
    auto prob = make_problem(ForwardModel::reduced_2d(op, samples),
                             ThresholdSpec{2.0, 5.0, 0.005}, op);
    IterationConfig cfg;
    cfg.step_tol = 1e-8;
    const auto tr = iterate_projected(prob, op->forward(samples), cfg);
    check_run(tr, "80x80 run");
  }
  {
    auto op = build_gradient_2d(40);
    const Image img = make_vertical_edge_image(40);
    const Image mask = make_centered_hole_mask(40, 4);
    const Image filled = nearest_fill(img, mask);
    Vector mask_vec(mask.pixels.size());
    for (Eigen::Index i = 0; i < mask_vec.size(); ++i)
      mask_vec[i] = mask.pixels[i] > 0.0 ? 1.0 : 0.0;
    const Vector samples = img.pixels / 255.0;
    auto prob = make_problem(ForwardModel::reduced_2d(op, samples, &mask_vec),
                             ThresholdSpec{2.0, 8.0, 1e-4}, op);
    IterationConfig cfg;
    cfg.step_tol = 1e-8;
    const auto tr =
        iterate_projected(prob, op->forward(filled.pixels / 255.0), cfg);
    check_run(tr, "40x40 run");
  }

  report(10, "constrained runs stay on gradient fields", ok, note);
}

// ---------------------------------------------------------------- 11

void criterion_basins() {
  bool ok = true;
  std::string note;
  IterationConfig cfg;
  cfg.step_tol = 1e-11;
  cfg.max_iters = 20000;

  for (std::uint64_t seed = 4000; seed < 4005; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Matrix T = random_matrix(2, 2, rng);
    while (std::abs(T.determinant()) < 0.1) T = random_matrix(2, 2, rng);
    T = scaled_to_norm(T, 0.85);
    Vector g(2);
    g << 3.0 * dist(rng), 3.0 * dist(rng);
    const auto prob =
        make_problem(ForwardModel(T, g), ThresholdSpec{2.0, 1.0, 1.0});

    const auto map = basin_map(prob, {-8.0, 8.0, -8.0, 8.0}, 161, cfg, 2);
    if (map.equilibria.empty() || map.equilibria.size() > 9) {
      ok = false;
      note = "equilibrium count, seed " + std::to_string(seed);
    }
    for (const auto& u : map.equilibria)
      if (!verify_fixed_point(u, prob, 1e-6).is_fixed_point) {
        ok = false;
        note = "equilibrium not stationary, seed " + std::to_string(seed);
      }
  }

  for (std::uint64_t seed = 4100; seed < 4103; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Vector a(2), b(2);
    a << dist(rng), dist(rng);
    b << dist(rng), dist(rng);
    a.normalize();
    b.normalize();
    const Matrix T = 0.85 * a * b.transpose();  // row space is span(b)
    Vector g(2);
    g << 2.0 * dist(rng), 2.0 * dist(rng);
    const auto prob =
        make_problem(ForwardModel(T, g), ThresholdSpec{2.0, 0.5, 1.0});

    const auto map = basin_map(prob, {-8.0, 8.0, -8.0, 8.0}, 400, cfg, 2);
    std::size_t best = 0;
    for (std::size_t e = 1; e < map.equilibria.size(); ++e)
      if (map.value[e] < map.value[best]) best = e;

    std::vector<std::size_t> rest;
    for (std::size_t e = 0; e < map.equilibria.size(); ++e)
      if (e != best) rest.push_back(e);
    if (rest.size() < 2) {
      ok = false;
      note = "degenerate equilibrium line, seed " + std::to_string(seed);
      continue;
    }
    for (std::size_t e : rest) {
      const Vector d = map.equilibria[e] - map.equilibria[rest[0]];
      if (std::abs(d.dot(b)) > 1e-4) {
        ok = false;
        note = "line leaves the kernel, seed " + std::to_string(seed);
      }
    }
    const double radius = local_min_radius(prob.spec);
    if (!check_isolated(prob, map.equilibria[best], 40, radius, seed)) {
      ok = false;
      note = "best equilibrium not isolated, seed " + std::to_string(seed);
    }
  }

  report(11, "basin structure", ok, note);
}

// ---------------------------------------------------------------- 12

std::string capture(const std::string& cmd, int& status) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    status = -1;
    return out;
  }
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0)
    out.append(buf, got);
  status = pclose(pipe);
  return out;
}

void criterion_determinism() {
  const std::string cmd =
      std::string(FREEDISC_CLI_PATH) + " --cmd selftest --seed 7 2>/dev/null";
  int s1 = 0, s2 = 0;
  const std::string a = capture(cmd, s1);
  const std::string b = capture(cmd, s2);
  bool ok = s1 == 0 && s2 == 0 && !a.empty() && a == b &&
            a.find("\"ok\": true") != std::string::npos;
  std::string note;
  if (s1 != 0 || s2 != 0)
    note = "selftest exit status";
  else if (a != b)
    note = "reports differ between runs";
  report(12, "selftest reruns are byte-identical", ok, note);
}

}  // namespace

int main() {
  criterion_threshold_anchors();
  criterion_threshold_minimizes();
  criterion_operator_anchors();
  criteria_random_runs();
  criteria_oracle();
  criterion_contraction();
  criterion_constrained_2d();
  criterion_basins();
  criterion_determinism();
  std::printf("%d of 12 checks failed\n", failures);
  return failures;
}
