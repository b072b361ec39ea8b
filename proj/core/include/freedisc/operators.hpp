#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cstdint>
#include <memory>
#include <utility>

namespace freedisc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Forward differences of n samples on a grid of step h = 1/n, as the
// (n-1) x n matrix with rows (.. -1/h +1/h ..), together with its
// Moore-Penrose inverse in closed form:
//   pinv(i,j) = -(n-j)/n^2 for i <= j, j/n^2 for i > j   (1-based).
// Columns of pinv sum to zero; pinv * forward = I - (1/n) 1 1^T.
struct GradientOperator1D {
  int n = 0;
  double h = 0.0;
  Matrix forward;  // (n-1) x n
  Matrix pinv;     // n x (n-1)
};

// Throws std::invalid_argument outside 2 <= n <= 4096.
GradientOperator1D build_gradient_1d(int n);

// Sum of squared pinv entries; equals (1 - 1/n^2)/6 analytically.
double pinv_frobenius_sq(const GradientOperator1D& op);

// Forward differences of an n x n image in both directions, acting on the
// flattened pixel vector u[(i-1)n + j] = u_{i,j} (1-based i, j):
//   x block: z[(i-1)n + j]           = (u_{i+1,j} - u_{i,j}) / h, i < n
//   y block: z[n(n-1) + (i-1)(n-1)+j] = (u_{i,j+1} - u_{i,j}) / h, j < n
// Least-squares applications go through the normal-equation Laplacian
// L = D^T D, factored once with the mean pinned (L is singular on
// constants); this reproduces the Moore-Penrose inverse exactly because
// D^+ = L^+ D^T. Dense materializations exist for small n as cross-checks.
class GradientOperator2D {
 public:
  // Throws std::invalid_argument outside 2 <= n <= 128 (dense-vector sizing
  // targets desk scale).
  explicit GradientOperator2D(int n);

  int n() const { return n_; }
  double h() const { return h_; }
  Eigen::Index image_size() const { return Eigen::Index(n_) * n_; }
  Eigen::Index deriv_size() const { return 2 * Eigen::Index(n_) * (n_ - 1); }

  const Eigen::SparseMatrix<double>& forward_matrix() const { return fwd_; }

  Vector forward(const Vector& u) const;       // D u
  Vector pinv(const Vector& z) const;          // D^+ z (min-norm LS)
  Vector pinv_adjoint(const Vector& u) const;  // (D^+)^T u
  Vector project(const Vector& z) const;       // P z, P = D D^+

  // ||z - P z||_inf: zero exactly on discrete gradient fields.
  double constraint_residual(const Vector& z) const;

  // Max violation of the mixed-difference identity
  //   zy(i,j) + zx(i,j+1) == zy(i+1,j) + zx(i,j)  over interior cells;
  // zero on gradient fields, the (n-1)^2 identities span the constraint.
  double schwartz_residual(const Vector& z) const;

  // 0-based flat indices into the derivative vector.
  Eigen::Index primal_index(int i, int j) const { return Eigen::Index(i) * n_ + j; }
  Eigen::Index dx_index(int i, int j) const { return Eigen::Index(i) * n_ + j; }
  Eigen::Index dy_index(int i, int j) const {
    return Eigen::Index(n_) * (n_ - 1) + Eigen::Index(i) * (n_ - 1) + j;
  }

  // Dense materializations; throw std::invalid_argument for n > 32.
  Matrix dense_forward() const;
  Matrix dense_pinv() const;
  Matrix dense_projector() const;

 private:
  int n_;
  double h_;
  Eigen::SparseMatrix<double> fwd_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> pinned_;  // [L 1; 1^T 0]

  Vector solve_pinned(const Vector& rhs) const;  // x = L^+ rhs
};

std::shared_ptr<GradientOperator2D> build_gradient_2d(int n);

// (derivatives, mean level); assemble_primal inverts the decomposition.
std::pair<Vector, double> decompose_mean(const Vector& u,
                                         const GradientOperator1D& op);
std::pair<Vector, double> decompose_mean(const Vector& u,
                                         const GradientOperator2D& op);
Vector assemble_primal(const Vector& z, double c, const GradientOperator1D& op);
Vector assemble_primal(const Vector& z, double c, const GradientOperator2D& op);

// 0/1 observation mask as a square diagonal matrix. Entries must be exactly
// 0 or 1 and at least one must be 1 (the constant direction may not be
// invisible, or the mean level cannot be recovered).
Matrix mask_matrix(const Vector& mask);

// Quadratic data side ||A z - b||^2 of a problem instance. Two flavors:
// an explicit dense operator, or the mean-reduced derivative-domain model
// A = (I - qq^T/|q|^2) K D^+ with q = K 1 built from samples and an optional
// mask K. The reduced flavors also recover the optimal mean level.
class ForwardModel {
 public:
  ForwardModel(Matrix T, Vector g);

  static ForwardModel reduced_1d(const GradientOperator1D& op,
                                 const Vector& samples,
                                 const Vector* mask = nullptr);
  static ForwardModel reduced_2d(std::shared_ptr<const GradientOperator2D> op,
                                 const Vector& samples,
                                 const Vector* mask = nullptr);

  Eigen::Index rows() const { return g_.size(); }
  Eigen::Index cols() const { return cols_; }

  Vector apply(const Vector& z) const;
  Vector apply_adjoint(const Vector& w) const;
  const Vector& data() const { return g_; }

  // Net multiplier folded into the operator and data by rescale().
  double scale() const { return scale_; }
  void rescale(double s);

  // Cached power-method estimate of the operator norm (never above it).
  double norm_bound() const;

  bool has_mean_recovery() const { return k_one_.size() > 0; }
  // <K1, g0 - K D^+ z> / ||K1||^2, independent of rescaling.
  double mean_value(const Vector& z) const;

  bool is_dense() const { return op2d_ == nullptr; }
  const Matrix& dense() const;

 private:
  ForwardModel() = default;

  Matrix dense_;                                    // effective dense operator
  Matrix raw_;                                      // K D^+ without reduction
  std::shared_ptr<const GradientOperator2D> op2d_;  // structured path
  Vector mask_;                                     // empty = identity K
  Vector g_;                                        // effective data
  Vector g0_;                                       // original samples
  Vector k_one_;                                    // K 1 (empty: no recovery)
  double k_one_sq_ = 0.0;
  Eigen::Index cols_ = 0;
  double scale_ = 1.0;
  mutable double norm_bound_ = -1.0;
};

// Power-method estimate of ||model|| from a seeded start; approaches the true
// norm from below. Used to pick a scale keeping the effective norm under 1.
double estimate_norm(const ForwardModel& model, int iters = 200,
                     std::uint64_t seed = 0x2545F4914F6CDD1DULL);

}  // namespace freedisc
