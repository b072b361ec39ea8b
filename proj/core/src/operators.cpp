#include "freedisc/operators.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace freedisc {

GradientOperator1D build_gradient_1d(int n) {
  if (n < 2 || n > 4096)
    throw std::invalid_argument("build_gradient_1d: n outside [2, 4096]");
  GradientOperator1D op;
  op.n = n;
  op.h = 1.0 / n;
  op.forward = Matrix::Zero(n - 1, n);
  for (int i = 0; i < n - 1; ++i) {
    op.forward(i, i) = -n;
    op.forward(i, i + 1) = n;
  }
  const double n2 = double(n) * n;
  op.pinv = Matrix::Zero(n, n - 1);
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n - 1; ++j)
      op.pinv(i - 1, j - 1) = i <= j ? -(n - j) / n2 : j / n2;
  return op;
}

double pinv_frobenius_sq(const GradientOperator1D& op) {
  return op.pinv.squaredNorm();
}

GradientOperator2D::GradientOperator2D(int n) : n_(n), h_(1.0 / n) {
  if (n < 2 || n > 128)
    throw std::invalid_argument("GradientOperator2D: n outside [2, 128]");
  const Eigen::Index N = image_size();
  const Eigen::Index M = deriv_size();

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * M);
  const double inv_h = double(n);
  for (int i = 0; i < n - 1; ++i)
    for (int j = 0; j < n; ++j) {
      const Eigen::Index k = dx_index(i, j);
      trip.emplace_back(k, primal_index(i + 1, j), inv_h);
      trip.emplace_back(k, primal_index(i, j), -inv_h);
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n - 1; ++j) {
      const Eigen::Index k = dy_index(i, j);
      trip.emplace_back(k, primal_index(i, j + 1), inv_h);
      trip.emplace_back(k, primal_index(i, j), -inv_h);
    }
  fwd_.resize(M, N);
  fwd_.setFromTriplets(trip.begin(), trip.end());
  fwd_.makeCompressed();

  // Augmented normal equations [L 1; 1^T 0] pin the constant null space of
  // L = D^T D; the solve then returns exactly L^+ rhs for any rhs.
  Eigen::SparseMatrix<double> L =
      Eigen::SparseMatrix<double>(fwd_.transpose()) * fwd_;
  std::vector<Eigen::Triplet<double>> atrip;
  atrip.reserve(L.nonZeros() + 2 * N);
  for (int k = 0; k < L.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(L, k); it; ++it)
      atrip.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index i = 0; i < N; ++i) {
    atrip.emplace_back(i, N, 1.0);
    atrip.emplace_back(N, i, 1.0);
  }
  Eigen::SparseMatrix<double> K(N + 1, N + 1);
  K.setFromTriplets(atrip.begin(), atrip.end());
  K.makeCompressed();
  pinned_.compute(K);
  if (pinned_.info() != Eigen::Success)
    throw std::runtime_error("GradientOperator2D: pinned factorization failed");
}

Vector GradientOperator2D::solve_pinned(const Vector& rhs) const {
  const Eigen::Index N = image_size();
  Vector aug = Vector::Zero(N + 1);
  aug.head(N) = rhs;
  Vector sol = pinned_.solve(aug);
  return sol.head(N);
}

Vector GradientOperator2D::forward(const Vector& u) const {
  if (u.size() != image_size())
    throw std::invalid_argument("forward: bad size");
  return fwd_ * u;
}

Vector GradientOperator2D::pinv(const Vector& z) const {
  if (z.size() != deriv_size()) throw std::invalid_argument("pinv: bad size");
  return solve_pinned(fwd_.transpose() * z);
}

Vector GradientOperator2D::pinv_adjoint(const Vector& u) const {
  if (u.size() != image_size())
    throw std::invalid_argument("pinv_adjoint: bad size");
  return fwd_ * solve_pinned(u);
}

Vector GradientOperator2D::project(const Vector& z) const {
  return fwd_ * pinv(z);
}

double GradientOperator2D::constraint_residual(const Vector& z) const {
  return (z - project(z)).lpNorm<Eigen::Infinity>();
}

double GradientOperator2D::schwartz_residual(const Vector& z) const {
  if (z.size() != deriv_size())
    throw std::invalid_argument("schwartz_residual: bad size");
  double worst = 0.0;
  for (int i = 0; i < n_ - 1; ++i)
    for (int j = 0; j < n_ - 1; ++j) {
      const double v = z[dy_index(i, j)] + z[dx_index(i, j + 1)] -
                       z[dy_index(i + 1, j)] - z[dx_index(i, j)];
      worst = std::max(worst, std::abs(v));
    }
  return worst;
}

Matrix GradientOperator2D::dense_forward() const {
  if (n_ > 32) throw std::invalid_argument("dense_forward: n > 32");
  return Matrix(fwd_);
}

Matrix GradientOperator2D::dense_pinv() const {
  if (n_ > 32) throw std::invalid_argument("dense_pinv: n > 32");
  Matrix out(image_size(), deriv_size());
  Vector e = Vector::Zero(deriv_size());
  for (Eigen::Index k = 0; k < deriv_size(); ++k) {
    e[k] = 1.0;
    out.col(k) = pinv(e);
    e[k] = 0.0;
  }
  return out;
}

Matrix GradientOperator2D::dense_projector() const {
  if (n_ > 32) throw std::invalid_argument("dense_projector: n > 32");
  return Matrix(fwd_) * dense_pinv();
}

std::shared_ptr<GradientOperator2D> build_gradient_2d(int n) {
  return std::make_shared<GradientOperator2D>(n);
}

std::pair<Vector, double> decompose_mean(const Vector& u,
                                         const GradientOperator1D& op) {
  if (u.size() != op.n) throw std::invalid_argument("decompose_mean: bad size");
  return {op.forward * u, u.mean()};
}

std::pair<Vector, double> decompose_mean(const Vector& u,
                                         const GradientOperator2D& op) {
  return {op.forward(u), u.mean()};
}

Vector assemble_primal(const Vector& z, double c,
                       const GradientOperator1D& op) {
  if (z.size() != op.n - 1)
    throw std::invalid_argument("assemble_primal: bad size");
  return (op.pinv * z).array() + c;
}

Vector assemble_primal(const Vector& z, double c,
                       const GradientOperator2D& op) {
  return op.pinv(z).array() + c;
}

Matrix mask_matrix(const Vector& mask) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0.0 && mask[i] != 1.0)
      throw std::invalid_argument("mask_matrix: entries must be 0 or 1");
    sum += mask[i];
  }
  if (sum == 0.0) throw std::invalid_argument("mask_matrix: empty mask");
  return Matrix(mask.asDiagonal());
}

namespace {

void check_mask(const Vector& mask, Eigen::Index expect) {
  if (mask.size() != expect)
    throw std::invalid_argument("ForwardModel: mask size mismatch");
  (void)mask_matrix(mask);  // reuse the entry/emptiness validation
}

Vector reduce(const Vector& meas, const Vector& q, double qsq) {
  return meas - q * (q.dot(meas) / qsq);
}

}  // namespace

ForwardModel::ForwardModel(Matrix T, Vector g) {
  if (T.rows() != g.size())
    throw std::invalid_argument("ForwardModel: T rows != g size");
  if (T.rows() == 0 || T.cols() == 0)
    throw std::invalid_argument("ForwardModel: empty operator");
  cols_ = T.cols();
  dense_ = std::move(T);
  g_ = std::move(g);
}

ForwardModel ForwardModel::reduced_1d(const GradientOperator1D& op,
                                      const Vector& samples,
                                      const Vector* mask) {
  if (samples.size() != op.n)
    throw std::invalid_argument("reduced_1d: samples size != n");
  ForwardModel m;
  m.cols_ = op.n - 1;
  m.g0_ = samples;
  if (mask) {
    check_mask(*mask, op.n);
    m.mask_ = *mask;
    m.k_one_ = *mask;
    m.raw_ = mask->asDiagonal() * op.pinv;
  } else {
    m.k_one_ = Vector::Ones(op.n);
    m.raw_ = op.pinv;
  }
  m.k_one_sq_ = m.k_one_.squaredNorm();
  const Vector meas =
      mask ? Vector(mask->cwiseProduct(samples)) : samples;
  m.g_ = reduce(meas, m.k_one_, m.k_one_sq_);
  m.dense_ = m.raw_;
  for (Eigen::Index c = 0; c < m.dense_.cols(); ++c)
    m.dense_.col(c) = reduce(m.dense_.col(c), m.k_one_, m.k_one_sq_);
  return m;
}

ForwardModel ForwardModel::reduced_2d(
    std::shared_ptr<const GradientOperator2D> op, const Vector& samples,
    const Vector* mask) {
  if (!op) throw std::invalid_argument("reduced_2d: null operator");
  if (samples.size() != op->image_size())
    throw std::invalid_argument("reduced_2d: samples size != n^2");
  ForwardModel m;
  m.op2d_ = std::move(op);
  m.cols_ = m.op2d_->deriv_size();
  m.g0_ = samples;
  if (mask) {
    check_mask(*mask, m.op2d_->image_size());
    m.mask_ = *mask;
    m.k_one_ = *mask;
  } else {
    m.k_one_ = Vector::Ones(m.op2d_->image_size());
  }
  m.k_one_sq_ = m.k_one_.squaredNorm();
  const Vector meas =
      mask ? Vector(mask->cwiseProduct(samples)) : samples;
  m.g_ = reduce(meas, m.k_one_, m.k_one_sq_);
  return m;
}

Vector ForwardModel::apply(const Vector& z) const {
  if (z.size() != cols_) throw std::invalid_argument("apply: bad size");
  if (is_dense()) return dense_ * z;
  Vector w = op2d_->pinv(z);
  if (mask_.size()) w = mask_.cwiseProduct(w);
  w = reduce(w, k_one_, k_one_sq_);
  return scale_ == 1.0 ? w : Vector(scale_ * w);
}

Vector ForwardModel::apply_adjoint(const Vector& w) const {
  if (w.size() != rows()) throw std::invalid_argument("apply_adjoint: bad size");
  if (is_dense()) return dense_.transpose() * w;
  Vector v = reduce(w, k_one_, k_one_sq_);
  if (mask_.size()) v = mask_.cwiseProduct(v);
  v = op2d_->pinv_adjoint(v);
  return scale_ == 1.0 ? v : Vector(scale_ * v);
}

void ForwardModel::rescale(double s) {
  if (!(s > 0.0) || !std::isfinite(s))
    throw std::invalid_argument("rescale: s must be positive and finite");
  scale_ *= s;
  g_ *= s;
  if (is_dense()) dense_ *= s;
  norm_bound_ = -1.0;  // invalidate cache
}

double ForwardModel::norm_bound() const {
  if (norm_bound_ < 0.0) norm_bound_ = estimate_norm(*this);
  return norm_bound_;
}

double ForwardModel::mean_value(const Vector& z) const {
  if (!has_mean_recovery() || g0_.size() == 0)
    throw std::logic_error("mean_value: model has no mean recovery metadata");
  Vector w;
  if (is_dense()) {
    w = raw_ * z;  // K D^+ z
  } else {
    w = op2d_->pinv(z);
    if (mask_.size()) w = mask_.cwiseProduct(w);
  }
  return k_one_.dot(g0_ - w) / k_one_sq_;
}

const Matrix& ForwardModel::dense() const {
  if (!is_dense()) throw std::logic_error("dense: structured model");
  return dense_;
}

double estimate_norm(const ForwardModel& model, int iters,
                     std::uint64_t seed) {
  if (iters < 1) throw std::invalid_argument("estimate_norm: iters < 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(model.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  v.normalize();
  double lambda = 0.0;
  for (int k = 0; k < iters; ++k) {
    Vector w = model.apply_adjoint(model.apply(v));
    lambda = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

}  // namespace freedisc
