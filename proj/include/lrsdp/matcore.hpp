#pragma once

// Dense symmetric linear algebra: the ambient variable type, the factor type,
// PSD projection, rank-r factorization and the orthogonally invariant
// Procrustes distance used as the convergence metric.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lrsdp/errors.hpp"

namespace lrsdp {

using Index = Eigen::Index;

/// Relative threshold below which a negative eigenvalue is treated as zero.
inline constexpr double kPsdTolerance = 1e-8;

/// Real symmetric p x p matrix. Every constructor produces a matrix whose
/// lower triangle is a bitwise copy of its upper triangle.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(Index dim) {
    detail::require(dim >= 1, "SymMatrix: dimension must be >= 1");
    m_ = Eigen::MatrixXd::Zero(dim, dim);
  }

  /// Builds from the upper triangle of `m`; the lower triangle is ignored.
  static SymMatrix from_upper(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    detail::require(m.rows() == m.cols() && m.rows() >= 1,
                    "SymMatrix::from_upper: matrix must be square and non-empty");
    SymMatrix s;
    s.m_ = m;
    mirror_upper(s.m_);
    return s;
  }

  static SymMatrix zero(Index dim) { return SymMatrix(dim); }

  static SymMatrix identity(Index dim) {
    SymMatrix s(dim);
    s.m_.setIdentity();
    return s;
  }

  static SymMatrix diagonal(const Eigen::Ref<const Eigen::VectorXd>& d) {
    SymMatrix s(d.size());
    s.m_.diagonal() = d;
    return s;
  }

  Index dim() const { return m_.rows(); }
  const Eigen::MatrixXd& mat() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

  /// Frobenius inner product <this, other>.
  double inner(const SymMatrix& other) const {
    check_same(other);
    return m_.cwiseProduct(other.m_).sum();
  }
  double squared_norm() const { return m_.squaredNorm(); }
  double norm() const { return m_.norm(); }
  bool all_finite() const { return m_.allFinite(); }

  SymMatrix& operator+=(const SymMatrix& o) {
    check_same(o);
    m_ += o.m_;
    return *this;
  }
  SymMatrix& operator-=(const SymMatrix& o) {
    check_same(o);
    m_ -= o.m_;
    return *this;
  }
  SymMatrix& operator*=(double s) {
    m_ *= s;
    return *this;
  }
  /// this += alpha * o
  SymMatrix& add_scaled(double alpha, const SymMatrix& o) {
    check_same(o);
    m_.noalias() += alpha * o.m_;
    return *this;
  }

  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
  friend SymMatrix operator*(SymMatrix a, double s) { return a *= s; }

  static void mirror_upper(Eigen::MatrixXd& m) {
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = j + 1; i < m.rows(); ++i) m(i, j) = m(j, i);
  }

 private:
  void check_same(const SymMatrix& o) const {
    detail::require(o.dim() == dim(), "SymMatrix: dimension mismatch");
  }

  Eigen::MatrixXd m_;
};

/// p x r factor U of X = U U^T.
class Factor {
 public:
  Factor() = default;

  explicit Factor(Eigen::MatrixXd u) : u_(std::move(u)) {
    detail::require(u_.rows() >= 1 && u_.cols() >= 1,
                    "Factor: rows and rank must be positive");
    detail::require(u_.cols() <= u_.rows(), "Factor: rank must not exceed rows");
  }

  Index rows() const { return u_.rows(); }
  Index rank() const { return u_.cols(); }
  const Eigen::MatrixXd& mat() const { return u_; }
  double norm() const { return u_.norm(); }
  bool all_finite() const { return u_.allFinite(); }

  /// U U^T, exactly symmetric.
  SymMatrix gram() const {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(u_.rows(), u_.rows());
    x.selfadjointView<Eigen::Upper>().rankUpdate(u_);
    return SymMatrix::from_upper(x);
  }

 private:
  Eigen::MatrixXd u_;
};

/// Minimizer of ||U - V R||_F over orthogonal R and the attained value.
struct Alignment {
  Eigen::MatrixXd rotation;
  double distance_sq = 0.0;
};

/// Eigenpairs sorted by eigenvalue, largest first.
struct SymEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

/// Full symmetric eigendecomposition with deterministic ordering and signs:
/// descending eigenvalues (ties keep solver order), and the first entry of
/// each eigenvector with magnitude above 1e-12 is made positive.
inline SymEigen sym_eigen(const SymMatrix& x) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(x.mat());
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "sym_eigen: eigensolver failed to converge (dim=" << x.dim()
        << ", ||X||_F=" << x.norm() << ", finite=" << x.all_finite() << ")";
    throw NumericalError(msg.str());
  }
  const Index p = x.dim();
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  const auto& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return ev(a) > ev(b); });
  SymEigen out;
  out.values.resize(p);
  out.vectors.resize(p, p);
  for (Index k = 0; k < p; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = ev(src);
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    for (Index i = 0; i < p; ++i) {
      if (std::abs(v(i)) > 1e-12) {
        if (v(i) < 0) v = -v;
        break;
      }
    }
    out.vectors.col(k) = v;
  }
  return out;
}

/// Largest absolute eigenvalue.
inline double spectral_norm(const SymMatrix& x) {
  const SymEigen e = sym_eigen(x);
  return std::max(std::abs(e.values(0)), std::abs(e.values(e.values.size() - 1)));
}

inline double min_eigenvalue(const SymMatrix& x) {
  const SymEigen e = sym_eigen(x);
  return e.values(e.values.size() - 1);
}

/// True when the smallest eigenvalue is >= -tol * ||X||_2.
inline bool is_psd(const SymMatrix& x, double tol = kPsdTolerance) {
  const SymEigen e = sym_eigen(x);
  const double top = std::max(std::abs(e.values(0)),
                              std::abs(e.values(e.values.size() - 1)));
  return e.values(e.values.size() - 1) >= -tol * top;
}

/// Orthogonal Procrustes alignment of V onto U: R = P Q^T from the SVD
/// V^T U = P S Q^T. The returned distance is ||U - V R||_F^2, which equals
/// ||U||^2 + ||V||^2 - 2 sum(S) but keeps full relative accuracy near zero.
inline Alignment procrustes(const Factor& u, const Factor& v) {
  detail::require(u.rows() == v.rows() && u.rank() == v.rank(),
                  "procrustes: factors must have identical shapes");
  const Eigen::MatrixXd cross = v.mat().transpose() * u.mat();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Alignment a;
  a.rotation = svd.matrixU() * svd.matrixV().transpose();
  a.distance_sq = (u.mat() - v.mat() * a.rotation).squaredNorm();
  return a;
}

/// E(U, V) = min over orthogonal R of ||U - V R||_F^2.
inline double manifold_distance_sq(const Factor& u, const Factor& v) {
  return procrustes(u, v).distance_sq;
}

/// Frobenius-nearest PSD matrix: Q max(L, 0) Q^T.
inline SymMatrix psd_project(const SymMatrix& x) {
  const SymEigen e = sym_eigen(x);
  const Eigen::VectorXd clamped = e.values.cwiseMax(0.0);
  Eigen::MatrixXd out = e.vectors * clamped.asDiagonal() * e.vectors.transpose();
  return SymMatrix::from_upper(out);
}

/// U = Q_r diag(sqrt(lambda_1..r)) from the r largest eigenpairs of a PSD X.
inline Factor rank_r_factor(const SymMatrix& x, Index r) {
  detail::require(r >= 1 && r <= x.dim(), "rank_r_factor: need 1 <= r <= p");
  const SymEigen e = sym_eigen(x);
  const Index p = x.dim();
  const double top = std::max(std::abs(e.values(0)), std::abs(e.values(p - 1)));
  if (e.values(p - 1) < -kPsdTolerance * top) {
    std::ostringstream msg;
    msg << "rank_r_factor: matrix is materially indefinite (min eigenvalue "
        << e.values(p - 1) << ", ||X||_2 " << top << ")";
    throw NumericalError(msg.str());
  }
  const Eigen::VectorXd roots = e.values.head(r).cwiseMax(0.0).cwiseSqrt();
  return Factor(e.vectors.leftCols(r) * roots.asDiagonal());
}

struct SpectralStats {
  double sigma_r = 0.0;
  double sigma_1 = 0.0;
  double tau = 0.0;
};

/// r-th largest eigenvalue, largest eigenvalue and their ratio for PSD X.
inline SpectralStats spectral_stats(const SymMatrix& x, Index r) {
  detail::require(r >= 1 && r <= x.dim(), "spectral_stats: need 1 <= r <= p");
  const SymEigen e = sym_eigen(x);
  SpectralStats s;
  s.sigma_1 = e.values(0);
  s.sigma_r = e.values(r - 1);
  if (!(s.sigma_1 > 0.0) || s.sigma_r < 1e-12 * s.sigma_1) {
    std::ostringstream msg;
    msg << "spectral_stats: rank below " << r << " (sigma_r=" << s.sigma_r
        << ", sigma_1=" << s.sigma_1 << ")";
    throw DegenerateRankError(msg.str());
  }
  s.tau = s.sigma_1 / s.sigma_r;
  return s;
}

/// Orthonormal basis of the column space of U (U assumed full column rank).
inline Eigen::MatrixXd column_basis(const Factor& u) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(u.mat());
  return qr.householderQ() * Eigen::MatrixXd::Identity(u.rows(), u.rank());
}

}  // namespace lrsdp
