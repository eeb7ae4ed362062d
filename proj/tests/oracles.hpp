#pragma once

// Reference computations written independently of the library so tests do
// not compare the implementation against itself.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
inline Vec jacobi_eigenvalues(Mat a, int sweeps = 100) {
  const Eigen::Index n = a.rows();
  for (int s = 0; s < sweeps; ++s) {
    double off = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-30 * std::max(1.0, a.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
      }
    }
  }
  Vec d = a.diagonal();
  std::sort(d.data(), d.data() + d.size(), std::greater<>());
  return d;
}

/// min over R in O(2) of ||U - V R||_F^2 by a grid over rotation and
/// reflection angles followed by golden-section refinement.
inline double procrustes_o2(const Mat& u, const Mat& v) {
  auto eval = [&](double th, bool reflect) {
    Mat r(2, 2);
    if (!reflect) {
      r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    } else {
      r << std::cos(th), std::sin(th), std::sin(th), -std::cos(th);
    }
    return (u - v * r).squaredNorm();
  };
  const double step = 1e-4;
  const double two_pi = 2.0 * M_PI;
  double best = std::numeric_limits<double>::infinity();
  for (bool reflect : {false, true}) {
    double best_th = 0.0, best_val = std::numeric_limits<double>::infinity();
    for (double th = 0.0; th < two_pi; th += step) {
      const double val = eval(th, reflect);
      if (val < best_val) {
        best_val = val;
        best_th = th;
      }
    }
    double lo = best_th - step, hi = best_th + step;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 100; ++it) {
      const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
      if (eval(a, reflect) < eval(b, reflect)) hi = b; else lo = a;
    }
    best = std::min({best, best_val, eval(0.5 * (lo + hi), reflect)});
  }
  return best;
}

/// min over R in O(1) = {+1, -1}.
inline double procrustes_o1(const Mat& u, const Mat& v) {
  return std::min((u - v).squaredNorm(), (u + v).squaredNorm());
}

/// Central difference (f(x + e h) - f(x - e h)) / (2 e).
inline double central_difference(const std::function<double(double)>& f, double eps) {
  return (f(eps) - f(-eps)) / (2.0 * eps);
}

/// (1/2b) sum (y_i - <A_i, X>)^2 with explicit loops.
inline double naive_loss(const std::vector<Mat>& a, const Vec& y, const Mat& x,
                         const std::vector<Eigen::Index>& idx) {
  double acc = 0.0;
  for (auto i : idx) {
    double ip = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index c = 0; c < x.cols(); ++c) ip += a[static_cast<std::size_t>(i)](r, c) * x(r, c);
    const double res = y(i) - ip;
    acc += res * res;
  }
  return acc / (2.0 * static_cast<double>(idx.size()));
}

/// Dense matrix of X -> (1/n) sum <A_i, X> A_i in the orthonormal basis
/// {E_jj} U {(E_jk + E_kj)/sqrt2}.
inline Mat gram_operator(const std::vector<Mat>& a) {
  const Eigen::Index p = a.front().rows();
  std::vector<Mat> basis;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = j; k < p; ++k) {
      Mat e = Mat::Zero(p, p);
      if (j == k) {
        e(j, j) = 1.0;
      } else {
        e(j, k) = e(k, j) = 1.0 / std::sqrt(2.0);
      }
      basis.push_back(e);
    }
  }
  const auto d = static_cast<Eigen::Index>(basis.size());
  Mat coords(static_cast<Eigen::Index>(a.size()), d);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (Eigen::Index k = 0; k < d; ++k)
      coords(static_cast<Eigen::Index>(i), k) = a[i].cwiseProduct(basis[static_cast<std::size_t>(k)]).sum();
  return coords.transpose() * coords / static_cast<double>(a.size());
}

inline Mat random_symmetric(Eigen::Index p, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Mat g(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) g(i, j) = nd(gen);
  return 0.5 * (g + g.transpose());
}

inline Mat random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Mat g(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = nd(gen);
  return g;
}

}  // namespace oracle
