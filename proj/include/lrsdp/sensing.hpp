#pragma once

// Noiseless matrix sensing with a planted low-rank PSD optimum:
//   f(X) = (1/2n) sum_i (y_i - <A_i, X>)^2,  y_i = <A_i, X*>.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lrsdp/errors.hpp"
#include "lrsdp/matcore.hpp"
#include "lrsdp/objective.hpp"
#include "lrsdp/random.hpp"

namespace lrsdp {

struct SensingParams {
  Index p = 0;
  Index r = 0;
  Index n = 0;
  std::uint64_t seed = 0;
  std::optional<std::vector<double>> spectrum;

  friend bool operator==(const SensingParams&, const SensingParams&) = default;
};

struct Curvature {
  double L_hat = 0.0;
  double mu_hat = 0.0;
  int power_iterations = 0;
  bool dense_fallback = false;
};

inline constexpr double kPowerTolerance = 1e-8;
inline constexpr int kPowerMaxIterations = 500;
inline constexpr int kCurvatureDirections = 200;

class SensingInstance {
 public:
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  /// Seeded instance: Gaussian A_i symmetrized as (G + G^T)/2, Gaussian U*
  /// optionally rescaled so X* has the requested top-r spectrum.
  static SensingInstance generate(const SensingParams& params) {
    detail::require(params.r >= 1 && params.r <= params.p, "generate: need 1 <= r <= p");
    detail::require(params.n >= 1, "generate: need n >= 1");
    const Index p = params.p;
    const Index r = params.r;
    if (params.spectrum) {
      detail::require(static_cast<Index>(params.spectrum->size()) == r,
                      "generate: spectrum must have exactly r entries");
      for (double s : *params.spectrum)
        detail::require(s > 0.0 && std::isfinite(s), "generate: spectrum entries must be positive");
    }

    SensingInstance inst;
    inst.params_ = params;
    inst.amat_.resize(params.n, p * p);
    Rng meas = Rng::stream(params.seed, "measurements");
    for (Index i = 0; i < params.n; ++i) {
      const Eigen::MatrixXd g = meas.gaussian(p, p);
      Eigen::MatrixXd a(p, p);
      for (Index j = 0; j < p; ++j)
        for (Index k = 0; k < p; ++k) a(k, j) = 0.5 * (g(k, j) + g(j, k));
      inst.amat_.row(i) = Eigen::Map<const Eigen::RowVectorXd>(a.data(), p * p);
    }

    Rng planted = Rng::stream(params.seed, "planted");
    Eigen::MatrixXd u = planted.gaussian(p, r);
    if (params.spectrum) {
      std::vector<double> spec = *params.spectrum;
      std::sort(spec.begin(), spec.end(), std::greater<>());
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(u, Eigen::ComputeThinU | Eigen::ComputeThinV);
      Eigen::VectorXd roots(r);
      for (Index k = 0; k < r; ++k) roots(k) = std::sqrt(spec[static_cast<std::size_t>(k)]);
      u = svd.matrixU() * roots.asDiagonal() * svd.matrixV().transpose();
    }
    inst.u_star_ = Factor(u);
    inst.finish_planted();
    inst.y_ = inst.measure(inst.x_star_);
    inst.curvature_ = inst.estimate_curvature();
    return inst;
  }

  /// Instance from explicit measurements (rows of `a` are vec(A_i) of
  /// symmetric p x p matrices). `u_star` is optional; without it the instance
  /// has no planted optimum and y must be supplied.
  static SensingInstance from_measurements(const std::vector<SymMatrix>& a, Eigen::VectorXd y,
                                           std::optional<Factor> u_star = std::nullopt,
                                           std::uint64_t seed = 0) {
    detail::require(!a.empty(), "from_measurements: need at least one measurement");
    detail::require(static_cast<Index>(a.size()) == y.size(),
                    "from_measurements: one observation per measurement");
    const Index p = a.front().dim();
    SensingInstance inst;
    inst.params_.p = p;
    inst.params_.n = static_cast<Index>(a.size());
    inst.params_.seed = seed;
    inst.amat_.resize(inst.params_.n, p * p);
    for (Index i = 0; i < inst.params_.n; ++i) {
      const auto& ai = a[static_cast<std::size_t>(i)];
      detail::require(ai.dim() == p, "from_measurements: measurement dimension mismatch");
      inst.amat_.row(i) = Eigen::Map<const Eigen::RowVectorXd>(ai.mat().data(), p * p);
    }
    inst.y_ = std::move(y);
    if (u_star) {
      detail::require(u_star->rows() == p, "from_measurements: planted factor has wrong rows");
      inst.params_.r = u_star->rank();
      inst.u_star_ = *u_star;
      inst.finish_planted();
    }
    inst.curvature_ = inst.estimate_curvature();
    return inst;
  }

  Index num_samples() const { return params_.n; }
  Index dim() const { return params_.p; }
  Index rank() const { return params_.r; }
  const SensingParams& params() const { return params_; }
  const Eigen::VectorXd& observations() const { return y_; }
  const RowMajor& measurement_rows() const { return amat_; }
  double L_hat() const { return curvature_.L_hat; }
  double mu_hat() const { return curvature_.mu_hat; }
  const Curvature& curvature() const { return curvature_; }

  bool has_planted() const { return planted_; }
  const Factor& planted_factor() const {
    detail::require(planted_, "instance has no planted optimum");
    return u_star_;
  }
  const SymMatrix& planted_matrix() const {
    detail::require(planted_, "instance has no planted optimum");
    return x_star_;
  }

  SymMatrix measurement(Index i) const {
    check_index(i);
    Eigen::MatrixXd a = Eigen::Map<const Eigen::MatrixXd>(amat_.row(i).data(), dim(), dim());
    return SymMatrix::from_upper(a);
  }

  /// Vector of <A_i, X> for all i.
  Eigen::VectorXd measure(const SymMatrix& x) const {
    check_dim(x);
    return amat_ * Eigen::Map<const Eigen::VectorXd>(x.mat().data(), dim() * dim());
  }

  double value_full(const SymMatrix& x) const {
    const Eigen::VectorXd res = y_ - measure(x);
    return res.squaredNorm() / (2.0 * static_cast<double>(num_samples()));
  }

  double value_batch(const SymMatrix& x, BatchIndex batch) const {
    check_dim(x);
    check_batch(batch);
    const auto xv = Eigen::Map<const Eigen::VectorXd>(x.mat().data(), dim() * dim());
    double acc = 0.0;
    for (Index i : batch) {
      const double res = y_(i) - amat_.row(i).dot(xv.transpose());
      acc += res * res;
    }
    return acc / (2.0 * static_cast<double>(batch.size()));
  }

  SymMatrix grad_full(const SymMatrix& x) const {
    const Eigen::VectorXd res = y_ - measure(x);
    return combine(-res / static_cast<double>(num_samples()));
  }

  SymMatrix grad_batch(const SymMatrix& x, BatchIndex batch) const {
    check_dim(x);
    check_batch(batch);
    if (static_cast<Index>(batch.size()) == num_samples()) return grad_full(x);
    const auto xv = Eigen::Map<const Eigen::VectorXd>(x.mat().data(), dim() * dim());
    Eigen::VectorXd coeff(static_cast<Index>(batch.size()));
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const Index i = batch[k];
      coeff(static_cast<Index>(k)) = -(y_(i) - amat_.row(i).dot(xv.transpose()));
    }
    return combine_batch(coeff / static_cast<double>(batch.size()), batch);
  }

  /// (1/b) sum_{i in batch} <A_i, X - Y> A_i, the exact difference of the
  /// per-sample gradients at X and Y.
  SymMatrix grad_batch_diff(const SymMatrix& x, const SymMatrix& y, BatchIndex batch) const {
    check_dim(x);
    check_dim(y);
    check_batch(batch);
    const SymMatrix d = x - y;
    if (static_cast<Index>(batch.size()) == num_samples())
      return combine(measure(d) / static_cast<double>(num_samples()));
    const auto dv = Eigen::Map<const Eigen::VectorXd>(d.mat().data(), dim() * dim());
    Eigen::VectorXd coeff(static_cast<Index>(batch.size()));
    for (std::size_t k = 0; k < batch.size(); ++k)
      coeff(static_cast<Index>(k)) = amat_.row(batch[k]).dot(dv.transpose());
    return combine_batch(coeff / static_cast<double>(batch.size()), batch);
  }

  /// Largest eigenvalue of X -> (1/n) sum <A_i, X> A_i by power iteration,
  /// and the smallest Rayleigh quotient of the same form over random
  /// symmetric directions of rank <= 2r.
  Curvature estimate_curvature() const {
    Curvature c;
    const Index p = dim();
    const Index n = num_samples();
    const Index d = p * (p + 1) / 2;
    const double inv_n = 1.0 / static_cast<double>(n);

    // Coordinates in an orthonormal basis of symmetric matrices preserve the
    // Frobenius inner product, so the operator becomes (1/n) C^T C.
    Eigen::MatrixXd coords(n, d);
    const double root2 = std::sqrt(2.0);
    for (Index i = 0; i < n; ++i) {
      Index col = 0;
      for (Index j = 0; j < p; ++j) {
        coords(i, col++) = amat_(i, j * p + j);
        for (Index k = j + 1; k < p; ++k) coords(i, col++) = root2 * amat_(i, k * p + j);
      }
    }
    const Index g = std::min(n, d);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(g, g);
    if (n <= d) {
      gram.selfadjointView<Eigen::Lower>().rankUpdate(coords, inv_n);
    } else {
      gram.selfadjointView<Eigen::Lower>().rankUpdate(coords.transpose(), inv_n);
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    coords.resize(0, 0);

    Rng rng = Rng::stream(params_.seed, "curvature");
    Eigen::VectorXd v = rng.gaussian(g, 1).col(0);
    v.normalize();
    double lambda = v.dot(gram * v);
    bool converged = false;
    for (int it = 1; it <= kPowerMaxIterations; ++it) {
      Eigen::VectorXd w = gram * v;
      const double norm = w.norm();
      if (!(norm > 0.0)) {
        lambda = 0.0;
        converged = true;
        c.power_iterations = it;
        break;
      }
      v = w / norm;
      const double next = v.dot(gram * v);
      c.power_iterations = it;
      const bool done = std::abs(next - lambda) <= kPowerTolerance * std::abs(next);
      lambda = next;
      if (done) {
        converged = true;
        break;
      }
    }
    if (!converged || !std::isfinite(lambda)) {
      // Near-degenerate top eigenvalues stall power iteration; the compressed
      // operator is small enough for an exact dense solve.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
      if (solver.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "estimate_curvature: power iteration did not converge in "
            << kPowerMaxIterations << " iterations (last estimate " << lambda
            << ") and the dense fallback failed";
        throw NumericalError(msg.str());
      }
      lambda = solver.eigenvalues()(g - 1);
      c.dense_fallback = true;
    }
    c.L_hat = lambda;

    const Index rr = std::max<Index>(params_.r, 1);
    Eigen::MatrixXd dirs(p * p, kCurvatureDirections);
    for (int k = 0; k < kCurvatureDirections; ++k) {
      const Eigen::MatrixXd g1 = rng.gaussian(p, rr);
      const Eigen::MatrixXd g2 = rng.gaussian(p, rr);
      Eigen::MatrixXd dm = g1 * g1.transpose() - g2 * g2.transpose();
      SymMatrix::mirror_upper(dm);
      dm /= dm.norm();
      dirs.col(k) = Eigen::Map<const Eigen::VectorXd>(dm.data(), p * p);
    }
    const Eigen::MatrixXd proj = amat_ * dirs;
    const Eigen::VectorXd quotients = proj.colwise().squaredNorm().transpose() * inv_n;
    c.mu_hat = std::min(quotients.minCoeff(), c.L_hat);
    return c;
  }

 private:
  void finish_planted() {
    planted_ = true;
    x_star_ = u_star_.gram();
  }

  void check_dim(const SymMatrix& x) const {
    detail::require(x.dim() == dim(), "sensing: matrix dimension does not match instance");
  }
  void check_index(Index i) const {
    detail::require(i >= 0 && i < num_samples(), "sensing: sample index out of range");
  }
  void check_batch(BatchIndex batch) const {
    detail::require(!batch.empty(), "sensing: empty batch");
    detail::require(static_cast<Index>(batch.size()) <= num_samples(),
                    "sensing: batch larger than sample count");
    for (std::size_t k = 0; k < batch.size(); ++k) {
      check_index(batch[k]);
      if (k > 0) detail::require(batch[k] > batch[k - 1], "sensing: batch must be sorted and distinct");
    }
  }

  /// sum_i w_i A_i over all samples.
  SymMatrix combine(const Eigen::VectorXd& w) const {
    Eigen::VectorXd flat = amat_.transpose() * w;
    Eigen::MatrixXd m = Eigen::Map<const Eigen::MatrixXd>(flat.data(), dim(), dim());
    return SymMatrix::from_upper(m);
  }

  /// sum_k w_k A_{batch[k]}, accumulated in index order.
  SymMatrix combine_batch(const Eigen::VectorXd& w, BatchIndex batch) const {
    Eigen::RowVectorXd flat = Eigen::RowVectorXd::Zero(dim() * dim());
    for (std::size_t k = 0; k < batch.size(); ++k)
      flat.noalias() += w(static_cast<Index>(k)) * amat_.row(batch[k]);
    Eigen::MatrixXd m = Eigen::Map<const Eigen::MatrixXd>(flat.data(), dim(), dim());
    return SymMatrix::from_upper(m);
  }

  SensingParams params_;
  RowMajor amat_;
  Eigen::VectorXd y_;
  bool planted_ = false;
  Factor u_star_;
  SymMatrix x_star_;
  Curvature curvature_;
};

static_assert(Objective<SensingInstance>);
static_assert(HasBatchDifference<SensingInstance>);

// Provenance file: the dense measurements are regenerated from the seed.
inline constexpr const char* kInstanceMagic = "LRSDP1";

inline std::string serialize_params(const SensingParams& params) {
  std::ostringstream out;
  out << kInstanceMagic << "\n";
  out << "p " << params.p << "\n";
  out << "r " << params.r << "\n";
  out << "n " << params.n << "\n";
  out << "seed " << params.seed << "\n";
  out << "spectrum";
  if (!params.spectrum) {
    out << " -";
  } else {
    char buf[64];
    for (double s : *params.spectrum) {
      std::snprintf(buf, sizeof buf, " %.17g", s);
      out << buf;
    }
  }
  out << "\n";
  return out.str();
}

inline SensingParams parse_params(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  std::getline(in, magic);
  if (magic != kInstanceMagic)
    throw ContractViolation("instance file: missing LRSDP1 header");
  SensingParams params;
  bool have_p = false, have_r = false, have_n = false, have_seed = false, have_spec = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "p") {
      have_p = static_cast<bool>(ls >> params.p);
    } else if (key == "r") {
      have_r = static_cast<bool>(ls >> params.r);
    } else if (key == "n") {
      have_n = static_cast<bool>(ls >> params.n);
    } else if (key == "seed") {
      have_seed = static_cast<bool>(ls >> params.seed);
    } else if (key == "spectrum") {
      std::string tok;
      std::vector<double> vals;
      bool none = false;
      while (ls >> tok) {
        if (tok == "-") {
          none = true;
        } else {
          try {
            vals.push_back(std::stod(tok));
          } catch (const std::exception&) {
            throw ContractViolation("instance file: bad spectrum value '" + tok + "'");
          }
        }
      }
      if (!none) params.spectrum = vals;
      have_spec = true;
    } else {
      throw ContractViolation("instance file: unknown key '" + key + "'");
    }
  }
  if (!(have_p && have_r && have_n && have_seed && have_spec))
    throw ContractViolation("instance file: missing or malformed field");
  return params;
}

inline SensingParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open instance file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_params(buf.str());
}

}  // namespace lrsdp
