#pragma once

// Convergence-theory constants for SVRG-SDP and numerical checks of the
// inequalities behind them. Expectation checks fix b = 1 and average over
// every sample index, so they are exact finite sums.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "lrsdp/errors.hpp"
#include "lrsdp/initsch.hpp"
#include "lrsdp/matcore.hpp"
#include "lrsdp/objective.hpp"
#include "lrsdp/random.hpp"
#include "lrsdp/trace.hpp"

namespace lrsdp {

/// Single table of check tolerances.
struct Tolerances {
  static constexpr double exact_relative = 1e-9;
  static constexpr double exact_absolute = 1e-12;
  static constexpr double statistical = 0.05;
  static constexpr double psd = 1e-8;
  static constexpr double alignment = 1e-8;
};

struct TheoryConstants {
  double L = 0.0;
  double mu = 0.0;
  double kappa = 0.0;
  double gamma0 = 0.0;
  double sigma_r = 0.0;
  double sigma_1 = 0.0;
  double tau = 0.0;
  double x_star_fro = 0.0;
  double x_star_spec = 0.0;
  double u_star_spec = 0.0;
  double B_upper = 0.0;
  double eta_max = 0.0;
  double b_max = 0.0;
  double init_radius = 0.0;
  /// 1 < kappa <= 64 (sqrt2 - 1).
  bool kappa_in_range = false;

  /// 1/2 [1 + (1 - (2/27) eta L gamma0 sigma_r)^m]
  double rho(double eta, Index m) const {
    const double base = 1.0 - (2.0 / 27.0) * eta * L * gamma0 * sigma_r;
    return 0.5 * (1.0 + std::pow(base, static_cast<double>(m)));
  }

  /// (2/b)(2 + sqrt(gamma0))^2 L^2 ||X*||_2 B
  double B1(Index b) const {
    const double c = 2.0 + std::sqrt(gamma0);
    return (2.0 / static_cast<double>(b)) * c * c * L * L * x_star_spec * B_upper;
  }

  /// Radius gamma0 sigma_r of the ball in which the lemmas apply.
  double ball_radius() const { return gamma0 * sigma_r; }
};

/// Constants from curvature estimates and the planted optimum. `n` bounds the
/// admissible mini-batch size; pass 0 when no sample count applies.
inline TheoryConstants constants(double L, double mu, const SymMatrix& x_star, Index r, Index n = 0) {
  detail::require(mu > 0.0 && std::isfinite(mu), "constants: mu must be positive");
  detail::require(L >= mu && std::isfinite(L), "constants: need L >= mu");
  const SpectralStats s = spectral_stats(x_star, r);
  TheoryConstants c;
  c.L = L;
  c.mu = mu;
  c.kappa = L / mu;
  c.kappa_in_range = c.kappa > 1.0 && c.kappa <= kKappaCeiling;
  c.gamma0 = kSqrt2Minus1 / c.kappa;
  c.sigma_r = s.sigma_r;
  c.sigma_1 = s.sigma_1;
  c.tau = s.tau;
  c.x_star_fro = x_star.norm();
  c.x_star_spec = s.sigma_1;
  c.u_star_spec = std::sqrt(s.sigma_1);
  const double sg = std::sqrt(c.gamma0);
  c.B_upper = c.x_star_fro + (2.0 + sg) * c.u_star_spec * std::sqrt(c.gamma0 * c.sigma_r);
  c.eta_max = c.gamma0 * c.sigma_r /
              (54.0 * (2.0 + sg) * (2.0 + sg) * L * c.x_star_spec * c.B_upper);
  const double b_theory = 54.0 * (std::sqrt(2.0) + 1.0) * c.kappa * c.tau;
  c.b_max = n > 0 ? std::min(static_cast<double>(n), b_theory) : b_theory;
  c.init_radius = 8.0 * kSqrt2Minus1 * c.sigma_r / (9.0 * c.kappa);
  return c;
}

/// ceil(1 / ((mu + epsilon) b eta_max))
inline Index sbb_m_bound(const TheoryConstants& c, Index b, double epsilon, double mu) {
  detail::require(b >= 1, "sbb_m_bound: b must be >= 1");
  detail::require(epsilon >= 0.0, "sbb_m_bound: epsilon must be >= 0");
  detail::require(mu + epsilon > 0.0, "sbb_m_bound: mu + epsilon must be positive");
  const double v = std::ceil(1.0 / ((mu + epsilon) * static_cast<double>(b) * c.eta_max));
  return static_cast<Index>(std::max(1.0, v));
}

enum class Verdict { Pass, Fail, Warn, Precondition };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Warn: return "WARN";
    case Verdict::Precondition: return "PRECONDITION";
  }
  return "?";
}

/// One inequality lhs <= rhs. `margin` is rhs - lhs.
struct CheckResult {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  Verdict verdict = Verdict::Pass;
  bool statistical = false;
};

struct Report {
  std::vector<CheckResult> checks;

  void add(CheckResult c) { checks.push_back(std::move(c)); }
  void append(const Report& other) {
    checks.insert(checks.end(), other.checks.begin(), other.checks.end());
  }
  bool any_fail() const {
    return std::any_of(checks.begin(), checks.end(),
                       [](const CheckResult& c) { return c.verdict == Verdict::Fail; });
  }
  std::size_t count(Verdict v) const {
    return static_cast<std::size_t>(std::count_if(
        checks.begin(), checks.end(), [v](const CheckResult& c) { return c.verdict == v; }));
  }
  /// One line per check: name lhs rhs margin verdict.
  std::string to_text() const {
    std::ostringstream out;
    for (const auto& c : checks) {
      out << c.name << ' ' << format_double(c.lhs) << ' ' << format_double(c.rhs) << ' '
          << format_double(c.margin) << ' ' << to_string(c.verdict) << "\n";
    }
    return out.str();
  }
};

namespace detail {

inline CheckResult exact_le(std::string name, double lhs, double rhs) {
  CheckResult c{std::move(name), lhs, rhs, rhs - lhs, Verdict::Pass, false};
  const double slack = Tolerances::exact_relative * std::max(std::abs(lhs), std::abs(rhs)) +
                       Tolerances::exact_absolute;
  if (!(lhs <= rhs + slack)) c.verdict = Verdict::Fail;
  return c;
}

inline CheckResult precondition(std::string name, double lhs, double rhs) {
  return CheckResult{std::move(name), lhs, rhs, rhs - lhs, Verdict::Precondition, false};
}

/// Exact per-sample semi-stochastic directions at b = 1:
/// v_i = grad f_i(X) - grad f_i(X~) + grad f(X~).
template <Objective O, class Fn>
void for_each_direction(const O& obj, const Factor& ut, const Factor& ua, Fn&& fn) {
  const SymMatrix xt = ut.gram();
  const SymMatrix xa = ua.gram();
  const SymMatrix ga = obj.grad_full(xa);
  for (Index i = 0; i < obj.num_samples(); ++i) {
    const Index idx[1] = {i};
    SymMatrix v = batch_gradient_difference(obj, xt, xa, BatchIndex(idx, 1));
    v += ga;
    fn(v);
  }
}

inline bool in_ball(const TheoryConstants& c, double e) { return e < c.ball_radius(); }

inline double projected_gradient_sq(const Factor& u, const SymMatrix& g) {
  const Eigen::MatrixXd q = column_basis(u);
  return (q * (q.transpose() * g.mat())).squaredNorm();
}

}  // namespace detail

/// Pure arithmetic consequences of the constant definitions for a step eta
/// and mini-batch size b.
inline Report check_constants(const TheoryConstants& c, double eta, Index b, Index m) {
  Report rep;
  rep.add(detail::exact_le("step_within_b_eta_max", eta, static_cast<double>(b) * c.eta_max));
  rep.add(detail::exact_le("b_eta_max_within_inv_4BL", static_cast<double>(b) * c.eta_max,
                           1.0 / (4.0 * c.B_upper * c.L)));
  rep.add(detail::exact_le("batch_within_b_max", static_cast<double>(b), c.b_max));
  const double contraction = (2.0 / 27.0) * eta * c.L * c.gamma0 * c.sigma_r;
  const double chain = kSqrt2Minus1 / (54.0 * c.kappa * c.tau);
  rep.add(detail::exact_le("rate_within_chain", contraction, chain));
  rep.add(detail::exact_le("chain_below_one", chain, 1.0));
  const double rho = c.rho(eta, m);
  rep.add(detail::exact_le("rho_below_one", rho, 1.0));
  rep.add(detail::exact_le("rho_positive", 0.0, rho));
  CheckResult kappa{"kappa_in_range", c.kappa, kKappaCeiling, kKappaCeiling - c.kappa,
                    c.kappa_in_range ? Verdict::Pass : Verdict::Warn, false};
  rep.add(kappa);
  return rep;
}

/// Exact expectation over the sample index of E(U^{t+1}, U*) against the
/// second-order descent bound.
template <Objective O>
CheckResult check_second_order_descent(const O& obj, const Factor& ut, const Factor& ua,
                                       const Factor& us, double eta, const TheoryConstants& c) {
  const double et = manifold_distance_sq(ut, us);
  const double ea = manifold_distance_sq(ua, us);
  const double b1 = c.B1(1);
  const double rhs = (1.0 - eta * c.L * c.gamma0 * c.sigma_r + eta * eta * b1) * et +
                     eta * c.L * et * et + eta * eta * b1 * ea;
  if (!detail::in_ball(c, et) || !detail::in_ball(c, ea))
    return detail::precondition("second_order_descent", std::max(et, ea), c.ball_radius());
  double acc = 0.0;
  detail::for_each_direction(obj, ut, ua, [&](const SymMatrix& v) {
    const Eigen::MatrixXd next = ut.mat() - eta * (v.mat() * ut.mat());
    acc += manifold_distance_sq(Factor(next), us);
  });
  const double lhs = acc / static_cast<double>(obj.num_samples());
  return detail::exact_le("second_order_descent", lhs, rhs);
}

/// Inner-product lower bound and second-moment upper bound of the b = 1
/// semi-stochastic step, both by exact enumeration.
template <Objective O>
Report check_gradient_bounds(const O& obj, const Factor& ut, const Factor& ua, const Factor& us,
                             const TheoryConstants& c) {
  Report rep;
  const Alignment al = procrustes(ut, us);
  const double et = al.distance_sq;
  const double ea = manifold_distance_sq(ua, us);
  if (!detail::in_ball(c, et) || !detail::in_ball(c, ea)) {
    rep.add(detail::precondition("inner_product_bound", std::max(et, ea), c.ball_radius()));
    rep.add(detail::precondition("second_moment_bound", std::max(et, ea), c.ball_radius()));
    return rep;
  }
  const Eigen::MatrixXd gap = ut.mat() - us.mat() * al.rotation;
  double inner = 0.0;
  double second = 0.0;
  detail::for_each_direction(obj, ut, ua, [&](const SymMatrix& v) {
    const Eigen::MatrixXd step = v.mat() * ut.mat();
    inner += 2.0 * step.cwiseProduct(gap).sum();
    second += step.squaredNorm();
  });
  const double nd = static_cast<double>(obj.num_samples());
  inner /= nd;
  second /= nd;
  const double pg = detail::projected_gradient_sq(ut, obj.grad_full(ut.gram()));
  const double lower = kSqrt2Minus1 * c.mu * c.sigma_r * et - c.L * et * et + pg / (4.0 * c.L);
  rep.add(detail::exact_le("inner_product_bound", lower, inner));
  const double sg = 2.0 + std::sqrt(c.gamma0);
  const double upper = 2.0 * sg * sg * c.L * c.L * c.x_star_spec * c.B_upper * (et + ea) + pg * c.B_upper;
  rep.add(detail::exact_le("second_moment_bound", second, upper));
  return rep;
}

/// Gradient size bound, feasibility of the projected step and column-space
/// alignment at a point of the ball. The alignment claim is advisory: generic
/// ball points do not satisfy it, so a miss is reported as WARN.
template <Objective O>
Report check_feasibility_lemma(const O& obj, const Factor& u, const Factor& us,
                               const TheoryConstants& c) {
  Report rep;
  const double e = manifold_distance_sq(u, us);
  if (!detail::in_ball(c, e) || !c.kappa_in_range) {
    const double rad = c.ball_radius();
    rep.add(detail::precondition("gradient_norm_bound", e, rad));
    rep.add(detail::precondition("projected_step_psd", e, rad));
    rep.add(detail::precondition("projected_step_rank", e, rad));
    rep.add(detail::precondition("column_space_alignment", e, rad));
    return rep;
  }
  const Index r = u.rank();
  const SymMatrix x = u.gram();
  const SymMatrix g = obj.grad_full(x);
  const double tau_u = std::sqrt(c.tau);
  const double sg = std::sqrt(c.gamma0);
  rep.add(detail::exact_le("gradient_norm_bound", g.norm(),
                           (2.0 * sg + c.gamma0) * c.L * tau_u * c.sigma_r));

  const Eigen::MatrixXd q = column_basis(u);
  const Eigen::MatrixXd pgp = q * (q.transpose() * g.mat() * q) * q.transpose();
  const SymMatrix xbar = SymMatrix::from_upper(x.mat() - pgp / c.L);
  const SymEigen eig = sym_eigen(xbar);
  const Index p = xbar.dim();
  const double top = std::max(std::abs(eig.values(0)), std::abs(eig.values(p - 1)));
  rep.add(detail::exact_le("projected_step_psd", -eig.values(p - 1), Tolerances::psd * top));
  // Rank exactly r: the r-th eigenvalue clears the tolerance, the (r+1)-th does not.
  rep.add(detail::exact_le("projected_step_rank", Tolerances::psd * top, eig.values(r - 1)));
  if (r < p)
    rep.add(detail::exact_le("projected_step_rank_tail", std::abs(eig.values(r)),
                             Tolerances::psd * top));

  const SymMatrix& xs = [&]() -> const SymMatrix& {
    if constexpr (HasPlantedOptimum<O>) return obj.planted_matrix();
    else throw ContractViolation("check_feasibility_lemma: objective has no planted optimum");
  }();
  const Eigen::MatrixXd resid = xs.mat() - q * (q.transpose() * xs.mat());
  CheckResult align{"column_space_alignment", resid.norm(), Tolerances::alignment * xs.norm(), 0.0,
                    Verdict::Pass, false};
  align.margin = align.rhs - align.lhs;
  if (align.lhs > align.rhs) align.verdict = Verdict::Warn;
  rep.add(align);
  return rep;
}

/// Haar-distributed r x r orthogonal matrix.
inline Eigen::MatrixXd random_orthogonal(Index r, Rng& rng) {
  const Eigen::MatrixXd g = rng.gaussian(r, r);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, r);
  const Eigen::MatrixXd rr = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < r; ++j)
    if (rr(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

/// U = U* R0 + D with R0 random orthogonal and ||D||_F^2 = f * radius for
/// f uniform in [lo, hi], so E(U, U*) <= f * radius.
inline Factor sample_ball_point(const Factor& us, double radius, Rng& rng, double lo = 0.05,
                                double hi = 0.95) {
  detail::require(radius > 0.0 && 0.0 <= lo && lo <= hi && hi < 1.0,
                  "sample_ball_point: need radius > 0 and 0 <= lo <= hi < 1");
  const Eigen::MatrixXd r0 = random_orthogonal(us.rank(), rng);
  Eigen::MatrixXd d = rng.gaussian(us.rows(), us.rank());
  const double frac = rng.uniform(lo, hi);
  d *= std::sqrt(frac * radius) / d.norm();
  return Factor(us.mat() * r0 + d);
}

inline constexpr std::size_t kContractionMinSeeds = 20;

/// Seed-averaged contraction ratio E(U~^k, U*) / [prod_{j<k} rho_j E(U~^0, U*)]
/// per outer iteration. Step sizes are read from the traces' eta column.
/// Deterministic runs are held to the bound exactly; stochastic runs fail only
/// when averaged over at least 20 seeds, and fewer seeds produce warnings.
inline Report check_contraction(const std::vector<RunTrace>& traces, const TheoryConstants& c,
                                Index m, bool deterministic = false) {
  Report rep;
  detail::require(!traces.empty(), "check_contraction: need at least one trace");
  std::size_t rows = std::numeric_limits<std::size_t>::max();
  for (const auto& t : traces) {
    detail::require(!t.rows.empty(), "check_contraction: empty trace");
    rows = std::min(rows, t.rows.size());
    const double d0 = t.rows.front().dist_manifold;
    if (!(d0 < c.init_radius)) {
      rep.add(detail::precondition("contraction_start_in_ball", d0, c.init_radius));
      return rep;
    }
  }
  const bool statistical = !deterministic;
  const bool enough_seeds = traces.size() >= kContractionMinSeeds;
  std::vector<double> log_prod(traces.size(), 0.0);
  for (std::size_t k = 1; k < rows; ++k) {
    double mean = 0.0;
    for (std::size_t s = 0; s < traces.size(); ++s) {
      const auto& t = traces[s];
      log_prod[s] += std::log(c.rho(t.rows[k].eta, m));
      const double d0 = t.rows.front().dist_manifold;
      const double dk = t.rows[k].dist_manifold;
      mean += d0 > 0.0 ? dk / (std::exp(log_prod[s]) * d0) : 0.0;
    }
    mean /= static_cast<double>(traces.size());
    CheckResult cr;
    cr.name = "contraction_k" + std::to_string(k);
    cr.lhs = mean;
    cr.statistical = statistical;
    if (statistical) {
      cr.rhs = 1.0 + Tolerances::statistical;
      if (mean > cr.rhs) cr.verdict = enough_seeds ? Verdict::Fail : Verdict::Warn;
    } else {
      cr = detail::exact_le(cr.name, mean, 1.0);
    }
    cr.margin = cr.rhs - cr.lhs;
    rep.add(cr);
  }
  return rep;
}

}  // namespace lrsdp
