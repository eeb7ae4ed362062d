#pragma once

// Projected gradient descent in the full matrix space, started from zero and
// followed by a rank-r factorization, as the warm start for the factored
// solvers.

#include <cmath>
#include <sstream>
#include <variant>
#include <vector>

#include "lrsdp/errors.hpp"
#include "lrsdp/matcore.hpp"
#include "lrsdp/objective.hpp"

namespace lrsdp {

inline const double kSqrt2Minus1 = std::sqrt(2.0) - 1.0;
inline const double kKappaCeiling = 64.0 * kSqrt2Minus1;

struct FixedT {
  int T = 10;
};

struct TheoreticalT {
  double kappa = 0.0;
  double sigma_r_star = 0.0;
  double x_star_fro = 0.0;
};

struct InitConfig {
  std::variant<FixedT, TheoreticalT> mode = FixedT{};
  /// Curvature constant; the step is 1/L.
  double L = 0.0;
};

struct TheoreticalTResult {
  int T = 1;
  double log_argument = 0.0;
  /// True when the closed form gave T < 1 and the count was raised to 1.
  bool clamped = false;
};

/// T = ceil(log(a) / log(1 - 1/kappa)) with
/// a = 16 (sqrt2 - 1)^2 sigma_r^2 / (9 kappa ||X*||_F^2).
inline TheoreticalTResult theoretical_T(double kappa, double sigma_r_star, double x_star_fro) {
  detail::require(kappa > 1.0 && kappa <= kKappaCeiling,
                  "theoretical_T: kappa must lie in (1, 64(sqrt2-1)]");
  detail::require(sigma_r_star > 0.0 && x_star_fro > 0.0,
                  "theoretical_T: sigma_r and ||X*||_F must be positive");
  TheoreticalTResult out;
  out.log_argument = 16.0 * kSqrt2Minus1 * kSqrt2Minus1 * sigma_r_star * sigma_r_star /
                     (9.0 * kappa * x_star_fro * x_star_fro);
  const double raw = std::ceil(std::log(out.log_argument) / std::log(1.0 - 1.0 / kappa));
  if (!(raw >= 1.0)) {
    out.T = 1;
    out.clamped = true;
  } else {
    out.T = static_cast<int>(raw);
  }
  return out;
}

struct InitResult {
  Factor factor;
  SymMatrix x;
  int T = 0;
  bool T_clamped = false;
  /// f(X^0), f(X^1), ..., f(X^T).
  std::vector<double> objective;
  long long grad_evals = 0;
};

/// Slack for the per-step descent assertion, relative to max(1, f).
inline constexpr double kDescentSlack = 1e-12;

/// X^0 = 0, X^t = Proj_PSD(X^{t-1} - (1/L) grad f(X^{t-1})), U = rank_r_factor(X^T).
/// `observer`, when given, sees every iterate X^t for t = 1..T.
template <Objective O, class Observer = std::nullptr_t>
InitResult run_init(const O& obj, Index r, const InitConfig& cfg, Observer observer = nullptr) {
  detail::require(cfg.L > 0.0 && std::isfinite(cfg.L), "run_init: L must be positive");
  detail::require(r >= 1 && r <= obj.dim(), "run_init: need 1 <= r <= p");
  InitResult out;
  if (const auto* fixed = std::get_if<FixedT>(&cfg.mode)) {
    detail::require(fixed->T >= 1, "run_init: T must be >= 1");
    out.T = fixed->T;
  } else {
    const auto& th = std::get<TheoreticalT>(cfg.mode);
    const TheoreticalTResult t = theoretical_T(th.kappa, th.sigma_r_star, th.x_star_fro);
    out.T = t.T;
    out.T_clamped = t.clamped;
  }

  const double step = 1.0 / cfg.L;
  SymMatrix x = SymMatrix::zero(obj.dim());
  out.objective.push_back(obj.value_full(x));
  for (int t = 1; t <= out.T; ++t) {
    SymMatrix trial = x;
    trial.add_scaled(-step, obj.grad_full(x));
    out.grad_evals += obj.num_samples();
    x = psd_project(trial);
    const double f = obj.value_full(x);
    const double prev = out.objective.back();
    if (f > prev + kDescentSlack * std::max(1.0, std::abs(prev))) {
      std::ostringstream msg;
      msg << "run_init: objective increased at step " << t << " (" << prev << " -> " << f
          << "); L = " << cfg.L << " is too small for this objective";
      throw NumericalError(msg.str());
    }
    out.objective.push_back(f);
    if constexpr (!std::is_same_v<Observer, std::nullptr_t>) observer(t, x);
  }
  out.factor = rank_r_factor(x, r);
  out.x = std::move(x);
  return out;
}

}  // namespace lrsdp
