#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "lrsdp/errors.hpp"
#include "lrsdp/matcore.hpp"

namespace lrsdp {

enum class StepKind { Fixed, BB, SBB, Diminish };

/// Step-size rule. `eta0` is the fixed step, the first step of bb/sbb, or the
/// base step of the diminishing rule. `scale` multiplies every step produced.
struct StepSchedule {
  StepKind kind = StepKind::Fixed;
  double eta0 = 0.0;
  double epsilon = 0.0;
  double scale = 1.0;

  static StepSchedule fixed(double eta) { return {StepKind::Fixed, eta, 0.0, 1.0}; }
  static StepSchedule bb(double eta0) { return {StepKind::BB, eta0, 0.0, 1.0}; }
  static StepSchedule sbb(double eta0, double epsilon) { return {StepKind::SBB, eta0, epsilon, 1.0}; }
  static StepSchedule diminish(double eta_bar) { return {StepKind::Diminish, eta_bar, 0.0, 1.0}; }

  bool adaptive() const { return kind == StepKind::BB || kind == StepKind::SBB; }
};

inline constexpr double kBBDenominatorFloor = 1e-30;

inline std::string_view to_string(StepKind k) {
  switch (k) {
    case StepKind::Fixed: return "fixed";
    case StepKind::BB: return "bb";
    case StepKind::SBB: return "sbb";
    case StepKind::Diminish: return "diminish";
  }
  return "?";
}

inline std::optional<StepKind> parse_step_kind(std::string_view s) {
  if (s == "fixed") return StepKind::Fixed;
  if (s == "bb") return StepKind::BB;
  if (s == "sbb") return StepKind::SBB;
  if (s == "diminish") return StepKind::Diminish;
  return std::nullopt;
}

inline void validate(const StepSchedule& s) {
  detail::require(std::isfinite(s.eta0) && s.eta0 >= 0.0, "step schedule: eta0 must be finite and >= 0");
  detail::require(std::isfinite(s.epsilon) && s.epsilon >= 0.0, "step schedule: epsilon must be >= 0");
  detail::require(std::isfinite(s.scale) && s.scale > 0.0, "step schedule: scale must be > 0");
}

/// Barzilai-Borwein quotient with optional stabilisation:
///   (1/m) ||dX||^2 / (|<dX, dG>| + eps ||dX||^2).
/// Returns `fallback` when the denominator is below 1e-30.
inline double bb_step(Index m, double epsilon, const SymMatrix& x_curr, const SymMatrix& x_prev,
                      const SymMatrix& g_curr, const SymMatrix& g_prev, double fallback) {
  detail::require(m >= 1, "bb_step: m must be >= 1");
  const SymMatrix dx = x_curr - x_prev;
  const SymMatrix dg = g_curr - g_prev;
  const double dx2 = dx.squared_norm();
  const double denom = std::abs(dx.inner(dg)) + epsilon * dx2;
  if (!(denom >= kBBDenominatorFloor)) return fallback;
  return dx2 / (static_cast<double>(m) * denom);
}

/// Step size for outer iteration k. Previous anchors are only consulted by
/// bb/sbb when k >= 1; `prev_eta` is the step of iteration k-1 before scaling.
inline double next_eta(const StepSchedule& s, Index k, Index m, const SymMatrix* x_curr,
                       const SymMatrix* x_prev, const SymMatrix* g_curr, const SymMatrix* g_prev,
                       double prev_eta) {
  switch (s.kind) {
    case StepKind::Fixed:
      return s.eta0;
    case StepKind::Diminish:
      return s.eta0 / static_cast<double>(k + 1);
    case StepKind::BB:
    case StepKind::SBB: {
      if (k == 0) return s.eta0;
      detail::require(x_curr && x_prev && g_curr && g_prev,
                      "next_eta: bb/sbb need the previous anchor and gradient");
      const double eps = s.kind == StepKind::SBB ? s.epsilon : 0.0;
      return bb_step(m, eps, *x_curr, *x_prev, *g_curr, *g_prev, prev_eta);
    }
  }
  return s.eta0;
}

/// Interval [1/(m(L+eps)), 1/(m(mu+eps))] that stabilised BB steps occupy
/// when mu and L bound the curvature along the iterates.
struct StepBounds {
  double lower = 0.0;
  double upper = 0.0;
};

inline StepBounds sbb_interval(Index m, double L, double mu, double epsilon) {
  const double md = static_cast<double>(m);
  return {1.0 / (md * (L + epsilon)), 1.0 / (md * (mu + epsilon))};
}

}  // namespace lrsdp
