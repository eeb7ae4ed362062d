#pragma once

// Factored first-order methods on g(U) = f(U U^T): SVRG-SDP and its
// SVRG-I / SVRG-II / SVRG-LR relatives, factored gradient descent and
// mini-batch SGD. All runs record one trace row per outer iteration.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lrsdp/errors.hpp"
#include "lrsdp/matcore.hpp"
#include "lrsdp/objective.hpp"
#include "lrsdp/random.hpp"
#include "lrsdp/schedule.hpp"
#include "lrsdp/trace.hpp"

namespace lrsdp {

enum class Algorithm { SvrgSdp, SvrgI, SvrgII, SvrgLr, Fgd, SgdFix, SgdDiminish };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::SvrgSdp: return "svrg-sdp";
    case Algorithm::SvrgI: return "svrg-i";
    case Algorithm::SvrgII: return "svrg-ii";
    case Algorithm::SvrgLr: return "svrg-lr";
    case Algorithm::Fgd: return "fgd";
    case Algorithm::SgdFix: return "sgd-fix";
    case Algorithm::SgdDiminish: return "sgd-diminish";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
  for (Algorithm a : {Algorithm::SvrgSdp, Algorithm::SvrgI, Algorithm::SvrgII, Algorithm::SvrgLr,
                      Algorithm::Fgd, Algorithm::SgdFix, Algorithm::SgdDiminish}) {
    if (s == to_string(a)) return a;
  }
  return std::nullopt;
}

inline bool is_svrg(Algorithm a) {
  return a == Algorithm::SvrgSdp || a == Algorithm::SvrgI || a == Algorithm::SvrgII ||
         a == Algorithm::SvrgLr;
}
inline bool is_sgd(Algorithm a) { return a == Algorithm::SgdFix || a == Algorithm::SgdDiminish; }

struct SolverConfig {
  Algorithm algorithm = Algorithm::SvrgSdp;
  Index m = 1;
  Index b = 1;
  StepSchedule schedule;
  Index max_outer = 100;
  double target_rel_error = 0.0;
  std::uint64_t seed = 0;
  bool record_iterates = false;
};

inline constexpr double kDivergenceGrowth = 1e8;

namespace detail {

/// ||X - X*||_F^2 / ||X*||_F^2 and E(U, U*) for objectives with a planted
/// optimum; NaN otherwise.
template <Objective O>
void planted_metrics(const O& obj, const Factor& u, const SymMatrix& x, TraceRow& row) {
  if constexpr (HasPlantedOptimum<O>) {
    bool available = true;
    if constexpr (requires { obj.has_planted(); }) available = obj.has_planted();
    if (!available) return;
    const SymMatrix& xs = obj.planted_matrix();
    row.rel_error = (x - xs).squared_norm() / xs.squared_norm();
    const Factor& us = obj.planted_factor();
    if (us.rank() == u.rank()) row.dist_manifold = manifold_distance_sq(u, us);
  }
}

template <Objective O>
class RunRecorder {
 public:
  RunRecorder(const O& obj, const SolverConfig& cfg, const Factor& u0)
      : obj_(obj), cfg_(cfg), start_(std::chrono::steady_clock::now()) {
    const double base = u0.norm() > 0.0 ? u0.norm() : 1.0;
    limit_ = kDivergenceGrowth * base;
    initial_hit_ = record(u0, 0, 0.0);
  }

  bool record_target_hit_initial() const { return initial_hit_; }

  /// Appends a row and reports whether the target has been reached.
  bool record(const Factor& u, long long grad_evals, double eta) {
    TraceRow row;
    row.outer_k = static_cast<Index>(trace_.rows.size());
    row.grad_evals = grad_evals;
    row.epoch = static_cast<Index>(grad_evals / obj_.num_samples());
    row.eta = eta;
    planted_metrics(obj_, u, u.gram(), row);
    row.wall_ms = trace_.rows.empty()
                      ? 0.0
                      : std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                  start_)
                            .count();
    trace_.rows.push_back(row);
    if (cfg_.record_iterates) trace_.iterates.push_back(u.mat());
    return cfg_.target_rel_error > 0.0 && row.rel_error <= cfg_.target_rel_error;
  }

  void check_finite(const Eigen::MatrixXd& u, Index outer, Index inner) {
    if (u.allFinite() && u.norm() <= limit_) return;
    std::ostringstream msg;
    msg << to_string(cfg_.algorithm) << ": iterate diverged at outer " << outer << ", inner "
        << inner << " (||U||_F = " << u.norm() << ", limit " << limit_ << ")";
    trace_.status = RunStatus::Diverged;
    throw DivergenceError(msg.str(), trace_);
  }

  RunTrace& trace() { return trace_; }

 private:
  const O& obj_;
  const SolverConfig& cfg_;
  std::chrono::steady_clock::time_point start_;
  double limit_ = 0.0;
  bool initial_hit_ = false;
  RunTrace trace_;
};

inline void validate_config(const SolverConfig& cfg, Index n, const Factor& u0, Index p) {
  require(u0.rows() == p, "solver: initial factor has wrong number of rows");
  require(cfg.m >= 1, "solver: m must be >= 1");
  require(cfg.b >= 1 && cfg.b <= n, "solver: need 1 <= b <= n");
  require(cfg.max_outer >= 1, "solver: max_outer must be >= 1");
  require(cfg.target_rel_error >= 0.0, "solver: target must be >= 0");
  validate(cfg.schedule);
  if (is_sgd(cfg.algorithm)) {
    require(!cfg.schedule.adaptive(), "solver: sgd does not support bb/sbb step sizes");
    if (cfg.algorithm == Algorithm::SgdDiminish)
      require(cfg.schedule.kind == StepKind::Diminish, "solver: sgd-diminish needs the diminish schedule");
    else
      require(cfg.schedule.kind == StepKind::Fixed, "solver: sgd-fix needs the fixed schedule");
  }
}

/// Anchor state carried between outer iterations for bb/sbb steps.
struct AnchorHistory {
  std::optional<SymMatrix> x_prev;
  std::optional<SymMatrix> g_prev;
  double raw_eta_prev = 0.0;

  double step(const StepSchedule& s, Index k, Index m, const SymMatrix& x, const SymMatrix& g) {
    const double raw = next_eta(s, k, m, &x, x_prev ? &*x_prev : nullptr, &g,
                                g_prev ? &*g_prev : nullptr, raw_eta_prev);
    if (s.adaptive()) {
      x_prev = x;
      g_prev = g;
    }
    raw_eta_prev = raw;
    return raw * s.scale;
  }
};

template <Objective O>
RunTrace run_svrg_family(const O& obj, const Factor& u0, const SolverConfig& cfg) {
  const Index n = obj.num_samples();
  validate_config(cfg, n, u0, obj.dim());
  require(is_svrg(cfg.algorithm), "run_svrg: algorithm is not an SVRG variant");
  const bool current_factor_correction =
      cfg.algorithm == Algorithm::SvrgSdp || cfg.algorithm == Algorithm::SvrgLr;
  const bool random_output = cfg.algorithm == Algorithm::SvrgII || cfg.algorithm == Algorithm::SvrgLr;

  Rng batch_rng = Rng::stream(cfg.seed, "batch");
  Rng select_rng = Rng::stream(cfg.seed, "select");
  RunRecorder<O> rec(obj, cfg, u0);
  if (rec.record_target_hit_initial()) {
    rec.trace().status = RunStatus::Converged;
    rec.trace().final_factor = u0;
    return rec.trace();
  }

  Eigen::MatrixXd anchor_u = u0.mat();
  AnchorHistory hist;
  long long evals = 0;
  for (Index k = 0; k < cfg.max_outer; ++k) {
    const SymMatrix x_anchor = Factor(anchor_u).gram();
    const SymMatrix g_anchor = obj.grad_full(x_anchor);
    evals += n;
    const double eta = hist.step(cfg.schedule, k, cfg.m, x_anchor, g_anchor);

    const Index pick = (random_output && cfg.m > 1)
                           ? static_cast<Index>(select_rng.uniform_int(1, cfg.m))
                           : cfg.m;
    if (random_output) rec.trace().selected.push_back(pick);

    Eigen::MatrixXd u = anchor_u;
    Eigen::MatrixXd chosen;
    for (Index t = 0; t < cfg.m; ++t) {
      const std::vector<Index> batch = batch_rng.sample_without_replacement(n, cfg.b);
      const SymMatrix x = Factor(u).gram();
      if (current_factor_correction) {
        SymMatrix v = batch_gradient_difference(obj, x, x_anchor, batch);
        v += g_anchor;
        u -= eta * (v.mat() * u);
      } else {
        const SymMatrix g = obj.grad_batch(x, batch);
        SymMatrix corr = obj.grad_batch(x_anchor, batch);
        corr -= g_anchor;
        u -= eta * (g.mat() * u - corr.mat() * anchor_u);
      }
      evals += cfg.b;
      rec.check_finite(u, k, t);
      if (t + 1 == pick) chosen = u;
    }
    anchor_u = random_output ? chosen : u;
    if (rec.record(Factor(anchor_u), evals, eta)) {
      rec.trace().status = RunStatus::Converged;
      rec.trace().final_factor = Factor(anchor_u);
      return rec.trace();
    }
  }
  rec.trace().status = cfg.target_rel_error > 0.0 ? RunStatus::BudgetExhausted : RunStatus::Completed;
  rec.trace().final_factor = Factor(anchor_u);
  return rec.trace();
}

}  // namespace detail

/// Option I SVRG with the semi-stochastic direction applied to the current
/// factor: U <- U - eta [(1/b) sum (grad f_i(X^t) - grad f_i(X~)) + grad f(X~)] U.
template <Objective O>
RunTrace run_svrg_sdp(const O& obj, const Factor& u0, const SolverConfig& cfg) {
  detail::require(cfg.algorithm == Algorithm::SvrgSdp, "run_svrg_sdp: algorithm must be svrg-sdp");
  return detail::run_svrg_family(obj, u0, cfg);
}

/// Original SVRG correction applied to the anchor factor, last-iterate output.
template <Objective O>
RunTrace run_svrg_i(const O& obj, const Factor& u0, const SolverConfig& cfg) {
  detail::require(cfg.algorithm == Algorithm::SvrgI, "run_svrg_i: algorithm must be svrg-i");
  return detail::run_svrg_family(obj, u0, cfg);
}

/// SVRG-I inner loop with the outer iterate drawn uniformly from U^1..U^m.
template <Objective O>
RunTrace run_svrg_ii(const O& obj, const Factor& u0, const SolverConfig& cfg) {
  detail::require(cfg.algorithm == Algorithm::SvrgII, "run_svrg_ii: algorithm must be svrg-ii");
  return detail::run_svrg_family(obj, u0, cfg);
}

/// SVRG-SDP inner loop with the outer iterate drawn uniformly from U^1..U^m.
template <Objective O>
RunTrace run_svrg_lr(const O& obj, const Factor& u0, const SolverConfig& cfg) {
  detail::require(cfg.algorithm == Algorithm::SvrgLr, "run_svrg_lr: algorithm must be svrg-lr");
  return detail::run_svrg_family(obj, u0, cfg);
}

/// Factored gradient descent: U <- U - eta grad f(U U^T) U, one step per row.
template <Objective O>
RunTrace run_fgd(const O& obj, const Factor& u0, const SolverConfig& cfg) {
  const Index n = obj.num_samples();
  detail::validate_config(cfg, n, u0, obj.dim());
  detail::require(cfg.algorithm == Algorithm::Fgd, "run_fgd: algorithm must be fgd");
  detail::RunRecorder<O> rec(obj, cfg, u0);
  if (rec.record_target_hit_initial()) {
    rec.trace().status = RunStatus::Converged;
    rec.trace().final_factor = u0;
    return rec.trace();
  }
  Eigen::MatrixXd u = u0.mat();
  detail::AnchorHistory hist;
  long long evals = 0;
  for (Index k = 0; k < cfg.max_outer; ++k) {
    const SymMatrix x = Factor(u).gram();
    const SymMatrix g = obj.grad_full(x);
    evals += n;
    const double eta = hist.step(cfg.schedule, k, 1, x, g);
    u -= eta * (g.mat() * u);
    rec.check_finite(u, k, 0);
    if (rec.record(Factor(u), evals, eta)) {
      rec.trace().status = RunStatus::Converged;
      rec.trace().final_factor = Factor(u);
      return rec.trace();
    }
  }
  rec.trace().status = cfg.target_rel_error > 0.0 ? RunStatus::BudgetExhausted : RunStatus::Completed;
  rec.trace().final_factor = Factor(u);
  return rec.trace();
}

/// Mini-batch SGD on the factor. One outer iteration is ceil(n/b) steps, so
/// every row is one pass over the data; the diminishing rule uses the pass
/// index.
template <Objective O>
RunTrace run_sgd(const O& obj, const Factor& u0, const SolverConfig& cfg) {
  const Index n = obj.num_samples();
  detail::validate_config(cfg, n, u0, obj.dim());
  detail::require(is_sgd(cfg.algorithm), "run_sgd: algorithm must be sgd-fix or sgd-diminish");
  Rng batch_rng = Rng::stream(cfg.seed, "batch");
  detail::RunRecorder<O> rec(obj, cfg, u0);
  if (rec.record_target_hit_initial()) {
    rec.trace().status = RunStatus::Converged;
    rec.trace().final_factor = u0;
    return rec.trace();
  }
  const Index steps = (n + cfg.b - 1) / cfg.b;
  Eigen::MatrixXd u = u0.mat();
  long long evals = 0;
  for (Index k = 0; k < cfg.max_outer; ++k) {
    const double eta = next_eta(cfg.schedule, k, 1, nullptr, nullptr, nullptr, nullptr, 0.0) *
                       cfg.schedule.scale;
    for (Index t = 0; t < steps; ++t) {
      const std::vector<Index> batch = batch_rng.sample_without_replacement(n, cfg.b);
      const SymMatrix g = obj.grad_batch(Factor(u).gram(), batch);
      u -= eta * (g.mat() * u);
      evals += cfg.b;
      rec.check_finite(u, k, t);
    }
    if (rec.record(Factor(u), evals, eta)) {
      rec.trace().status = RunStatus::Converged;
      rec.trace().final_factor = Factor(u);
      return rec.trace();
    }
  }
  rec.trace().status = cfg.target_rel_error > 0.0 ? RunStatus::BudgetExhausted : RunStatus::Completed;
  rec.trace().final_factor = Factor(u);
  return rec.trace();
}

/// Dispatches on cfg.algorithm.
template <Objective O>
RunTrace run_solver(const O& obj, const Factor& u0, const SolverConfig& cfg) {
  if (is_svrg(cfg.algorithm)) return detail::run_svrg_family(obj, u0, cfg);
  if (cfg.algorithm == Algorithm::Fgd) return run_fgd(obj, u0, cfg);
  return run_sgd(obj, u0, cfg);
}

}  // namespace lrsdp
