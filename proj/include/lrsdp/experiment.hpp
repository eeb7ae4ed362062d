#pragma once

// Benchmark plumbing shared by the command-line tool and the acceptance
// harness: step-size resolution on planted instances, warm starts, m/b
// expressions and milestone extraction from traces.

#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lrsdp/errors.hpp"
#include "lrsdp/initsch.hpp"
#include "lrsdp/sensing.hpp"
#include "lrsdp/solvers.hpp"
#include "lrsdp/trace.hpp"

namespace lrsdp {

/// 1 / (4 L_hat ||X*||_F), the benchmark step for SVRG variants and FGD.
inline double benchmark_eta(const SensingInstance& inst) {
  detail::require(inst.has_planted(), "eta auto: instance has no planted optimum");
  return 1.0 / (4.0 * inst.L_hat() * inst.planted_matrix().norm());
}

/// 1 / (8 L_hat ||X*||_F), the benchmark base step for SGD.
inline double benchmark_sgd_eta(const SensingInstance& inst) {
  detail::require(inst.has_planted(), "eta auto: instance has no planted optimum");
  return 1.0 / (8.0 * inst.L_hat() * inst.planted_matrix().norm());
}

inline double benchmark_eta_for(const SensingInstance& inst, Algorithm a) {
  return is_sgd(a) ? benchmark_sgd_eta(inst) : benchmark_eta(inst);
}

/// Warm start with a fixed number of projected-gradient steps at step 1/L_hat.
inline InitResult warm_start(const SensingInstance& inst, Index r, int T) {
  InitConfig cfg;
  cfg.mode = FixedT{T};
  cfg.L = inst.L_hat();
  return run_init(inst, r, cfg);
}

/// Parses a positive count relative to n: "250", "n", "2n", "n/8", "3n/4".
inline Index parse_count(std::string_view text, Index n) {
  auto fail = [&]() -> Index {
    throw ContractViolation("cannot parse count expression '" + std::string(text) + "'");
  };
  auto to_int = [&](std::string_view s) -> Index {
    Index v = 0;
    if (s.empty()) return fail();
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v <= 0) return fail();
    return v;
  };
  const auto npos = text.find('n');
  if (npos == std::string_view::npos) return to_int(text);
  const Index mult = npos == 0 ? 1 : to_int(text.substr(0, npos));
  std::string_view rest = text.substr(npos + 1);
  Index div = 1;
  if (!rest.empty()) {
    if (rest.front() != '/') return fail();
    div = to_int(rest.substr(1));
  }
  const Index v = mult * n / div;
  if (v < 1) return fail();
  return v;
}

/// First row at which rel_error <= target, if any.
struct Milestone {
  bool reached = false;
  Index outer = 0;
  double epochs = std::numeric_limits<double>::infinity();
  long long grad_evals = 0;
  double wall_ms = std::numeric_limits<double>::infinity();
};

inline Milestone first_reach(const RunTrace& trace, double target, Index n) {
  Milestone m;
  for (const auto& row : trace.rows) {
    if (row.rel_error <= target) {
      m.reached = true;
      m.outer = row.outer_k;
      m.epochs = static_cast<double>(row.grad_evals) / static_cast<double>(n);
      m.grad_evals = row.grad_evals;
      m.wall_ms = row.wall_ms;
      return m;
    }
  }
  return m;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = slope x + intercept.
inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "linear_fit: need >= 2 paired points");
  const double nd = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nd;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nd;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.points = x.size();
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.r_squared = (sxx > 0.0 && syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Runs and converts a divergence into a trace with Diverged status.
template <Objective O>
RunTrace run_or_capture(const O& obj, const Factor& u0, const SolverConfig& cfg) {
  try {
    return run_solver(obj, u0, cfg);
  } catch (const DivergenceError& e) {
    RunTrace t = e.trace();
    t.status = RunStatus::Diverged;
    return t;
  }
}

}  // namespace lrsdp
