#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "lrsdp/errors.hpp"
#include "lrsdp/matcore.hpp"

namespace lrsdp {

/// State after `outer_k` outer iterations. `eta` is the step that produced the
/// row (0 for the initial row); `wall_ms` is cumulative.
struct TraceRow {
  Index outer_k = 0;
  Index epoch = 0;
  long long grad_evals = 0;
  double eta = 0.0;
  double rel_error = std::numeric_limits<double>::quiet_NaN();
  double dist_manifold = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

enum class RunStatus { Converged, BudgetExhausted, Completed, Diverged };

struct RunTrace {
  std::vector<TraceRow> rows;
  RunStatus status = RunStatus::Completed;
  Factor final_factor;
  /// Outer iterates, row-aligned, when the config asks for them.
  std::vector<Eigen::MatrixXd> iterates;
  /// Output index in {1..m} picked by random-output variants, per outer step.
  std::vector<Index> selected;

  const TraceRow& last() const { return rows.back(); }
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, RunTrace trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const RunTrace& trace() const { return trace_; }

 private:
  RunTrace trace_;
};

inline constexpr const char* kTraceHeader =
    "outer_k,epoch,grad_evals,eta,rel_error,dist_manifold,wall_ms";

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_csv(const RunTrace& trace) {
  std::ostringstream out;
  out << kTraceHeader << "\n";
  for (const auto& r : trace.rows) {
    out << r.outer_k << ',' << r.epoch << ',' << r.grad_evals << ',' << format_double(r.eta) << ','
        << format_double(r.rel_error) << ',' << format_double(r.dist_manifold) << ','
        << format_double(r.wall_ms) << "\n";
  }
  return out.str();
}

/// Writes `content` to a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace lrsdp
