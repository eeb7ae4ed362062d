// Command-line harness: instance generation, single runs, comparisons,
// parameter sweeps and theory-check suites on seeded matrix-sensing problems.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lrsdp/lrsdp.hpp"

namespace fs = std::filesystem;
using namespace lrsdp;

namespace {

enum ExitCode : int {
  kOk = 0,
  kIoError = 1,
  kDiverged = 2,
  kBudget = 3,
  kBadFlags = 4,
  kTheoryFailure = 5,
};

struct InstanceFlags {
  std::string instance;
  Index p = 20;
  Index r = 3;
  Index n = 200;
  std::uint64_t seed = 1;
  std::vector<double> spectrum;

  void add(CLI::App* cmd, bool with_seed = true) {
    cmd->add_option("--instance", instance, "Instance provenance file written by 'generate'");
    cmd->add_option("--p", p, "Matrix dimension")->check(CLI::PositiveNumber);
    cmd->add_option("--r", r, "Rank of the planted optimum")->check(CLI::PositiveNumber);
    cmd->add_option("--n", n, "Number of measurements")->check(CLI::PositiveNumber);
    if (with_seed) cmd->add_option("--seed", seed, "Instance seed");
    cmd->add_option("--spectrum", spectrum, "Top-r eigenvalues of X*")->delimiter(',');
  }

  SensingParams params() const {
    if (!instance.empty()) return load_params(instance);
    SensingParams sp;
    sp.p = p;
    sp.r = r;
    sp.n = n;
    sp.seed = seed;
    if (!spectrum.empty()) sp.spectrum = spectrum;
    return sp;
  }
};

struct RunFlags {
  std::string alg = "svrg-sdp";
  std::string step = "fixed";
  std::string eta = "auto";
  double eta_scale = 1.0;
  double epsilon = 0.0;
  std::string b = "1";
  std::string m = "n";
  Index max_outer = 100;
  double target = 0.0;
  std::uint64_t run_seed = 1;
  int init_T = 10;
  bool init_theoretical = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--alg", alg,
                    "svrg-sdp | svrg-i | svrg-ii | svrg-lr | fgd | sgd-fix | sgd-diminish | sgd");
    cmd->add_option("--step", step, "fixed | bb | sbb | diminish");
    cmd->add_option("--eta", eta, "Step size, or 'auto' for the planted-optimum benchmark step");
    cmd->add_option("--eta-scale", eta_scale, "Multiplier applied to every step")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--epsilon", epsilon, "SBB stabiliser")->check(CLI::NonNegativeNumber);
    cmd->add_option("--b", b, "Mini-batch size (integer or expression in n)");
    cmd->add_option("--m", m, "Inner-loop length (integer or expression in n, e.g. n/8, 2n)");
    cmd->add_option("--max-outer", max_outer, "Outer-iteration budget")->check(CLI::PositiveNumber);
    cmd->add_option("--target", target, "Stop once rel_error <= target (0 disables)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--run-seed", run_seed, "Solver seed for batch and output draws");
    cmd->add_option("--init-T", init_T, "Projected-gradient warm-start steps")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--init-theoretical", init_theoretical,
                  "Choose the warm-start length from the conditioning estimate");
  }
};

Algorithm resolve_algorithm(const std::string& name, const std::string& step) {
  if (name == "sgd") return step == "diminish" ? Algorithm::SgdDiminish : Algorithm::SgdFix;
  const auto a = parse_algorithm(name);
  if (!a) throw ContractViolation("unknown algorithm '" + name + "'");
  return *a;
}

SolverConfig make_config(const SensingInstance& inst, const RunFlags& f, const std::string& alg,
                         const std::string& step, const std::string& b, const std::string& m,
                         double epsilon, std::uint64_t run_seed) {
  SolverConfig cfg;
  cfg.algorithm = resolve_algorithm(alg, step);
  const auto kind = parse_step_kind(step);
  if (!kind) throw ContractViolation("unknown step rule '" + step + "'");
  const Index n = inst.num_samples();
  cfg.b = parse_count(b, n);
  cfg.m = is_svrg(cfg.algorithm) ? parse_count(m, n) : 1;
  cfg.max_outer = f.max_outer;
  cfg.target_rel_error = f.target;
  cfg.seed = run_seed;
  double eta0 = 0.0;
  if (f.eta == "auto") {
    eta0 = benchmark_eta_for(inst, cfg.algorithm);
  } else {
    try {
      std::size_t used = 0;
      eta0 = std::stod(f.eta, &used);
      if (used != f.eta.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ContractViolation("--eta must be 'auto' or a number, got '" + f.eta + "'");
    }
  }
  // SGD rows with the default fixed rule follow the algorithm name.
  StepKind k = *kind;
  if (cfg.algorithm == Algorithm::SgdDiminish) k = StepKind::Diminish;
  cfg.schedule = StepSchedule{k, eta0, epsilon, f.eta_scale};
  return cfg;
}

Factor initial_factor(const SensingInstance& inst, const RunFlags& f) {
  InitConfig ic;
  ic.L = inst.L_hat();
  if (f.init_theoretical) {
    const SpectralStats s = spectral_stats(inst.planted_matrix(), inst.rank());
    ic.mode = TheoreticalT{inst.L_hat() / inst.mu_hat(), s.sigma_r, inst.planted_matrix().norm()};
  } else {
    ic.mode = FixedT{f.init_T};
  }
  return run_init(inst, inst.rank(), ic).factor;
}

int status_code(const RunTrace& t) {
  switch (t.status) {
    case RunStatus::Converged:
    case RunStatus::Completed: return kOk;
    case RunStatus::BudgetExhausted: return kBudget;
    case RunStatus::Diverged: return kDiverged;
  }
  return kOk;
}

const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::Completed: return "completed";
    case RunStatus::BudgetExhausted: return "budget_exhausted";
    case RunStatus::Diverged: return "diverged";
  }
  return "?";
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ContractViolation("empty list '" + s + "'");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(s)) {
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument("range");
        for (auto v = lo; v <= hi; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoull(item));
      }
    } catch (const std::exception&) {
      throw ContractViolation("bad seed list entry '" + item + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_generate(const InstanceFlags& inst_flags, const std::string& out) {
  SensingParams sp = inst_flags.params();
  const SensingInstance inst = SensingInstance::generate(sp);
  const std::string text = serialize_params(sp);
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
  std::fprintf(stderr, "generated p=%ld r=%ld n=%ld seed=%llu L_hat=%.6g mu_hat=%.6g ||X*||_F=%.6g\n",
               static_cast<long>(sp.p), static_cast<long>(sp.r), static_cast<long>(sp.n),
               static_cast<unsigned long long>(sp.seed), inst.L_hat(), inst.mu_hat(),
               inst.planted_matrix().norm());
  return kOk;
}

int cmd_run(const InstanceFlags& inst_flags, const RunFlags& f, const std::string& out) {
  const SensingInstance inst = SensingInstance::generate(inst_flags.params());
  const SolverConfig cfg =
      make_config(inst, f, f.alg, f.step, f.b, f.m, f.epsilon, f.run_seed);
  const Factor u0 = initial_factor(inst, f);
  const RunTrace trace = run_or_capture(inst, u0, cfg);
  const std::string csv = to_csv(trace);
  if (out.empty() || out == "-") {
    std::cout << csv;
  } else {
    write_file_atomic(out, csv);
  }
  const auto& last = trace.last();
  std::fprintf(stderr, "%s: %s after %ld outer iterations, rel_error=%.6g, eta=%.6g\n",
               std::string(to_string(cfg.algorithm)).c_str(), status_name(trace.status),
               static_cast<long>(last.outer_k), last.rel_error, cfg.schedule.eta0 * cfg.schedule.scale);
  return status_code(trace);
}

struct SummaryRow {
  std::string label;
  std::size_t runs = 0;
  std::size_t reached = 0;
  std::size_t diverged = 0;
  double outer = 0.0;
  double epochs = 0.0;
  double grad_evals = 0.0;
  double wall_ms = 0.0;
};

std::string summary_csv(const std::vector<SummaryRow>& rows, double threshold) {
  std::ostringstream out;
  out << "config,runs,reached,diverged,outer_to_target,epochs_to_target,grad_evals_to_target,"
         "wall_ms_to_target,target\n";
  for (const auto& r : rows) {
    auto avg = [&](double total) {
      return r.reached == r.runs && r.runs > 0 ? format_double(total / static_cast<double>(r.runs))
                                               : std::string("inf");
    };
    out << r.label << ',' << r.runs << ',' << r.reached << ',' << r.diverged << ',' << avg(r.outer)
        << ',' << avg(r.epochs) << ',' << avg(r.grad_evals) << ',' << avg(r.wall_ms) << ','
        << format_double(threshold) << "\n";
  }
  return out.str();
}

/// Runs every (label, config) over every seed, writes one CSV per run plus a
/// summary with seed-averaged milestones.
int run_batch(const SensingInstance& inst, const Factor& u0,
              const std::vector<std::pair<std::string, SolverConfig>>& configs,
              const std::vector<std::uint64_t>& seeds, double threshold, const std::string& out_dir) {
  std::vector<SummaryRow> rows;
  bool any_diverged = false;
  for (const auto& [label, base] : configs) {
    SummaryRow row;
    row.label = label;
    for (auto s : seeds) {
      SolverConfig cfg = base;
      cfg.seed = s;
      const RunTrace trace = run_or_capture(inst, u0, cfg);
      write_file_atomic(fs::path(out_dir) / (label + "_seed" + std::to_string(s) + ".csv"),
                        to_csv(trace));
      ++row.runs;
      if (trace.status == RunStatus::Diverged) {
        ++row.diverged;
        any_diverged = true;
      }
      const Milestone ms = first_reach(trace, threshold, inst.num_samples());
      if (ms.reached) {
        ++row.reached;
        row.outer += static_cast<double>(ms.outer);
        row.epochs += ms.epochs;
        row.grad_evals += static_cast<double>(ms.grad_evals);
        row.wall_ms += ms.wall_ms;
      }
    }
    std::fprintf(stderr, "%-28s reached %zu/%zu diverged %zu\n", label.c_str(), row.reached,
                 row.runs, row.diverged);
    rows.push_back(row);
  }
  const std::string summary = summary_csv(rows, threshold);
  write_file_atomic(fs::path(out_dir) / "summary.csv", summary);
  std::cout << summary;
  return any_diverged ? kDiverged : kOk;
}

int cmd_compare(const InstanceFlags& inst_flags, const RunFlags& f, const std::string& algs,
                const std::string& seeds, double threshold, const std::string& out_dir) {
  const SensingInstance inst = SensingInstance::generate(inst_flags.params());
  const Factor u0 = initial_factor(inst, f);
  std::vector<std::pair<std::string, SolverConfig>> configs;
  for (const auto& a : split_list(algs)) {
    const Algorithm alg = resolve_algorithm(a, f.step);
    const std::string step = is_sgd(alg) ? (alg == Algorithm::SgdDiminish ? "diminish" : "fixed")
                                         : f.step;
    configs.emplace_back(std::string(to_string(alg)),
                         make_config(inst, f, a, step, f.b, f.m, f.epsilon, f.run_seed));
  }
  return run_batch(inst, u0, configs, parse_seeds(seeds), threshold, out_dir);
}

int cmd_sweep(const InstanceFlags& inst_flags, const RunFlags& f, const std::string& b_list,
              const std::string& m_list, const std::string& step_list, const std::string& eps_list,
              const std::string& seeds, double threshold, const std::string& out_dir) {
  const SensingInstance inst = SensingInstance::generate(inst_flags.params());
  const Factor u0 = initial_factor(inst, f);
  std::vector<std::pair<std::string, SolverConfig>> configs;
  for (const auto& step : split_list(step_list))
    for (const auto& eps : split_list(eps_list))
      for (const auto& b : split_list(b_list))
        for (const auto& m : split_list(m_list)) {
          double e = 0.0;
          try {
            e = std::stod(eps);
          } catch (const std::exception&) {
            throw ContractViolation("bad epsilon '" + eps + "'");
          }
          std::string label = std::string(f.alg) + "_step-" + step + "_eps-" + eps + "_b-" + b +
                              "_m-" + m;
          for (auto& c : label)
            if (c == '/') c = ':';
          configs.emplace_back(label, make_config(inst, f, f.alg, step, b, m, e, f.run_seed));
        }
  return run_batch(inst, u0, configs, parse_seeds(seeds), threshold, out_dir);
}

struct TheoryFlags {
  Index configs = 20;
  Index contraction_seeds = 20;
  bool skip_statistical = false;
};

int cmd_check_theory(const InstanceFlags& inst_flags, const TheoryFlags& tf, const std::string& out) {
  const SensingParams sp = inst_flags.params();
  if (sp.p > 32) throw ContractViolation("check-theory enumerates exactly and requires p <= 32");
  const SensingInstance inst = SensingInstance::generate(sp);
  const Factor& us = inst.planted_factor();
  const TheoryConstants c =
      constants(inst.L_hat(), inst.mu_hat(), inst.planted_matrix(), sp.r, sp.n);
  Report rep;
  const double eta = std::min(c.eta_max, benchmark_eta(inst));
  rep.append(check_constants(c, eta, 1, sp.n));

  Rng rng = Rng::stream(sp.seed, "theory-samples");
  for (Index k = 0; k < tf.configs; ++k) {
    const Factor ut = sample_ball_point(us, c.ball_radius(), rng);
    const Factor ua = sample_ball_point(us, c.ball_radius(), rng);
    const double step = rng.uniform(0.0, 1.0) * c.eta_max;
    auto tag = [&](CheckResult r) {
      r.name += "_cfg" + std::to_string(k);
      return r;
    };
    rep.add(tag(check_second_order_descent(inst, ut, ua, us, step, c)));
    for (auto r : check_gradient_bounds(inst, ut, ua, us, c).checks) rep.add(tag(r));
    for (auto r : check_feasibility_lemma(inst, ut, us, c).checks) rep.add(tag(r));
    const double lhs = 2.0 * kSqrt2Minus1 * c.sigma_r * manifold_distance_sq(ut, us);
    rep.add(tag(detail::exact_le("procrustes_lower_bound", lhs,
                                 (ut.gram() - inst.planted_matrix()).squared_norm())));
  }

  if (!tf.skip_statistical) {
    const Factor u0 = sample_ball_point(us, c.init_radius, rng);
    SolverConfig cfg;
    cfg.algorithm = Algorithm::SvrgSdp;
    cfg.m = sp.n;
    cfg.b = 1;
    cfg.max_outer = 30;
    cfg.schedule = StepSchedule::fixed(eta);
    std::vector<RunTrace> traces;
    for (Index s = 0; s < tf.contraction_seeds; ++s) {
      cfg.seed = static_cast<std::uint64_t>(s + 1);
      traces.push_back(run_solver(inst, u0, cfg));
    }
    rep.append(check_contraction(traces, c, cfg.m));
  }

  const std::string text = rep.to_text();
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
  std::fprintf(stderr, "check-theory: %zu pass, %zu fail, %zu warn, %zu precondition\n",
               rep.count(Verdict::Pass), rep.count(Verdict::Fail), rep.count(Verdict::Warn),
               rep.count(Verdict::Precondition));
  return rep.any_fail() ? kTheoryFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank stochastic SDP solvers on seeded matrix-sensing instances"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with flag values; command-line flags override it");

  InstanceFlags gen_inst, run_inst, cmp_inst, sweep_inst, th_inst;
  RunFlags run_flags, cmp_flags, sweep_flags;
  std::string gen_out, run_out, cmp_out = "compare_out", sweep_out = "sweep_out", th_out;
  std::string cmp_algs = "svrg-sdp,svrg-i,svrg-ii,svrg-lr,fgd,sgd-fix,sgd-diminish";
  std::string cmp_seeds = "1", sweep_seeds = "1";
  double cmp_threshold = 1e-6, sweep_threshold = 1e-6;
  std::string sweep_b = "1", sweep_m = "n", sweep_step = "fixed", sweep_eps = "0";

  auto* gen = app.add_subcommand("generate", "Write an instance provenance file");
  gen_inst.add(gen);
  gen->add_option("--out", gen_out, "Output file ('-' for stdout)");

  auto* run = app.add_subcommand("run", "Run one solver and write its trace CSV");
  run_inst.add(run);
  run_flags.add(run);
  run->add_option("--out", run_out, "Trace CSV path ('-' for stdout)");

  auto* cmp = app.add_subcommand("compare", "Run several algorithms on one instance");
  cmp_inst.add(cmp);
  cmp_flags.add(cmp);
  cmp->add_option("--algs", cmp_algs, "Comma-separated algorithm list");
  cmp->add_option("--seeds", cmp_seeds, "Solver seeds, e.g. 1,2,3 or 1-5");
  cmp->add_option("--threshold", cmp_threshold, "rel_error milestone for the summary");
  cmp->add_option("--out", cmp_out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Grid sweep over b, m, step rule and epsilon");
  sweep_inst.add(sweep);
  sweep_flags.add(sweep);
  // The sweep reads list-valued versions of these flags.
  sweep->remove_option(sweep->get_option("--b"));
  sweep->remove_option(sweep->get_option("--m"));
  sweep->remove_option(sweep->get_option("--step"));
  sweep->remove_option(sweep->get_option("--epsilon"));
  sweep->add_option("--b", sweep_b, "Comma-separated mini-batch sizes");
  sweep->add_option("--m", sweep_m, "Comma-separated inner-loop lengths (expressions in n)");
  sweep->add_option("--step", sweep_step, "Comma-separated step rules");
  sweep->add_option("--epsilon", sweep_eps, "Comma-separated SBB stabilisers");
  sweep->add_option("--seeds", sweep_seeds, "Solver seeds, e.g. 1,2,3 or 1-5");
  sweep->add_option("--threshold", sweep_threshold, "rel_error milestone for the summary");
  sweep->add_option("--out", sweep_out, "Output directory");

  TheoryFlags th_flags;
  th_inst.p = 12;
  th_inst.r = 2;
  th_inst.n = 150;
  auto* th = app.add_subcommand("check-theory", "Verify the convergence-theory inequalities");
  th_inst.add(th);
  th->add_option("--configs", th_flags.configs, "Sampled in-ball configurations")
      ->check(CLI::PositiveNumber);
  th->add_option("--seeds", th_flags.contraction_seeds, "Seeds for the contraction average")
      ->check(CLI::PositiveNumber);
  th->add_flag("--skip-statistical", th_flags.skip_statistical, "Only run exact checks");
  th->add_option("--out", th_out, "Report path ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadFlags;
  }

  try {
    if (*gen) return cmd_generate(gen_inst, gen_out);
    if (*run) return cmd_run(run_inst, run_flags, run_out);
    if (*cmp) return cmd_compare(cmp_inst, cmp_flags, cmp_algs, cmp_seeds, cmp_threshold, cmp_out);
    if (*sweep)
      return cmd_sweep(sweep_inst, sweep_flags, sweep_b, sweep_m, sweep_step, sweep_eps,
                       sweep_seeds, sweep_threshold, sweep_out);
    if (*th) return cmd_check_theory(th_inst, th_flags, th_out);
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadFlags;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kOk;
}
