#pragma once

// Riemannian gradient descent with Armijo backtracking on ES_m^n:
//
//   xi_i    = -grad f(B_i)
//   stop if |xi_i|_F < tau
//   m*      = smallest m with f(B_i) - f(R(abar beta^m xi_i)) >= sigma abar beta^m |xi_i|^2
//   B_{i+1} = R(abar beta^m* xi_i)
//
// run once per rung of a smooth-max sharpness ladder, each rung warm-started
// from the previous rung's final point.

#include <coherence_forge/error.hpp>
#include <coherence_forge/manifold.hpp>
#include <coherence_forge/objective.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace coherence_forge {

struct OptimizerConfig {
  double alpha_bar = 1.0;
  double beta = 0.5;
  double sigma = 1e-4;
  double tau = 1e-6;
  int max_iters = 5000; // per rung
  int max_backtracks = 60;
  /// Sharpness on the coherence scale: rung s uses objective alpha = s / r,
  /// so the exponent reads s * (r g_ij), and r g_ij is the coherence of a
  /// pair of binary columns.
  std::vector<double> alpha_ladder{50.0, 200.0, 800.0};
  std::uint64_t seed = 0;
  /// Consecutive iterations with an entry below -1e-9 before a warning is
  /// recorded.
  int negativity_patience = 1000;

  void validate() const {
    auto fail = [](const std::string &what) {
      throw Error(Errc::validation, "optimizer config: " + what);
    };
    if (!(alpha_bar > 0.0))
      fail("alpha_bar must be > 0");
    if (!(beta > 0.0 && beta < 1.0))
      fail("beta must lie in (0, 1)");
    if (!(sigma > 0.0 && sigma < 1.0))
      fail("sigma must lie in (0, 1)");
    if (!(tau > 0.0))
      fail("tau must be > 0");
    if (max_iters < 0)
      fail("max_iters must be >= 0");
    if (max_backtracks < 0)
      fail("max_backtracks must be >= 0");
    if (alpha_ladder.empty())
      fail("alpha_ladder must be nonempty");
    for (std::size_t i = 0; i < alpha_ladder.size(); ++i) {
      if (!(alpha_ladder[i] >= 0.0) || !std::isfinite(alpha_ladder[i]))
        fail("alpha_ladder entries must be finite and >= 0");
      if (i > 0 && !(alpha_ladder[i] > alpha_ladder[i - 1]))
        fail("alpha_ladder must be strictly increasing");
    }
  }
};

/// Objective alpha for a ladder rung.
inline double rung_alpha(double sharpness, int r) { return sharpness / r; }

enum class OptimizeStatus {
  converged,
  iteration_cap,
  retraction_failure,
  line_search_stall,
};

inline const char *to_string(OptimizeStatus s) {
  switch (s) {
  case OptimizeStatus::converged: return "converged";
  case OptimizeStatus::iteration_cap: return "iteration-cap";
  case OptimizeStatus::retraction_failure: return "retraction-failure";
  case OptimizeStatus::line_search_stall: return "line-search-stall";
  }
  return "unknown";
}

/// One record per iteration. `objective` and `grad_norm` describe the point
/// B_i the iteration starts from; `step` and `backtracks` describe the move
/// to B_{i+1}. The last record of every rung describes the rung's final
/// point and has step = 0.
struct IterationRecord {
  int iter = 0;
  int rung = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  int backtracks = 0;
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  std::vector<OptimizeStatus> rung_status;
  std::vector<double> rung_alpha; // objective alpha used in each rung
  OptimizeStatus status = OptimizeStatus::iteration_cap;
  std::vector<std::string> warnings;

  /// CSV with header `iter,alpha_rung,objective,grad_norm,step,backtracks`,
  /// reals at 17 significant digits.
  void write_csv(std::ostream &os) const {
    std::ostringstream buf;
    buf << std::setprecision(17);
    buf << "iter,alpha_rung,objective,grad_norm,step,backtracks\n";
    for (const auto &rec : records)
      buf << rec.iter << ',' << rec.rung << ',' << rec.objective << ','
          << rec.grad_norm << ',' << rec.step << ',' << rec.backtracks << '\n';
    os << buf.str();
  }
};

/// Raised when the optimizer cannot continue; carries everything computed
/// so far.
class OptimizationFailure : public Error {
public:
  OptimizationFailure(Errc code, const std::string &what, IterationTrace trace)
      : Error(code, what), trace_(std::move(trace)) {}
  const IterationTrace &trace() const noexcept { return trace_; }

private:
  IterationTrace trace_;
};

struct LineSearchResult {
  RelaxedMatrix point;
  double objective = 0.0;
  double step = 0.0;
  int backtracks = 0;
};

/// Finds the smallest m with f0 - f(R(abar beta^m xi)) >= sigma abar beta^m
/// |xi|^2. Throws line_search_stall when m would exceed max_backtracks.
inline LineSearchResult armijo_search(const RelaxedMatrix &b,
                                      const TangentMatrix &xi, double f0,
                                      const OptimizerConfig &cfg,
                                      const ObjectiveParams &params,
                                      ObjectiveWorkspace *ws = nullptr) {
  const double xi_sq = xi.squared_norm();
  if (xi_sq == 0.0)
    return LineSearchResult{b, f0, cfg.alpha_bar, 0};
  double step = cfg.alpha_bar;
  for (int m = 0; m <= cfg.max_backtracks; ++m) {
    RelaxedMatrix trial = retract(b, xi, step);
    const double f = objective(trial, params, ws);
    if (f0 - f >= cfg.sigma * step * xi_sq)
      return LineSearchResult{std::move(trial), f, step, m};
    step *= cfg.beta;
  }
  throw Error(Errc::line_search_stall,
              "no Armijo step within " + std::to_string(cfg.max_backtracks) +
                  " backtracks (|xi|=" + std::to_string(std::sqrt(xi_sq)) +
                  ")");
}

struct OptimizeResult {
  RelaxedMatrix point;
  IterationTrace trace;
};

/// Optional per-iteration observer, e.g. for invariant checks in tests.
using IterateObserver = std::function<void(const RelaxedMatrix &, int rung)>;

inline OptimizeResult optimize(RelaxedMatrix b, const OptimizerConfig &cfg,
                               const IterateObserver &observe = {}) {
  cfg.validate();
  IterationTrace trace;
  ObjectiveWorkspace ws;
  const int r = b.r();
  int global_iter = 0;
  for (std::size_t rung = 0; rung < cfg.alpha_ladder.size(); ++rung) {
    const ObjectiveParams params{rung_alpha(cfg.alpha_ladder[rung], r), r};
    trace.rung_alpha.push_back(params.alpha);
    OptimizeStatus rung_status = OptimizeStatus::iteration_cap;
    int negative_run = 0;
    bool warned = false;
    double f = 0.0;
    TangentMatrix grad = riemannian_gradient(b, params, &f, &ws);
    if (observe)
      observe(b, static_cast<int>(rung));
    for (int it = 0;; ++it) {
      const double grad_norm = grad.norm();
      IterationRecord rec{global_iter++, static_cast<int>(rung), f, grad_norm,
                          0.0, 0};
      if (grad_norm < cfg.tau) {
        trace.records.push_back(rec);
        rung_status = OptimizeStatus::converged;
        break;
      }
      if (it >= cfg.max_iters) {
        trace.records.push_back(rec);
        break;
      }
      LineSearchResult ls{b, f, 0.0, 0};
      try {
        ls = armijo_search(b, -grad, f, cfg, params, &ws);
      } catch (const Error &e) {
        trace.records.push_back(rec);
        if (e.code() == Errc::line_search_stall) {
          if (grad_norm < 10.0 * cfg.tau) {
            rung_status = OptimizeStatus::converged;
            trace.warnings.push_back(
                "rung " + std::to_string(rung) +
                ": line search stalled near stationarity; treated as converged");
            break;
          }
          trace.rung_status.push_back(OptimizeStatus::line_search_stall);
          trace.status = OptimizeStatus::line_search_stall;
          throw OptimizationFailure(e.code(), e.what(), std::move(trace));
        }
        trace.rung_status.push_back(OptimizeStatus::retraction_failure);
        trace.status = OptimizeStatus::retraction_failure;
        throw OptimizationFailure(e.code(), e.what(), std::move(trace));
      }
      rec.step = ls.step;
      rec.backtracks = ls.backtracks;
      trace.records.push_back(rec);
      b = std::move(ls.point);
      if (observe)
        observe(b, static_cast<int>(rung));

      if (b.values().minCoeff() < tolerance::negative_entry) {
        if (++negative_run >= cfg.negativity_patience && !warned) {
          trace.warnings.push_back(
              "rung " + std::to_string(rung) + ": entries below -1e-9 for " +
              std::to_string(cfg.negativity_patience) +
              " consecutive iterations");
          warned = true;
        }
      } else {
        negative_run = 0;
      }
      grad = riemannian_gradient(b, params, &f, &ws);
    }
    trace.rung_status.push_back(rung_status);
  }
  trace.status = trace.rung_status.back();
  return OptimizeResult{std::move(b), std::move(trace)};
}

} // namespace coherence_forge
