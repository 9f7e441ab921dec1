// Acceptance suite: one PASS/FAIL line per criterion, then a summary. Runs
// the real pipeline at desk scale (several minutes on one core).

#include <coherence_forge/harness.hpp>

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace cf = coherence_forge;
namespace fs = std::filesystem;
using cf::Matrix;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Every matrix whose coherence the suite evaluates, for the Welch check.
struct Evaluated {
  std::string name;
  cf::Index m, n;
  double mu;
};
std::vector<Evaluated> g_evaluated;

double evaluate(const std::string &name, const cf::BinaryMatrix &a) {
  const double mu = cf::coherence(a).coherence;
  g_evaluated.push_back({name, a.m(), a.n(), mu});
  return mu;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string &args) {
  const std::string cmd = "COHERENCE_FORGE_THREADS=0 " +
                          std::string(COHERENCE_FORGE_CLI) + " " + args +
                          " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  const double alphas[] = {1.0, 5.0, 20.0};
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const int r = 2 + inst % 2;
    const cf::Index m = std::uniform_int_distribution<cf::Index>(r + 1, 10)(rng);
    const cf::Index n = std::uniform_int_distribution<cf::Index>(2, 8)(rng);
    const double alpha = alphas[inst % 3];
    const auto b = cf::random_matrix(m, n, r, rng());
    const Matrix g = cf::euclidean_gradient(b, {alpha, r});
    const Matrix fd = oracle::central_difference_gradient(b.values(), alpha, r, 1e-6);
    const double rel = (g - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff();
    worst = std::max(worst, rel);
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-6 && secs < 10.0,
          "max relative error " + fmt("%.3g", worst) + " (limit 1e-6), " +
              fmt("%.2f", secs) + " s (limit 10 s)"};
}

struct OptimizeRun {
  std::optional<cf::OptimizeResult> result;
  double worst_sum = 0, worst_norm = 0, worst_frob = 0;
  long iterates = 0;
};

Outcome manifold_invariants(OptimizeRun &run) {
  cf::OptimizerConfig cfg;
  cfg.seed = 1;
  auto observe = [&](const cf::RelaxedMatrix &b, int) {
    ++run.iterates;
    const Matrix &v = b.values();
    for (cf::Index j = 0; j < v.cols(); ++j) {
      run.worst_sum = std::max(run.worst_sum, std::abs(v.col(j).sum() - 1.0));
      run.worst_norm = std::max(run.worst_norm, std::abs(v.col(j).squaredNorm() - 0.25));
    }
    run.worst_frob = std::max(run.worst_frob, std::abs(v.squaredNorm() - 16.0));
  };
  run.result = cf::optimize(cf::random_matrix(16, 64, 4, 1), cfg, observe);
  const bool ok = run.worst_sum < 1e-12 && run.worst_norm < 1e-10 &&
                  run.worst_frob < 64 * 1e-10;
  return {ok, std::to_string(run.iterates) + " iterates; max |sum-1| " +
                  fmt("%.2g", run.worst_sum) + ", max |norm^2-1/r| " +
                  fmt("%.2g", run.worst_norm) + ", max |F^2-n/r| " +
                  fmt("%.2g", run.worst_frob)};
}

Outcome descent_and_stationarity(const cf::IterationTrace &trace) {
  const double tau = cf::OptimizerConfig{}.tau;
  double worst_rise = -INFINITY;
  const auto &recs = trace.records;
  for (std::size_t i = 1; i < recs.size(); ++i)
    if (recs[i].rung == recs[i - 1].rung)
      worst_rise = std::max(worst_rise, recs[i].objective - recs[i - 1].objective);
  bool stationary = true;
  std::string rungs;
  for (std::size_t k = 0; k < trace.rung_status.size(); ++k) {
    double last_grad = 0.0;
    for (const auto &rec : recs)
      if (rec.rung == static_cast<int>(k))
        last_grad = rec.grad_norm;
    const bool conv = trace.rung_status[k] == cf::OptimizeStatus::converged;
    if (conv && !(last_grad < tau))
      stationary = false;
    rungs += std::string(k ? ", " : "") + cf::to_string(trace.rung_status[k]) +
             " |grad| " + fmt("%.2g", last_grad);
  }
  return {worst_rise <= 1e-12 && stationary,
          "max in-rung increase " + fmt("%.2g", worst_rise) + " (limit 1e-12); " +
              rungs};
}

Outcome devore_oracle() {
  const auto t0 = Clock::now();
  const auto a = cf::devore_matrix({5, 3});
  bool weights = true;
  for (cf::Index j = 0; j < a.n(); ++j)
    weights = weights && a.support(j).size() == 5;
  const int overlap = oracle::max_overlap(a);
  const double mu = evaluate("devore(5,3)", a);
  const double secs = seconds_since(t0);
  const bool ok = a.m() == 25 && a.n() == 625 && weights && overlap == 3 &&
                  mu == 0.6 && secs < 5.0;
  return {ok, std::to_string(a.m()) + "x" + std::to_string(a.n()) +
                  ", brute-force max overlap " + std::to_string(overlap) +
                  "/5, mu " + fmt("%.17g", mu) + ", " + fmt("%.2f", secs) +
                  " s (limit 5 s)"};
}

struct Proposed {
  std::optional<cf::Construction> c;
  int attempts = 0;
  double first_attempt_mu = 0.0;
  double seconds = 0.0;
};

constexpr int kRetryDuplicates = 5;

Proposed build_proposed_25x625() {
  const auto t0 = Clock::now();
  cf::OptimizerConfig cfg;
  cfg.seed = 1;
  Proposed p;
  bool first = true;
  // Same policy as `generate --retry-duplicates N`, observing each attempt.
  const std::uint64_t base = cfg.seed;
  for (int attempt = 0;; ++attempt) {
    cfg.seed = attempt == 0 ? base : cf::derive_seed(base, static_cast<std::uint64_t>(attempt));
    cf::Construction c = cf::construct(25, 625, 5, cfg);
    evaluate("proposed attempt " + std::to_string(attempt + 1), c.matrix);
    if (first) {
      p.first_attempt_mu = c.report.coherence;
      first = false;
    }
    std::cerr << "  proposed attempt " << attempt + 1 << ": mu "
              << c.report.coherence << ", duplicate pairs " << c.duplicates.size()
              << ", " << cf::to_string(c.trace.status) << '\n';
    if (c.duplicates.empty() || attempt >= kRetryDuplicates) {
      p.c.emplace(std::move(c));
      p.attempts = attempt + 1;
      break;
    }
  }
  p.seconds = seconds_since(t0);
  return p;
}

Outcome construction_quality(const Proposed &p) {
  const auto t0 = Clock::now();
  double sum = 0.0;
  for (std::uint64_t s = 1; s <= 20; ++s)
    sum += evaluate("random seed " + std::to_string(s),
                    cf::random_binary_matrix(25, 625, 5, s));
  const double mean = sum / 20.0;
  const double secs = p.seconds + seconds_since(t0);
  const double mu = p.c->report.coherence;
  return {mu <= mean && secs < 600.0,
          "proposed mu " + fmt("%.4g", mu) + " vs random mean " +
              fmt("%.4g", mean) + "; " + std::to_string(p.attempts) +
              " attempt(s) under retry-duplicates=" +
              std::to_string(kRetryDuplicates) + " (first attempt mu " +
              fmt("%.4g", p.first_attempt_mu) + "); " + fmt("%.0f", secs) +
              " s (limit 600 s)"};
}

// Fraction of 100 noiseless trials recovered to relative error < 1e-10.
int exact_recoveries(const cf::BinaryMatrix &a, int k, std::uint64_t seed) {
  const Matrix d = a.to_dense();
  int ok = 0;
  for (int t = 0; t < 100; ++t) {
    const auto x = cf::gen_sparse_signal(a.n(), k, cf::derive_seed(seed, static_cast<std::uint64_t>(t)));
    const auto res = cf::omp(d, cf::measure(a, x, INFINITY, 0), k);
    ok += (res.estimate - x.values).norm() / x.values.norm() < 1e-10 ? 1 : 0;
  }
  return ok;
}

Outcome omp_guarantee(const Proposed &p) {
  std::string detail;
  bool ok = true;
  auto check = [&](const std::string &name, const cf::BinaryMatrix &a) {
    const double mu = evaluate(name, a);
    const double bound = (1.0 + 1.0 / mu) / 2.0;
    for (int k = 1; k < bound && k <= a.m(); ++k) {
      const int n = exact_recoveries(a, k, 77);
      ok = ok && n == 100;
      detail += name + " (mu " + fmt("%.3g", mu) + ") k=" + std::to_string(k) +
                ": " + std::to_string(n) + "/100; ";
    }
  };
  check("devore(5,3)", cf::devore_matrix({5, 3}));
  check("proposed 25x625", p.c->matrix);
  // Smaller constructions, to look for one with mu <= 0.4.
  int low = 0;
  for (auto [m, n, r] : {std::tuple{16, 20, 4}, {20, 30, 4}, {32, 37, 4}, {40, 45, 5}}) {
    cf::OptimizerConfig cfg;
    cfg.seed = 3;
    const auto c = cf::construct(m, n, r, cfg);
    const std::string name = "proposed " + std::to_string(m) + "x" + std::to_string(n);
    check(name, c.matrix);
    low += c.report.coherence <= 0.4 ? 1 : 0;
  }
  detail += std::to_string(low) + " construction(s) reached mu <= 0.4";
  return {ok, detail};
}

Outcome figure_shape(const fs::path &work, const Proposed &p) {
  const auto t0 = Clock::now();
  fs::create_directories(work);
  {
    std::ofstream f(work / "proposed.sparse.txt");
    cf::write_sparse(f, p.c->matrix);
  }
  cf::ExperimentConfig cfg;
  cfg.trials = 200;
  cfg.seed = 1;
  cfg.out = (work / "figs").string();
  cfg.matrices = {cf::parse_matrix_source("proposed=file:" + (work / "proposed.sparse.txt").string()),
                  cf::parse_matrix_source("devore:5:3"),
                  cf::parse_matrix_source("random")};
  std::ostringstream log;
  if (cf::cmd_compare(cfg, log) != cf::exit_success)
    return {false, "compare failed: " + log.str()};

  // Parse fig1: header comment, column names, then k,proposed,devore,random.
  std::ifstream in(work / "figs" / "fig1_recovery_vs_k.csv");
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::vector<std::vector<double>> cols(3);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string tok;
    std::getline(ss, tok, ',');
    for (auto &c : cols) {
      std::getline(ss, tok, ',');
      c.push_back(std::stod(tok));
    }
  }
  // The random source resolves to the derived seed the harness uses.
  evaluate("random (compare)", cf::random_binary_matrix(25, 625, 5, cf::derive_seed(1, 0x5241ULL, 2)));

  bool monotone = cols[0].size() == 15;
  double worst_rise = 0.0;
  for (const auto &c : cols)
    for (std::size_t i = 1; i < c.size(); ++i)
      worst_rise = std::max(worst_rise, c[i] - c[i - 1]);
  monotone = monotone && worst_rise <= 3.0;
  int points = 0, wins = 0;
  for (std::size_t i = 0; i < cols[0].size(); ++i) {
    const double pr = cols[0][i], rd = cols[2][i];
    const bool informative = (pr > 5 && pr < 95) || (rd > 5 && rd < 95);
    if (!informative)
      continue;
    ++points;
    wins += pr >= rd ? 1 : 0;
  }
  const double frac = points ? static_cast<double>(wins) / points : 0.0;
  const double secs = seconds_since(t0);
  std::string curve;
  for (std::size_t i = 0; i < cols[0].size(); ++i)
    curve += fmt(i ? " %.0f" : "%.0f", cols[0][i]) + "/" + fmt("%.0f", cols[1][i]) +
             "/" + fmt("%.0f", cols[2][i]);
  return {monotone && points > 0 && frac >= 0.8 && secs < 900.0,
          "max rise " + fmt("%.1f", worst_rise) + " pp (limit 3); proposed >= random at " +
              std::to_string(wins) + "/" + std::to_string(points) +
              " informative k (need 80%); " + fmt("%.0f", secs) +
              " s (limit 900 s); proposed/devore/random by k: " + curve};
}

Outcome determinism(const fs::path &work) {
  const std::string gen = "generate --m 16 --n 64 --r 4 --seed 3 --max-iters 300 --out ";
  const std::string eval_args = "evaluate --k 1:6 --snr inf,20 --trials 30 --seed 4 --matrix-file ";
  const std::string cmp =
      "compare --m 16 --n 64 --r 4 --max-iters 200 --trials 20 --k 1:5 --fig2-k 3 "
      "--matrix proposed --matrix devore:3:2 --matrix random --out ";
  int failures = 0;
  std::string detail;
  for (const char *run : {"a", "b"}) {
    const fs::path d = work / run;
    failures += run_cli(gen + (d / "gen").string()) != 0;
    failures += run_cli(eval_args + (d / "gen" / "matrix.sparse.txt").string() +
                        " --out " + (d / "eval").string()) != 0;
    failures += run_cli(cmp + (d / "cmp").string()) != 0;
  }
  int files = 0, identical = 0;
  for (const auto &entry : fs::recursive_directory_iterator(work / "a")) {
    if (!entry.is_regular_file())
      continue;
    ++files;
    const fs::path rel = fs::relative(entry.path(), work / "a");
    if (slurp(entry.path()) == slurp(work / "b" / rel))
      ++identical;
    else
      detail += " differs: " + rel.string();
  }
  // generate: 4 files, evaluate: 1, compare: 4.
  return {failures == 0 && files == 9 && identical == files,
          std::to_string(identical) + "/" + std::to_string(files) +
              " output files byte-identical across reruns of generate, "
              "evaluate, compare; " + std::to_string(failures) +
              " command failure(s)" + detail};
}

Outcome welch(void) {
  double worst = INFINITY;
  std::string worst_name;
  for (const auto &e : g_evaluated) {
    const double gap = e.mu - cf::welch_bound(e.m, e.n);
    if (gap < worst) {
      worst = gap;
      worst_name = e.name;
    }
  }
  const double w = cf::welch_bound(25, 625);
  return {worst >= -1e-12 && std::abs(w - 0.196116) <= 1e-6,
          std::to_string(g_evaluated.size()) + " matrices, min (mu - welch) " +
              fmt("%.4g", worst) + " (" + worst_name + "); welch(25,625) " +
              fmt("%.8f", w)};
}

Outcome smooth_max_properties() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::uniform_int_distribution<int> len(1, 50);
  const double alphas[] = {0.0, 0.1, 1.0, 10.0, 100.0, 1000.0};
  int bound_violations = 0, monotone_violations = 0, mean_mismatch = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> x(static_cast<std::size_t>(len(rng)));
    for (double &v : x)
      v = u(rng);
    double sum = 0.0;
    for (double v : x)
      sum += v;
    const double mean = sum / static_cast<double>(x.size());
    const double max = *std::max_element(x.begin(), x.end());
    double prev = -INFINITY;
    for (double a : alphas) {
      const double m = cf::smooth_max(x, a);
      bound_violations += (m < mean - 1e-12 || m > max + 1e-12);
      monotone_violations += m < prev - 1e-12;
      if (a == 0.0)
        mean_mismatch += m != mean;
      prev = m;
    }
  }
  return {bound_violations == 0 && monotone_violations == 0 && mean_mismatch == 0,
          "1000 vectors x 6 sharpness values: " + std::to_string(bound_violations) +
              " bound, " + std::to_string(monotone_violations) + " monotonicity, " +
              std::to_string(mean_mismatch) + " M_0 != mean violations"};
}

} // namespace

int main() {
  const auto t0 = Clock::now();
  const fs::path work = fs::temp_directory_path() / "coherence_forge_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  const char *names[] = {"",
                         "gradient correctness",
                         "manifold invariants",
                         "monotone descent + stationarity",
                         "DeVore oracle",
                         "Welch bound",
                         "construction quality",
                         "OMP guarantee",
                         "figure shape",
                         "determinism",
                         "smooth-max properties"};
  Outcome out[11];
  auto progress = [&](int i) {
    std::cerr << "[" << fmt("%6.1f", seconds_since(t0)) << " s] criterion " << i
              << " done\n";
  };

  out[1] = gradient_correctness();
  progress(1);
  OptimizeRun run;
  out[2] = manifold_invariants(run);
  progress(2);
  out[3] = descent_and_stationarity(run.result->trace);
  progress(3);
  out[4] = devore_oracle();
  progress(4);
  const Proposed proposed = build_proposed_25x625();
  out[6] = construction_quality(proposed);
  progress(6);
  out[7] = omp_guarantee(proposed);
  progress(7);
  out[8] = figure_shape(work / "figure", proposed);
  progress(8);
  out[9] = determinism(work / "determinism");
  progress(9);
  out[10] = smooth_max_properties();
  progress(10);
  out[5] = welch();

  int failed = 0;
  for (int i = 1; i <= 10; ++i) {
    std::cout << (out[i].pass ? "[PASS] " : "[FAIL] ") << "AC" << i << ' '
              << names[i] << ": " << out[i].detail << '\n';
    failed += out[i].pass ? 0 : 1;
  }
  std::cout << (10 - failed) << "/10 criteria passed in "
            << fmt("%.0f", seconds_since(t0)) << " s\n";
  return failed == 0 ? 0 : 1;
}
