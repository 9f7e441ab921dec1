#pragma once

// Sparse recovery benchmark: k-sparse signal synthesis, noisy binary
// measurements, OMP reconstruction, and recovery statistics over a
// (sparsity, input SNR) grid.

#include <coherence_forge/binary_construct.hpp>
#include <coherence_forge/error.hpp>
#include <coherence_forge/parallel.hpp>
#include <coherence_forge/random.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace coherence_forge {

inline constexpr double success_relative_error = 1e-4;
inline constexpr double output_snr_cap_db = 300.0;
inline constexpr double omp_residual_floor = 1e-12;

struct SparseSignal {
  Vector values;
  std::vector<int> support; // ascending
  int k = 0;
};

/// Uniform random k-subset support with standard normal nonzeros.
inline SparseSignal gen_sparse_signal(Index n, int k, std::uint64_t seed) {
  if (k < 0 || k > n)
    throw Error(Errc::invalid_sparsity, "sparsity " + std::to_string(k) +
                                            " outside [0, " +
                                            std::to_string(n) + "]");
  Engine engine = make_engine(seed);
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int t = 0; t < k; ++t) {
    std::uniform_int_distribution<Index> pick(t, n - 1);
    std::swap(idx[static_cast<std::size_t>(t)],
              idx[static_cast<std::size_t>(pick(engine))]);
  }
  SparseSignal x;
  x.k = k;
  x.support.assign(idx.begin(), idx.begin() + k);
  std::sort(x.support.begin(), x.support.end());
  x.values = Vector::Zero(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i : x.support) {
    double v = 0.0;
    while (v == 0.0)
      v = normal(engine);
    x.values[i] = v;
  }
  return x;
}

/// Ax by index summation over each column's support; no multiplications.
inline Vector apply(const BinaryMatrix &a, const Vector &x) {
  if (x.size() != a.n())
    throw Error(Errc::shape, "signal length " + std::to_string(x.size()) +
                                 " differs from matrix width " +
                                 std::to_string(a.n()));
  Vector y = Vector::Zero(a.m());
  for (Index j = 0; j < a.n(); ++j) {
    const double xj = x[j];
    if (xj == 0.0)
      continue;
    for (int i : a.support(j))
      y[i] += xj;
  }
  return y;
}

/// y = Ax + w with w white Gaussian, rescaled per realization so that
/// 10 log10(|Ax|^2 / |w|^2) equals input_snr_db exactly. An infinite SNR
/// gives w = 0.
inline Vector measure(const BinaryMatrix &a, const SparseSignal &x,
                      double input_snr_db, std::uint64_t noise_seed) {
  Vector clean = apply(a, x.values);
  if (std::isinf(input_snr_db) && input_snr_db > 0)
    return clean;
  if (!std::isfinite(input_snr_db))
    throw Error(Errc::validation, "input SNR must be finite or +inf");
  const double signal_energy = clean.squaredNorm();
  if (!(signal_energy > 0.0))
    throw Error(Errc::degenerate_snr,
                "finite input SNR requested for a zero measurement");
  Engine engine = make_engine(noise_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector w(a.m());
  for (Index i = 0; i < w.size(); ++i)
    w[i] = normal(engine);
  const double target_noise = signal_energy / std::pow(10.0, input_snr_db / 10.0);
  w *= std::sqrt(target_noise / w.squaredNorm());
  return clean + w;
}

struct OmpResult {
  Vector estimate;
  std::vector<int> active;          // in selection order
  std::vector<double> residual_norms; // |r| before the first and after every iteration
  bool singular = false;            // halted on a rank-deficient active set
};

/// Orthogonal matching pursuit with at most `budget` iterations.
inline OmpResult omp(const Matrix &a, const Vector &y, int budget) {
  const Index m = a.rows();
  const Index n = a.cols();
  if (y.size() != m)
    throw Error(Errc::shape, "measurement length differs from matrix height");
  if (budget < 0 || budget > m)
    throw Error(Errc::invalid_sparsity,
                "OMP budget " + std::to_string(budget) + " outside [0, m]");
  Vector norms = a.colwise().norm().transpose();
  for (Index j = 0; j < n; ++j)
    if (!(norms[j] > 0.0))
      throw Error(Errc::zero_column, "column " + std::to_string(j) + " is zero");

  OmpResult out;
  out.estimate = Vector::Zero(n);
  Vector residual = y;
  out.residual_norms.push_back(residual.norm());
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  Vector coeffs;
  for (int it = 0; it < budget; ++it) {
    if (residual.norm() < omp_residual_floor)
      break;
    const Vector corr = a.transpose() * residual;
    Index best = -1;
    double best_score = -1.0;
    for (Index j = 0; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)])
        continue;
      const double score = std::abs(corr[j]) / norms[j];
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    if (best < 0)
      break;
    out.active.push_back(static_cast<int>(best));
    Matrix sub(m, static_cast<Index>(out.active.size()));
    for (std::size_t c = 0; c < out.active.size(); ++c)
      sub.col(static_cast<Index>(c)) = a.col(out.active[c]);
    Eigen::ColPivHouseholderQR<Matrix> qr(sub);
    qr.setThreshold(1e-10);
    if (qr.rank() < sub.cols()) {
      out.active.pop_back();
      out.singular = true;
      break;
    }
    used[static_cast<std::size_t>(best)] = 1;
    coeffs = qr.solve(y);
    residual = y - sub * coeffs;
    out.residual_norms.push_back(residual.norm());
  }
  for (std::size_t c = 0; c < out.active.size(); ++c)
    out.estimate[out.active[c]] = coeffs[static_cast<Index>(c)];
  return out;
}

inline OmpResult omp(const BinaryMatrix &a, const Vector &y, int budget) {
  return omp(a.to_dense(), y, budget);
}

/// 20 log10(|x| / |x - xhat|), capped at output_snr_cap_db.
inline double output_snr_db(const Vector &x, const Vector &estimate) {
  const double err = (x - estimate).norm();
  const double sig = x.norm();
  if (err == 0.0)
    return output_snr_cap_db;
  if (sig == 0.0)
    return -output_snr_cap_db;
  return std::min(output_snr_cap_db, 20.0 * std::log10(sig / err));
}

struct TrialResult {
  bool success = false;
  double output_snr_db = 0.0;
  double residual_norm = 0.0;
  bool singular = false;
  bool failed = false; // an exception was raised; counted as unsuccessful
};

struct RecoveryCell {
  int k = 0;
  double input_snr_db = 0.0;
  int trials = 0;
  double recovery_pct = 0.0;
  double mean_output_snr_db = 0.0;
  int failed_trials = 0;
};

struct RecoveryReport {
  std::string matrix_id;
  std::uint64_t seed = 0;
  std::vector<RecoveryCell> cells; // k major, SNR minor

  const RecoveryCell &cell(int k, double snr) const {
    for (const auto &c : cells)
      if (c.k == k && (c.input_snr_db == snr ||
                       (std::isinf(c.input_snr_db) && std::isinf(snr))))
        return c;
    throw Error(Errc::validation, "no cell for k=" + std::to_string(k));
  }
};

/// Seeds for one trial: the signal and the noise come from separate
/// sub-streams of (seed, k, snr, trial).
inline std::uint64_t trial_seed(std::uint64_t seed, int k, double snr,
                                int trial) {
  return derive_seed(seed, static_cast<std::uint64_t>(k),
                     std::bit_cast<std::uint64_t>(snr),
                     static_cast<std::uint64_t>(trial));
}

inline TrialResult run_trial(const BinaryMatrix &a, const Matrix &dense,
                             int k, double snr, std::uint64_t seed) {
  TrialResult t;
  if (k == 0) {
    // Zero signal: nothing to measure; the empty estimate is exact.
    t.success = true;
    t.output_snr_db = output_snr_cap_db;
    return t;
  }
  const SparseSignal x = gen_sparse_signal(a.n(), k, derive_seed(seed, 1));
  const Vector y = measure(a, x, snr, derive_seed(seed, 2));
  const OmpResult rec = omp(dense, y, k);
  const double rel = (x.values - rec.estimate).norm() / x.values.norm();
  t.success = rel < success_relative_error;
  t.output_snr_db = output_snr_db(x.values, rec.estimate);
  t.residual_norm = rec.residual_norms.back();
  t.singular = rec.singular;
  return t;
}

/// Order-independent reduction: values are sorted before summation.
inline RecoveryCell aggregate(int k, double snr,
                              std::vector<TrialResult> results) {
  RecoveryCell c;
  c.k = k;
  c.input_snr_db = snr;
  c.trials = static_cast<int>(results.size());
  if (results.empty())
    throw Error(Errc::validation, "cell needs at least one trial");
  std::vector<double> snrs;
  snrs.reserve(results.size());
  int successes = 0;
  for (const auto &t : results) {
    successes += t.success ? 1 : 0;
    c.failed_trials += t.failed ? 1 : 0;
    snrs.push_back(t.output_snr_db);
  }
  std::sort(snrs.begin(), snrs.end());
  double sum = 0.0;
  for (double v : snrs)
    sum += v;
  c.recovery_pct = 100.0 * successes / static_cast<double>(results.size());
  c.mean_output_snr_db = sum / static_cast<double>(results.size());
  return c;
}

inline RecoveryReport run_experiment(const BinaryMatrix &a,
                                     const std::vector<int> &k_range,
                                     const std::vector<double> &snr_list,
                                     int trials, std::uint64_t seed,
                                     std::string matrix_id = {},
                                     unsigned threads = 0) {
  if (trials < 1)
    throw Error(Errc::validation, "trials must be >= 1");
  for (int k : k_range)
    if (k < 0 || k > a.m())
      throw Error(Errc::invalid_sparsity,
                  "sparsity " + std::to_string(k) + " outside [0, m=" +
                      std::to_string(a.m()) + "]");
  for (double s : snr_list)
    if (std::isnan(s) || (std::isinf(s) && s < 0))
      throw Error(Errc::validation, "input SNR must be finite or +inf");
  const Matrix dense = a.to_dense();
  RecoveryReport report;
  report.matrix_id = std::move(matrix_id);
  report.seed = seed;
  const std::size_t per_cell = static_cast<std::size_t>(trials);
  const std::size_t cells = k_range.size() * snr_list.size();
  std::vector<TrialResult> results(cells * per_cell);
  parallel_for(results.size(), threads, [&](std::size_t idx) {
    const std::size_t cell = idx / per_cell;
    const int trial = static_cast<int>(idx % per_cell);
    const int k = k_range[cell / snr_list.size()];
    const double snr = snr_list[cell % snr_list.size()];
    try {
      results[idx] = run_trial(a, dense, k, snr, trial_seed(seed, k, snr, trial));
    } catch (const Error &) {
      results[idx] = TrialResult{false, 0.0, 0.0, false, true};
    }
  });
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::vector<TrialResult> slice(
        results.begin() + static_cast<std::ptrdiff_t>(cell * per_cell),
        results.begin() + static_cast<std::ptrdiff_t>((cell + 1) * per_cell));
    report.cells.push_back(aggregate(k_range[cell / snr_list.size()],
                                     snr_list[cell % snr_list.size()],
                                     std::move(slice)));
  }
  return report;
}

/// Formats a real at 17 significant digits; +inf prints as `inf`.
inline std::string format_real(double v) {
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void write_report_header(std::ostream &os) {
  os << "matrix_id,k,input_snr_db,trials,recovery_pct,mean_output_snr_db\n";
}

inline void write_report_rows(std::ostream &os, const RecoveryReport &rep) {
  std::ostringstream buf;
  for (const auto &c : rep.cells)
    buf << rep.matrix_id << ',' << c.k << ',' << format_real(c.input_snr_db)
        << ',' << c.trials << ',' << format_real(c.recovery_pct) << ','
        << format_real(c.mean_output_snr_db) << '\n';
  os << buf.str();
}

inline void write_report_csv(std::ostream &os, const RecoveryReport &rep) {
  write_report_header(os);
  write_report_rows(os, rep);
}

} // namespace coherence_forge
