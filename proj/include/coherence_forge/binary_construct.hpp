#pragma once

#include <coherence_forge/error.hpp>
#include <coherence_forge/manifold.hpp>
#include <coherence_forge/optimizer.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace coherence_forge {

/// m x n matrix over {0, 1} with exactly r ones per column, stored as the
/// sorted row support of every column.
class BinaryMatrix {
public:
  BinaryMatrix() = default;

  /// Validates shape, support bounds, sortedness, and column weight.
  BinaryMatrix(Index m, int r, std::vector<std::vector<int>> supports)
      : m_(m), r_(r), supports_(std::move(supports)) {
    if (m < 1)
      throw Error(Errc::shape, "binary matrix needs m >= 1");
    if (r < 1 || r > m)
      throw Error(Errc::invalid_weight,
                  "column weight " + std::to_string(r) + " outside [1, m]");
    for (std::size_t j = 0; j < supports_.size(); ++j) {
      const auto &s = supports_[j];
      if (static_cast<int>(s.size()) != r)
        throw Error(Errc::invalid_weight,
                    "column " + std::to_string(j) + " has weight " +
                        std::to_string(s.size()) + ", expected " +
                        std::to_string(r));
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] < 0 || s[k] >= m)
          throw Error(Errc::shape, "column " + std::to_string(j) +
                                       " has row index out of range");
        if (k > 0 && s[k] <= s[k - 1])
          throw Error(Errc::shape, "column " + std::to_string(j) +
                                       " support is not strictly ascending");
      }
    }
  }

  Index m() const noexcept { return m_; }
  Index n() const noexcept { return static_cast<Index>(supports_.size()); }
  int r() const noexcept { return r_; }
  const std::vector<int> &support(Index j) const {
    return supports_[static_cast<std::size_t>(j)];
  }
  const std::vector<std::vector<int>> &supports() const noexcept {
    return supports_;
  }

  bool operator()(Index i, Index j) const {
    const auto &s = support(j);
    return std::binary_search(s.begin(), s.end(), static_cast<int>(i));
  }

  Matrix to_dense() const {
    Matrix a = Matrix::Zero(m_, n());
    for (Index j = 0; j < n(); ++j)
      for (int i : support(j))
        a(i, j) = 1.0;
    return a;
  }

  /// Pairs (i, j), i < j, of identical columns.
  std::vector<std::pair<Index, Index>> duplicate_columns() const {
    std::vector<Index> order(static_cast<std::size_t>(n()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return support(a) < support(b);
    });
    std::vector<std::pair<Index, Index>> dups;
    for (std::size_t k = 0; k < order.size();) {
      std::size_t e = k + 1;
      while (e < order.size() && support(order[e]) == support(order[k]))
        ++e;
      for (std::size_t a = k; a < e; ++a)
        for (std::size_t b = a + 1; b < e; ++b)
          dups.emplace_back(std::min(order[a], order[b]),
                            std::max(order[a], order[b]));
      k = e;
    }
    std::sort(dups.begin(), dups.end());
    return dups;
  }

  friend bool operator==(const BinaryMatrix &, const BinaryMatrix &) = default;

private:
  Index m_ = 0;
  int r_ = 0;
  std::vector<std::vector<int>> supports_;
};

struct CoherenceReport {
  double coherence = 0.0;
  double welch = 0.0;
  /// Largest k with k < 1/mu + 1; n when mu = 0.
  Index rip_order = 0;
  /// mu * (rip_order - 1).
  double rip_constant_bound = 0.0;
  std::pair<Index, Index> argmax_pair{0, 1};
};

/// sqrt((n - m) / (m (n - 1))), clamped to 0 when n <= m.
inline double welch_bound(Index m, Index n) {
  if (n <= m || n < 2)
    return 0.0;
  return std::sqrt(static_cast<double>(n - m) /
                   (static_cast<double>(m) * static_cast<double>(n - 1)));
}

namespace detail {

// Largest integer k with k < 1/mu + 1. When 1/mu + 1 lies within 1e-9 of an
// integer N (mu = t/r rational), the strict inequality gives N - 1.
inline Index rip_order_for(double mu, Index n) {
  if (mu <= 0.0)
    return n;
  const double q = 1.0 / mu + 1.0;
  const double nearest = std::round(q);
  if (std::abs(q - nearest) <= 1e-9)
    return static_cast<Index>(nearest) - 1;
  return static_cast<Index>(std::floor(q));
}

inline CoherenceReport finish_report(double mu, std::pair<Index, Index> pair,
                                     Index m, Index n) {
  CoherenceReport rep;
  rep.coherence = mu;
  rep.argmax_pair = pair;
  rep.welch = welch_bound(m, n);
  rep.rip_order = rip_order_for(mu, n);
  rep.rip_constant_bound = mu * static_cast<double>(rep.rip_order - 1);
  return rep;
}

} // namespace detail

/// mu = max_{i != j} |<a_i, a_j>| / (|a_i| |a_j|). Ties in the maximizing
/// pair resolve to the lexicographically smallest (i, j).
inline CoherenceReport coherence(const Matrix &a) {
  const Index n = a.cols();
  if (n < 2)
    throw Error(Errc::too_few_columns, "coherence needs at least two columns");
  Eigen::VectorXd norms = a.colwise().norm().transpose();
  for (Index j = 0; j < n; ++j)
    if (!(norms[j] > 0.0))
      throw Error(Errc::zero_column, "column " + std::to_string(j) + " is zero");
  Matrix u = a * norms.cwiseInverse().asDiagonal();
  Matrix g = u.transpose() * u;
  double mu = -1.0;
  std::pair<Index, Index> best{0, 1};
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double v = std::abs(g(i, j));
      if (v > mu) {
        mu = v;
        best = {i, j};
      }
    }
  }
  return detail::finish_report(std::min(mu, 1.0), best, a.rows(), n);
}

/// Exact path for binary column-regular matrices: mu = (max overlap) / r.
inline CoherenceReport coherence(const BinaryMatrix &a) {
  const Index n = a.n();
  if (n < 2)
    throw Error(Errc::too_few_columns, "coherence needs at least two columns");
  // Row-incidence lists make the overlap count O(sum of row degrees^2).
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(a.m()));
  for (Index j = 0; j < n; ++j)
    for (int i : a.support(j))
      rows[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
  std::vector<int> overlap(static_cast<std::size_t>(n));
  int best = -1;
  std::pair<Index, Index> best_pair{0, 1};
  for (Index i = 0; i + 1 < n; ++i) {
    std::fill(overlap.begin() + i + 1, overlap.end(), 0);
    for (int row : a.support(i))
      for (int j : rows[static_cast<std::size_t>(row)])
        if (j > i)
          ++overlap[static_cast<std::size_t>(j)];
    for (Index j = i + 1; j < n; ++j) {
      if (overlap[static_cast<std::size_t>(j)] > best) {
        best = overlap[static_cast<std::size_t>(j)];
        best_pair = {i, j};
      }
    }
  }
  return detail::finish_report(static_cast<double>(best) / a.r(), best_pair,
                               a.m(), n);
}

/// Maps the r largest entries of every column to 1; ties go to the lower
/// row index.
inline BinaryMatrix binarize(const Matrix &b, int r) {
  const Index m = b.rows();
  if (r < 1 || r > m)
    throw Error(Errc::invalid_weight, "binarize weight outside [1, m]");
  std::vector<std::vector<int>> supports(static_cast<std::size_t>(b.cols()));
  std::vector<int> idx(static_cast<std::size_t>(m));
  for (Index j = 0; j < b.cols(); ++j) {
    std::iota(idx.begin(), idx.end(), 0);
    const auto col = b.col(j);
    std::partial_sort(idx.begin(), idx.begin() + r, idx.end(),
                      [&](int p, int q) {
                        return col[p] > col[q] || (col[p] == col[q] && p < q);
                      });
    std::vector<int> s(idx.begin(), idx.begin() + r);
    std::sort(s.begin(), s.end());
    supports[static_cast<std::size_t>(j)] = std::move(s);
  }
  return BinaryMatrix(m, r, std::move(supports));
}

inline BinaryMatrix binarize(const RelaxedMatrix &b) {
  return binarize(b.values(), b.r());
}

struct Construction {
  BinaryMatrix matrix;
  CoherenceReport report;
  IterationTrace trace;
  RelaxedMatrix relaxed;
  std::vector<std::pair<Index, Index>> duplicates;
};

/// random_matrix -> optimize -> binarize -> coherence, all driven by
/// cfg.seed.
inline Construction construct(Index m, Index n, int r,
                              const OptimizerConfig &cfg,
                              const IterateObserver &observe = {}) {
  if (!(1 <= r && r < m && m < n))
    throw Error(Errc::validation,
                "construct needs 1 <= r < m < n, got m=" + std::to_string(m) +
                    " n=" + std::to_string(n) + " r=" + std::to_string(r));
  cfg.validate();
  OptimizeResult res = optimize(random_matrix(m, n, r, cfg.seed), cfg, observe);
  BinaryMatrix a = binarize(res.point);
  CoherenceReport rep = coherence(a);
  auto dups = a.duplicate_columns();
  if (!dups.empty())
    res.trace.warnings.push_back(
        std::to_string(dups.size()) +
        " duplicate column pair(s) after binarization; coherence is 1");
  return Construction{std::move(a), rep, std::move(res.trace),
                      std::move(res.point), std::move(dups)};
}

// Serialization. Dense: header `m n r`, then m rows of space-separated 0/1.
// Sparse: header `m n r`, then one line per column with its r row indices
// in ascending order (0-based).

inline void write_dense(std::ostream &os, const BinaryMatrix &a) {
  std::ostringstream buf;
  buf << a.m() << ' ' << a.n() << ' ' << a.r() << '\n';
  const Matrix d = a.to_dense();
  for (Index i = 0; i < a.m(); ++i) {
    for (Index j = 0; j < a.n(); ++j) {
      if (j > 0)
        buf << ' ';
      buf << (d(i, j) != 0.0 ? '1' : '0');
    }
    buf << '\n';
  }
  os << buf.str();
}

inline void write_sparse(std::ostream &os, const BinaryMatrix &a) {
  std::ostringstream buf;
  buf << a.m() << ' ' << a.n() << ' ' << a.r() << '\n';
  for (Index j = 0; j < a.n(); ++j) {
    const auto &s = a.support(j);
    for (std::size_t k = 0; k < s.size(); ++k)
      buf << (k > 0 ? " " : "") << s[k];
    buf << '\n';
  }
  os << buf.str();
}

enum class MatrixFormat { dense, sparse };

namespace detail {

[[noreturn]] inline void parse_fail(int line, const std::string &what) {
  throw Error(Errc::parse, "line " + std::to_string(line) + ": " + what);
}

inline std::vector<long long> parse_ints(const std::string &text, int line) {
  std::istringstream is(text);
  std::vector<long long> out;
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception &) {
      parse_fail(line, "expected an integer, got '" + tok + "'");
    }
    if (used != tok.size())
      parse_fail(line, "expected an integer, got '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

} // namespace detail

/// Reads either serialization. Errors carry 1-based line numbers.
inline BinaryMatrix read_matrix(std::istream &is, MatrixFormat format) {
  std::string text;
  int line = 0;
  auto next_line = [&](const char *what) {
    while (std::getline(is, text)) {
      ++line;
      if (text.find_first_not_of(" \t\r") != std::string::npos)
        return;
    }
    detail::parse_fail(line + 1, std::string("unexpected end of file, ") + what);
  };
  next_line("expected header `m n r`");
  const auto header = detail::parse_ints(text, line);
  if (header.size() != 3)
    detail::parse_fail(line, "header must be `m n r`");
  const long long m = header[0], n = header[1], r = header[2];
  if (m < 1 || n < 1 || r < 1 || r > m)
    detail::parse_fail(line, "header values out of range");
  std::vector<std::vector<int>> supports(static_cast<std::size_t>(n));
  if (format == MatrixFormat::dense) {
    for (long long i = 0; i < m; ++i) {
      next_line("expected a matrix row");
      const auto row = detail::parse_ints(text, line);
      if (static_cast<long long>(row.size()) != n)
        detail::parse_fail(line, "expected " + std::to_string(n) +
                                     " entries, got " +
                                     std::to_string(row.size()));
      for (long long j = 0; j < n; ++j) {
        if (row[j] != 0 && row[j] != 1)
          detail::parse_fail(line, "entries must be 0 or 1");
        if (row[j] == 1)
          supports[static_cast<std::size_t>(j)].push_back(static_cast<int>(i));
      }
    }
    for (long long j = 0; j < n; ++j)
      if (static_cast<long long>(supports[j].size()) != r)
        detail::parse_fail(line, "column " + std::to_string(j) + " has weight " +
                                     std::to_string(supports[j].size()) +
                                     ", expected " + std::to_string(r));
  } else {
    for (long long j = 0; j < n; ++j) {
      next_line("expected a column support line");
      const auto rows = detail::parse_ints(text, line);
      if (static_cast<long long>(rows.size()) != r)
        detail::parse_fail(line, "expected " + std::to_string(r) +
                                     " row indices");
      for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] < 0 || rows[k] >= m)
          detail::parse_fail(line, "row index out of range");
        if (k > 0 && rows[k] <= rows[k - 1])
          detail::parse_fail(line, "row indices must be strictly ascending");
        supports[static_cast<std::size_t>(j)].push_back(static_cast<int>(rows[k]));
      }
    }
  }
  while (std::getline(is, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") != std::string::npos)
      detail::parse_fail(line, "trailing content after matrix");
  }
  return BinaryMatrix(static_cast<Index>(m), static_cast<int>(r),
                      std::move(supports));
}

/// Sniffs the format from the first body line: n tokens of 0/1 means dense,
/// anything else sparse. When n == r both readings have n tokens; a strictly
/// ascending line starting at 0 is then taken as sparse.
inline BinaryMatrix read_matrix(std::istream &is) {
  std::stringstream all;
  all << is.rdbuf();
  const std::string content = all.str();
  std::istringstream probe(content);
  std::string line;
  std::vector<long long> header, first;
  int lineno = 0;
  while (std::getline(probe, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    if (header.empty()) {
      header = detail::parse_ints(line, lineno);
    } else {
      first = detail::parse_ints(line, lineno);
      break;
    }
  }
  MatrixFormat fmt = MatrixFormat::sparse;
  if (header.size() == 3 &&
      first.size() == static_cast<std::size_t>(header[1]) &&
      std::all_of(first.begin(), first.end(),
                  [](long long v) { return v == 0 || v == 1; })) {
    const bool ascending_from_zero =
        !first.empty() && first[0] == 0 &&
        std::adjacent_find(first.begin(), first.end(),
                           [](long long a, long long b) { return b != a + 1; }) ==
            first.end();
    if (header[1] != header[2] || !ascending_from_zero)
      fmt = MatrixFormat::dense;
  }
  std::istringstream body(content);
  return read_matrix(body, fmt);
}

} // namespace coherence_forge
