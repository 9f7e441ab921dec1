#pragma once

// Smooth-max coherence objective
//
//   f(B) = sum_{i != j} r^2 g_ij exp(a r^2 g_ij) / sum_{i != j} exp(a r^2 g_ij)
//
// with g_ij = <b_i, b_j>. All exponentials are shifted by the largest
// exponent before evaluation; the quotient is invariant under that shift.

#include <coherence_forge/error.hpp>
#include <coherence_forge/manifold.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

namespace coherence_forge {

struct ObjectiveParams {
  double alpha = 1.0; // smooth-max sharpness
  int r = 1;          // column weight
};

/// Symmetric n x n matrix of pairwise column inner products; the diagonal is
/// carried along but never enters the objective.
struct GramOffDiagonal {
  Matrix gamma;
};

namespace detail {

inline void check_alpha(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw Error(Errc::validation,
                "smooth-max sharpness must be finite and >= 0, got " +
                    std::to_string(alpha));
}

// Softmax statistics over the strict upper triangle of a symmetric matrix
// of values v_ij = r^2 g_ij. Each unordered pair stands for the two ordered
// pairs (i, j), (j, i); both numerator and denominator double, so the
// quotient equals the ordered-pair formula.
struct PairSoftmax {
  double shift = 0.0;       // max_{i<j} alpha v_ij
  double denominator = 0.0; // sum_{i<j} exp(alpha v_ij - shift)
  double value = 0.0;       // softmax-weighted mean of v_ij
};

// Shifted exponents are clamped below at this value. exp(-600) ~ 1e-261, so
// the clamp moves the denominator (which is >= 1) and the numerator by far
// less than one ulp, while keeping every weight and every product v_ij * s_ij
// out of the subnormal range, where exp and multiplication are several times
// slower.
inline constexpr double min_shifted_exponent = -600.0;

// When `weights` is non-null it receives the unnormalized weights
// exp(alpha v_ij - shift) in its strict upper triangle.
inline PairSoftmax pair_softmax(const Matrix &v, double alpha,
                                Matrix *weights = nullptr) {
  const Index n = v.cols();
  PairSoftmax out;
  double max_v = -std::numeric_limits<double>::infinity();
  for (Index j = 1; j < n; ++j)
    max_v = std::max(max_v, v.col(j).head(j).maxCoeff());
  out.shift = alpha * max_v;
  double num = 0.0;
  double den = 0.0;
  Eigen::ArrayXd s(n);
  for (Index j = 1; j < n; ++j) {
    const auto vj = v.col(j).head(j).array();
    s.head(j) = (alpha * vj - out.shift).max(min_shifted_exponent).exp();
    if (weights != nullptr)
      weights->col(j).head(j) = s.head(j).matrix();
    num += (vj * s.head(j)).sum();
    den += s.head(j).sum();
  }
  out.denominator = den;
  out.value = num / den;
  return out;
}

inline void check_pairs(Index n) {
  if (n < 2)
    throw Error(Errc::too_few_columns,
                "objective needs at least two columns, got " +
                    std::to_string(n));
}

} // namespace detail

/// Scratch buffers reused across evaluations of the same problem size. Only
/// the upper triangles are ever written or read.
struct ObjectiveWorkspace {
  Matrix pair_values; // r^2 g_ij
  Matrix coeffs;
};

namespace detail {

inline void fill_pair_values(const Matrix &b, double r2, Matrix &v) {
  const Index n = b.cols();
  if (v.rows() != n || v.cols() != n)
    v.resize(n, n);
  v.setZero();
  v.selfadjointView<Eigen::Upper>().rankUpdate(b.transpose(), r2);
}

// Objective on an arbitrary (not necessarily feasible) matrix; used by the
// optimizer and by finite-difference checks.
inline double objective_value(const Matrix &b, const ObjectiveParams &p,
                              ObjectiveWorkspace *ws = nullptr) {
  check_pairs(b.cols());
  check_alpha(p.alpha);
  ObjectiveWorkspace local;
  ObjectiveWorkspace &w = ws != nullptr ? *ws : local;
  fill_pair_values(b, static_cast<double>(p.r) * p.r, w.pair_values);
  return pair_softmax(w.pair_values, p.alpha).value;
}

// Closed-form Euclidean gradient. With w_ij the softmax weights over ordered
// pairs and f the objective value,
//   df/db_l = sum_{j != l} 2 w_lj r^2 (1 + alpha (r^2 g_lj - f)) b_j.
inline Matrix objective_gradient(const Matrix &b, const ObjectiveParams &p,
                                 double *value = nullptr,
                                 ObjectiveWorkspace *ws = nullptr) {
  check_pairs(b.cols());
  check_alpha(p.alpha);
  const Index n = b.cols();
  const double r2 = static_cast<double>(p.r) * p.r;
  ObjectiveWorkspace local;
  ObjectiveWorkspace &w = ws != nullptr ? *ws : local;
  fill_pair_values(b, r2, w.pair_values);
  const Matrix &v = w.pair_values;
  Matrix &c = w.coeffs;
  if (c.rows() != n || c.cols() != n)
    c.resize(n, n);
  const PairSoftmax sm = pair_softmax(v, p.alpha, &c);
  const double f = sm.value;
  // Ordered-pair weights are s_ij / (2 * den) since den sums unordered pairs.
  const double scale = 2.0 * r2 / (2.0 * sm.denominator);
  for (Index j = 0; j < n; ++j) {
    c.col(j).head(j).array() *=
        scale * (1.0 + p.alpha * (v.col(j).head(j).array() - f));
    c(j, j) = 0.0;
  }
  if (value != nullptr)
    *value = f;
  return b * c.selfadjointView<Eigen::Upper>();
}

} // namespace detail

/// Softmax-weighted mean sum x_i e^{alpha x_i} / sum e^{alpha x_i}. Lies
/// between mean(x) and max(x); alpha = 0 gives the arithmetic mean.
inline double smooth_max(std::span<const double> x, double alpha) {
  if (x.empty())
    throw Error(Errc::empty_input, "smooth_max of an empty vector");
  detail::check_alpha(alpha);
  const double max_x = *std::max_element(x.begin(), x.end());
  const double shift = alpha * max_x;
  double num = 0.0;
  double den = 0.0;
  for (double xi : x) {
    const double s = std::exp(alpha * xi - shift);
    num += xi * s;
    den += s;
  }
  return num / den;
}

inline GramOffDiagonal gram_offdiag(const RelaxedMatrix &b) {
  Matrix g = b.values().transpose() * b.values();
  // Symmetrize explicitly; the product is symmetric only up to rounding.
  g = 0.5 * (g + g.transpose()).eval();
  return GramOffDiagonal{std::move(g)};
}

inline double objective(const RelaxedMatrix &b, const ObjectiveParams &p,
                        ObjectiveWorkspace *ws = nullptr) {
  return detail::objective_value(b.values(), p, ws);
}

/// m x n matrix whose column l is df/db_l.
inline Matrix euclidean_gradient(const RelaxedMatrix &b,
                                 const ObjectiveParams &p) {
  return detail::objective_gradient(b.values(), p);
}

inline TangentMatrix riemannian_gradient(const RelaxedMatrix &b,
                                         const ObjectiveParams &p,
                                         double *value = nullptr,
                                         ObjectiveWorkspace *ws = nullptr) {
  return project_to_tangent(
      b, detail::objective_gradient(b.values(), p, value, ws));
}

} // namespace coherence_forge
