#pragma once

// Geometry of ES_m = {x in R^m : sum(x) = 1, |x|^2 = 1/r}, the slice of the
// probability simplex by the sphere of squared radius 1/r, and of its n-fold
// product. A column of the product is the relaxation of a weight-r binary
// column divided by r.

#include <coherence_forge/error.hpp>
#include <coherence_forge/random.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

namespace coherence_forge {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class RelaxedColumn;
class RelaxedMatrix;
class TangentVector;
class TangentMatrix;

namespace tolerance {
inline constexpr double column_sum = 1e-12;
inline constexpr double column_norm = 1e-10;
inline constexpr double negative_entry = -1e-9;
inline constexpr double tangency = 1e-12;
} // namespace tolerance

namespace detail {

inline void check_weight(Index m, int r) {
  if (r < 1)
    throw Error(Errc::invalid_weight, "column weight must be >= 1, got " +
                                          std::to_string(r));
  if (r >= m)
    throw Error(Errc::invalid_weight,
                "column weight r=" + std::to_string(r) +
                    " must be smaller than column length m=" +
                    std::to_string(m));
}

template <class Derived>
bool on_slice(const Eigen::MatrixBase<Derived> &x, int r) {
  return std::abs(x.sum() - 1.0) <= tolerance::column_sum &&
         std::abs(x.squaredNorm() - 1.0 / r) <= tolerance::column_norm;
}

// Removes the components of g along the normal space span{1, x} at x. The
// normal basis is orthonormalized as u1 = 1/sqrt(m), u2 = (x - c)/|x - c| with
// c the simplex centroid. The projection is applied twice, which brings
// the residual normal component down to rounding level.
template <class XDerived, class GDerived>
Vector project_column(const Eigen::MatrixBase<XDerived> &x,
                      const Eigen::MatrixBase<GDerived> &g) {
  const Index m = x.size();
  const double inv_m = 1.0 / static_cast<double>(m);
  Vector u2 = x.array() - x.sum() * inv_m;
  const double u2_norm = u2.norm();
  if (!(u2_norm > 1e-12))
    throw Error(Errc::degenerate_point,
                "point coincides with the simplex centroid; the tangent space "
                "is undefined (r = m)");
  u2 /= u2_norm;
  Vector out = g;
  for (int pass = 0; pass < 2; ++pass) {
    out.array() -= out.sum() * inv_m;
    out -= out.dot(u2) * u2;
  }
  return out;
}

// Rescales y about the centroid c so that |c + t (y - c)|^2 = 1/r, picking
// the positive root of the quadratic in t. Returns false when no positive
// real root exists.
template <class YDerived>
bool rescale_about_centroid(const Eigen::MatrixBase<YDerived> &y, int r,
                            Vector &out) {
  const Index m = y.size();
  const double inv_m = 1.0 / static_cast<double>(m);
  Vector d = y.array() - inv_m;
  // Remove rounding drift off the hyperplane sum = 1 so that it cannot
  // accumulate across iterations.
  d.array() -= d.mean();
  const double dd = d.squaredNorm();
  const double cd = d.sum() * inv_m;
  const double rhs = 1.0 / r - inv_m;
  // t^2 dd + 2 t cd - rhs = 0
  const double disc = cd * cd + dd * rhs;
  if (!(dd > 0.0) || !(disc >= 0.0) || !std::isfinite(disc))
    return false;
  const double t = (-cd + std::sqrt(disc)) / dd;
  if (!(t > 0.0) || !std::isfinite(t))
    return false;
  out = (inv_m + t * d.array()).matrix();
  return true;
}

inline constexpr int max_retraction_halvings = 60;

template <class XDerived, class XiDerived>
Vector retract_column(const Eigen::MatrixBase<XDerived> &x,
                      const Eigen::MatrixBase<XiDerived> &xi, int r) {
  if (xi.isZero(0.0))
    return x;
  Vector out(x.size());
  Vector step = xi;
  for (int halving = 0; halving <= max_retraction_halvings; ++halving) {
    if (rescale_about_centroid(x + step, r, out) && out.allFinite())
      return out;
    step *= 0.5;
  }
  throw Error(Errc::retraction_failure,
              "centroid rescaling has no solution after " +
                  std::to_string(max_retraction_halvings) + " halvings");
}

// Uniform draw from the (m-2)-sphere c + rho * S, S the unit sphere of the
// hyperplane orthogonal to the all-ones vector.
inline Vector sample_slice(Index m, int r, std::uint64_t seed) {
  check_weight(m, r);
  Engine engine = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double inv_m = 1.0 / static_cast<double>(m);
  const double radius = std::sqrt(1.0 / r - inv_m);
  Vector u(m);
  double u_norm = 0.0;
  do {
    for (Index i = 0; i < m; ++i)
      u[i] = normal(engine);
    u.array() -= u.mean();
    u_norm = u.norm();
  } while (u_norm < 1e-8);
  return (inv_m + (radius / u_norm) * u.array()).matrix();
}

} // namespace detail

/// A point of ES_m.
class RelaxedColumn {
public:
  /// Validates sum = 1 and |x|^2 = 1/r. Slightly negative entries are
  /// admitted; see `min_entry()`.
  static RelaxedColumn from_values(Vector values, int r) {
    detail::check_weight(values.size(), r);
    if (!detail::on_slice(values, r))
      throw Error(Errc::validation,
                  "vector is not on ES_m: sum=" + std::to_string(values.sum()) +
                      " squared norm=" + std::to_string(values.squaredNorm()));
    return RelaxedColumn(std::move(values), r);
  }

  const Vector &values() const noexcept { return values_; }
  Index m() const noexcept { return values_.size(); }
  int r() const noexcept { return r_; }
  double min_entry() const { return values_.minCoeff(); }

private:
  RelaxedColumn(Vector values, int r) : values_(std::move(values)), r_(r) {}

  friend RelaxedColumn retract(const RelaxedColumn &,
                               const TangentVector &);
  friend RelaxedColumn random_point(Index, int, std::uint64_t);
  friend class RelaxedMatrix;

  Vector values_;
  int r_;
};

/// A vector tangent to ES_m at `base`: orthogonal to 1 and to base.values().
class TangentVector {
public:
  const Vector &values() const noexcept { return values_; }
  const RelaxedColumn &base() const noexcept { return base_; }

  /// Admits a precomputed tangent vector after checking both orthogonality
  /// conditions.
  static TangentVector from_values(const RelaxedColumn &base, Vector values) {
    if (values.size() != base.m())
      throw Error(Errc::shape, "tangent vector length differs from base");
    if (std::abs(values.sum()) > tolerance::tangency ||
        std::abs(values.dot(base.values())) > tolerance::tangency)
      throw Error(Errc::validation, "vector is not tangent at base");
    return TangentVector(base, std::move(values));
  }

private:
  TangentVector(RelaxedColumn base, Vector values)
      : values_(std::move(values)), base_(std::move(base)) {}

  friend TangentVector project_to_tangent(const RelaxedColumn &,
                                          const Vector &);
  friend class TangentMatrix;

  Vector values_;
  RelaxedColumn base_;
};

/// Orthogonal projection of an ambient vector onto the tangent space at x.
inline TangentVector project_to_tangent(const RelaxedColumn &x,
                                        const Vector &g) {
  if (g.size() != x.m())
    throw Error(Errc::shape, "ambient vector length differs from point");
  return TangentVector(x, detail::project_column(x.values(), g));
}

/// Step along xi, then pull back onto the sphere slice by rescaling about
/// the simplex centroid. Identity at xi = 0; agrees with x + xi to first
/// order.
inline RelaxedColumn retract(const RelaxedColumn &x, const TangentVector &xi) {
  if (xi.values().size() != x.m())
    throw Error(Errc::shape, "tangent vector length differs from point");
  return RelaxedColumn(detail::retract_column(x.values(), xi.values(), x.r()),
                       x.r());
}

inline RelaxedColumn random_point(Index m, int r, std::uint64_t seed) {
  return RelaxedColumn(detail::sample_slice(m, r, seed), r);
}

/// A point of the product manifold ES_m^n, stored as an m x n matrix.
class RelaxedMatrix {
public:
  static RelaxedMatrix from_values(Matrix values, int r) {
    detail::check_weight(values.rows(), r);
    for (Index j = 0; j < values.cols(); ++j)
      if (!detail::on_slice(values.col(j), r))
        throw Error(Errc::validation,
                    "column " + std::to_string(j) + " is not on ES_m");
    return RelaxedMatrix(std::move(values), r);
  }

  static RelaxedMatrix from_columns(const std::vector<RelaxedColumn> &cols) {
    if (cols.empty())
      throw Error(Errc::empty_input, "no columns");
    Matrix values(cols.front().m(), static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (cols[j].m() != cols.front().m() || cols[j].r() != cols.front().r())
        throw Error(Errc::shape, "columns disagree on m or r");
      values.col(static_cast<Index>(j)) = cols[j].values();
    }
    return RelaxedMatrix(std::move(values), cols.front().r());
  }

  const Matrix &values() const noexcept { return values_; }
  Index m() const noexcept { return values_.rows(); }
  Index n() const noexcept { return values_.cols(); }
  int r() const noexcept { return r_; }

  RelaxedColumn column(Index j) const {
    return RelaxedColumn(values_.col(j), r_);
  }

private:
  RelaxedMatrix(Matrix values, int r) : values_(std::move(values)), r_(r) {}

  friend RelaxedMatrix retract(const RelaxedMatrix &, const TangentMatrix &,
                               double);
  friend RelaxedMatrix random_matrix(Index, Index, int, std::uint64_t);

  Matrix values_;
  int r_;
};

/// Column j is tangent at column j of the base point it was built for.
class TangentMatrix {
public:
  TangentMatrix() = default;
  explicit TangentMatrix(Matrix values) : values_(std::move(values)) {}

  const Matrix &values() const noexcept { return values_; }
  Index cols() const noexcept { return values_.cols(); }

  /// Product-manifold (Frobenius) norm.
  double norm() const { return values_.norm(); }
  double squared_norm() const { return values_.squaredNorm(); }

  TangentVector column(const RelaxedMatrix &base, Index j) const {
    return TangentVector(base.column(j), values_.col(j));
  }

  TangentMatrix operator-() const { return TangentMatrix(-values_); }

private:
  Matrix values_;
};

inline TangentMatrix project_to_tangent(const RelaxedMatrix &x,
                                        const Matrix &g) {
  if (g.rows() != x.m() || g.cols() != x.n())
    throw Error(Errc::shape, "ambient matrix shape differs from point");
  Matrix out(g.rows(), g.cols());
  for (Index j = 0; j < g.cols(); ++j)
    out.col(j) = detail::project_column(x.values().col(j), g.col(j));
  return TangentMatrix(std::move(out));
}

/// Column-wise retraction of x along step * xi.
inline RelaxedMatrix retract(const RelaxedMatrix &x, const TangentMatrix &xi,
                             double step = 1.0) {
  if (xi.values().rows() != x.m() || xi.values().cols() != x.n())
    throw Error(Errc::shape, "tangent matrix shape differs from point");
  Matrix out(x.m(), x.n());
  for (Index j = 0; j < x.n(); ++j)
    out.col(j) = detail::retract_column(x.values().col(j),
                                        step * xi.values().col(j), x.r());
  return RelaxedMatrix(std::move(out), x.r());
}

/// Column j is drawn from the sub-stream derive_seed(seed, j + 1).
inline RelaxedMatrix random_matrix(Index m, Index n, int r,
                                   std::uint64_t seed) {
  detail::check_weight(m, r);
  if (n < 1)
    throw Error(Errc::empty_input, "matrix needs at least one column");
  Matrix out(m, n);
  for (Index j = 0; j < n; ++j)
    out.col(j) =
        detail::sample_slice(m, r, derive_seed(seed, static_cast<std::uint64_t>(j) + 1));
  return RelaxedMatrix(std::move(out), r);
}

/// Largest per-column violation of the sum and norm constraints, and the
/// squared Frobenius norm.
struct ManifoldResidual {
  double max_sum_error = 0.0;
  double max_norm_error = 0.0;
  double frobenius_error = 0.0;
  double min_entry = 0.0;
};

inline ManifoldResidual manifold_residual(const RelaxedMatrix &b) {
  ManifoldResidual res;
  const Matrix &v = b.values();
  res.max_sum_error = (v.colwise().sum().array() - 1.0).abs().maxCoeff();
  res.max_norm_error =
      (v.colwise().squaredNorm().array() - 1.0 / b.r()).abs().maxCoeff();
  res.frobenius_error =
      std::abs(v.squaredNorm() - static_cast<double>(b.n()) / b.r());
  res.min_entry = v.minCoeff();
  return res;
}

} // namespace coherence_forge
