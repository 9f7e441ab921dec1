#pragma once

// Reference binary matrices: DeVore's polynomial construction over a prime
// field, and random column-regular matrices.

#include <coherence_forge/binary_construct.hpp>
#include <coherence_forge/error.hpp>
#include <coherence_forge/random.hpp>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace coherence_forge {

struct DeVoreParams {
  int p = 2;      // prime modulus
  int degree = 1; // polynomial degree bound
};

inline bool is_prime(int p) {
  if (p < 2)
    return false;
  for (int d = 2; d * d <= p; ++d)
    if (p % d == 0)
      return false;
  return true;
}

/// p^2 x p^(degree+1) matrix. Row x*p + y is the point (x, y) of F_p x F_p;
/// column c is the polynomial whose coefficients (c_degree, ..., c_0) are the
/// base-p digits of c. Entry ((x, y), P) is 1 iff P(x) = y (mod p).
inline BinaryMatrix devore_matrix(const DeVoreParams &params) {
  const int p = params.p;
  const int d = params.degree;
  if (!is_prime(p))
    throw Error(Errc::invalid_field, std::to_string(p) + " is not prime");
  if (d < 1)
    throw Error(Errc::validation, "polynomial degree must be >= 1");
  if (d >= p)
    throw Error(Errc::degree_too_large, "degree " + std::to_string(d) +
                                            " must be smaller than p=" +
                                            std::to_string(p));
  long long n = 1;
  for (int k = 0; k <= d; ++k) {
    n *= p;
    if (n > (1LL << 26))
      throw Error(Errc::validation, "DeVore matrix too large");
  }
  std::vector<std::vector<int>> supports(static_cast<std::size_t>(n));
  std::vector<int> coeffs(static_cast<std::size_t>(d) + 1); // coeffs[k] = c_k
  for (long long col = 0; col < n; ++col) {
    long long rest = col;
    for (int k = 0; k <= d; ++k) {
      coeffs[static_cast<std::size_t>(k)] = static_cast<int>(rest % p);
      rest /= p;
    }
    auto &s = supports[static_cast<std::size_t>(col)];
    s.reserve(static_cast<std::size_t>(p));
    for (int x = 0; x < p; ++x) {
      int y = 0; // Horner
      for (int k = d; k >= 0; --k)
        y = (y * x + coeffs[static_cast<std::size_t>(k)]) % p;
      s.push_back(x * p + y);
    }
  }
  return BinaryMatrix(static_cast<Index>(p) * p, p, std::move(supports));
}

/// Column j carries a uniform random r-subset of rows drawn from the
/// sub-stream derive_seed(seed, j + 1). Columns may repeat.
inline BinaryMatrix random_binary_matrix(Index m, Index n, int r,
                                         std::uint64_t seed) {
  if (r < 1 || r > m)
    throw Error(Errc::invalid_weight, "random binary matrix needs 1 <= r <= m");
  std::vector<std::vector<int>> supports(static_cast<std::size_t>(n));
  std::vector<int> rows(static_cast<std::size_t>(m));
  for (Index j = 0; j < n; ++j) {
    Engine engine = make_engine(derive_seed(seed, static_cast<std::uint64_t>(j) + 1));
    std::iota(rows.begin(), rows.end(), 0);
    // Partial Fisher-Yates: the first r slots end up a uniform r-subset.
    for (int k = 0; k < r; ++k) {
      std::uniform_int_distribution<Index> pick(k, m - 1);
      std::swap(rows[static_cast<std::size_t>(k)],
                rows[static_cast<std::size_t>(pick(engine))]);
    }
    std::vector<int> s(rows.begin(), rows.begin() + r);
    std::sort(s.begin(), s.end());
    supports[static_cast<std::size_t>(j)] = std::move(s);
  }
  return BinaryMatrix(m, r, std::move(supports));
}

} // namespace coherence_forge
