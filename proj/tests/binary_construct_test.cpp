#include <coherence_forge/binary_construct.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace cf = coherence_forge;
using cf::Matrix;

namespace {

cf::BinaryMatrix from_supports(cf::Index m, int r,
                               std::vector<std::vector<int>> s) {
  return cf::BinaryMatrix(m, r, std::move(s));
}

} // namespace

TEST(Binarize, ClearTopTwo) {
  Matrix b(3, 1);
  b << 0.5, 0.3, 0.2;
  EXPECT_EQ(cf::binarize(b, 2).support(0), (std::vector<int>{0, 1}));
}

TEST(Binarize, TieGoesToLowerIndex) {
  Matrix b(3, 1);
  b << 0.4, 0.4, 0.2;
  EXPECT_EQ(cf::binarize(b, 1).support(0), (std::vector<int>{0}));
  Matrix c(4, 1);
  c << 0.1, 0.3, 0.3, 0.3;
  EXPECT_EQ(cf::binarize(c, 2).support(0), (std::vector<int>{1, 2}));
}

TEST(Binarize, HotColumnIsFixedPoint) {
  Matrix v = Matrix::Zero(6, 2);
  v(1, 0) = v(4, 0) = v(5, 0) = 1.0 / 3;
  v(0, 1) = v(2, 1) = v(3, 1) = 1.0 / 3;
  const auto a = cf::binarize(cf::RelaxedMatrix::from_values(v, 3));
  EXPECT_EQ(a.support(0), (std::vector<int>{1, 4, 5}));
  EXPECT_EQ(a.support(1), (std::vector<int>{0, 2, 3}));
}

TEST(Binarize, WeightAndScaleInvariance) {
  const auto b = cf::random_matrix(12, 40, 4, 9);
  const auto a = cf::binarize(b);
  Matrix scaled = b.values();
  for (cf::Index j = 0; j < scaled.cols(); ++j)
    scaled.col(j) *= 0.01 + 3.0 * j;
  const auto as = cf::binarize(scaled, 4);
  EXPECT_EQ(a, as);
  for (cf::Index j = 0; j < a.n(); ++j)
    EXPECT_EQ(a.support(j).size(), 4u);
}

TEST(BinaryMatrix, RejectsBadSupports) {
  EXPECT_THROW(from_supports(4, 2, {{0, 1}, {1}}), cf::Error);
  EXPECT_THROW(from_supports(4, 2, {{0, 4}}), cf::Error);
  EXPECT_THROW(from_supports(4, 2, {{2, 1}}), cf::Error);
}

TEST(BinaryMatrix, DuplicateColumns) {
  const auto a = from_supports(4, 2, {{0, 1}, {2, 3}, {0, 1}});
  const auto d = a.duplicate_columns();
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0], (std::pair<cf::Index, cf::Index>{0, 2}));
  EXPECT_EQ(cf::coherence(a).coherence, 1.0);
}

TEST(Coherence, IdentityIsZero) {
  const auto rep = cf::coherence(Matrix(Matrix::Identity(5, 5)));
  EXPECT_EQ(rep.coherence, 0.0);
  EXPECT_EQ(rep.welch, 0.0);
}

TEST(Coherence, UsesAbsoluteValue) {
  Matrix a(2, 2);
  a << 1, -1, 0, 1;
  EXPECT_NEAR(cf::coherence(a).coherence, std::sqrt(0.5), 1e-15);
}

TEST(Coherence, ZeroColumnRejected) {
  Matrix a = Matrix::Identity(3, 3);
  a.col(1).setZero();
  try {
    cf::coherence(a);
    FAIL();
  } catch (const cf::Error &e) {
    EXPECT_EQ(e.code(), cf::Errc::zero_column);
  }
}

TEST(Coherence, RealMatrixMatchesOracle) {
  const auto b = cf::random_matrix(7, 12, 3, 4);
  EXPECT_NEAR(cf::coherence(b.values()).coherence, oracle::coherence(b.values()),
              1e-14);
}

TEST(Coherence, BinaryPathMatchesDensePath) {
  const auto a = cf::binarize(cf::random_matrix(12, 50, 4, 7));
  const auto exact = cf::coherence(a);
  const auto dense = cf::coherence(a.to_dense());
  EXPECT_NEAR(exact.coherence, dense.coherence, 1e-14);
  EXPECT_EQ(exact.coherence, oracle::max_overlap(a) / 4.0);
  const double scaled = exact.coherence * 4.0;
  EXPECT_NEAR(scaled, std::round(scaled), 1e-9);
  EXPECT_GE(exact.coherence, exact.welch - 1e-12);
}

TEST(Coherence, ArgmaxPairAttainsMaximum) {
  const auto a = from_supports(5, 2, {{0, 1}, {2, 3}, {1, 2}, {2, 3}});
  const auto rep = cf::coherence(a);
  EXPECT_EQ(rep.coherence, 1.0);
  EXPECT_EQ(rep.argmax_pair, (std::pair<cf::Index, cf::Index>{1, 3}));
}

TEST(Welch, KnownValue) {
  EXPECT_NEAR(cf::welch_bound(25, 625), std::sqrt(600.0 / 15600.0), 1e-15);
  EXPECT_NEAR(cf::welch_bound(25, 625), 0.196116, 1e-6);
}

TEST(RipOrder, RationalCoherences) {
  // mu = t/r: 1/mu + 1 is an integer when t divides r, and the strict
  // inequality k < 1/mu + 1 excludes it.
  EXPECT_EQ(cf::detail::rip_order_for(0.6, 625), 2);   // 1/mu + 1 = 2.67
  EXPECT_EQ(cf::detail::rip_order_for(0.5, 625), 2);   // = 3
  EXPECT_EQ(cf::detail::rip_order_for(0.2, 625), 5);   // = 6
  EXPECT_EQ(cf::detail::rip_order_for(1.0, 625), 1);   // = 2
  EXPECT_EQ(cf::detail::rip_order_for(0.4, 625), 3);   // = 3.5
  EXPECT_EQ(cf::detail::rip_order_for(0.0, 625), 625);
  for (int r = 1; r <= 8; ++r)
    for (int t = 1; t <= r; ++t) {
      const cf::Index k = cf::detail::rip_order_for(static_cast<double>(t) / r, 1000);
      // k < r/t + 1 <= k + 1, in exact integer arithmetic.
      EXPECT_LT(k * t, r + t);
      EXPECT_GE((k + 1) * t, r + t);
    }
}

TEST(Construct, DeterministicAndRegular) {
  cf::OptimizerConfig cfg;
  cfg.seed = 1;
  cfg.max_iters = 400;
  const auto a = cf::construct(9, 20, 3, cfg);
  const auto b = cf::construct(9, 20, 3, cfg);
  EXPECT_EQ(a.matrix, b.matrix);
  for (cf::Index j = 0; j < a.matrix.n(); ++j)
    EXPECT_EQ(a.matrix.support(j).size(), 3u);
  EXPECT_GE(a.report.coherence, a.report.welch - 1e-12);
  EXPECT_EQ(a.report.coherence, cf::coherence(a.matrix).coherence);
}

TEST(Construct, RejectsBadShape) {
  cf::OptimizerConfig cfg;
  EXPECT_THROW(cf::construct(9, 20, 9, cfg), cf::Error);
  EXPECT_THROW(cf::construct(9, 8, 3, cfg), cf::Error);
}

TEST(Serialization, RoundTrip) {
  const auto a = cf::binarize(cf::random_matrix(8, 15, 3, 2));
  std::stringstream dense, sparse;
  cf::write_dense(dense, a);
  cf::write_sparse(sparse, a);
  std::stringstream d2(dense.str()), s2(sparse.str());
  EXPECT_EQ(cf::read_matrix(d2, cf::MatrixFormat::dense), a);
  EXPECT_EQ(cf::read_matrix(s2, cf::MatrixFormat::sparse), a);
  std::stringstream d3(dense.str()), s3(sparse.str());
  EXPECT_EQ(cf::read_matrix(d3), a);
  EXPECT_EQ(cf::read_matrix(s3), a);
}

TEST(Serialization, Formats) {
  const auto a = from_supports(3, 2, {{0, 2}, {1, 2}});
  std::ostringstream dense, sparse;
  cf::write_dense(dense, a);
  cf::write_sparse(sparse, a);
  EXPECT_EQ(dense.str(), "3 2 2\n1 0\n0 1\n1 1\n");
  EXPECT_EQ(sparse.str(), "3 2 2\n0 2\n1 2\n");
}

TEST(Serialization, SniffWhenWidthEqualsWeight) {
  // n == r == 2: the first body line has two tokens in both formats.
  const auto a = from_supports(3, 2, {{0, 1}, {1, 2}});
  std::ostringstream dense, sparse;
  cf::write_dense(dense, a);
  cf::write_sparse(sparse, a);
  std::istringstream d(dense.str()), s(sparse.str());
  EXPECT_EQ(cf::read_matrix(d), a);
  EXPECT_EQ(cf::read_matrix(s), a);
}

TEST(Serialization, ErrorsCarryLineNumbers) {
  auto code_and_message = [](const std::string &text, cf::MatrixFormat f) {
    std::istringstream is(text);
    try {
      cf::read_matrix(is, f);
    } catch (const cf::Error &e) {
      return std::pair<cf::Errc, std::string>{e.code(), e.what()};
    }
    return std::pair<cf::Errc, std::string>{cf::Errc::validation, "no error"};
  };
  auto [c1, m1] = code_and_message("3 2 2\n0 2\n1 x\n", cf::MatrixFormat::sparse);
  EXPECT_EQ(c1, cf::Errc::parse);
  EXPECT_NE(m1.find("line 3"), std::string::npos) << m1;
  auto [c2, m2] = code_and_message("3 2 2\n1 0\n0 1 1\n1 1\n", cf::MatrixFormat::dense);
  EXPECT_NE(m2.find("line 3"), std::string::npos) << m2;
  auto [c3, m3] = code_and_message("3 2 2\n0 2\n", cf::MatrixFormat::sparse);
  EXPECT_NE(m3.find("line 3"), std::string::npos) << m3;
  auto [c4, m4] = code_and_message("3 2\n", cf::MatrixFormat::sparse);
  EXPECT_NE(m4.find("line 1"), std::string::npos) << m4;
  auto [c5, m5] = code_and_message("3 2 2\n2 0\n0 1\n", cf::MatrixFormat::sparse);
  EXPECT_NE(m5.find("line 2"), std::string::npos) << m5;
}
