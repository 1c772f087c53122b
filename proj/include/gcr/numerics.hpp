#pragma once

#include <Eigen/Dense>
#include <span>

namespace gcr {

// Symmetric positive definite matrix tracked through its inverse and log
// determinant. The matrix itself is never stored; consumers only ever need
// quadratic forms and determinants, and those stay cheap under rank-1 edits.
struct PsdState {
  Eigen::MatrixXd inverse;
  double logdet = 0.0;
  int updates_since_sym = 0;

  int dim() const { return static_cast<int>(inverse.rows()); }
};

// Factorizes a symmetric positive definite matrix (Cholesky) and returns its
// tracked state. Throws NotPositiveDefinite when the factorization fails or
// any pivot falls below 1e-12.
PsdState build_psd(const Eigen::MatrixXd& a);

// Applies A <- A + c * v * v^T in place via Sherman-Morrison. c may be
// negative; if the implied denominator 1 + c * v^T A^{-1} v drops below
// 1e-12 the state is left untouched and DowndateSingular is thrown.
void rank1_update(PsdState& s, const Eigen::VectorXd& v, double c);

// x^T A^{-1} x, clamped to be nonnegative.
double quad_form(const PsdState& s, const Eigen::VectorXd& x);

struct DowndateStats {
  double logdet = 0.0;
  double quad = 0.0;
};

// Given q = x^T A^{-1} x and logdet(A), returns logdet and quadratic form of
// B = A - alpha * x * x^T at the same x, without touching the matrix:
//   logdet(B) = logdet(A) + log(1 - alpha * q)
//   x^T B^{-1} x = q / (1 - alpha * q)
// Throws DowndateSingular when 1 - alpha * q <= 1e-12.
DowndateStats self_downdate_stats(double q, double logdet_a, double alpha);

// log(sum(exp(values))) with max shift; returns the element itself for a
// singleton. Throws EmptyInput on an empty span.
double log_sum_exp(std::span<const double> values);

// log Gamma(x) for x > 0. Throws DomainError otherwise.
double log_gamma(double x);

}  // namespace gcr
