#include "gcr/numerics.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "gcr/errors.hpp"

namespace gcr {

namespace {
constexpr double kPivotTol = 1e-12;
constexpr int kResymInterval = 64;
}  // namespace

PsdState build_psd(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw NotPositiveDefinite("build_psd: matrix must be square and nonempty");
  if (!a.isApprox(a.transpose(), 1e-9))
    throw NotPositiveDefinite("build_psd: matrix is not symmetric");

  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("build_psd: Cholesky factorization failed");

  const auto& l = llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    const double piv = l(i, i);
    if (!(piv * piv > kPivotTol))
      throw NotPositiveDefinite("build_psd: pivot below tolerance");
    logdet += 2.0 * std::log(piv);
  }

  PsdState s;
  s.inverse = llt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  s.inverse = 0.5 * (s.inverse + s.inverse.transpose()).eval();
  s.logdet = logdet;
  return s;
}

void rank1_update(PsdState& s, const Eigen::VectorXd& v, double c) {
  if (v.size() != s.inverse.rows())
    throw LengthMismatch("rank1_update: vector/matrix size mismatch");

  const Eigen::VectorXd u = s.inverse * v;
  const double t = 1.0 + c * v.dot(u);
  if (t <= kPivotTol)
    throw DowndateSingular("rank1_update: denominator below tolerance");

  s.inverse.noalias() -= (c / t) * (u * u.transpose());
  s.logdet += std::log(t);

  if (++s.updates_since_sym >= kResymInterval) {
    s.inverse = 0.5 * (s.inverse + s.inverse.transpose()).eval();
    s.updates_since_sym = 0;
  }
}

double quad_form(const PsdState& s, const Eigen::VectorXd& x) {
  if (x.size() != s.inverse.rows())
    throw LengthMismatch("quad_form: vector/matrix size mismatch");
  const double q = x.dot(s.inverse * x);
  return q < 0.0 ? 0.0 : q;
}

DowndateStats self_downdate_stats(double q, double logdet_a, double alpha) {
  const double t = 1.0 - alpha * q;
  if (t <= kPivotTol)
    throw DowndateSingular("self_downdate_stats: denominator below tolerance");
  return {logdet_a + std::log(t), q / t};
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw EmptyInput("log_sum_exp: empty input");
  if (values.size() == 1) return values[0];
  double top = values[0];
  for (double v : values)
    if (v > top) top = v;
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma: requires x > 0");
  return std::lgamma(x);
}

}  // namespace gcr
