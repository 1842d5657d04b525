#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <span>

#include "biasprobe/error.hpp"

namespace biasprobe::stats {

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// CDF of Student's t distribution with df degrees of freedom (df > 0, real).
double student_t_cdf(double t, double df);

// Two-sided tail probability P(|T| >= |t|).
double student_t_two_sided(double t, double df);

struct TTestResult {
  double t = 0;
  double df = 0;
  double p_two_sided = 1;
  long n_a = 0;
  long n_b = 0;
};

// Welch unequal-variance t-test of mean(a) - mean(b).
//
// Requires at least two observations per sample. When both samples have zero
// variance the statistic is undefined: equal means give t = 0, p = 1 by
// convention; different means throw DomainError.
template <typename DerivedA, typename DerivedB>
TTestResult welch_t_test(const Eigen::DenseBase<DerivedA>& a, const Eigen::DenseBase<DerivedB>& b) {
  const auto xa = a.derived().template cast<double>().array();
  const auto xb = b.derived().template cast<double>().array();
  const double na = static_cast<double>(xa.size());
  const double nb = static_cast<double>(xb.size());
  if (xa.size() < 2 || xb.size() < 2)
    throw DomainError("welch_t_test needs at least two observations per sample");

  const double mean_a = xa.mean();
  const double mean_b = xb.mean();
  // A constant sample can leave a rounding residue around its mean; force 0.
  const bool const_a = (xa == xa(0)).all();
  const bool const_b = (xb == xb(0)).all();
  const double var_a = const_a ? 0.0 : (xa - mean_a).square().sum() / (na - 1);
  const double var_b = const_b ? 0.0 : (xb - mean_b).square().sum() / (nb - 1);
  const double se_a = var_a / na;
  const double se_b = var_b / nb;
  const double se2 = se_a + se_b;

  TTestResult r;
  r.n_a = static_cast<long>(xa.size());
  r.n_b = static_cast<long>(xb.size());
  if (se2 == 0.0) {
    if ((const_a ? xa(0) : mean_a) != (const_b ? xb(0) : mean_b)) throw DomainError("welch_t_test: both samples constant with different means");
    r.t = 0;
    r.df = na + nb - 2;
    r.p_two_sided = 1;
    return r;
  }
  r.t = (mean_a - mean_b) / std::sqrt(se2);
  r.df = se2 * se2 / (se_a * se_a / (na - 1) + se_b * se_b / (nb - 1));
  r.p_two_sided = student_t_two_sided(r.t, r.df);
  return r;
}

inline TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  using Vec = Eigen::Map<const Eigen::VectorXd>;
  return welch_t_test(Vec(a.data(), static_cast<Eigen::Index>(a.size())),
                      Vec(b.data(), static_cast<Eigen::Index>(b.size())));
}

// Sample Pearson correlation. Requires equal lengths >= 3 and nonzero variance.
template <typename DerivedX, typename DerivedY>
double pearson(const Eigen::DenseBase<DerivedX>& x, const Eigen::DenseBase<DerivedY>& y) {
  if (x.size() != y.size()) throw DomainError("pearson: length mismatch");
  if (x.size() < 3) throw DomainError("pearson: needs at least three pairs");
  const auto dx = (x.derived().template cast<double>().array() -
                   x.derived().template cast<double>().mean()).eval();
  const auto dy = (y.derived().template cast<double>().array() -
                   y.derived().template cast<double>().mean()).eval();
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  if (sxx == 0.0 || syy == 0.0) throw DomainError("pearson: undefined for zero variance");
  const double r = (dx * dy).sum() / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  using Vec = Eigen::Map<const Eigen::VectorXd>;
  return pearson(Vec(x.data(), static_cast<Eigen::Index>(x.size())),
                 Vec(y.data(), static_cast<Eigen::Index>(y.size())));
}

}  // namespace biasprobe::stats
