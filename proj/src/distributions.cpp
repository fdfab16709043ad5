#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>

#include "xaifn/stats.hpp"

namespace xaifn::stats {

namespace bm = boost::math;

double normal_sf(double z) { return bm::cdf(bm::complement(bm::normal_distribution<>(), z)); }

double f_sf(double f, double d1, double d2) {
  if (!(d1 > 0 && d2 > 0)) throw Error("BAD_DF", "F distribution needs positive degrees of freedom");
  if (std::isinf(f)) return 0.0;
  if (f <= 0.0) return 1.0;
  return bm::cdf(bm::complement(bm::fisher_f_distribution<>(d1, d2), f));
}

double f_quantile(double p, double d1, double d2) {
  return bm::quantile(bm::fisher_f_distribution<>(d1, d2), p);
}

double t_two_sided(double t, double df) {
  if (!(df > 0)) throw Error("BAD_DF", "t distribution needs positive degrees of freedom");
  if (std::isinf(t)) return 0.0;
  return 2.0 * bm::cdf(bm::complement(bm::students_t_distribution<>(df), std::abs(t)));
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// P(range of k iid standard normals < w).
double range_cdf(double w, double k) {
  if (w <= 0.0) return 0.0;
  bm::normal_distribution<> n;
  auto integrand = [&](double z) {
    const double inner = bm::cdf(n, z) - bm::cdf(n, z - w);
    if (inner <= 0.0) return 0.0;
    return bm::pdf(n, z) * std::pow(inner, k - 1.0);
  };
  double err = 0.0;
  const double v = bm::quadrature::gauss_kronrod<double, 31>::integrate(integrand, -kInf, kInf, 15, 1e-12, &err);
  return std::min(1.0, k * v);
}

}  // namespace

double ptukey(double q, double k, double df) {
  if (!(k >= 2)) throw Error("BAD_DF", "studentized range needs k >= 2");
  if (!(df > 0)) throw Error("BAD_DF", "studentized range needs df > 0");
  if (q <= 0.0) return 0.0;
  if (std::isinf(q)) return 1.0;
  if (std::isinf(df) || df > 5000) return range_cdf(q, k);
  // Mix over s = sqrt(chi2_df / df), whose log density is written out for stability.
  const double log_norm = (df / 2.0) * std::log(df) - bm::lgamma(df / 2.0) - (df / 2.0 - 1.0) * std::log(2.0);
  auto integrand = [&](double s) {
    if (s <= 0.0) return 0.0;
    const double log_f = log_norm + (df - 1.0) * std::log(s) - df * s * s / 2.0;
    return std::exp(log_f) * range_cdf(q * s, k);
  };
  // The s density concentrates around 1 with spread ~ 1/sqrt(2 df).
  const double spread = 1.0 / std::sqrt(2.0 * df);
  const double hi = 1.0 + 40.0 * spread + 5.0;
  double err = 0.0;
  const double v = bm::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, hi, 15, 1e-12, &err);
  return std::clamp(v, 0.0, 1.0);
}

double qtukey(double p, double k, double df) {
  if (!(p > 0.0 && p < 1.0)) throw Error("BAD_PROBABILITY", "qtukey needs 0 < p < 1");
  double lo = 0.0;
  double hi = 1.0;
  while (ptukey(hi, k, df) < p) hi *= 2.0;
  auto f = [&](double q) { return ptukey(q, k, df) - p; };
  std::uintmax_t iters = 200;
  const auto r = bm::tools::toms748_solve(f, lo, hi, bm::tools::eps_tolerance<double>(40), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace xaifn::stats
