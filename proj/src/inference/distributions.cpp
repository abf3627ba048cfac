#include "ogmm/inference/distributions.hpp"

#include "ogmm/errors.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <cmath>

namespace ogmm::inference {

namespace {

void check_df(double df) {
  if (!(df >= 1.0) || !std::isfinite(df)) throw DomainError("chi-square degrees of freedom must be >= 1");
}

void check_prob(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("probability must lie in (0,1)");
}

}  // namespace

double chisq_cdf(double x, double df) {
  check_df(df);
  if (!(x >= 0.0)) throw DomainError("chisq_cdf: x must be non-negative");
  if (std::isinf(x)) return 1.0;
  return boost::math::cdf(boost::math::chi_squared_distribution<double>(df), x);
}

double chisq_sf(double x, double df) {
  check_df(df);
  if (!(x >= 0.0)) throw DomainError("chisq_sf: x must be non-negative");
  if (std::isinf(x)) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

double chisq_quantile(double u, double df) {
  check_df(df);
  check_prob(u);
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(df), u);
}

double normal_quantile(double u) {
  check_prob(u);
  return boost::math::quantile(boost::math::normal_distribution<double>(), u);
}

double normal_cdf(double x) { return boost::math::cdf(boost::math::normal_distribution<double>(), x); }

}  // namespace ogmm::inference
