#pragma once

namespace ogmm::inference {

/// Lower tail of the chi-square distribution. DomainError for x < 0 or
/// df < 1.
double chisq_cdf(double x, double df);
/// Upper tail 1 - chisq_cdf, computed without cancellation.
double chisq_sf(double x, double df);
/// u-quantile of the chi-square distribution, u in (0,1).
double chisq_quantile(double u, double df);
/// u-quantile of the standard normal distribution, u in (0,1).
double normal_quantile(double u);
double normal_cdf(double x);

}  // namespace ogmm::inference
