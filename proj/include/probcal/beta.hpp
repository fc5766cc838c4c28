#pragma once

namespace probcal {

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and x in
/// [0,1], evaluated with a modified-Lentz continued fraction (relative
/// accuracy about 1e-14 away from underflow).
double regularized_incomplete_beta(double a, double b, double x);

/// CDF of Beta(a, b) at x; clamps x to [0,1].
double beta_cdf(double x, double a, double b);

}  // namespace probcal
