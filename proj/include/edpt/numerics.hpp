#pragma once

#include <functional>
#include <utility>

#include "edpt/rng.hpp"

namespace edpt {

// log Gamma(x) for x > 0.
double log_gamma(double x);

// log of the binomial coefficient C(n, k).
double log_choose(double n, double k);

// Standard normal CDF / quantile. Quantile requires p in (0, 1); the
// round trip |normal_cdf(normal_quantile(p)) - p| stays below 1e-12.
double normal_cdf(double z);
double normal_quantile(double p);

// One standard normal draw by inversion (one 64-bit uniform per draw).
double draw_normal(RngStream& stream);

double expit(double x);
double logit(double p);

// Regularized incomplete gamma P(a, x) and Q(a, x) = 1 - P(a, x), a > 0.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Central chi-square CDF with k degrees of freedom.
double chisq_cdf(double t, double k);
double chisq_quantile(double p, double k);

// Beta(a, b) CDF.
double beta_cdf(double x, double a, double b);

// Noncentral chi-square CDF, evaluated as a Poisson-weighted mixture of
// central chi-square CDFs; the series is truncated when the remaining
// Poisson tail weight drops below 1e-14.
double noncentral_chisq_cdf(double t, int k, double lambda);
// Solves CDF(q) = p by bracket doubling + bisection (argument tolerance
// 1e-9 relative).
double noncentral_chisq_quantile(double p, int k, double lambda);
// Monte Carlo cross-check of the series path: mean of
// I[sum_j (Z_j + delta_j)^2 <= t] with sum_j delta_j^2 = lambda.
// Returns (estimate, standard error).
std::pair<double, double> noncentral_chisq_cdf_mc(double t, int k,
                                                  double lambda, long n_draws,
                                                  RngStream& stream);

// log pmf of the hypergeometric distribution: k successes in n1 draws
// without replacement from a population of N with K successes.
double hypergeom_log_pmf(long k, long n1, long N, long K);

// Adaptive Simpson quadrature on [a, b] to absolute tolerance tol.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-11);

}  // namespace edpt
