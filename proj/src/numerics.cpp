#include "edpt/numerics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "edpt/errors.hpp"

namespace edpt {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kSqrt2Pi = 2.5066282746310005024;

}  // namespace

double log_gamma(double x) {
  if (!(x > 0)) {
    throw NumericalError("log_gamma requires a positive argument, got " +
                         std::to_string(x));
  }
  return std::lgamma(x);
}

double log_choose(double n, double k) {
  return log_gamma(n + 1) - log_gamma(k + 1) - log_gamma(n - k + 1);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw NumericalError("normal_quantile requires p in (0,1), got " +
                         std::to_string(p));
  }
  // Acklam's rational approximation, then one Halley refinement step.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - plow) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  double e = normal_cdf(x) - p;
  double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
  x = x - u / (1 + 0.5 * x * u);
  return x;
}

double draw_normal(RngStream& stream) {
  return normal_quantile(stream.uniform_open());
}

double expit(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw NumericalError("logit requires p in (0,1), got " +
                         std::to_string(p));
  }
  return std::log(p) - std::log1p(-p);
}

namespace {

constexpr int kMaxSeriesIter = 2000;
constexpr double kSeriesEps = 1e-16;

// Lower regularized incomplete gamma by power series; valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < kMaxSeriesIter; ++i) {
    ap += 1;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kSeriesEps) {
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
  }
  throw NumericalError("incomplete gamma series failed to converge");
}

// Upper regularized incomplete gamma by continued fraction (modified
// Lentz); valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double fpmin = std::numeric_limits<double>::min() / kSeriesEps;
  double b = x + 1 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxSeriesIter; ++i) {
    double an = -static_cast<double>(i) * (i - a);
    b += 2;
    d = an * d + b;
    if (std::abs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kSeriesEps) {
      return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
  }
  throw NumericalError("incomplete gamma continued fraction failed");
}

}  // namespace

double gamma_p(double a, double x) {
  if (!(a > 0) || x < 0) {
    throw NumericalError("gamma_p requires a > 0, x >= 0");
  }
  if (x == 0) return 0.0;
  if (x < a + 1) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
  if (!(a > 0) || x < 0) {
    throw NumericalError("gamma_q requires a > 0, x >= 0");
  }
  if (x == 0) return 1.0;
  if (x < a + 1) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chisq_cdf(double t, double k) {
  if (t <= 0) return 0.0;
  return gamma_p(0.5 * k, 0.5 * t);
}

double chisq_quantile(double p, double k) {
  if (!(p > 0 && p < 1)) {
    throw NumericalError("chisq_quantile requires p in (0,1)");
  }
  double hi = k + 10;
  while (chisq_cdf(hi, k) < p) hi *= 2;
  double lo = 0;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * (1 + hi); ++i) {
    double mid = 0.5 * (lo + hi);
    (chisq_cdf(mid, k) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

double incomplete_beta_cf(double a, double b, double x) {
  const double fpmin = std::numeric_limits<double>::min() / kSeriesEps;
  double qab = a + b;
  double qap = a + 1;
  double qam = a - 1;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxSeriesIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kSeriesEps) return h;
  }
  throw NumericalError("incomplete beta continued fraction failed");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0 && b > 0)) {
    throw NumericalError("incomplete_beta requires a, b > 0");
  }
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  double front = std::exp(std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x));
  if (x < (a + 1) / (a + b + 2)) {
    return front * incomplete_beta_cf(a, b, x) / a;
  }
  return 1.0 - front * incomplete_beta_cf(b, a, 1 - x) / b;
}

double beta_cdf(double x, double a, double b) {
  return incomplete_beta(a, b, x);
}

double noncentral_chisq_cdf(double t, int k, double lambda) {
  if (k < 1) throw NumericalError("noncentral_chisq_cdf requires k >= 1");
  if (lambda < 0) {
    throw NumericalError("noncentral_chisq_cdf requires lambda >= 0");
  }
  if (t < 0) throw NumericalError("noncentral_chisq_cdf requires t >= 0");
  if (t == 0) return 0.0;
  double half_k = 0.5 * k;
  double x = 0.5 * t;
  if (lambda == 0) return gamma_p(half_k, x);

  const double tail_tol = 1e-14;
  const double term_tol = 1e-18;
  double half_l = 0.5 * lambda;
  long j0 = static_cast<long>(half_l);
  double log_w0 = j0 * std::log(half_l) - half_l - std::lgamma(j0 + 1.0);
  double w0 = std::exp(log_w0);

  // Central CDF terms obey P(a+1, x) = P(a, x) - x^a e^{-x} / Gamma(a+1);
  // start at the Poisson mode and recur both ways.
  double a0 = half_k + j0;
  double p0 = gamma_p(a0, x);
  // T(a) = x^a e^{-x} / Gamma(a+1), the step between consecutive terms.
  double t0 = std::exp(a0 * std::log(x) - x - std::lgamma(a0 + 1.0));

  double sum = w0 * p0;
  double weight = w0;

  // Downward sweep first so the upward sweep can bound the true remaining
  // tail weight.
  double w = w0, p = p0, step = t0;
  for (long j = j0; j > 0; --j) {
    w *= j / half_l;
    step *= (half_k + j) / x;
    p += step;
    if (p > 1) p = 1;
    sum += w * p;
    weight += w;
    if (w < term_tol) break;
  }
  // Upward sweep; each neglected term is at most the remaining Poisson
  // weight, so stop once that drops below the tolerance.
  w = w0;
  p = p0;
  step = t0;
  for (long j = j0 + 1;; ++j) {
    w *= half_l / j;
    p -= step;
    if (p < 0) p = 0;
    step *= x / (half_k + j);
    sum += w * p;
    weight += w;
    if ((1 - weight) < tail_tol || w < term_tol) break;
    if (j - j0 > 400000) {
      throw NumericalError("noncentral chi-square series failed to converge");
    }
  }
  if (sum < 0) sum = 0;
  if (sum > 1) sum = 1;
  return sum;
}

double noncentral_chisq_quantile(double p, int k, double lambda) {
  if (!(p > 0 && p < 1)) {
    throw NumericalError("noncentral_chisq_quantile requires p in (0,1)");
  }
  double hi = k + lambda + 10 * std::sqrt(2.0 * k + 4.0 * lambda) + 10;
  int guard = 0;
  while (noncentral_chisq_cdf(hi, k, lambda) < p) {
    hi *= 2;
    if (++guard > 200) {
      throw NumericalError("noncentral_chisq_quantile: bracket not found");
    }
  }
  double lo = 0;
  while (hi - lo > 1e-9 * (1 + hi)) {
    double mid = 0.5 * (lo + hi);
    (noncentral_chisq_cdf(mid, k, lambda) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::pair<double, double> noncentral_chisq_cdf_mc(double t, int k,
                                                  double lambda, long n_draws,
                                                  RngStream& stream) {
  double delta = std::sqrt(lambda / k);
  long hits = 0;
  for (long i = 0; i < n_draws; ++i) {
    double s = 0;
    for (int j = 0; j < k; ++j) {
      double z = draw_normal(stream) + delta;
      s += z * z;
    }
    if (s <= t) ++hits;
  }
  double est = static_cast<double>(hits) / n_draws;
  double se = std::sqrt(est * (1 - est) / n_draws);
  return {est, se};
}

double hypergeom_log_pmf(long k, long n1, long N, long K) {
  if (n1 < 0 || K < 0 || N < 0 || n1 > N || K > N) {
    throw NumericalError("hypergeom_log_pmf: invalid parameters");
  }
  long lo = std::max(0L, n1 + K - N);
  long hi = std::min(n1, K);
  if (k < lo || k > hi) {
    throw NumericalError("hypergeom_log_pmf: k outside the support");
  }
  return log_choose(K, k) + log_choose(N - K, n1 - k) - log_choose(N, n1);
}

namespace {

double simpson_recurse(const std::function<double(double)>& f, double a,
                       double b, double fa, double fm, double fb, double whole,
                       double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m);
  double rm = 0.5 * (m + b);
  double flm = f(lm);
  double frm = f(rm);
  double left = (m - a) / 6 * (fa + 4 * flm + fm);
  double right = (b - m) / 6 * (fm + 4 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15 * tol) {
    return left + right + delta / 15;
  }
  return simpson_recurse(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  if (a == b) return 0.0;
  // Seed with a fixed split so narrow features are not missed.
  const int panels = 16;
  double h = (b - a) / panels;
  double total = 0;
  for (int i = 0; i < panels; ++i) {
    double x0 = a + i * h;
    double x1 = x0 + h;
    double xm = 0.5 * (x0 + x1);
    double f0 = f(x0), fm = f(xm), f1 = f(x1);
    double whole = (x1 - x0) / 6 * (f0 + 4 * fm + f1);
    total += simpson_recurse(f, x0, x1, f0, fm, f1, whole, tol / panels, 40);
  }
  return total;
}

}  // namespace edpt
