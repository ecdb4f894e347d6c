#include "edpt/asymptotics.hpp"

#include <algorithm>
#include <cmath>

#include "edpt/errors.hpp"
#include "edpt/numerics.hpp"
#include "edpt/parallel.hpp"
#include "edpt/perm.hpp"

namespace edpt {

double approx_pvalue_binary(long s1, long s, long sE, long n1, double r,
                            double rE) {
  if (n1 < 1 || s1 < 0 || s < s1 || sE < 0) {
    throw ConfigError("approx_pvalue_binary: inconsistent counts");
  }
  double n = (r + 1) * static_cast<double>(n1);
  double sd2 = static_cast<double>(s) * r * (n - s) / ((n - 1) * (r + 1) *
                                                       (r + 1));
  if (!(sd2 > 0)) {
    throw NumericalError("approx_pvalue_binary: degenerate responder total");
  }
  double sd = std::sqrt(sd2);
  double mean = static_cast<double>(s) / (r + 1);
  double reflected = 2 * static_cast<double>(s + sE) / (r + rE + 1) -
                     static_cast<double>(s1);
  double hi = std::max(static_cast<double>(s1), reflected);
  double lo = std::min(static_cast<double>(s1), reflected);
  return 1 - normal_cdf((hi - mean) / sd) + normal_cdf((lo - mean) / sd);
}

double exact_pvalue_binary(const BinaryCounts& c) {
  c.validate();
  long n = c.n1 + c.n0;
  long s = c.s1 + c.s0;
  long lo = std::max(0L, s - c.n0);
  long hi = std::min(c.n1, s);

  auto log_m = [&](long s1p) {
    BinaryCounts counts = c;
    counts.s1 = s1p;
    counts.s0 = s - s1p;
    return stat_m_binary(counts);
  };
  double observed = log_m(c.s1);
  double p = 0;
  for (long s1p = lo; s1p <= hi; ++s1p) {
    if (approx_ge(log_m(s1p), observed)) {
      p += std::exp(hypergeom_log_pmf(s1p, c.n1, n, s));
    }
  }
  return std::min(1.0, p);
}

namespace {

double indicator_power(double u1, double u0, double alpha) {
  double hi = std::max(u1, u0);
  double lo = std::min(u1, u0);
  return (normal_cdf(hi) - normal_cdf(lo) > 1 - alpha) ? 1.0 : 0.0;
}

McEstimate bivariate_limit_power(const std::vector<double>& mu,
                                 double sigma22, double alpha, long n_mc,
                                 const SeedSpec& seed, int workers) {
  if (n_mc < 1) throw ConfigError("limiting power: n_mc must be >= 1");
  // Cholesky of [[1, -1], [-1, sigma22]].
  double l22_sq = sigma22 - 1;
  if (!(l22_sq > 0)) {
    throw NumericalError("limiting power: covariance not positive definite");
  }
  double l22 = std::sqrt(l22_sq);
  std::vector<std::uint8_t> hits(n_mc);
  parallel_for(0, n_mc, workers, [&](long i) {
    RngStream stream(seed.master_seed, seed.stream_id,
                     static_cast<std::uint32_t>(i));
    double z1 = draw_normal(stream);
    double z2 = draw_normal(stream);
    double u1 = mu[0] + z1;
    double u0 = mu[1] - z1 + l22 * z2;
    hits[i] = indicator_power(u1, u0, alpha) > 0 ? 1 : 0;
  });
  long total = 0;
  for (auto h : hits) total += h;
  McEstimate out;
  out.n_mc = n_mc;
  out.estimate = static_cast<double>(total) / static_cast<double>(n_mc);
  out.se = std::sqrt(out.estimate * (1 - out.estimate) /
                     static_cast<double>(n_mc));
  return out;
}

void check_binary_params(const BinaryAsymptoticParams& p) {
  if (!(p.r > 0) || !(p.rE > 0)) {
    throw ConfigError("limiting power: r and rE must be positive");
  }
  if (!(p.w0 > 0 && p.w0 < 1)) {
    throw ConfigError("limiting power: w0 must be in (0,1)");
  }
  if (!(p.alpha > 0 && p.alpha < 1)) {
    throw ConfigError("limiting power: alpha must be in (0,1)");
  }
}

}  // namespace

McEstimate limiting_power_binary(const BinaryAsymptoticParams& p, long n_mc,
                                 const SeedSpec& seed, int workers) {
  check_binary_params(p);
  double base = std::sqrt(p.r * (p.r + 1) * p.w0 * (1 - p.w0));
  std::vector<double> mu(2);
  mu[0] = p.a * std::sqrt(p.r) / std::sqrt((p.r + 1) * p.w0 * (1 - p.w0));
  mu[1] = (-(p.r * (p.r + p.rE + 1) + 2 * p.rE) * p.a +
           2 * (p.r + 1) * p.rE * p.b) /
          ((p.r + p.rE + 1) * base);
  double sigma22 = 1 + 4 * p.rE / (p.r * (p.r + p.rE + 1));
  return bivariate_limit_power(mu, sigma22, p.alpha, n_mc, seed, workers);
}

double limiting_power_binary_approx(const BinaryAsymptoticParams& p) {
  check_binary_params(p);
  double shift = p.a * std::sqrt(p.r) /
                 std::sqrt((p.r + 1) * p.w0 * (1 - p.w0));
  return normal_cdf(shift - normal_quantile(1 - p.alpha));
}

McEstimate limiting_power_binary_infinite_ed(const BinaryAsymptoticParams& p,
                                             long n_mc, const SeedSpec& seed,
                                             int workers) {
  check_binary_params(p);
  double base = std::sqrt(p.r * (p.r + 1) * p.w0 * (1 - p.w0));
  std::vector<double> mu(2);
  mu[0] = p.a * std::sqrt(p.r) / std::sqrt((p.r + 1) * p.w0 * (1 - p.w0));
  mu[1] = (-p.a * (p.r + 2) + 2 * (p.r + 1) * p.b) / base;
  double sigma22 = 1 + 4 / p.r;
  return bivariate_limit_power(mu, sigma22, p.alpha, n_mc, seed, workers);
}

McEstimate limiting_power_subgroups(const SubgroupAsymptoticParams& params,
                                    SubgroupFamily family, long n_mc_v,
                                    const SeedSpec& seed, int workers) {
  const int k = static_cast<int>(params.rho.size());
  if (k < 1) throw ConfigError("limiting_power_subgroups: empty rho");
  if (static_cast<int>(params.a.size()) != k ||
      static_cast<int>(params.b.size()) != k) {
    throw ConfigError("limiting_power_subgroups: a and b must have length K");
  }
  double rho_sum = 0;
  for (double rk : params.rho) {
    if (!(rk > 0)) {
      throw ConfigError("limiting_power_subgroups: rho entries must be > 0");
    }
    rho_sum += rk;
  }
  if (std::abs(rho_sum - 1) > 1e-9) {
    throw ConfigError("limiting_power_subgroups: rho must sum to 1");
  }
  if (family == SubgroupFamily::binary &&
      static_cast<int>(params.omega.size()) != k) {
    throw ConfigError(
        "limiting_power_subgroups: binary family requires omega (length K)");
  }
  if (!(params.r > 0) || !(params.rE > 0)) {
    throw ConfigError("limiting_power_subgroups: r and rE must be positive");
  }
  if (n_mc_v < 2) {
    throw ConfigError("limiting_power_subgroups: n_mc_v must be >= 2");
  }

  const double r = params.r, rE = params.rE, alpha = params.alpha;
  // Noise scale of the permuted-statistic limit.
  const double s2 = r * (1 + r + rE) / rE;
  // Location shifts of the observed-statistic (cf) and permuted-statistic
  // (cf_tilde) limits.
  std::vector<double> cf(k), cf_tilde(k);
  for (int g = 0; g < k; ++g) {
    double scale = std::sqrt(params.rho[g] * rE * (1 + r) / (1 + r + rE));
    if (family == SubgroupFamily::binary) {
      double w = params.omega[g];
      if (!(w > 0 && w < 1)) {
        throw ConfigError("limiting_power_subgroups: omega must be in (0,1)");
      }
      scale /= std::sqrt(w * (1 - w));
    }
    cf[g] = scale * ((r + rE) / rE * params.a[g] - params.b[g]);
    cf_tilde[g] = scale * (params.a[g] / (1 + r) - params.b[g]);
  }

  std::vector<double> values(n_mc_v);
  parallel_for(0, n_mc_v, workers, [&](long i) {
    RngStream stream(seed.master_seed, seed.stream_id,
                     static_cast<std::uint32_t>(i));
    double lambda_f = 0, lambda_ft = 0;
    for (int g = 0; g < k; ++g) {
      double v = draw_normal(stream);
      double zf = (cf[g] + v);
      double zt = (cf_tilde[g] + v);
      lambda_f += zf * zf / s2;
      lambda_ft += zt * zt / s2;
    }
    double q = noncentral_chisq_quantile(1 - alpha, k, lambda_ft);
    values[i] = 1 - noncentral_chisq_cdf(q, k, lambda_f);
  });

  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n_mc_v);
  double var = 0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n_mc_v - 1);

  McEstimate out;
  out.n_mc = n_mc_v;
  out.estimate = mean;
  out.se = std::sqrt(var / static_cast<double>(n_mc_v));
  return out;
}

}  // namespace edpt
