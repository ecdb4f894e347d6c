#include "edpt/baselines.hpp"

#include <cmath>
#include <limits>

#include "edpt/errors.hpp"
#include "edpt/numerics.hpp"

namespace edpt {

namespace {

BaselineResult z_form_result(std::string name, double z, double alpha,
                             Sidedness sided) {
  BaselineResult result;
  result.test_name = std::move(name);
  result.statistic = z;
  result.df = 0;
  if (sided == Sidedness::two_sided) {
    result.p_value = 2 * (1 - normal_cdf(std::abs(z)));
    result.reject = std::abs(z) > normal_quantile(1 - alpha / 2);
  } else {
    result.p_value = 1 - normal_cdf(z);
    result.reject = z > normal_quantile(1 - alpha);
  }
  return result;
}

BaselineResult chisq_form_result(std::string name, double z, int df,
                                 double alpha) {
  BaselineResult result;
  result.test_name = std::move(name);
  result.statistic = z;
  result.df = df;
  result.p_value = 1 - chisq_cdf(z, df);
  result.reject = z > chisq_quantile(1 - alpha, df);
  return result;
}

}  // namespace

BaselineResult wald_binary(const BinaryCounts& c, WaldVariant variant,
                           double alpha, Sidedness sided, double oracle_w0) {
  c.validate();
  double n1 = static_cast<double>(c.n1);
  double s1 = static_cast<double>(c.s1);
  double z;
  switch (variant) {
    case WaldVariant::id_only: {
      if (c.n0 < 1) throw TestInapplicable("wald-id: empty control arm");
      double n0 = static_cast<double>(c.n0);
      double s0 = static_cast<double>(c.s0);
      double var = s1 * (n1 - s1) / (n1 * n1 * n1) +
                   s0 * (n0 - s0) / (n0 * n0 * n0);
      if (var <= 0) throw TestInapplicable("wald-id: zero-variance arms");
      z = (s1 / n1 - s0 / n0) / std::sqrt(var);
      return z_form_result("wald-id", z, alpha, sided);
    }
    case WaldVariant::merged: {
      double nc = static_cast<double>(c.n0 + c.nE);
      double sc = static_cast<double>(c.s0 + c.sE);
      if (nc < 1) throw TestInapplicable("wald-merged: no controls");
      double var = s1 * (n1 - s1) / (n1 * n1 * n1) +
                   sc * (nc - sc) / (nc * nc * nc);
      if (var <= 0) throw TestInapplicable("wald-merged: zero-variance arms");
      z = (s1 / n1 - sc / nc) / std::sqrt(var);
      return z_form_result("wald-merged", z, alpha, sided);
    }
    case WaldVariant::oracle: {
      double var = s1 * (n1 - s1) / (n1 * n1 * n1);
      if (var <= 0) {
        throw TestInapplicable("wald-oracle: zero-variance experimental arm");
      }
      z = (s1 / n1 - oracle_w0) / std::sqrt(var);
      return z_form_result("wald-oracle", z, alpha, sided);
    }
  }
  throw ConfigError("wald_binary: unknown variant");
}

namespace {

// Least squares of y on rows (p columns); returns the quadratic form
// coef_sub' (Cov_sub)^{-1} coef_sub over the trailing `q` coordinates,
// with Cov = (X'X)^{-1} under unit outcome variance.
double treatment_wald_quadratic(const std::vector<double>& design,
                                const std::vector<double>& y, int rows, int p,
                                int q, const char* what) {
  SymmetricMatrix xtx(p);
  std::vector<double> xty(p, 0.0);
  for (int i = 0; i < rows; ++i) {
    std::span<const double> row(design.data() + static_cast<std::size_t>(i) * p,
                                static_cast<std::size_t>(p));
    xtx.add_outer(row);
    for (int j = 0; j < p; ++j) xty[j] += y[i] * row[j];
  }
  std::vector<double> coef;
  SymmetricMatrix cov_sub(q);
  try {
    CholeskyFactor chol(xtx);
    coef = chol.solve(xty);
    std::vector<double> e(p, 0.0);
    for (int j = 0; j < q; ++j) {
      e[p - q + j] = 1.0;
      std::vector<double> col = chol.solve(e);
      for (int i = j; i < q; ++i) cov_sub.at(i, j) = col[p - q + i];
      e[p - q + j] = 0.0;
    }
  } catch (const NumericalError&) {
    throw TestInapplicable(std::string(what) + ": rank-deficient design");
  }
  std::vector<double> sub(coef.end() - q, coef.end());
  try {
    std::vector<double> w = CholeskyFactor(cov_sub).forward_solve(sub);
    return dot(w, w);
  } catch (const NumericalError&) {
    throw TestInapplicable(std::string(what) +
                           ": singular treatment covariance");
  }
}

}  // namespace

BaselineResult wald_linear(const TrialDataset& data,
                           const ExternalDataset* ext, WaldVariant variant,
                           double alpha,
                           const std::optional<LinearOracle>& oracle) {
  const int d = data.d;
  const int q = d + 1;

  if (variant == WaldVariant::oracle) {
    if (!oracle) throw ConfigError("wald_linear: oracle parameters required");
    if (static_cast<int>(oracle->beta1.size()) != d) {
      throw ConfigError("wald_linear: oracle beta1 has wrong length");
    }
    std::vector<double> design;
    std::vector<double> residuals;
    int rows = 0;
    for (int i = 0; i < data.n; ++i) {
      if (!data.assignments[i]) continue;
      design.push_back(1.0);
      double fit = oracle->eta0;
      for (int j = 0; j < d; ++j) {
        design.push_back(data.covariate(i, j));
        fit += oracle->beta1[j] * data.covariate(i, j);
      }
      residuals.push_back(data.outcomes[i] - fit);
      ++rows;
    }
    if (rows < 1) throw TestInapplicable("wald-oracle: no treated patients");
    double z = treatment_wald_quadratic(design, residuals, rows, q, q,
                                        "wald-oracle");
    return chisq_form_result("wald-oracle", z, q, alpha);
  }

  const int p = 2 * q;
  std::vector<double> design;
  std::vector<double> y;
  int rows = 0;
  auto push_row = [&](std::span<const double> x, int a, double outcome) {
    design.push_back(1.0);
    for (int j = 0; j < d; ++j) design.push_back(x[j]);
    design.push_back(a ? 1.0 : 0.0);
    for (int j = 0; j < d; ++j) design.push_back(a ? x[j] : 0.0);
    y.push_back(outcome);
    ++rows;
  };
  for (int i = 0; i < data.n; ++i) {
    push_row(data.covariate_row(i), data.assignments[i], data.outcomes[i]);
  }
  const char* name = "wald-id";
  if (variant == WaldVariant::merged) {
    name = "wald-merged";
    if (ext) {
      if (ext->n > 0 && ext->d != d) {
        throw DataError("wald_linear: covariate dimension mismatch");
      }
      for (int i = 0; i < ext->n; ++i) {
        push_row(ext->covariate_row(i), 0, ext->outcomes[i]);
      }
    }
  }
  double z = treatment_wald_quadratic(design, y, rows, p, q, name);
  return chisq_form_result(name, z, q, alpha);
}

namespace {

struct MleFit {
  double log_lik = 0;
  bool ok = false;
};

MleFit logistic_mle(const std::vector<double>& design,
                    const std::vector<double>& y, int rows, int p) {
  GlmData block;
  block.design = design;
  block.outcomes = y;
  block.rows = rows;
  block.p = p;
  std::vector<const GlmData*> blocks{&block};
  MleFit fit;
  try {
    OptimizationReport report = fit_logistic_glm(
        blocks, std::numeric_limits<double>::infinity(), p);
    if (!report.converged) return fit;
    // Quasi-separated fits stabilize at the boundary supremum of the
    // likelihood; the deviance is still well defined and is reported, as
    // standard GLM fitters do. Only optimizer failure (non-convergence,
    // singular information) is inapplicable.
    fit.log_lik = logistic_log_likelihood(blocks, report.mode);
    fit.ok = std::isfinite(fit.log_lik);
  } catch (const NumericalError&) {
    fit.ok = false;
  }
  return fit;
}

}  // namespace

BaselineResult lr_test_logistic(const TrialDataset& data,
                                const ExternalDataset* ext,
                                const LogisticModelSpec& model, double alpha) {
  const int d = data.d;
  for (int c : model.interaction_columns) {
    if (c < 0 || c >= d) {
      throw ConfigError("lr_test_logistic: interaction column out of range");
    }
  }
  const int ni = static_cast<int>(model.interaction_columns.size());
  const int p_full = 2 + d + ni;
  const int p_null = 1 + d;
  const int df = 1 + ni;

  std::vector<double> design_full, design_null, y;
  int rows = 0;
  auto push_row = [&](std::span<const double> x, int a, double outcome) {
    design_full.push_back(1.0);
    design_null.push_back(1.0);
    for (int j = 0; j < d; ++j) {
      design_full.push_back(x[j]);
      design_null.push_back(x[j]);
    }
    design_full.push_back(a ? 1.0 : 0.0);
    for (int c : model.interaction_columns) {
      design_full.push_back(a ? x[c] : 0.0);
    }
    y.push_back(outcome);
    ++rows;
  };
  for (int i = 0; i < data.n; ++i) {
    if (data.outcomes[i] != 0.0 && data.outcomes[i] != 1.0) {
      throw DataError("lr_test_logistic: outcomes must be binary");
    }
    push_row(data.covariate_row(i), data.assignments[i], data.outcomes[i]);
  }
  const char* name = "lr";
  if (ext) {
    name = "lr-ed";
    if (ext->n > 0 && ext->d != d) {
      throw DataError("lr_test_logistic: covariate dimension mismatch");
    }
    for (int i = 0; i < ext->n; ++i) {
      push_row(ext->covariate_row(i), 0, ext->outcomes[i]);
    }
  }

  MleFit full = logistic_mle(design_full, y, rows, p_full);
  MleFit null = logistic_mle(design_null, y, rows, p_null);
  if (!full.ok || !null.ok) {
    throw TestInapplicable(std::string(name) +
                           ": maximum likelihood fit did not converge");
  }
  double stat = 2 * (full.log_lik - null.log_lik);
  if (stat < 0) stat = 0;
  return chisq_form_result(name, stat, df, alpha);
}

BaselineResult two_sample_z(const TrialDataset& data, double alpha) {
  double n1 = 0, n0 = 0, sum1 = 0, sum0 = 0;
  for (int i = 0; i < data.n; ++i) {
    if (data.assignments[i]) {
      n1 += 1;
      sum1 += data.outcomes[i];
    } else {
      n0 += 1;
      sum0 += data.outcomes[i];
    }
  }
  double mean1 = sum1 / n1, mean0 = sum0 / n0;
  double v1 = 0, v0 = 0;
  for (int i = 0; i < data.n; ++i) {
    double c = data.outcomes[i] - (data.assignments[i] ? mean1 : mean0);
    (data.assignments[i] ? v1 : v0) += c * c;
  }
  v1 /= n1;
  v0 /= n0;
  double var = v1 / n1 + v0 / n0;
  if (var <= 0) throw TestInapplicable("two-sample-z: zero variance");
  double z = (mean1 - mean0) / std::sqrt(var);
  return z_form_result("two-sample-z", z, alpha, Sidedness::two_sided);
}

FittedStatistic perm_stat_no_ed(const StatisticSpec& spec, int d) {
  return FittedStatistic::make(spec, ExternalDataset::empty(d));
}

}  // namespace edpt
