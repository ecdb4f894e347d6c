#include "edpt/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "edpt/errors.hpp"
#include "edpt/numerics.hpp"

namespace edpt {

namespace {

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void require_binary_outcomes(std::span<const double> y, const char* what) {
  for (double v : y) {
    if (v != 0.0 && v != 1.0) {
      throw DataError(std::string(what) + ": outcomes must be 0 or 1");
    }
  }
}

// Subgroup of a row given K-1 binary indicator covariates: the reference
// group when all indicators are 0, otherwise the position of the single
// indicator that is set.
int indicator_group(std::span<const double> x, int n_groups) {
  int group = 0;
  for (int j = 0; j < n_groups - 1; ++j) {
    double v = x[j];
    if (v != 0.0 && v != 1.0) {
      throw DataError("subgroup covariates must be 0/1 indicators");
    }
    if (v == 1.0) {
      if (group != 0) {
        throw DataError("more than one subgroup indicator set in a row");
      }
      group = j + 1;
    }
  }
  return group;
}

}  // namespace

// ---------------------------------------------------------------------------
// Counts

void BinaryCounts::validate() const {
  if (n1 < 1 || n0 < 0 || nE < 0 || s1 < 0 || s0 < 0 || sE < 0 || s1 > n1 ||
      s0 > n0 || sE > nE) {
    throw DataError("BinaryCounts: invalid counts");
  }
}

void SubgroupBinaryCounts::validate() const {
  if (groups.empty()) throw DataError("SubgroupBinaryCounts: no groups");
  long total_n1 = 0;
  for (const auto& g : groups) {
    if (g.n1 < 0 || g.n0 < 0 || g.nE < 0 || g.s1 < 0 || g.s0 < 0 ||
        g.sE < 0 || g.s1 > g.n1 || g.s0 > g.n0 || g.sE > g.nE) {
      throw DataError("SubgroupBinaryCounts: invalid counts");
    }
    total_n1 += g.n1;
  }
  if (total_n1 < 1) {
    throw DataError("SubgroupBinaryCounts: no treated patients");
  }
}

// ---------------------------------------------------------------------------
// Posteriors

BetaPosterior fit_beta_posterior(const ExternalDataset& ext) {
  require_binary_outcomes(ext.outcomes, "fit_beta_posterior");
  if (!ext.all_control()) {
    throw DataError("fit_beta_posterior: external cohort must be all-control");
  }
  double sE = 0;
  for (double y : ext.outcomes) sE += y;
  return BetaPosterior{sE + 1, ext.n - sE + 1};
}

GaussianPosterior fit_gaussian_posterior(const ExternalDataset& ext,
                                         double prior_variance) {
  if (!(prior_variance > 0)) {
    throw ConfigError("prior variance must be positive");
  }
  if (!ext.all_control()) {
    throw DataError(
        "fit_gaussian_posterior: external cohort must be all-control");
  }
  const int d = ext.d;
  const int q = d + 1;

  GaussianPosterior post;
  post.prior_variance = prior_variance;
  post.d = d;
  post.control_precision = SymmetricMatrix::identity(q, 1.0 / prior_variance);
  post.control_rhs.assign(q, 0.0);

  std::vector<double> b(q);
  for (int i = 0; i < ext.n; ++i) {
    b[0] = 1.0;
    for (int j = 0; j < d; ++j) b[j + 1] = ext.covariate(i, j);
    post.control_precision.add_outer(b);
    for (int j = 0; j < q; ++j) post.control_rhs[j] += ext.outcomes[i] * b[j];
  }

  CholeskyFactor chol(post.control_precision);
  std::vector<double> control_mean = chol.solve(post.control_rhs);

  post.mean.assign(2 * q, 0.0);
  std::copy(control_mean.begin(), control_mean.end(), post.mean.begin());

  post.covariance = SymmetricMatrix(2 * q);
  // Control block: inverse of the control precision, column by column.
  std::vector<double> e(q, 0.0);
  for (int j = 0; j < q; ++j) {
    e[j] = 1.0;
    std::vector<double> col = chol.solve(e);
    for (int i = j; i < q; ++i) post.covariance.at(i, j) = col[i];
    e[j] = 0.0;
  }
  for (int j = 0; j < q; ++j) {
    post.covariance.at(q + j, q + j) = prior_variance;
  }
  return post;
}

// ---------------------------------------------------------------------------
// Binary statistics

double stat_m_binary(const BinaryCounts& c) {
  c.validate();
  return log_gamma(c.s1 + 1.0) + log_gamma(c.n1 - c.s1 + 1.0) +
         log_gamma(c.s0 + c.sE + 1.0) +
         log_gamma(c.n0 + c.nE - c.s0 - c.sE + 1.0) + log_gamma(c.nE + 2.0) -
         log_gamma(c.n1 + 2.0) - log_gamma(c.nE + c.n0 + 2.0) -
         log_gamma(c.sE + 1.0) - log_gamma(c.nE - c.sE + 1.0);
}

namespace {

// Same expression with the per-group n1 >= 1 requirement relaxed.
double log_m_binary_term(const BinaryCounts& c) {
  return log_gamma(c.s1 + 1.0) + log_gamma(c.n1 - c.s1 + 1.0) +
         log_gamma(c.s0 + c.sE + 1.0) +
         log_gamma(c.n0 + c.nE - c.s0 - c.sE + 1.0) + log_gamma(c.nE + 2.0) -
         log_gamma(c.n1 + 2.0) - log_gamma(c.nE + c.n0 + 2.0) -
         log_gamma(c.sE + 1.0) - log_gamma(c.nE - c.sE + 1.0);
}

}  // namespace

double stat_m_binary_subgroups(const SubgroupBinaryCounts& c) {
  c.validate();
  double total = 0;
  for (const auto& g : c.groups) total += log_m_binary_term(g);
  return total;
}

double beta_diff_probability(double a1, double b1, double a0, double b0,
                             double threshold) {
  if (threshold >= 1) return 0.0;
  if (threshold <= -1) return 1.0;
  const double lbeta1 = log_gamma(a1) + log_gamma(b1) - log_gamma(a1 + b1);
  auto density1 = [&](double u) {
    if (u <= 0.0) return a1 < 1 ? 0.0 : (a1 == 1 ? std::exp(-lbeta1) : 0.0);
    if (u >= 1.0) return b1 < 1 ? 0.0 : (b1 == 1 ? std::exp(-lbeta1) : 0.0);
    return std::exp((a1 - 1) * std::log(u) + (b1 - 1) * std::log1p(-u) -
                    lbeta1);
  };
  double lo = std::max(0.0, threshold);
  double hi = std::min(1.0, 1.0 + threshold);
  double prob = integrate(
      [&](double u) {
        double v = u - threshold;
        double cdf = v <= 0 ? 0.0 : (v >= 1 ? 1.0 : beta_cdf(v, a0, b0));
        return density1(u) * cdf;
      },
      lo, hi, 1e-11);
  if (threshold < 0) {
    // Above u = 1 + threshold the control CDF is identically 1.
    prob += 1.0 - beta_cdf(1.0 + threshold, a1, b1);
  }
  return std::min(1.0, std::max(0.0, prob));
}

namespace {

double group_effect_probability(const BinaryCounts& g, Direction direction,
                                double threshold) {
  double a1 = g.s1 + 1.0;
  double b1 = g.n1 - g.s1 + 1.0;
  double a0 = g.s0 + g.sE + 1.0;
  double b0 = g.n0 + g.nE - g.s0 - g.sE + 1.0;
  if (direction == Direction::positive) {
    return beta_diff_probability(a1, b1, a0, b0, threshold);
  }
  return beta_diff_probability(a0, b0, a1, b1, threshold);
}

}  // namespace

double stat_m1_binary(const BinaryCounts& c, Direction direction,
                      double threshold) {
  c.validate();
  return group_effect_probability(c, direction, threshold);
}

double stat_m1_binary_subgroups(const SubgroupBinaryCounts& c,
                                Direction direction, double threshold) {
  c.validate();
  double none = 1.0;
  for (const auto& g : c.groups) {
    none *= 1.0 - group_effect_probability(g, direction, threshold);
  }
  return 1.0 - none;
}

// ---------------------------------------------------------------------------
// Logistic working model internals

namespace {

struct LogisticLayout {
  int d = 0;
  std::vector<int> interaction_cols;
  std::vector<int> bias_cols;

  int p() const {
    return 2 + d + static_cast<int>(interaction_cols.size()) +
           static_cast<int>(bias_cols.size());
  }
  int a_index() const { return d + 1; }
  int interaction_index(int j) const { return d + 2 + j; }
  int bias_index(int j) const {
    return d + 2 + static_cast<int>(interaction_cols.size()) + j;
  }
};

LogisticLayout make_layout(int d, const LogisticModelSpec& model,
                           bool with_bias) {
  LogisticLayout layout;
  layout.d = d;
  for (int c : model.interaction_columns) {
    if (c < 0 || c >= d) {
      throw ConfigError("logistic interaction column " + std::to_string(c) +
                        " out of range for d=" + std::to_string(d));
    }
    layout.interaction_cols.push_back(c);
  }
  if (with_bias) {
    for (int c : model.ed_bias_columns) {
      if (c < 0 || c >= d) {
        throw ConfigError("logistic bias column " + std::to_string(c) +
                          " out of range for d=" + std::to_string(d));
      }
      layout.bias_cols.push_back(c);
    }
  }
  return layout;
}

GlmData build_external_block(const ExternalDataset& ext,
                             const LogisticLayout& layout) {
  require_binary_outcomes(ext.outcomes, "logistic working model");
  if (!ext.all_control()) {
    throw DataError("logistic working model: external cohort must be "
                    "all-control");
  }
  GlmData block;
  block.rows = ext.n;
  block.p = layout.p();
  block.outcomes = ext.outcomes;
  block.design.assign(static_cast<std::size_t>(ext.n) * block.p, 0.0);
  for (int i = 0; i < ext.n; ++i) {
    double* z = block.design.data() + static_cast<std::size_t>(i) * block.p;
    z[0] = 1.0;
    for (int j = 0; j < layout.d; ++j) z[1 + j] = ext.covariate(i, j);
    for (std::size_t j = 0; j < layout.bias_cols.size(); ++j) {
      z[layout.bias_index(static_cast<int>(j))] =
          ext.covariate(i, layout.bias_cols[j]);
    }
  }
  return block;
}

GlmData build_trial_block(const TrialDataset& data,
                           std::span<const int> assignments,
                           const LogisticLayout& layout,
                           const std::vector<double>* offsets) {
  GlmData block;
  block.rows = data.n;
  block.p = layout.p();
  block.outcomes = data.outcomes;
  if (offsets) block.offsets = *offsets;
  block.design.assign(static_cast<std::size_t>(data.n) * block.p, 0.0);
  for (int i = 0; i < data.n; ++i) {
    double* z = block.design.data() + static_cast<std::size_t>(i) * block.p;
    z[0] = 1.0;
    for (int j = 0; j < layout.d; ++j) z[1 + j] = data.covariate(i, j);
    if (assignments[i]) {
      z[layout.a_index()] = 1.0;
      for (std::size_t j = 0; j < layout.interaction_cols.size(); ++j) {
        z[layout.interaction_index(static_cast<int>(j))] =
            data.covariate(i, layout.interaction_cols[j]);
      }
    }
  }
  return block;
}

// Trial block for the frozen-offset statistic: the design holds only the
// bias, treatment, and interaction coordinates.
GlmData build_offset_trial_block(const TrialDataset& data,
                                  std::span<const int> assignments,
                                  const LogisticLayout& layout,
                                  const std::vector<double>& offsets) {
  const int nb = static_cast<int>(layout.bias_cols.size());
  const int ni = static_cast<int>(layout.interaction_cols.size());
  const int p = nb + 1 + ni;
  GlmData block;
  block.rows = data.n;
  block.p = p;
  block.outcomes = data.outcomes;
  block.offsets = offsets;
  block.design.assign(static_cast<std::size_t>(data.n) * p, 0.0);
  for (int i = 0; i < data.n; ++i) {
    double* z = block.design.data() + static_cast<std::size_t>(i) * p;
    for (int j = 0; j < nb; ++j) z[j] = data.covariate(i, layout.bias_cols[j]);
    if (assignments[i]) {
      z[nb] = 1.0;
      for (int j = 0; j < ni; ++j) {
        z[nb + 1 + j] = data.covariate(i, layout.interaction_cols[j]);
      }
    }
  }
  return block;
}

}  // namespace

double logistic_log_density(std::span<const GlmData* const> blocks,
                            double prior_variance,
                            std::span<const double> theta,
                            std::vector<double>* grad, SymmetricMatrix* hess) {
  const int p = static_cast<int>(theta.size());
  double value = 0;
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  if (hess) std::fill(hess->packed().begin(), hess->packed().end(), 0.0);

  for (const GlmData* block : blocks) {
    for (int i = 0; i < block->rows; ++i) {
      const double* z = block->design.data() + static_cast<std::size_t>(i) * p;
      double eta = block->offsets.empty() ? 0.0 : block->offsets[i];
      for (int j = 0; j < p; ++j) eta += z[j] * theta[j];
      double y = block->outcomes[i];
      value += y * eta - softplus(eta);
      if (grad || hess) {
        double mu = expit(eta);
        if (grad) {
          double r = y - mu;
          for (int j = 0; j < p; ++j) (*grad)[j] += r * z[j];
        }
        if (hess) {
          double w = mu * (1 - mu);
          hess->add_outer(std::span<const double>(z, theta.size()), -w);
        }
      }
    }
  }
  if (std::isfinite(prior_variance)) {
    // Gaussian prior N(0, prior_variance I), normalizer included.
    double ss = 0;
    for (double t : theta) ss += t * t;
    value += -0.5 * ss / prior_variance -
             0.5 * p * std::log(2 * M_PI * prior_variance);
    if (grad) {
      for (int j = 0; j < p; ++j) (*grad)[j] -= theta[j] / prior_variance;
    }
    if (hess) {
      for (int j = 0; j < p; ++j) hess->at(j, j) -= 1.0 / prior_variance;
    }
  }
  return value;
}

double logistic_log_likelihood(std::span<const GlmData* const> blocks,
                               std::span<const double> theta) {
  return logistic_log_density(blocks,
                              std::numeric_limits<double>::infinity(), theta,
                              nullptr, nullptr);
}

OptimizationReport fit_logistic_glm(std::span<const GlmData* const> blocks,
                                    double prior_variance, int p) {
  LogDensity objective = [blocks, prior_variance](
                             std::span<const double> theta,
                             std::vector<double>* grad, SymmetricMatrix* hess) {
    return logistic_log_density(blocks, prior_variance, theta, grad, hess);
  };
  return newton_map(objective, std::vector<double>(p, 0.0));
}

double laplace_log_evidence(const OptimizationReport& report,
                            double value_at_mode) {
  if (!report.converged) {
    throw NumericalError("Laplace evidence requested for a non-converged fit");
  }
  const int p = static_cast<int>(report.mode.size());
  SymmetricMatrix neg_hess(p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j <= i; ++j) neg_hess.at(i, j) = -report.hessian.at(i, j);
  }
  double log_det_neg_hess = CholeskyFactor(neg_hess).log_det();
  return 0.5 * p * std::log(2 * M_PI) - 0.5 * log_det_neg_hess +
         value_at_mode;
}

LaplaceFit fit_logistic_laplace(const TrialDataset& data,
                                std::span<const int> assignments,
                                const ExternalDataset& ext,
                                const LogisticModelSpec& model,
                                double prior_variance) {
  require_binary_outcomes(data.outcomes, "fit_logistic_laplace");
  if (ext.n > 0 && ext.d != data.d) {
    throw DataError("fit_logistic_laplace: covariate dimension mismatch");
  }
  LogisticLayout layout = make_layout(data.d, model, ext.n > 0);
  GlmData ext_block = build_external_block(ext, layout);
  GlmData trial_block = build_trial_block(data, assignments, layout, nullptr);
  std::vector<const GlmData*> blocks{&trial_block, &ext_block};

  OptimizationReport report = fit_logistic_glm(blocks, prior_variance, layout.p());
  if (!report.converged) {
    throw NumericalError("fit_logistic_laplace: MAP fit did not converge");
  }
  double value = logistic_log_density(blocks, prior_variance, report.mode, nullptr,
                                 nullptr);

  LaplaceFit fit;
  fit.map_estimate = report.mode;
  const int p = layout.p();
  fit.neg_hessian = SymmetricMatrix(p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j <= i; ++j) {
      fit.neg_hessian.at(i, j) = -report.hessian.at(i, j);
    }
  }
  fit.log_statistic = laplace_log_evidence(report, value);
  fit.report = std::move(report);
  return fit;
}

std::vector<double> fit_logistic_offset(const ExternalDataset& source,
                                        double prior_variance) {
  require_binary_outcomes(source.outcomes, "fit_logistic_offset");
  if (source.n < 1) throw DataError("fit_logistic_offset: empty source");
  const int p = 1 + source.d;
  GlmData block;
  block.rows = source.n;
  block.p = p;
  block.outcomes = source.outcomes;
  block.design.assign(static_cast<std::size_t>(source.n) * p, 0.0);
  for (int i = 0; i < source.n; ++i) {
    double* z = block.design.data() + static_cast<std::size_t>(i) * p;
    z[0] = 1.0;
    for (int j = 0; j < source.d; ++j) z[1 + j] = source.covariate(i, j);
  }
  std::vector<const GlmData*> blocks{&block};
  OptimizationReport report = fit_logistic_glm(blocks, prior_variance, p);
  if (!report.converged) {
    throw NumericalError("fit_logistic_offset: MAP fit did not converge");
  }
  return report.mode;
}

// ---------------------------------------------------------------------------
// FittedStatistic machinery

class StatisticModel {
 public:
  virtual ~StatisticModel() = default;
  virtual std::unique_ptr<PreparedStatistic> prepare(
      const StatisticSpec& spec, const TrialDataset& data) const = 0;
};

namespace {

// ---- binary families ----

class BinaryPrepared final : public PreparedStatistic {
 public:
  BinaryPrepared(const StatisticSpec& spec, const TrialDataset& data,
                 std::vector<long> ext_counts, std::vector<long> ext_resp,
                 int n_groups)
      : spec_(spec), n_(data.n), n_groups_(n_groups),
        ext_counts_(std::move(ext_counts)), ext_resp_(std::move(ext_resp)) {
    require_binary_outcomes(data.outcomes, "binary statistic");
    group_.resize(n_);
    group_count_.assign(n_groups_, 0);
    group_resp_.assign(n_groups_, 0);
    outcome_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      int g = n_groups_ == 1
                  ? 0
                  : indicator_group(data.covariate_row(i), n_groups_);
      group_[i] = g;
      outcome_[i] = static_cast<int>(data.outcomes[i]);
      group_count_[g] += 1;
      group_resp_[g] += outcome_[i];
    }
  }

  double evaluate(std::span<const int> assignments,
                  RngStream* ) const override {
    std::vector<long> n1(n_groups_, 0), s1(n_groups_, 0);
    for (int i = 0; i < n_; ++i) {
      if (assignments[i]) {
        n1[group_[i]] += 1;
        s1[group_[i]] += outcome_[i];
      }
    }
    SubgroupBinaryCounts counts;
    counts.groups.resize(n_groups_);
    for (int g = 0; g < n_groups_; ++g) {
      BinaryCounts& c = counts.groups[g];
      c.n1 = n1[g];
      c.s1 = s1[g];
      c.n0 = group_count_[g] - n1[g];
      c.s0 = group_resp_[g] - s1[g];
      c.nE = ext_counts_[g];
      c.sE = ext_resp_[g];
    }
    counts.validate();
    if (spec_.kind == StatKind::m) {
      return stat_m_binary_subgroups(counts);
    }
    return stat_m1_binary_subgroups(counts, spec_.direction, spec_.threshold);
  }

 private:
  StatisticSpec spec_;
  int n_;
  int n_groups_;
  std::vector<long> ext_counts_, ext_resp_;
  std::vector<int> group_;
  std::vector<int> outcome_;
  std::vector<long> group_count_, group_resp_;
};

class BinaryModel final : public StatisticModel {
 public:
  BinaryModel(const StatisticSpec& spec, const ExternalDataset& ext) {
    subgrouped_ = spec.family == Family::beta_bernoulli_subgroups;
    if (spec.kind == StatKind::m2) {
      throw ConfigError("the binary working model supports kinds m and m1");
    }
    d_ = ext.d;
    int n_groups = subgrouped_ ? d_ + 1 : 1;
    ext_counts_.assign(n_groups, 0);
    ext_resp_.assign(n_groups, 0);
    require_binary_outcomes(ext.outcomes, "binary statistic");
    if (!ext.all_control()) {
      throw DataError("binary statistic: external cohort must be all-control");
    }
    for (int i = 0; i < ext.n; ++i) {
      int g = subgrouped_ ? indicator_group(ext.covariate_row(i), n_groups)
                          : 0;
      ext_counts_[g] += 1;
      ext_resp_[g] += static_cast<long>(ext.outcomes[i]);
    }
  }

  std::unique_ptr<PreparedStatistic> prepare(
      const StatisticSpec& spec, const TrialDataset& data) const override {
    if (subgrouped_ && data.d != d_) {
      throw DataError("binary statistic: covariate dimension mismatch");
    }
    int n_groups = subgrouped_ ? data.d + 1 : 1;
    return std::make_unique<BinaryPrepared>(spec, data, ext_counts_,
                                            ext_resp_, n_groups);
  }

 private:
  bool subgrouped_ = false;
  int d_ = 0;
  std::vector<long> ext_counts_, ext_resp_;
};

// ---- gaussian family ----

class GaussianPrepared final : public PreparedStatistic {
 public:
  GaussianPrepared(const StatisticSpec& spec, const TrialDataset& data,
                   const GaussianPosterior& posterior)
      : spec_(spec), n_(data.n), d_(data.d), q_(data.d + 1) {
    if (posterior.d != data.d) {
      throw DataError("gaussian statistic: covariate dimension mismatch");
    }
    const double scale = 1.0 / std::sqrt(spec.outcome_variance);
    base_rows_.assign(static_cast<std::size_t>(n_) * q_, 0.0);
    y_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      double* b = base_rows_.data() + static_cast<std::size_t>(i) * q_;
      b[0] = 1.0;
      for (int j = 0; j < d_; ++j) b[j + 1] = data.covariate(i, j);
      y_[i] = data.outcomes[i] * scale;
    }

    const int p = 2 * q_;
    precision_base_ = SymmetricMatrix(p);
    rhs_base_.assign(p, 0.0);
    SymmetricMatrix btb(q_);
    std::vector<double> bty(q_, 0.0);
    for (int i = 0; i < n_; ++i) {
      std::span<const double> b(
          base_rows_.data() + static_cast<std::size_t>(i) * q_,
          static_cast<std::size_t>(q_));
      btb.add_outer(b);
      for (int j = 0; j < q_; ++j) bty[j] += y_[i] * b[j];
    }
    for (int i = 0; i < q_; ++i) {
      for (int j = 0; j <= i; ++j) {
        precision_base_.at(i, j) =
            btb.at(i, j) + posterior.control_precision.at(i, j);
      }
      precision_base_.at(q_ + i, q_ + i) = 1.0 / posterior.prior_variance;
      rhs_base_[i] = bty[i] + posterior.control_rhs[i];
    }

    if (spec_.kind != StatKind::m) setup_effects(data);
  }

  double evaluate(std::span<const int> assignments,
                  RngStream* stream) const override {
    const int p = 2 * q_;
    SymmetricMatrix precision = precision_base_;
    std::vector<double> rhs = rhs_base_;
    for (int i = 0; i < n_; ++i) {
      if (!assignments[i]) continue;
      const double* b = base_rows_.data() + static_cast<std::size_t>(i) * q_;
      // Treated rows contribute b b^T to the off-diagonal and treatment
      // blocks of the design cross-product, and y b to the treatment rhs.
      for (int r = 0; r < q_; ++r) {
        double br = b[r];
        for (int c = 0; c <= r; ++c) precision.at(q_ + r, q_ + c) += br * b[c];
        for (int c = 0; c < q_; ++c) precision.at(q_ + r, c) += br * b[c];
        rhs[q_ + r] += y_[i] * br;
      }
    }

    CholeskyFactor chol(precision);
    std::vector<double> w = chol.forward_solve(rhs);
    if (spec_.kind == StatKind::m) {
      return 0.5 * dot(w, w) - 0.5 * chol.log_det();
    }

    // Full posterior of the coefficients: N(mu, precision^{-1}).
    std::vector<double> mu = chol.back_solve(w);
    const int k = static_cast<int>(effect_coords_.size());
    std::vector<double> effect_mean(k);
    SymmetricMatrix effect_cov(k);
    std::vector<double> t(p, 0.0);
    std::vector<std::vector<double>> cols(k);
    for (int a = 0; a < k; ++a) {
      std::fill(t.begin(), t.end(), 0.0);
      for (int coord : effect_coords_[a]) t[coord] = 1.0;
      cols[a] = chol.solve(t);
      effect_mean[a] = 0;
      for (int coord : effect_coords_[a]) effect_mean[a] += mu[coord];
    }
    for (int a = 0; a < k; ++a) {
      for (int b2 = 0; b2 <= a; ++b2) {
        double v = 0;
        for (int coord : effect_coords_[b2]) v += cols[a][coord];
        effect_cov.at(a, b2) = v;
      }
    }

    CholeskyFactor effect_chol(effect_cov);
    const double sign = spec_.direction == Direction::positive ? 1.0 : -1.0;
    const long draws = spec_.mc_draws;
    double acc = 0;
    std::vector<double> eff(k);
    for (long it = 0; it < draws; ++it) {
      for (int a = 0; a < k; ++a) eff[a] = draw_normal(*stream);
      // effect = mean + L z, in place.
      for (int a = k - 1; a >= 0; --a) {
        double s = effect_mean[a];
        for (int b2 = 0; b2 <= a; ++b2) s += effect_chol.l_at(a, b2) * eff[b2];
        eff[a] = s;
      }
      if (spec_.kind == StatKind::m1) {
        for (int a = 0; a < k; ++a) {
          if (sign * eff[a] > spec_.threshold) {
            acc += 1;
            break;
          }
        }
      } else {
        double regret = 0;
        for (int a = 0; a < k; ++a) {
          double e = sign * eff[a];
          if (e > 0) regret += weights_[a] * e;
        }
        acc += regret;
      }
    }
    return acc / draws;
  }

 private:
  void setup_effects(const TrialDataset& data) {
    int k;
    if (!spec_.prevalences.empty()) {
      k = static_cast<int>(spec_.prevalences.size());
      weights_ = spec_.prevalences;
    } else {
      k = d_ + 1;
      // Empirical subgroup shares from the indicator block.
      std::vector<long> counts(k, 0);
      for (int i = 0; i < n_; ++i) {
        counts[indicator_group(data.covariate_row(i), k)] += 1;
      }
      weights_.resize(k);
      for (int g = 0; g < k; ++g) {
        weights_[g] = static_cast<double>(counts[g]) / n_;
      }
    }
    if (k - 1 > d_) {
      throw ConfigError("more subgroups than interaction coefficients");
    }
    if (spec_.kind == StatKind::m2) {
      double sum = 0;
      for (double w : weights_) {
        if (w < 0) throw ConfigError("prevalences must be nonnegative");
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("prevalences must sum to 1");
      }
    }
    effect_coords_.resize(k);
    for (int g = 0; g < k; ++g) {
      effect_coords_[g] = {q_};  // the treatment main effect
      if (g > 0) effect_coords_[g].push_back(q_ + g);
    }
  }

  StatisticSpec spec_;
  int n_, d_, q_;
  std::vector<double> base_rows_;  // n x (d+1): (1, x)
  std::vector<double> y_;
  SymmetricMatrix precision_base_;
  std::vector<double> rhs_base_;
  std::vector<std::vector<int>> effect_coords_;
  std::vector<double> weights_;
};

class GaussianModel final : public StatisticModel {
 public:
  GaussianModel(const StatisticSpec& spec, const ExternalDataset& ext) {
    if (!(spec.outcome_variance > 0)) {
      throw ConfigError("outcome variance must be positive");
    }
    ExternalDataset scaled = ext;
    if (spec.outcome_variance != 1.0) {
      double scale = 1.0 / std::sqrt(spec.outcome_variance);
      for (double& y : scaled.outcomes) y *= scale;
    }
    posterior_ = fit_gaussian_posterior(scaled, spec.prior_variance);
  }
  explicit GaussianModel(GaussianPosterior posterior)
      : posterior_(std::move(posterior)) {}

  std::unique_ptr<PreparedStatistic> prepare(
      const StatisticSpec& spec, const TrialDataset& data) const override {
    return std::make_unique<GaussianPrepared>(spec, data, posterior_);
  }

 private:
  GaussianPosterior posterior_;
};

// ---- logistic family ----

struct EffectCell {
  std::vector<double> pattern;  // interaction-covariate values
  std::vector<int> rows;
  double weight = 0;
};

class LogisticPrepared final : public PreparedStatistic {
 public:
  LogisticPrepared(const StatisticSpec& spec, const TrialDataset& data,
                   const LogisticLayout& layout, const GlmData* ext_block,
                   const std::vector<double>* offset_coefficients)
      : spec_(spec), layout_(layout), ext_block_(ext_block), n_(data.n) {
    require_binary_outcomes(data.outcomes, "logistic statistic");
    data_ = &data;
    if (offset_coefficients) {
      offsets_.resize(n_);
      for (int i = 0; i < n_; ++i) {
        double o = (*offset_coefficients)[0];
        for (int j = 0; j < data.d; ++j) {
          o += (*offset_coefficients)[j + 1] * data.covariate(i, j);
        }
        offsets_[i] = o;
      }
      reduced_ = true;
    }
    if (spec_.kind != StatKind::m) setup_cells(data);
  }

  double evaluate(std::span<const int> assignments,
                  RngStream* stream) const override {
    GlmData trial_block =
        reduced_ ? build_offset_trial_block(*data_, assignments, layout_,
                                            offsets_)
                 : build_trial_block(*data_, assignments, layout_, nullptr);
    std::vector<const GlmData*> blocks{&trial_block};
    if (ext_block_) blocks.push_back(ext_block_);
    const int p = trial_block.p;

    OptimizationReport report =
        fit_logistic_glm(blocks, spec_.prior_variance, p);
    if (!report.converged) {
      throw NumericalError("logistic statistic: MAP fit did not converge");
    }
    double value = logistic_log_density(blocks, spec_.prior_variance, report.mode,
                                   nullptr, nullptr);
    if (spec_.kind == StatKind::m) {
      return laplace_log_evidence(report, value);
    }
    return monte_carlo_statistic(report, trial_block, p, stream);
  }

 private:
  void setup_cells(const TrialDataset& data) {
    const int ni = static_cast<int>(layout_.interaction_cols.size());
    for (int i = 0; i < n_; ++i) {
      std::vector<double> pattern(ni);
      for (int j = 0; j < ni; ++j) {
        pattern[j] = data.covariate(i, layout_.interaction_cols[j]);
      }
      auto it = std::find_if(cells_.begin(), cells_.end(),
                             [&](const EffectCell& c) {
                               return c.pattern == pattern;
                             });
      if (it == cells_.end()) {
        cells_.push_back(EffectCell{std::move(pattern), {i}, 0});
      } else {
        it->rows.push_back(i);
      }
    }
    std::sort(cells_.begin(), cells_.end(),
              [](const EffectCell& a, const EffectCell& b) {
                return a.pattern > b.pattern;  // lexicographic, descending
              });
    if (!spec_.prevalences.empty()) {
      if (spec_.prevalences.size() != cells_.size()) {
        throw ConfigError(
            "prevalences length does not match the number of subgroups "
            "present in the data (" +
            std::to_string(cells_.size()) + ")");
      }
      for (std::size_t c = 0; c < cells_.size(); ++c) {
        cells_[c].weight = spec_.prevalences[c];
      }
    } else {
      for (auto& cell : cells_) {
        cell.weight = static_cast<double>(cell.rows.size()) / n_;
      }
    }
  }

  double monte_carlo_statistic(const OptimizationReport& report,
                               const GlmData& trial_block, int p,
                               RngStream* stream) const {
    SymmetricMatrix neg_hess(p);
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j <= i; ++j) neg_hess.at(i, j) = -report.hessian.at(i, j);
    }
    CholeskyFactor chol(neg_hess);

    // Per-cell treatment coordinates: a plus the interaction pattern.
    const int ni = static_cast<int>(layout_.interaction_cols.size());
    const int a_idx = reduced_ ? static_cast<int>(layout_.bias_cols.size())
                               : layout_.a_index();
    const int int_base = a_idx + 1;
    const double sign = spec_.direction == Direction::positive ? 1.0 : -1.0;

    // Baseline (control) linear predictor structure per row: offset plus
    // the non-treatment coordinates of the design.
    const long draws = spec_.mc_draws;
    std::vector<double> z(p), theta(p), eta0(n_);
    double acc = 0;
    for (long it = 0; it < draws; ++it) {
      for (int j = 0; j < p; ++j) z[j] = draw_normal(*stream);
      // theta = mode + L^{-T} z: a draw from N(mode, (-H)^{-1}).
      for (int i = p - 1; i >= 0; --i) {
        double s = z[i];
        for (int k2 = i + 1; k2 < p; ++k2) s -= chol.l_at(k2, i) * theta[k2];
        theta[i] = s / chol.l_at(i, i);
      }
      for (int j = 0; j < p; ++j) theta[j] += report.mode[j];

      if (spec_.kind == StatKind::m1) {
        bool hit = false;
        for (const auto& cell : cells_) {
          double delta = theta[a_idx];
          for (int j = 0; j < ni; ++j) {
            delta += theta[int_base + j] * cell.pattern[j];
          }
          if (sign * delta > spec_.threshold) {
            hit = true;
            break;
          }
        }
        if (hit) acc += 1;
        continue;
      }

      // m2: response-rate regret, averaged within each subgroup cell.
      for (int i = 0; i < n_; ++i) {
        const double* zr =
            trial_block.design.data() + static_cast<std::size_t>(i) * p;
        double e = trial_block.offsets.empty() ? 0.0 : trial_block.offsets[i];
        for (int j = 0; j < a_idx; ++j) e += zr[j] * theta[j];
        eta0[i] = e;
      }
      double regret = 0;
      for (const auto& cell : cells_) {
        double delta_eta = theta[a_idx];
        for (int j = 0; j < ni; ++j) {
          delta_eta += theta[int_base + j] * cell.pattern[j];
        }
        double mean_diff = 0;
        for (int row : cell.rows) {
          mean_diff += expit(eta0[row] + delta_eta) - expit(eta0[row]);
        }
        mean_diff /= static_cast<double>(cell.rows.size());
        double e = sign * mean_diff;
        if (e > 0) regret += cell.weight * e;
      }
      acc += regret;
    }
    return acc / draws;
  }

  StatisticSpec spec_;
  LogisticLayout layout_;
  const GlmData* ext_block_;
  const TrialDataset* data_;
  int n_;
  bool reduced_ = false;
  std::vector<double> offsets_;
  std::vector<EffectCell> cells_;
};

class LogisticModel final : public StatisticModel {
 public:
  LogisticModel(const StatisticSpec& spec, const ExternalDataset& ext)
      : d_(ext.d), has_ext_(ext.n > 0) {
    layout_ = make_layout(ext.d, spec.logistic, has_ext_);
    if (has_ext_) {
      ext_block_ = build_external_block(ext, layout_);
    }
  }
  // Infinite external data: frozen offset coefficients from a source
  // population.
  LogisticModel(const StatisticSpec& spec, const ExternalDataset& source,
                double prior_variance)
      : d_(source.d), has_ext_(false), reduced_(true) {
    layout_ = make_layout(source.d, spec.logistic, /*with_bias=*/true);
    offset_coefficients_ = fit_logistic_offset(source, prior_variance);
  }

  std::unique_ptr<PreparedStatistic> prepare(
      const StatisticSpec& spec, const TrialDataset& data) const override {
    if (data.d != d_ && (has_ext_ || reduced_)) {
      throw DataError("logistic statistic: covariate dimension mismatch");
    }
    LogisticLayout layout =
        (has_ext_ || reduced_) ? layout_
                               : make_layout(data.d, spec.logistic, false);
    return std::make_unique<LogisticPrepared>(
        spec, data, layout, has_ext_ ? &ext_block_ : nullptr,
        reduced_ ? &offset_coefficients_ : nullptr);
  }

 private:
  int d_;
  bool has_ext_;
  bool reduced_ = false;
  LogisticLayout layout_;
  GlmData ext_block_;
  std::vector<double> offset_coefficients_;
};

}  // namespace

bool FittedStatistic::uses_mc() const {
  if (spec_.kind == StatKind::m) return false;
  return spec_.family == Family::gaussian_linear ||
         spec_.family == Family::logistic_laplace;
}

std::unique_ptr<PreparedStatistic> FittedStatistic::prepare(
    const TrialDataset& data) const {
  if (!model_) throw ConfigError("FittedStatistic is empty");
  return model_->prepare(spec_, data);
}

double FittedStatistic::evaluate(const TrialDataset& data,
                                 std::span<const int> assignments,
                                 RngStream* stream) const {
  return prepare(data)->evaluate(assignments, stream);
}

FittedStatistic FittedStatistic::make(const StatisticSpec& spec,
                                      const ExternalDataset& ext) {
  FittedStatistic stat;
  stat.spec_ = spec;
  switch (spec.family) {
    case Family::beta_bernoulli:
    case Family::beta_bernoulli_subgroups:
      stat.model_ = std::make_shared<BinaryModel>(spec, ext);
      break;
    case Family::gaussian_linear:
      stat.model_ = std::make_shared<GaussianModel>(spec, ext);
      break;
    case Family::logistic_laplace:
      stat.model_ = std::make_shared<LogisticModel>(spec, ext);
      break;
  }
  return stat;
}

FittedStatistic FittedStatistic::make_infinite_ed(
    const StatisticSpec& spec, const ExternalDataset& source) {
  if (spec.family != Family::logistic_laplace) {
    throw ConfigError(
        "the infinite-external-data statistic uses the logistic family");
  }
  FittedStatistic stat;
  stat.spec_ = spec;
  stat.model_ =
      std::make_shared<LogisticModel>(spec, source, spec.prior_variance);
  return stat;
}

double stat_m_gaussian(const TrialDataset& data,
                       std::span<const int> assignments,
                       const GaussianPosterior& posterior) {
  StatisticSpec spec;
  spec.family = Family::gaussian_linear;
  spec.kind = StatKind::m;
  spec.prior_variance = posterior.prior_variance;
  GaussianPrepared prepared(spec, data, posterior);
  return prepared.evaluate(assignments, nullptr);
}

}  // namespace edpt
