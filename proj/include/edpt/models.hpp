#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "edpt/dataset.hpp"
#include "edpt/linalg.hpp"
#include "edpt/newton.hpp"
#include "edpt/rng.hpp"

namespace edpt {

enum class Family {
  beta_bernoulli,
  beta_bernoulli_subgroups,
  gaussian_linear,
  logistic_laplace,
};

enum class StatKind { m, m1, m2 };
enum class Direction { positive, negative };

// ---------------------------------------------------------------------------
// Count summaries for the binary working model.

struct BinaryCounts {
  long n1 = 0, s1 = 0, n0 = 0, s0 = 0, nE = 0, sE = 0;
  void validate() const;  // s1<=n1, s0<=n0, sE<=nE, n1>=1, all >= 0
};

struct SubgroupBinaryCounts {
  std::vector<BinaryCounts> groups;  // per-group n1 may be 0; total n1 >= 1
  void validate() const;
};

// ---------------------------------------------------------------------------
// External-data posteriors.

struct BetaPosterior {
  double alpha = 1;
  double beta = 1;
};

// Conjugate posterior of the control response rate given an all-control
// binary external cohort: Beta(sE + 1, nE - sE + 1).
BetaPosterior fit_beta_posterior(const ExternalDataset& ext);

// Gaussian conjugate posterior of the linear working-model coefficients
// (theta_0, theta_x, theta_a, theta_ax), dimension 2(d+1). The treatment
// block keeps its N(0, sigma2 I) prior; the control block is updated by the
// external regression of Y_E on (1, X_E) with unit outcome variance.
struct GaussianPosterior {
  std::vector<double> mean;        // length 2(d+1)
  SymmetricMatrix covariance;      // 2(d+1) x 2(d+1), block diagonal
  SymmetricMatrix control_precision;  // X~_E^T X~_E + sigma^{-2} I, (d+1)
  std::vector<double> control_rhs;    // X~_E^T Y_E
  double prior_variance = 100;
  int d = 0;
};

GaussianPosterior fit_gaussian_posterior(const ExternalDataset& ext,
                                         double prior_variance);

// ---------------------------------------------------------------------------
// Closed-form statistics on count summaries.

// log marginal likelihood of the trial outcomes under the Beta-Bernoulli
// working model with the external posterior folded into the control arm.
double stat_m_binary(const BinaryCounts& c);
double stat_m_binary_subgroups(const SubgroupBinaryCounts& c);

// Pr(theta1 - theta0 > threshold) for independent Beta(a1,b1), Beta(a0,b0),
// by deterministic 1-D quadrature.
double beta_diff_probability(double a1, double b1, double a0, double b0,
                             double threshold);

// Posterior probability that some subgroup's treatment effect exceeds the
// threshold in the given direction; independent Beta posteriors combined by
// inclusion-exclusion.
double stat_m1_binary(const BinaryCounts& c, Direction direction,
                      double threshold);
double stat_m1_binary_subgroups(const SubgroupBinaryCounts& c,
                                Direction direction, double threshold);

// ---------------------------------------------------------------------------
// Logistic working model (Laplace approximation).

// Declares which covariates interact with treatment in the trial model and
// which external-model coefficients get an additive bias term. The default
// is the six-covariate map used for the GBM study: interactions with
// x4, x5, x6 and bias terms on x3, x6 (0-based below).
struct LogisticModelSpec {
  std::vector<int> interaction_columns = {3, 4, 5};
  std::vector<int> ed_bias_columns = {2, 5};
};

struct LaplaceFit {
  std::vector<double> map_estimate;
  SymmetricMatrix neg_hessian;  // positive definite at the mode
  double log_statistic = 0;     // Laplace log evidence, ED normalizer dropped
  OptimizationReport report;
};

// Joint MAP fit of the shared-coefficient logistic model on the trial data
// (with the given assignment vector) and the external cohort, followed by
// the Laplace evidence approximation.
LaplaceFit fit_logistic_laplace(const TrialDataset& data,
                                std::span<const int> assignments,
                                const ExternalDataset& ext,
                                const LogisticModelSpec& model,
                                double prior_variance);

// MAP fit of a treatment-free logistic regression (intercept + covariates)
// on a source population; the coefficients serve as frozen offsets for the
// infinite-external-data statistic.
std::vector<double> fit_logistic_offset(const ExternalDataset& source,
                                        double prior_variance);

// Shared Laplace evidence assembly: (p/2) log 2*pi - 0.5 log|-H| + value at
// the mode. Throws unless the report converged.
double laplace_log_evidence(const OptimizationReport& report,
                            double value_at_mode);

// Dense Bernoulli regression block: logit = offset + z . theta.
struct GlmData {
  std::vector<double> design;    // rows x p, row-major
  std::vector<double> outcomes;  // 0/1
  std::vector<double> offsets;   // empty = all zero
  int rows = 0;
  int p = 0;
};

// Log posterior over the stacked blocks, N(0, prior_variance I) prior with
// its normalizer included; an infinite prior variance gives the plain log
// likelihood. Fills gradient/Hessian when the pointers are non-null.
double logistic_log_density(std::span<const GlmData* const> blocks,
                            double prior_variance,
                            std::span<const double> theta,
                            std::vector<double>* grad, SymmetricMatrix* hess);
double logistic_log_likelihood(std::span<const GlmData* const> blocks,
                               std::span<const double> theta);
// Newton fit from a zero start; MAP, or MLE when prior_variance is infinite.
OptimizationReport fit_logistic_glm(std::span<const GlmData* const> blocks,
                                    double prior_variance, int p);

// ---------------------------------------------------------------------------
// Statistic specification and the permutable statistic object.

struct StatisticSpec {
  Family family = Family::beta_bernoulli;
  StatKind kind = StatKind::m;
  Direction direction = Direction::positive;
  double threshold = 0.0;
  int mc_draws = 10000;
  double prior_variance = 100.0;
  double outcome_variance = 1.0;  // gaussian family: rescales outcomes
  // Subgroup weights for m2 (and the subgroup count for m1). Empty means:
  // infer the subgroups from the data and use empirical prevalences.
  std::vector<double> prevalences;
  // When true every permutation reuses one sample stream instead of a
  // per-permutation stream (sensitivity-check policy).
  bool shared_mc_stream = false;
  LogisticModelSpec logistic;
};

// A statistic bound to one trial dataset, evaluable on any assignment
// vector. Evaluation is pure given (assignments, stream). May reference the
// dataset it was prepared from; keep that dataset alive.
class PreparedStatistic {
 public:
  virtual ~PreparedStatistic() = default;
  virtual double evaluate(std::span<const int> assignments,
                          RngStream* stream) const = 0;
};

// A test statistic closed over the external-data posterior. prepare() binds
// it to a trial dataset; evaluate() is a one-shot convenience.
class FittedStatistic {
 public:
  FittedStatistic() = default;

  const StatisticSpec& spec() const { return spec_; }
  // Whether evaluation consumes random draws (m1/m2 for the gaussian and
  // logistic families).
  bool uses_mc() const;

  std::unique_ptr<PreparedStatistic> prepare(const TrialDataset& data) const;
  double evaluate(const TrialDataset& data, std::span<const int> assignments,
                  RngStream* stream = nullptr) const;

  static FittedStatistic make(const StatisticSpec& spec,
                              const ExternalDataset& ext);
  // Statistic whose external information is a whole source population
  // (logistic family; frozen offset coefficients).
  static FittedStatistic make_infinite_ed(const StatisticSpec& spec,
                                          const ExternalDataset& source);

 private:
  friend class StatisticModel;
  StatisticSpec spec_;
  std::shared_ptr<const class StatisticModel> model_;
};

// Direct evaluations used by tests and the baselines module.
double stat_m_gaussian(const TrialDataset& data,
                       std::span<const int> assignments,
                       const GaussianPosterior& posterior);

}  // namespace edpt
