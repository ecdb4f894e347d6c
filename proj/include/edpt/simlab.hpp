#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "edpt/dataset.hpp"
#include "edpt/models.hpp"
#include "edpt/rng.hpp"

namespace edpt {

// ---------------------------------------------------------------------------
// Scenario definitions.

// Binary outcomes, no covariates: A ~ Bernoulli(1/(1+r)),
// Y | A ~ Bernoulli(w0 + gamma A), external Y ~ Bernoulli(w0 + beta0).
struct BinaryScenario {
  long n = 100;
  double r = 0.5;
  long nE = 500;
  double w0 = 0.5;
  double gamma = 0;
  double beta0 = 0;
};

// Binary outcomes with K subgroups given by indicator covariates.
struct BinarySubgroupScenario {
  long n = 150;
  double r = 0.5;
  long nE = 750;
  double w0 = 0.5;
  double gamma = 0;
  std::vector<double> gamma1;  // length K-1
  std::vector<double> beta1;   // length K-1
  double beta00 = 0;
  std::vector<double> beta01;  // length K-1
  std::vector<double> rho;     // length K, sums to 1
};

// Continuous outcomes, unit variance; subgroup indicators plus optional
// iid N(0,1) covariates appended.
struct LinearScenario {
  long n = 150;
  double r = 0.5;
  long nE = 750;
  double eta0 = 0;
  double gamma = 0;
  std::vector<double> gamma1;  // length d = (K-1) + continuous_covariates
  std::vector<double> beta1;   // length d
  double beta00 = 0;
  std::vector<double> beta01;  // length d
  std::vector<double> rho;     // length K
  int continuous_covariates = 0;
};

enum class GbmSourceKind { avaglio_like, dfci_like };

struct GbmSourceSpec {
  GbmSourceKind kind = GbmSourceKind::avaglio_like;
  long n = 337;
};

// Bootstrap-resampling study: in-silico trial drawn from a source cohort,
// treatment effects injected subgroup-wise on the log-odds-ratio scale.
struct ResampleScenario {
  long n = 150;
  double r = 0.5;
  long nE = 250;
  std::array<double, 4> lor{0, 0, 0, 0};
  GbmSourceSpec id_source{GbmSourceKind::avaglio_like, 337};
  GbmSourceSpec ed_source{GbmSourceKind::dfci_like, 321};
  std::uint64_t source_seed = 1;
};

using Scenario = std::variant<BinaryScenario, BinarySubgroupScenario,
                              LinearScenario, ResampleScenario>;

// ---------------------------------------------------------------------------
// Generators.

std::pair<TrialDataset, ExternalDataset> gen_binary_trial(
    const BinaryScenario& cfg, RngStream& stream);
std::pair<TrialDataset, ExternalDataset> gen_binary_subgroup_trial(
    const BinarySubgroupScenario& cfg, RngStream& stream);
std::pair<TrialDataset, ExternalDataset> gen_linear_trial(
    const LinearScenario& cfg, RngStream& stream);

// Probability that a negative outcome (positive LOR) or positive outcome
// (negative LOR) is relabeled so the response rate moves by the given
// log-odds ratio from baseline h.
double lor_to_relabel_prob(double h, double lor);

// GBM subgroup from the MGMT and KPS indicators:
// 1 = MGMT+/KPS high, 2 = MGMT+/KPS low, 3 = MGMT-/KPS high,
// 4 = MGMT-/KPS low.
int gbm_subgroup(double mgmt, double kps);

// Synthetic cohort with the published subgroup frequencies and response
// rates. Covariates: x1 age, x2 sex, x3 resection extent, x4 MGMT,
// x5 KPS, x6 MGMT*KPS.
ExternalDataset synthetic_gbm_source(GbmSourceKind kind, long n,
                                     std::uint64_t seed);

// Per-subgroup response rates of a source cohort (NaN for empty subgroups).
std::array<double, 4> gbm_subgroup_rates(const ExternalDataset& source);

// Bootstrap n rows from the source, assign round(n/(1+r)) patients to the
// experimental arm uniformly at random, then relabel experimental-arm
// outcomes subgroup-wise to match the requested log-odds ratios.
TrialDataset resample_in_silico(const ExternalDataset& source, long n,
                                double r, const std::array<double, 4>& lor,
                                RngStream& stream);

// Bootstrap an external cohort (all control).
ExternalDataset gen_external_resample(const ExternalDataset& source, long nE,
                                      RngStream& stream);

// ---------------------------------------------------------------------------
// Rejection-rate estimation.

struct RunSettings {
  long replicates = 2000;
  long permutations = 1000;
  double alpha = 0.05;
  std::uint64_t master_seed = 1;
  int workers = 1;
  // Abort when the inapplicable fraction of any test exceeds this.
  double inapplicable_abort_fraction = 0.01;
};

struct PowerEstimate {
  double rejection_rate = 0;
  double mc_se = 0;
  long replicates = 0;  // applicable replicates
  long inapplicable_count = 0;
};

// Binds a scenario (materializing any source cohorts) and runs named tests
// over replicated in-silico trials. Replicate r draws its data from stream
// (master_seed, 0xFFFFFFFF00000000 | r) and test t consumes streams under
// (master_seed, ((t+1) << 32) | r), so results are independent of the
// worker count.
class ScenarioLab {
 public:
  ScenarioLab(Scenario scenario, StatisticSpec statistic);

  const Scenario& scenario() const { return scenario_; }
  const StatisticSpec& statistic() const { return statistic_; }

  std::pair<TrialDataset, ExternalDataset> generate(RngStream& stream) const;

  // Tests valid for this scenario family.
  std::vector<std::string> allowed_tests() const;

  PowerEstimate estimate_rejection_rate(const std::string& test,
                                        const RunSettings& settings) const;
  // Runs several tests on shared per-replicate data.
  std::vector<PowerEstimate> estimate_many(
      const std::vector<std::string>& tests,
      const RunSettings& settings) const;

  // Arbitrary decision rule plugged into the same replication harness;
  // throw TestInapplicable to skip a replicate.
  using DecisionFn = std::function<bool(
      const TrialDataset&, const ExternalDataset&, const SeedSpec&)>;
  PowerEstimate estimate_custom(const DecisionFn& decide,
                                const RunSettings& settings) const;

 private:
  struct Runner;
  Runner make_runner(const std::string& test,
                     const RunSettings& settings) const;
  std::vector<PowerEstimate> run_replications(
      const std::vector<Runner>& runners, const RunSettings& settings) const;

  Scenario scenario_;
  StatisticSpec statistic_;
  ExternalDataset id_source_;  // resample scenarios only
  ExternalDataset ed_source_;
};

// ---------------------------------------------------------------------------
// Config-driven experiments.

// Runs the JSON experiment config (documented in the README): a base
// scenario, a grid of parameter overrides, and a list of tests. Writes one
// CSV row per (grid point, test) and a JSON manifest next to the CSV.
// Returns the number of CSV rows written. workers_override > 0 replaces the
// config's worker count (results do not depend on it).
long run_experiment_json(const std::string& config_json,
                         const std::string& out_csv_path,
                         int workers_override = 0);
long run_experiment_file(const std::string& config_path,
                         const std::string& out_csv_path,
                         int workers_override = 0);

}  // namespace edpt
