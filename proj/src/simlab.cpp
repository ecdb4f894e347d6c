#include "edpt/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "edpt/baselines.hpp"
#include "edpt/errors.hpp"
#include "edpt/numerics.hpp"
#include "edpt/parallel.hpp"
#include "edpt/perm.hpp"

namespace edpt {

namespace {

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError(what + " = " + std::to_string(p) +
                      " is not a valid probability");
  }
}

int draw_categorical(std::span<const double> weights, RngStream& stream) {
  double u = stream.uniform();
  double acc = 0;
  for (std::size_t g = 0; g + 1 < weights.size(); ++g) {
    acc += weights[g];
    if (u < acc) return static_cast<int>(g);
  }
  return static_cast<int>(weights.size()) - 1;
}

void check_rho(const std::vector<double>& rho, const std::string& what) {
  if (rho.empty()) throw ConfigError(what + ": rho must be nonempty");
  double sum = 0;
  for (double v : rho) {
    if (!(v > 0)) throw ConfigError(what + ": rho entries must be positive");
    sum += v;
  }
  if (std::abs(sum - 1) > 1e-9) {
    throw ConfigError(what + ": rho must sum to 1");
  }
}

std::vector<int> draw_assignments_iid(long n, double p_treat,
                                      RngStream& stream) {
  std::vector<int> a(n);
  for (;;) {
    int n1 = 0;
    for (long i = 0; i < n; ++i) {
      a[i] = stream.bernoulli(p_treat) ? 1 : 0;
      n1 += a[i];
    }
    // Redraw the (probability ~0) degenerate allocations so the dataset
    // invariant holds.
    if (n1 > 0 && n1 < n) return a;
  }
}

}  // namespace

std::pair<TrialDataset, ExternalDataset> gen_binary_trial(
    const BinaryScenario& cfg, RngStream& stream) {
  if (cfg.n < 2) throw ConfigError("binary scenario: n must be >= 2");
  if (!(cfg.r > 0)) throw ConfigError("binary scenario: r must be positive");
  check_probability(cfg.w0, "w0");
  check_probability(cfg.w0 + cfg.gamma, "w0 + gamma");
  check_probability(cfg.w0 + cfg.beta0, "w0 + beta0");

  std::vector<int> a = draw_assignments_iid(cfg.n, 1.0 / (1.0 + cfg.r),
                                            stream);
  std::vector<double> y(cfg.n);
  for (long i = 0; i < cfg.n; ++i) {
    y[i] = stream.bernoulli(cfg.w0 + cfg.gamma * a[i]) ? 1.0 : 0.0;
  }
  std::vector<double> yE(cfg.nE);
  for (long i = 0; i < cfg.nE; ++i) {
    yE[i] = stream.bernoulli(cfg.w0 + cfg.beta0) ? 1.0 : 0.0;
  }
  return {TrialDataset::create(std::move(y), {}, std::move(a), 0),
          ExternalDataset::create(std::move(yE), {},
                                  std::vector<int>(cfg.nE, 0), 0)};
}

namespace {

struct SubgroupRates {
  std::vector<double> control, treated, external;
};

SubgroupRates subgroup_rates(double w0, double gamma,
                             const std::vector<double>& gamma1,
                             const std::vector<double>& beta1, double beta00,
                             const std::vector<double>& beta01, int k,
                             bool validate_probabilities) {
  SubgroupRates rates;
  rates.control.resize(k);
  rates.treated.resize(k);
  rates.external.resize(k);
  for (int g = 0; g < k; ++g) {
    double b1 = g > 0 ? beta1[g - 1] : 0.0;
    double g1 = g > 0 ? gamma1[g - 1] : 0.0;
    double b01 = g > 0 ? beta01[g - 1] : 0.0;
    rates.control[g] = w0 + b1;
    rates.treated[g] = w0 + b1 + gamma + g1;
    rates.external[g] = w0 + beta00 + b1 + b01;
    if (validate_probabilities) {
      check_probability(rates.control[g],
                        "control rate, subgroup " + std::to_string(g + 1));
      check_probability(rates.treated[g],
                        "treated rate, subgroup " + std::to_string(g + 1));
      check_probability(rates.external[g],
                        "external rate, subgroup " + std::to_string(g + 1));
    }
  }
  return rates;
}

std::vector<double> pad(const std::vector<double>& v, std::size_t len,
                        const std::string& what) {
  if (v.empty()) return std::vector<double>(len, 0.0);
  if (v.size() != len) {
    throw ConfigError(what + ": expected length " + std::to_string(len) +
                      ", got " + std::to_string(v.size()));
  }
  return v;
}

}  // namespace

std::pair<TrialDataset, ExternalDataset> gen_binary_subgroup_trial(
    const BinarySubgroupScenario& cfg, RngStream& stream) {
  check_rho(cfg.rho, "binary subgroup scenario");
  const int k = static_cast<int>(cfg.rho.size());
  const int d = k - 1;
  if (cfg.n < 2) throw ConfigError("binary subgroup scenario: n must be >= 2");
  std::vector<double> gamma1 = pad(cfg.gamma1, d, "gamma1");
  std::vector<double> beta1 = pad(cfg.beta1, d, "beta1");
  std::vector<double> beta01 = pad(cfg.beta01, d, "beta01");
  SubgroupRates rates = subgroup_rates(cfg.w0, cfg.gamma, gamma1, beta1,
                                       cfg.beta00, beta01, k, true);

  std::vector<int> a = draw_assignments_iid(cfg.n, 1.0 / (1.0 + cfg.r),
                                            stream);
  std::vector<double> y(cfg.n);
  std::vector<double> x(static_cast<std::size_t>(cfg.n) * d, 0.0);
  for (long i = 0; i < cfg.n; ++i) {
    int g = draw_categorical(cfg.rho, stream);
    if (g > 0) x[static_cast<std::size_t>(i) * d + (g - 1)] = 1.0;
    double p = a[i] ? rates.treated[g] : rates.control[g];
    y[i] = stream.bernoulli(p) ? 1.0 : 0.0;
  }
  std::vector<double> yE(cfg.nE);
  std::vector<double> xE(static_cast<std::size_t>(cfg.nE) * d, 0.0);
  for (long i = 0; i < cfg.nE; ++i) {
    int g = draw_categorical(cfg.rho, stream);
    if (g > 0) xE[static_cast<std::size_t>(i) * d + (g - 1)] = 1.0;
    yE[i] = stream.bernoulli(rates.external[g]) ? 1.0 : 0.0;
  }
  return {TrialDataset::create(std::move(y), std::move(x), std::move(a), d),
          ExternalDataset::create(std::move(yE), std::move(xE),
                                  std::vector<int>(cfg.nE, 0), d)};
}

std::pair<TrialDataset, ExternalDataset> gen_linear_trial(
    const LinearScenario& cfg, RngStream& stream) {
  check_rho(cfg.rho, "linear scenario");
  const int k = static_cast<int>(cfg.rho.size());
  if (cfg.continuous_covariates < 0) {
    throw ConfigError("linear scenario: continuous_covariates must be >= 0");
  }
  const int d = (k - 1) + cfg.continuous_covariates;
  if (cfg.n < 2) throw ConfigError("linear scenario: n must be >= 2");
  std::vector<double> gamma1 = pad(cfg.gamma1, d, "gamma1");
  std::vector<double> beta1 = pad(cfg.beta1, d, "beta1");
  std::vector<double> beta01 = pad(cfg.beta01, d, "beta01");

  auto draw_covariates = [&](std::vector<double>& x, long row) {
    int g = draw_categorical(cfg.rho, stream);
    double* r = x.data() + static_cast<std::size_t>(row) * d;
    if (g > 0) r[g - 1] = 1.0;
    for (int j = k - 1; j < d; ++j) r[j] = draw_normal(stream);
  };

  std::vector<int> a = draw_assignments_iid(cfg.n, 1.0 / (1.0 + cfg.r),
                                            stream);
  std::vector<double> y(cfg.n);
  std::vector<double> x(static_cast<std::size_t>(cfg.n) * d, 0.0);
  for (long i = 0; i < cfg.n; ++i) {
    draw_covariates(x, i);
    const double* r = x.data() + static_cast<std::size_t>(i) * d;
    double mean = cfg.eta0 + cfg.gamma * a[i];
    for (int j = 0; j < d; ++j) {
      mean += beta1[j] * r[j] + (a[i] ? gamma1[j] * r[j] : 0.0);
    }
    y[i] = mean + draw_normal(stream);
  }
  std::vector<double> yE(cfg.nE);
  std::vector<double> xE(static_cast<std::size_t>(cfg.nE) * d, 0.0);
  for (long i = 0; i < cfg.nE; ++i) {
    draw_covariates(xE, i);
    const double* r = xE.data() + static_cast<std::size_t>(i) * d;
    double mean = cfg.eta0 + cfg.beta00;
    for (int j = 0; j < d; ++j) mean += (beta1[j] + beta01[j]) * r[j];
    yE[i] = mean + draw_normal(stream);
  }
  return {TrialDataset::create(std::move(y), std::move(x), std::move(a), d),
          ExternalDataset::create(std::move(yE), std::move(xE),
                                  std::vector<int>(cfg.nE, 0), d)};
}

// ---------------------------------------------------------------------------
// GBM resampling study.

double lor_to_relabel_prob(double h, double lor) {
  if (!(h > 0 && h < 1)) {
    throw ConfigError("lor_to_relabel_prob: baseline rate must be in (0,1)");
  }
  if (lor == 0) return 0.0;
  double den = 1.0 + h * std::expm1(lor);  // = 1 - h + h e^lor
  if (lor > 0) {
    return h * std::expm1(lor) / den;
  }
  return -(1.0 - h) * std::expm1(lor) / den;
}

int gbm_subgroup(double mgmt, double kps) {
  if ((mgmt != 0 && mgmt != 1) || (kps != 0 && kps != 1)) {
    throw DataError("gbm_subgroup: MGMT and KPS must be 0/1");
  }
  if (mgmt == 1) return kps == 1 ? 1 : 2;
  return kps == 1 ? 3 : 4;
}

namespace {

constexpr int kMgmtCol = 3;  // x4
constexpr int kKpsCol = 4;   // x5

struct GbmTable {
  std::array<double, 4> freq;
  std::array<double, 4> rate;
};

GbmTable gbm_table(GbmSourceKind kind) {
  if (kind == GbmSourceKind::avaglio_like) {
    return {{0.23, 0.09, 0.48, 0.20}, {0.83, 0.70, 0.68, 0.48}};
  }
  return {{0.2960, 0.1838, 0.2866, 0.2336}, {0.84, 0.83, 0.81, 0.63}};
}

// Subgroup s -> (MGMT, KPS) indicators.
void subgroup_indicators(int s, double& mgmt, double& kps) {
  mgmt = (s == 1 || s == 2) ? 1.0 : 0.0;
  kps = (s == 1 || s == 3) ? 1.0 : 0.0;
}

}  // namespace

ExternalDataset synthetic_gbm_source(GbmSourceKind kind, long n,
                                     std::uint64_t seed) {
  if (n < 1) throw ConfigError("synthetic_gbm_source: n must be >= 1");
  GbmTable table = gbm_table(kind);
  RngStream stream(seed, 0);
  const int d = 6;
  std::vector<double> y(n);
  std::vector<double> x(static_cast<std::size_t>(n) * d);
  for (long i = 0; i < n; ++i) {
    int s = draw_categorical(table.freq, stream) + 1;
    double mgmt, kps;
    subgroup_indicators(s, mgmt, kps);
    double age;
    do {
      age = 58.0 + 10.0 * draw_normal(stream);
    } while (age < 18.0 || age > 90.0);
    double* row = x.data() + static_cast<std::size_t>(i) * d;
    row[0] = age;
    row[1] = stream.bernoulli(0.5) ? 1.0 : 0.0;  // sex
    row[2] = stream.bernoulli(0.5) ? 1.0 : 0.0;  // resection extent
    row[kMgmtCol] = mgmt;
    row[kKpsCol] = kps;
    row[5] = mgmt * kps;
    y[i] = stream.bernoulli(table.rate[s - 1]) ? 1.0 : 0.0;
  }
  return ExternalDataset::create(std::move(y), std::move(x),
                                 std::vector<int>(n, 0), d);
}

std::array<double, 4> gbm_subgroup_rates(const ExternalDataset& source) {
  std::array<double, 4> sums{0, 0, 0, 0};
  std::array<long, 4> counts{0, 0, 0, 0};
  for (int i = 0; i < source.n; ++i) {
    int s = gbm_subgroup(source.covariate(i, kMgmtCol),
                         source.covariate(i, kKpsCol));
    sums[s - 1] += source.outcomes[i];
    counts[s - 1] += 1;
  }
  std::array<double, 4> rates{};
  for (int s = 0; s < 4; ++s) {
    rates[s] = counts[s] > 0 ? sums[s] / counts[s]
                             : std::numeric_limits<double>::quiet_NaN();
  }
  return rates;
}

TrialDataset resample_in_silico(const ExternalDataset& source, long n,
                                double r, const std::array<double, 4>& lor,
                                RngStream& stream) {
  if (source.n < 1) throw DataError("resample_in_silico: empty source");
  if (n < 2) throw ConfigError("resample_in_silico: n must be >= 2");
  if (!(r > 0)) throw ConfigError("resample_in_silico: r must be positive");
  long n1 = std::lround(std::nearbyint(static_cast<double>(n) / (1.0 + r)));
  if (n1 < 1 || n1 >= n) {
    throw ConfigError("resample_in_silico: allocation leaves an empty arm");
  }

  // Relabel probabilities against the source subgroup rates; only needed
  // for subgroups with a nonzero log-odds ratio.
  std::array<double, 4> rates = gbm_subgroup_rates(source);
  std::array<double, 4> relabel{0, 0, 0, 0};
  for (int s = 0; s < 4; ++s) {
    if (lor[s] != 0) {
      if (!(rates[s] > 0 && rates[s] < 1)) {
        throw DataError("resample_in_silico: subgroup " + std::to_string(s + 1) +
                        " has a degenerate source response rate");
      }
      relabel[s] = lor_to_relabel_prob(rates[s], lor[s]);
    }
  }

  const int d = source.d;
  std::vector<double> y(n);
  std::vector<double> x(static_cast<std::size_t>(n) * d);
  for (long i = 0; i < n; ++i) {
    long pick = stream.uniform_below(static_cast<std::uint32_t>(source.n));
    y[i] = source.outcomes[pick];
    for (int j = 0; j < d; ++j) {
      x[static_cast<std::size_t>(i) * d + j] = source.covariate(pick, j);
    }
  }
  std::vector<int> a(n, 0);
  std::fill(a.begin(), a.begin() + n1, 1);
  stream.shuffle(a);

  for (long i = 0; i < n; ++i) {
    if (!a[i]) continue;
    int s = gbm_subgroup(x[static_cast<std::size_t>(i) * d + kMgmtCol],
                         x[static_cast<std::size_t>(i) * d + kKpsCol]);
    double g = relabel[s - 1];
    if (g == 0) continue;
    if (lor[s - 1] > 0 && y[i] == 0.0) {
      if (stream.bernoulli(g)) y[i] = 1.0;
    } else if (lor[s - 1] < 0 && y[i] == 1.0) {
      if (stream.bernoulli(g)) y[i] = 0.0;
    }
  }
  return TrialDataset::create(std::move(y), std::move(x), std::move(a), d);
}

ExternalDataset gen_external_resample(const ExternalDataset& source, long nE,
                                      RngStream& stream) {
  if (source.n < 1 && nE > 0) {
    throw DataError("gen_external_resample: empty source");
  }
  const int d = source.d;
  std::vector<double> y(nE);
  std::vector<double> x(static_cast<std::size_t>(nE) * d);
  for (long i = 0; i < nE; ++i) {
    long pick = stream.uniform_below(static_cast<std::uint32_t>(source.n));
    y[i] = source.outcomes[pick];
    for (int j = 0; j < d; ++j) {
      x[static_cast<std::size_t>(i) * d + j] = source.covariate(pick, j);
    }
  }
  return ExternalDataset::create(std::move(y), std::move(x),
                                 std::vector<int>(nE, 0), d);
}

// ---------------------------------------------------------------------------
// ScenarioLab

namespace {

constexpr std::uint64_t kGeneratorStreamBase = 0xFFFFFFFF00000000ull;

Family scenario_family(const Scenario& scenario) {
  if (std::holds_alternative<BinaryScenario>(scenario)) {
    return Family::beta_bernoulli;
  }
  if (std::holds_alternative<BinarySubgroupScenario>(scenario)) {
    return Family::beta_bernoulli_subgroups;
  }
  if (std::holds_alternative<LinearScenario>(scenario)) {
    return Family::gaussian_linear;
  }
  return Family::logistic_laplace;
}

BinaryCounts pooled_counts(const TrialDataset& data,
                           const ExternalDataset& ext) {
  BinaryCounts c;
  for (int i = 0; i < data.n; ++i) {
    if (data.outcomes[i] != 0.0 && data.outcomes[i] != 1.0) {
      throw DataError("count-based test: outcomes must be binary");
    }
    if (data.assignments[i]) {
      c.n1 += 1;
      c.s1 += static_cast<long>(data.outcomes[i]);
    } else {
      c.n0 += 1;
      c.s0 += static_cast<long>(data.outcomes[i]);
    }
  }
  c.nE = ext.n;
  for (double y : ext.outcomes) c.sE += static_cast<long>(y);
  return c;
}

}  // namespace

struct ScenarioLab::Runner {
  std::string name;
  std::function<bool(const TrialDataset&, const ExternalDataset&,
                     const SeedSpec&)> run;
};

ScenarioLab::ScenarioLab(Scenario scenario, StatisticSpec statistic)
    : scenario_(std::move(scenario)), statistic_(std::move(statistic)) {
  statistic_.family = scenario_family(scenario_);
  if (const auto* rs = std::get_if<ResampleScenario>(&scenario_)) {
    id_source_ = synthetic_gbm_source(rs->id_source.kind, rs->id_source.n,
                                      rs->source_seed);
    ed_source_ = synthetic_gbm_source(
        rs->ed_source.kind, rs->ed_source.n,
        rs->source_seed + 0x9E3779B97F4A7C15ull);
  }
}

std::pair<TrialDataset, ExternalDataset> ScenarioLab::generate(
    RngStream& stream) const {
  if (const auto* s = std::get_if<BinaryScenario>(&scenario_)) {
    return gen_binary_trial(*s, stream);
  }
  if (const auto* s = std::get_if<BinarySubgroupScenario>(&scenario_)) {
    return gen_binary_subgroup_trial(*s, stream);
  }
  if (const auto* s = std::get_if<LinearScenario>(&scenario_)) {
    return gen_linear_trial(*s, stream);
  }
  const auto& rs = std::get<ResampleScenario>(scenario_);
  TrialDataset trial =
      resample_in_silico(id_source_, rs.n, rs.r, rs.lor, stream);
  ExternalDataset ext = gen_external_resample(ed_source_, rs.nE, stream);
  return {std::move(trial), std::move(ext)};
}

std::vector<std::string> ScenarioLab::allowed_tests() const {
  switch (scenario_family(scenario_)) {
    case Family::beta_bernoulli:
      return {"edpt-m", "edpt-m1", "test-a", "test-a-m1",
              "wald-id", "wald-merged", "wald-oracle"};
    case Family::beta_bernoulli_subgroups:
      return {"edpt-m", "edpt-m1", "test-a", "test-a-m1",
              "wald-id", "wald-merged"};
    case Family::gaussian_linear:
      return {"edpt-m", "edpt-m1", "edpt-m2", "test-a", "test-a-m1",
              "test-a-m2", "wald-id", "wald-merged", "wald-oracle",
              "two-sample-z"};
    case Family::logistic_laplace:
      return {"edpt-m", "edpt-m1", "edpt-m2", "edpt-inf", "edpt-inf-m1",
              "edpt-inf-m2", "test-a", "test-a-m1", "test-a-m2",
              "wald-id", "wald-merged", "lr", "lr-ed"};
  }
  return {};
}

ScenarioLab::Runner ScenarioLab::make_runner(
    const std::string& test, const RunSettings& settings) const {
  auto allowed = allowed_tests();
  if (std::find(allowed.begin(), allowed.end(), test) == allowed.end()) {
    std::string names;
    for (const auto& n : allowed) names += n + " ";
    throw ConfigError("test '" + test +
                      "' is not available for this scenario family "
                      "(available: " + names + ")");
  }

  const long J = settings.permutations;
  const double alpha = settings.alpha;

  auto spec_with_kind = [&](StatKind kind) {
    StatisticSpec spec = statistic_;
    spec.kind = kind;
    return spec;
  };
  auto kind_suffix = [&](const std::string& name) {
    if (name.ends_with("-m1")) return StatKind::m1;
    if (name.ends_with("-m2")) return StatKind::m2;
    return StatKind::m;
  };

  Runner runner;
  runner.name = test;

  if (test.starts_with("edpt-inf")) {
    StatisticSpec spec = spec_with_kind(kind_suffix(test));
    // Frozen offsets from the full external source; fit once here.
    FittedStatistic stat = FittedStatistic::make_infinite_ed(spec, ed_source_);
    runner.run = [stat, J, alpha](const TrialDataset& data,
                                  const ExternalDataset&,
                                  const SeedSpec& seed) {
      return permutation_test(data, stat, J, alpha, seed, 1).reject;
    };
    return runner;
  }
  if (test.starts_with("edpt-")) {
    StatisticSpec spec = spec_with_kind(kind_suffix(test));
    runner.run = [spec, J, alpha](const TrialDataset& data,
                                  const ExternalDataset& ext,
                                  const SeedSpec& seed) {
      FittedStatistic stat = FittedStatistic::make(spec, ext);
      return permutation_test(data, stat, J, alpha, seed, 1).reject;
    };
    return runner;
  }
  if (test.starts_with("test-a")) {
    StatisticSpec spec = spec_with_kind(kind_suffix(test));
    runner.run = [spec, J, alpha](const TrialDataset& data,
                                  const ExternalDataset&,
                                  const SeedSpec& seed) {
      FittedStatistic stat = perm_stat_no_ed(spec, data.d);
      return permutation_test(data, stat, J, alpha, seed, 1).reject;
    };
    return runner;
  }

  const Family family = scenario_family(scenario_);
  if (test == "wald-id" || test == "wald-merged" || test == "wald-oracle") {
    WaldVariant variant = test == "wald-id" ? WaldVariant::id_only
                          : test == "wald-merged" ? WaldVariant::merged
                                                  : WaldVariant::oracle;
    if (family == Family::gaussian_linear) {
      std::optional<LinearOracle> oracle;
      if (variant == WaldVariant::oracle) {
        const auto& s = std::get<LinearScenario>(scenario_);
        int d = static_cast<int>(s.rho.size()) - 1 + s.continuous_covariates;
        LinearOracle o;
        o.eta0 = s.eta0;
        o.beta1 = pad(s.beta1, d, "beta1");
        oracle = std::move(o);
      }
      runner.run = [variant, alpha, oracle](const TrialDataset& data,
                                            const ExternalDataset& ext,
                                            const SeedSpec&) {
        const ExternalDataset* e =
            variant == WaldVariant::merged ? &ext : nullptr;
        return wald_linear(data, e, variant, alpha, oracle).reject;
      };
      return runner;
    }
    double oracle_w0 = 0.5;
    if (variant == WaldVariant::oracle) {
      if (const auto* s = std::get_if<BinaryScenario>(&scenario_)) {
        oracle_w0 = s->w0;
      } else {
        throw ConfigError(
            "wald-oracle needs a known control rate; unavailable here");
      }
    }
    runner.run = [variant, alpha, oracle_w0](const TrialDataset& data,
                                             const ExternalDataset& ext,
                                             const SeedSpec&) {
      BinaryCounts c = pooled_counts(data, ext);
      if (variant != WaldVariant::merged) {
        c.nE = 0;
        c.sE = 0;
      }
      return wald_binary(c, variant, alpha, Sidedness::two_sided, oracle_w0)
          .reject;
    };
    return runner;
  }
  if (test == "lr" || test == "lr-ed") {
    bool merged = test == "lr-ed";
    LogisticModelSpec model = statistic_.logistic;
    runner.run = [merged, model, alpha](const TrialDataset& data,
                                        const ExternalDataset& ext,
                                        const SeedSpec&) {
      return lr_test_logistic(data, merged ? &ext : nullptr, model, alpha)
          .reject;
    };
    return runner;
  }
  if (test == "two-sample-z") {
    runner.run = [alpha](const TrialDataset& data, const ExternalDataset&,
                         const SeedSpec&) {
      return two_sample_z(data, alpha).reject;
    };
    return runner;
  }
  throw ConfigError("unknown test '" + test + "'");
}

PowerEstimate ScenarioLab::estimate_rejection_rate(
    const std::string& test, const RunSettings& settings) const {
  return estimate_many({test}, settings).front();
}

std::vector<PowerEstimate> ScenarioLab::estimate_many(
    const std::vector<std::string>& tests, const RunSettings& settings) const {
  std::vector<Runner> runners;
  runners.reserve(tests.size());
  for (const auto& test : tests) runners.push_back(make_runner(test, settings));
  return run_replications(runners, settings);
}

PowerEstimate ScenarioLab::estimate_custom(const DecisionFn& decide,
                                           const RunSettings& settings) const {
  Runner runner;
  runner.name = "custom";
  runner.run = decide;
  std::vector<Runner> runners{std::move(runner)};
  return run_replications(runners, settings).front();
}

std::vector<PowerEstimate> ScenarioLab::run_replications(
    const std::vector<Runner>& runners, const RunSettings& settings) const {
  if (settings.replicates < 1) {
    throw ConfigError("estimate: replicates must be >= 1");
  }
  const int t_count = static_cast<int>(runners.size());

  // outcome per (replicate, test): 1 reject, 0 accept, -1 inapplicable
  std::vector<std::int8_t> outcomes(
      static_cast<std::size_t>(settings.replicates) * t_count);

  parallel_for(0, settings.replicates, settings.workers, [&](long rep) {
    RngStream data_stream(settings.master_seed,
                          kGeneratorStreamBase | static_cast<std::uint64_t>(rep));
    auto [data, ext] = generate(data_stream);
    for (int t = 0; t < t_count; ++t) {
      SeedSpec seed{settings.master_seed,
                    (static_cast<std::uint64_t>(t + 1) << 32) |
                        static_cast<std::uint64_t>(rep)};
      std::int8_t& slot = outcomes[static_cast<std::size_t>(rep) * t_count + t];
      try {
        slot = runners[t].run(data, ext, seed) ? 1 : 0;
      } catch (const TestInapplicable&) {
        slot = -1;
      } catch (const NumericalError&) {
        slot = -1;
      }
    }
  });

  std::vector<PowerEstimate> estimates(static_cast<std::size_t>(t_count));
  for (int t = 0; t < t_count; ++t) {
    long rejects = 0, applicable = 0, inapplicable = 0;
    for (long rep = 0; rep < settings.replicates; ++rep) {
      std::int8_t v = outcomes[static_cast<std::size_t>(rep) * t_count + t];
      if (v < 0) {
        ++inapplicable;
      } else {
        ++applicable;
        rejects += v;
      }
    }
    if (static_cast<double>(inapplicable) / settings.replicates >
        settings.inapplicable_abort_fraction) {
      throw TestInapplicable(
          "test '" + runners[t].name + "' was inapplicable on " +
          std::to_string(inapplicable) + " of " +
          std::to_string(settings.replicates) + " replicates");
    }
    PowerEstimate& est = estimates[t];
    est.inapplicable_count = inapplicable;
    est.replicates = applicable;
    if (applicable > 0) {
      est.rejection_rate = static_cast<double>(rejects) / applicable;
      est.mc_se = std::sqrt(est.rejection_rate * (1 - est.rejection_rate) /
                            applicable);
    }
  }
  return estimates;
}

}  // namespace edpt
