// edpt: external-data-augmented permutation testing for randomized trials.
//
// Subcommands:
//   test      run one permutation test on CSV data, JSON result on stdout
//   simulate  run a JSON-configured rejection-rate experiment, CSV out
//   power     evaluate limiting power functions over parameter grids
//   gen       write a synthetic GBM-like source cohort as CSV

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edpt/asymptotics.hpp"
#include "edpt/baselines.hpp"
#include "edpt/csv.hpp"
#include "edpt/errors.hpp"
#include "edpt/models.hpp"
#include "edpt/parallel.hpp"
#include "edpt/perm.hpp"
#include "edpt/simlab.hpp"

namespace {

using namespace edpt;

std::vector<double> parse_number_list(const std::string& text,
                                      const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(what + ": cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

std::vector<int> to_zero_based_columns(const std::vector<double>& cols,
                                       const std::string& what) {
  std::vector<int> out;
  for (double c : cols) {
    int v = static_cast<int>(c);
    if (v < 1) throw ConfigError(what + ": column indices are 1-based");
    out.push_back(v - 1);
  }
  return out;
}

struct TestOptions {
  std::string internal_path;
  std::string external_path;
  std::string family = "binary";
  std::string stat = "m";
  std::string direction = "pos";
  double threshold = 0.0;
  long perms = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  double prior_var = 100.0;
  double outcome_var = 1.0;
  int mc_draws = 10000;
  std::string prevalences;
  std::string interact_cols;
  std::string bias_cols;
  bool shared_mc_stream = false;
  int workers = 1;
};

int run_test(const TestOptions& opt) {
  TrialDataset data = load_trial_dataset(opt.internal_path);
  ExternalDataset ext = opt.external_path.empty()
                            ? ExternalDataset::empty(data.d)
                            : load_external_dataset(opt.external_path);
  if (ext.n > 0 && ext.d != data.d) {
    throw DataError("internal and external covariate dimensions differ");
  }

  StatisticSpec spec;
  if (opt.family == "binary") {
    spec.family = Family::beta_bernoulli;
  } else if (opt.family == "binary-subgroups") {
    spec.family = Family::beta_bernoulli_subgroups;
  } else if (opt.family == "gaussian") {
    spec.family = Family::gaussian_linear;
  } else if (opt.family == "logistic") {
    spec.family = Family::logistic_laplace;
  } else {
    throw ConfigError("unknown family '" + opt.family + "'");
  }
  if (opt.stat == "m") {
    spec.kind = StatKind::m;
  } else if (opt.stat == "m1") {
    spec.kind = StatKind::m1;
  } else if (opt.stat == "m2") {
    spec.kind = StatKind::m2;
  } else {
    throw ConfigError("unknown statistic '" + opt.stat + "'");
  }
  if (opt.direction == "pos" || opt.direction == "positive") {
    spec.direction = Direction::positive;
  } else if (opt.direction == "neg" || opt.direction == "negative") {
    spec.direction = Direction::negative;
  } else {
    throw ConfigError("direction must be pos or neg");
  }
  spec.threshold = opt.threshold;
  spec.prior_variance = opt.prior_var;
  spec.outcome_variance = opt.outcome_var;
  spec.mc_draws = opt.mc_draws;
  spec.shared_mc_stream = opt.shared_mc_stream;
  if (!opt.prevalences.empty()) {
    spec.prevalences = parse_number_list(opt.prevalences, "--prevalences");
  }
  if (!opt.interact_cols.empty()) {
    spec.logistic.interaction_columns = to_zero_based_columns(
        parse_number_list(opt.interact_cols, "--interact-cols"),
        "--interact-cols");
  }
  if (!opt.bias_cols.empty()) {
    spec.logistic.ed_bias_columns = to_zero_based_columns(
        parse_number_list(opt.bias_cols, "--bias-cols"), "--bias-cols");
  }

  FittedStatistic stat = FittedStatistic::make(spec, ext);
  TestResult result = permutation_test(data, stat, opt.perms, opt.alpha,
                                       {opt.seed, 0}, opt.workers);
  std::cout << to_json_string(result) << "\n";
  return 0;
}

struct PowerOptions {
  std::string family = "binary";
  std::vector<std::string> params;
  std::vector<std::string> grid;
  std::string out;
  long n_mc = 100000;
  long n_mc_outer = 20000;
  std::uint64_t seed = 1;
  int workers = 0;
};

int run_power(const PowerOptions& opt) {
  std::map<std::string, std::vector<double>> fixed;
  for (const auto& kv : opt.params) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--params expects key=value, got '" + kv + "'");
    }
    fixed[kv.substr(0, eq)] =
        parse_number_list(kv.substr(eq + 1), "--params " + kv.substr(0, eq));
  }
  std::map<std::string, std::vector<double>> axes;
  for (const auto& kv : opt.grid) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--grid expects key=values, got '" + kv + "'");
    }
    axes[kv.substr(0, eq)] =
        parse_number_list(kv.substr(eq + 1), "--grid " + kv.substr(0, eq));
  }

  auto scalar = [&](const std::map<std::string, std::vector<double>>& m,
                    const std::string& key, double fallback) {
    auto it = m.find(key);
    if (it == m.end()) return fallback;
    if (it->second.size() != 1) {
      throw ConfigError(key + " must be a single number");
    }
    return it->second[0];
  };

  const int workers = opt.workers > 0 ? opt.workers : hardware_workers();
  std::ostringstream csv;
  for (const auto& axis : axes) csv << axis.first << ",";
  csv << "power,se\n";

  long points = 1;
  for (const auto& axis : axes) points *= axis.second.size();
  std::vector<std::size_t> index(axes.size(), 0);
  for (long point = 0; point < points; ++point) {
    long rem = point;
    std::map<std::string, std::vector<double>> merged = fixed;
    std::vector<double> axis_values;
    {
      std::size_t a = axes.size();
      std::vector<std::size_t> idx(axes.size());
      for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
        --a;
        idx[a] = static_cast<std::size_t>(rem % it->second.size());
        rem /= static_cast<long>(it->second.size());
      }
      std::size_t pos = 0;
      for (const auto& axis : axes) {
        double value = axis.second[idx[pos]];
        axis_values.push_back(value);
        merged[axis.first] = {value};
        ++pos;
      }
    }
    // Fold component keys (a1, b2, omega3, ...) into their base vectors.
    for (auto it = merged.begin(); it != merged.end();) {
      const std::string& key = it->first;
      std::size_t digit = key.find_first_of("0123456789");
      bool component =
          digit != std::string::npos && digit > 0 &&
          (key.substr(0, digit) == "a" || key.substr(0, digit) == "b" ||
           key.substr(0, digit) == "omega" || key.substr(0, digit) == "rho");
      if (component) {
        if (it->second.size() != 1) {
          throw ConfigError(key + " must be a single number");
        }
        std::string base = key.substr(0, digit);
        int comp = std::stoi(key.substr(digit)) - 1;
        if (comp < 0) throw ConfigError(key + ": components are 1-based");
        auto& vec = merged[base];
        if (static_cast<int>(vec.size()) <= comp) vec.resize(comp + 1, 0.0);
        vec[comp] = it->second[0];
        it = merged.erase(it);
      } else {
        ++it;
      }
    }

    McEstimate est;
    if (opt.family == "binary" || opt.family == "binary-inf-ed") {
      BinaryAsymptoticParams p;
      p.r = scalar(merged, "r", p.r);
      p.rE = scalar(merged, "rE", p.rE);
      p.w0 = scalar(merged, "w0", p.w0);
      p.a = scalar(merged, "a", p.a);
      p.b = scalar(merged, "b", p.b);
      p.alpha = scalar(merged, "alpha", p.alpha);
      est = opt.family == "binary"
                ? limiting_power_binary(p, opt.n_mc, {opt.seed, 0}, workers)
                : limiting_power_binary_infinite_ed(p, opt.n_mc,
                                                    {opt.seed, 0}, workers);
    } else if (opt.family == "gaussian-subgroups" ||
               opt.family == "binary-subgroups") {
      SubgroupAsymptoticParams p;
      auto pull = [&](const char* key) {
        auto it = merged.find(key);
        return it == merged.end() ? std::vector<double>{} : it->second;
      };
      p.rho = pull("rho");
      p.a = pull("a");
      p.b = pull("b");
      // Components not mentioned default to zero shift.
      if (p.a.size() < p.rho.size()) p.a.resize(p.rho.size(), 0.0);
      if (p.b.size() < p.rho.size()) p.b.resize(p.rho.size(), 0.0);
      p.omega = pull("omega");
      p.r = scalar(merged, "r", p.r);
      p.rE = scalar(merged, "rE", p.rE);
      p.alpha = scalar(merged, "alpha", p.alpha);
      est = limiting_power_subgroups(
          p,
          opt.family == "binary-subgroups" ? SubgroupFamily::binary
                                           : SubgroupFamily::gaussian,
          opt.n_mc_outer, {opt.seed, 0}, workers);
    } else {
      throw ConfigError("unknown power family '" + opt.family + "'");
    }

    for (double v : axis_values) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.10g,", v);
      csv << buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", est.estimate, est.se);
    csv << buf;
  }

  if (opt.out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream f(opt.out);
    if (!f) throw ConfigError("cannot write " + opt.out);
    f << csv.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"external-data-augmented permutation testing"};
  app.require_subcommand(1);

  TestOptions test_opt;
  CLI::App* test_cmd =
      app.add_subcommand("test", "permutation test on CSV data");
  test_cmd->add_option("--internal", test_opt.internal_path,
                       "trial dataset CSV")->required();
  test_cmd->add_option("--external", test_opt.external_path,
                       "external cohort CSV (omit for trial-only)");
  test_cmd->add_option("--family", test_opt.family,
                       "binary|binary-subgroups|gaussian|logistic");
  test_cmd->add_option("--stat", test_opt.stat, "m|m1|m2");
  test_cmd->add_option("--direction", test_opt.direction, "pos|neg");
  test_cmd->add_option("--threshold", test_opt.threshold,
                       "effect threshold for m1");
  test_cmd->add_option("--perms", test_opt.perms, "number of permutations");
  test_cmd->add_option("--alpha", test_opt.alpha, "significance level");
  test_cmd->add_option("--seed", test_opt.seed, "master seed");
  test_cmd->add_option("--prior-var", test_opt.prior_var, "prior variance");
  test_cmd->add_option("--outcome-var", test_opt.outcome_var,
                       "known outcome variance (gaussian family)");
  test_cmd->add_option("--mc-draws", test_opt.mc_draws,
                       "posterior draws for m1/m2");
  test_cmd->add_option("--prevalences", test_opt.prevalences,
                       "subgroup weights, comma separated");
  test_cmd->add_option("--interact-cols", test_opt.interact_cols,
                       "1-based covariate columns with treatment "
                       "interactions (logistic)");
  test_cmd->add_option("--bias-cols", test_opt.bias_cols,
                       "1-based covariate columns with external bias terms "
                       "(logistic)");
  test_cmd->add_flag("--shared-mc-stream", test_opt.shared_mc_stream,
                     "reuse one sample stream across permutations");
  test_cmd->add_option("--workers", test_opt.workers, "worker threads");

  std::string sim_config, sim_out;
  int sim_workers = 0;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "config-driven rejection-rate study");
  sim_cmd->add_option("--config", sim_config, "JSON config (or manifest)")
      ->required();
  sim_cmd->add_option("--out", sim_out, "output CSV path")->required();
  sim_cmd->add_option("--workers", sim_workers,
                      "worker threads (0 = config value)");

  PowerOptions power_opt;
  CLI::App* power_cmd =
      app.add_subcommand("power", "limiting power over a parameter grid");
  power_cmd->add_option("--family", power_opt.family,
                        "binary|binary-inf-ed|gaussian-subgroups|"
                        "binary-subgroups");
  power_cmd->add_option("--params", power_opt.params,
                        "key=value (vectors comma separated); repeatable");
  power_cmd->add_option("--grid", power_opt.grid,
                        "key=v1,v2,... sweep axis; repeatable");
  power_cmd->add_option("--out", power_opt.out, "output CSV (stdout if "
                        "omitted)");
  power_cmd->add_option("--mc", power_opt.n_mc, "Monte Carlo draws");
  power_cmd->add_option("--mc-outer", power_opt.n_mc_outer,
                        "outer draws (subgroup families)");
  power_cmd->add_option("--seed", power_opt.seed, "master seed");
  power_cmd->add_option("--workers", power_opt.workers, "worker threads");

  std::string gen_kind = "avaglio-like", gen_out;
  long gen_n = 337;
  std::uint64_t gen_seed = 1;
  CLI::App* gen_cmd =
      app.add_subcommand("gen", "synthetic GBM-like source cohort CSV");
  gen_cmd->add_option("--kind", gen_kind, "avaglio-like|dfci-like");
  gen_cmd->add_option("--n", gen_n, "cohort size");
  gen_cmd->add_option("--seed", gen_seed, "seed");
  gen_cmd->add_option("--out", gen_out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*test_cmd) return run_test(test_opt);
    if (*sim_cmd) {
      long rows = run_experiment_file(sim_config, sim_out, sim_workers);
      std::fprintf(stderr, "wrote %ld rows to %s\n", rows, sim_out.c_str());
      return 0;
    }
    if (*power_cmd) return run_power(power_opt);
    if (*gen_cmd) {
      GbmSourceKind kind;
      if (gen_kind == "avaglio-like") {
        kind = GbmSourceKind::avaglio_like;
      } else if (gen_kind == "dfci-like") {
        kind = GbmSourceKind::dfci_like;
      } else {
        throw ConfigError("unknown source kind '" + gen_kind + "'");
      }
      ExternalDataset source = synthetic_gbm_source(kind, gen_n, gen_seed);
      write_dataset_csv(gen_out, source.outcomes, source.covariates, source.d,
                        source.assignments);
      return 0;
    }
  } catch (const TestInapplicable& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
