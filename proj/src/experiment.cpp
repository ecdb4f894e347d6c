#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "edpt/errors.hpp"
#include "edpt/simlab.hpp"

namespace edpt {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError("config " + path + ": " + msg);
}

const json& member(const json& obj, const std::string& path,
                   const std::string& key) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "/" + key, "missing");
  return *it;
}

double as_num(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

long as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<long>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected a boolean");
  return v.get<bool>();
}

std::string as_str(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_vec(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_num(v[i], path + "/" + std::to_string(i)));
  }
  return out;
}

double opt_num(const json& obj, const std::string& path,
               const std::string& key, double fallback) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_num(*it, path + "/" + key);
}

long opt_int(const json& obj, const std::string& path, const std::string& key,
             long fallback) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_int(*it, path + "/" + key);
}

std::vector<double> opt_vec(const json& obj, const std::string& path,
                            const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? std::vector<double>{}
                         : as_vec(*it, path + "/" + key);
}

void check_keys(const json& obj, const std::string& path,
                const std::set<std::string>& known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) {
      fail(path + "/" + it.key(), "unknown key");
    }
  }
}

// Sample sizes may be given directly (n, nE) or through ratios (n1 with r,
// rE); the ratio form mirrors the asymptotic parameterization.
void read_sizes(const json& s, const std::string& path, long& n, double& r,
                long& nE) {
  r = opt_num(s, path, "r", r);
  if (!(r > 0)) fail(path + "/r", "must be positive");
  if (s.contains("n1")) {
    long n1 = as_int(member(s, path, "n1"), path + "/n1");
    n = std::lround(n1 * (1.0 + r));
    if (s.contains("rE")) {
      nE = std::lround(as_num(member(s, path, "rE"), path + "/rE") * n1);
    }
  }
  n = opt_int(s, path, "n", n);
  if (s.contains("nE")) {
    nE = as_int(member(s, path, "nE"), path + "/nE");
  } else if (s.contains("rE") && !s.contains("n1")) {
    fail(path + "/rE", "rE requires n1");
  }
  if (nE < 0) fail(path + "/nE", "must be >= 0");
}

GbmSourceSpec parse_source(const json& v, const std::string& path,
                           GbmSourceSpec fallback) {
  if (v.is_null()) return fallback;
  check_keys(v, path, {"kind", "n"});
  GbmSourceSpec spec = fallback;
  std::string kind = as_str(member(v, path, "kind"), path + "/kind");
  if (kind == "avaglio-like" || kind == "avaglio_like") {
    spec.kind = GbmSourceKind::avaglio_like;
  } else if (kind == "dfci-like" || kind == "dfci_like") {
    spec.kind = GbmSourceKind::dfci_like;
  } else {
    fail(path + "/kind", "expected 'avaglio-like' or 'dfci-like'");
  }
  spec.n = opt_int(v, path, "n", spec.n);
  return spec;
}

Scenario parse_scenario(const json& s, const std::string& path) {
  std::string family = as_str(member(s, path, "family"), path + "/family");
  if (family == "binary") {
    check_keys(s, path, {"family", "n", "n1", "r", "nE", "rE", "w0", "gamma",
                         "beta0"});
    BinaryScenario cfg;
    read_sizes(s, path, cfg.n, cfg.r, cfg.nE);
    cfg.w0 = opt_num(s, path, "w0", cfg.w0);
    cfg.gamma = opt_num(s, path, "gamma", cfg.gamma);
    cfg.beta0 = opt_num(s, path, "beta0", cfg.beta0);
    return cfg;
  }
  if (family == "binary-subgroups" || family == "binary_subgroups") {
    check_keys(s, path, {"family", "n", "n1", "r", "nE", "rE", "w0", "gamma",
                         "gamma1", "beta1", "beta00", "beta01", "rho"});
    BinarySubgroupScenario cfg;
    read_sizes(s, path, cfg.n, cfg.r, cfg.nE);
    cfg.w0 = opt_num(s, path, "w0", cfg.w0);
    cfg.gamma = opt_num(s, path, "gamma", cfg.gamma);
    cfg.gamma1 = opt_vec(s, path, "gamma1");
    cfg.beta1 = opt_vec(s, path, "beta1");
    cfg.beta00 = opt_num(s, path, "beta00", cfg.beta00);
    cfg.beta01 = opt_vec(s, path, "beta01");
    cfg.rho = as_vec(member(s, path, "rho"), path + "/rho");
    return cfg;
  }
  if (family == "linear") {
    check_keys(s, path,
               {"family", "n", "n1", "r", "nE", "rE", "eta0", "gamma",
                "gamma1", "beta1", "beta00", "beta01", "rho",
                "continuous_covariates"});
    LinearScenario cfg;
    read_sizes(s, path, cfg.n, cfg.r, cfg.nE);
    cfg.eta0 = opt_num(s, path, "eta0", cfg.eta0);
    cfg.gamma = opt_num(s, path, "gamma", cfg.gamma);
    cfg.gamma1 = opt_vec(s, path, "gamma1");
    cfg.beta1 = opt_vec(s, path, "beta1");
    cfg.beta00 = opt_num(s, path, "beta00", cfg.beta00);
    cfg.beta01 = opt_vec(s, path, "beta01");
    cfg.rho = as_vec(member(s, path, "rho"), path + "/rho");
    cfg.continuous_covariates = static_cast<int>(
        opt_int(s, path, "continuous_covariates", 0));
    return cfg;
  }
  if (family == "resample") {
    check_keys(s, path, {"family", "n", "r", "nE", "lor", "id_source",
                         "ed_source", "source_seed"});
    ResampleScenario cfg;
    cfg.n = opt_int(s, path, "n", cfg.n);
    cfg.r = opt_num(s, path, "r", cfg.r);
    cfg.nE = opt_int(s, path, "nE", cfg.nE);
    std::vector<double> lor = opt_vec(s, path, "lor");
    if (!lor.empty()) {
      if (lor.size() != 4) fail(path + "/lor", "expected 4 entries");
      std::copy(lor.begin(), lor.end(), cfg.lor.begin());
    }
    if (s.contains("id_source")) {
      cfg.id_source = parse_source(s["id_source"], path + "/id_source",
                                   cfg.id_source);
    }
    if (s.contains("ed_source")) {
      cfg.ed_source = parse_source(s["ed_source"], path + "/ed_source",
                                   cfg.ed_source);
    }
    cfg.source_seed = static_cast<std::uint64_t>(
        opt_int(s, path, "source_seed", static_cast<long>(cfg.source_seed)));
    return cfg;
  }
  fail(path + "/family",
       "expected one of: binary, binary-subgroups, linear, resample");
}

StatisticSpec parse_statistic(const json* st, const std::string& path) {
  StatisticSpec spec;
  if (!st) return spec;
  const json& s = *st;
  check_keys(s, path,
             {"direction", "threshold", "mc_draws", "prior_variance",
              "outcome_variance", "prevalences", "shared_mc_stream",
              "interaction_columns", "ed_bias_columns"});
  if (s.contains("direction")) {
    std::string dir = as_str(s["direction"], path + "/direction");
    if (dir == "positive" || dir == "pos") {
      spec.direction = Direction::positive;
    } else if (dir == "negative" || dir == "neg") {
      spec.direction = Direction::negative;
    } else {
      fail(path + "/direction", "expected 'positive' or 'negative'");
    }
  }
  spec.threshold = opt_num(s, path, "threshold", spec.threshold);
  spec.mc_draws = static_cast<int>(opt_int(s, path, "mc_draws",
                                           spec.mc_draws));
  spec.prior_variance = opt_num(s, path, "prior_variance",
                                spec.prior_variance);
  spec.outcome_variance = opt_num(s, path, "outcome_variance",
                                  spec.outcome_variance);
  spec.prevalences = opt_vec(s, path, "prevalences");
  if (s.contains("shared_mc_stream")) {
    spec.shared_mc_stream = as_bool(s["shared_mc_stream"],
                                    path + "/shared_mc_stream");
  }
  // Logistic column lists are 1-based in configs, matching the x1..xd
  // column names.
  auto read_cols = [&](const char* key, std::vector<int>& out) {
    if (!s.contains(key)) return;
    std::vector<double> cols = as_vec(s[key], path + "/" + key);
    out.clear();
    for (double c : cols) out.push_back(static_cast<int>(c) - 1);
  };
  read_cols("interaction_columns", spec.logistic.interaction_columns);
  read_cols("ed_bias_columns", spec.logistic.ed_bias_columns);
  return spec;
}

std::string csv_cell(const json& v) {
  std::string cell = v.dump();
  for (char& c : cell) {
    if (c == ',') c = ';';
  }
  return cell;
}

}  // namespace

long run_experiment_json(const std::string& config_json,
                         const std::string& out_csv_path,
                         int workers_override) {
  auto t0 = std::chrono::steady_clock::now();
  json root;
  try {
    root = json::parse(config_json);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  // A manifest can be replayed directly: its config is embedded.
  if (root.is_object() && root.contains("config") &&
      root["config"].is_object()) {
    root = root["config"];
  }
  check_keys(root, "",
             {"label", "master_seed", "alpha", "replicates", "permutations",
              "workers", "tests", "statistic", "scenario", "grid"});

  RunSettings settings;
  settings.master_seed = static_cast<std::uint64_t>(
      opt_int(root, "", "master_seed", 1));
  settings.alpha = opt_num(root, "", "alpha", 0.05);
  settings.replicates = opt_int(root, "", "replicates", 2000);
  settings.permutations = opt_int(root, "", "permutations", 1000);
  settings.workers = static_cast<int>(opt_int(root, "", "workers", 1));
  if (workers_override > 0) settings.workers = workers_override;

  const json& tests_json = member(root, "", "tests");
  if (!tests_json.is_array() || tests_json.empty()) {
    fail("/tests", "expected a nonempty array of test names");
  }
  std::vector<std::string> tests;
  for (std::size_t i = 0; i < tests_json.size(); ++i) {
    tests.push_back(as_str(tests_json[i], "/tests/" + std::to_string(i)));
  }

  const json& scenario_json = member(root, "", "scenario");
  std::string label = root.contains("label")
                          ? as_str(root["label"], "/label")
                          : as_str(member(scenario_json, "/scenario",
                                          "family"),
                                   "/scenario/family");

  // Grid axes, sorted by key (nlohmann objects iterate alphabetically).
  std::vector<std::pair<std::string, json>> axes;
  if (root.contains("grid")) {
    const json& grid = root["grid"];
    if (!grid.is_object()) fail("/grid", "expected an object");
    for (auto it = grid.begin(); it != grid.end(); ++it) {
      if (!it.value().is_array() || it.value().empty()) {
        fail("/grid/" + it.key(), "expected a nonempty array");
      }
      axes.emplace_back(it.key(), it.value());
    }
  }

  long grid_points = 1;
  for (const auto& axis : axes) {
    grid_points *= static_cast<long>(axis.second.size());
  }

  std::ostringstream csv;
  csv << "scenario";
  for (const auto& axis : axes) csv << "," << axis.first;
  csv << ",test,alpha,rate,se,replicates,inapplicable\n";

  long rows = 0;
  std::vector<std::size_t> index(axes.size(), 0);
  for (long point = 0; point < grid_points; ++point) {
    // Decode the mixed-radix grid index (last axis fastest).
    long rem = point;
    for (std::size_t a = axes.size(); a-- > 0;) {
      index[a] = static_cast<std::size_t>(rem % axes[a].second.size());
      rem /= static_cast<long>(axes[a].second.size());
    }
    json point_scenario = scenario_json;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      point_scenario[axes[a].first] = axes[a].second[index[a]];
    }
    Scenario scenario = parse_scenario(point_scenario, "/scenario");
    StatisticSpec statistic = parse_statistic(
        root.contains("statistic") ? &root["statistic"] : nullptr,
        "/statistic");

    ScenarioLab lab(std::move(scenario), std::move(statistic));
    std::vector<PowerEstimate> estimates = lab.estimate_many(tests, settings);
    for (std::size_t t = 0; t < tests.size(); ++t) {
      csv << label;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        csv << "," << csv_cell(axes[a].second[index[a]]);
      }
      char buf[96];
      std::snprintf(buf, sizeof(buf), ",%s,%.6g,%.6f,%.6f,%ld,%ld",
                    tests[t].c_str(), settings.alpha,
                    estimates[t].rejection_rate, estimates[t].mc_se,
                    estimates[t].replicates, estimates[t].inapplicable_count);
      csv << buf << "\n";
      ++rows;
    }
  }

  {
    std::ofstream out(out_csv_path);
    if (!out) throw ConfigError("cannot write " + out_csv_path);
    out << csv.str();
  }
  double runtime =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  json manifest{{"tool", "edpt"},
                {"config", root},
                {"rows", rows},
                {"runtime_seconds", runtime}};
  {
    std::ofstream out(out_csv_path + ".manifest.json");
    if (!out) throw ConfigError("cannot write manifest for " + out_csv_path);
    out << manifest.dump(2) << "\n";
  }
  return rows;
}

long run_experiment_file(const std::string& config_path,
                         const std::string& out_csv_path,
                         int workers_override) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file: " + config_path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return run_experiment_json(buffer.str(), out_csv_path, workers_override);
}

}  // namespace edpt
