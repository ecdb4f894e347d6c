// Python bindings for the main operations: dataset construction, the
// permutation tests, comparator tests, limiting power functions, and the
// simulation harness.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "edpt/asymptotics.hpp"
#include "edpt/baselines.hpp"
#include "edpt/csv.hpp"
#include "edpt/errors.hpp"
#include "edpt/models.hpp"
#include "edpt/perm.hpp"
#include "edpt/simlab.hpp"

namespace py = pybind11;
using namespace edpt;

namespace {

StatisticSpec build_spec(const std::string& family, const std::string& kind,
                         const std::string& direction, double threshold,
                         int mc_draws, double prior_variance,
                         double outcome_variance,
                         const std::vector<double>& prevalences,
                         bool shared_mc_stream,
                         const std::vector<int>& interaction_columns,
                         const std::vector<int>& ed_bias_columns) {
  StatisticSpec spec;
  if (family == "binary") {
    spec.family = Family::beta_bernoulli;
  } else if (family == "binary-subgroups") {
    spec.family = Family::beta_bernoulli_subgroups;
  } else if (family == "gaussian") {
    spec.family = Family::gaussian_linear;
  } else if (family == "logistic") {
    spec.family = Family::logistic_laplace;
  } else {
    throw ConfigError("unknown family '" + family + "'");
  }
  if (kind == "m") {
    spec.kind = StatKind::m;
  } else if (kind == "m1") {
    spec.kind = StatKind::m1;
  } else if (kind == "m2") {
    spec.kind = StatKind::m2;
  } else {
    throw ConfigError("unknown statistic kind '" + kind + "'");
  }
  spec.direction = direction == "negative" || direction == "neg"
                       ? Direction::negative
                       : Direction::positive;
  spec.threshold = threshold;
  spec.mc_draws = mc_draws;
  spec.prior_variance = prior_variance;
  spec.outcome_variance = outcome_variance;
  spec.prevalences = prevalences;
  spec.shared_mc_stream = shared_mc_stream;
  if (!interaction_columns.empty()) {
    spec.logistic.interaction_columns = interaction_columns;
  }
  if (!ed_bias_columns.empty()) {
    spec.logistic.ed_bias_columns = ed_bias_columns;
  }
  return spec;
}

py::dict result_dict(const TestResult& r) {
  py::dict d;
  d["statistic_value"] = r.statistic_value;
  d["p_value"] = r.p_value;
  d["reject"] = r.reject;
  d["alpha"] = r.alpha;
  d["permutations"] = r.permutations;
  d["permuted_exceed_count"] = r.permuted_exceed_count;
  d["tie_count"] = r.tie_count;
  d["master_seed"] = r.seed.master_seed;
  d["stream_id"] = r.seed.stream_id;
  return d;
}

}  // namespace

PYBIND11_MODULE(edpt_core, m) {
  m.doc() = "external-data-augmented permutation testing";

  py::register_exception<ConfigError>(m, "EdptConfigError");
  py::register_exception<DataError>(m, "EdptDataError");
  py::register_exception<NumericalError>(m, "EdptNumericalError");
  py::register_exception<TestInapplicable>(m, "EdptTestInapplicable");

  py::class_<TrialDataset>(m, "TrialDataset")
      .def(py::init([](std::vector<double> outcomes,
                       std::vector<std::vector<double>> covariate_rows,
                       std::vector<int> assignments) {
             int d = covariate_rows.empty()
                         ? 0
                         : static_cast<int>(covariate_rows.front().size());
             std::vector<double> flat;
             flat.reserve(covariate_rows.size() * d);
             for (const auto& row : covariate_rows) {
               if (static_cast<int>(row.size()) != d) {
                 throw DataError("covariate rows must share one length");
               }
               flat.insert(flat.end(), row.begin(), row.end());
             }
             return TrialDataset::create(std::move(outcomes), std::move(flat),
                                         std::move(assignments), d);
           }),
           py::arg("outcomes"), py::arg("covariates"), py::arg("assignments"))
      .def_readonly("n", &TrialDataset::n)
      .def_readonly("d", &TrialDataset::d)
      .def_readonly("outcomes", &TrialDataset::outcomes)
      .def_readonly("assignments", &TrialDataset::assignments);

  py::class_<ExternalDataset>(m, "ExternalDataset")
      .def(py::init([](std::vector<double> outcomes,
                       std::vector<std::vector<double>> covariate_rows) {
             int d = covariate_rows.empty()
                         ? 0
                         : static_cast<int>(covariate_rows.front().size());
             std::vector<double> flat;
             for (const auto& row : covariate_rows) {
               if (static_cast<int>(row.size()) != d) {
                 throw DataError("covariate rows must share one length");
               }
               flat.insert(flat.end(), row.begin(), row.end());
             }
             std::vector<int> a(outcomes.size(), 0);
             return ExternalDataset::create(std::move(outcomes),
                                            std::move(flat), std::move(a), d);
           }),
           py::arg("outcomes"), py::arg("covariates"))
      .def_static("empty", &ExternalDataset::empty, py::arg("d") = 0)
      .def_readonly("n", &ExternalDataset::n)
      .def_readonly("d", &ExternalDataset::d)
      .def_readonly("outcomes", &ExternalDataset::outcomes);

  m.def("load_trial_dataset",
        [](const std::string& path) { return load_trial_dataset(path); },
        py::arg("path"));
  m.def("load_external_dataset",
        [](const std::string& path) { return load_external_dataset(path); },
        py::arg("path"));

  m.def(
      "permutation_test",
      [](const TrialDataset& data, const ExternalDataset& ext,
         const std::string& family, const std::string& kind,
         const std::string& direction, double threshold, long permutations,
         double alpha, std::uint64_t seed, int mc_draws, double prior_variance,
         double outcome_variance, const std::vector<double>& prevalences,
         bool shared_mc_stream, const std::vector<int>& interaction_columns,
         const std::vector<int>& ed_bias_columns, int workers) {
        StatisticSpec spec = build_spec(
            family, kind, direction, threshold, mc_draws, prior_variance,
            outcome_variance, prevalences, shared_mc_stream,
            interaction_columns, ed_bias_columns);
        FittedStatistic stat = FittedStatistic::make(spec, ext);
        return result_dict(permutation_test(data, stat, permutations, alpha,
                                            {seed, 0}, workers));
      },
      py::arg("data"), py::arg("external"), py::arg("family") = "binary",
      py::arg("kind") = "m", py::arg("direction") = "positive",
      py::arg("threshold") = 0.0, py::arg("permutations") = 1000,
      py::arg("alpha") = 0.05, py::arg("seed") = 1,
      py::arg("mc_draws") = 10000, py::arg("prior_variance") = 100.0,
      py::arg("outcome_variance") = 1.0,
      py::arg("prevalences") = std::vector<double>{},
      py::arg("shared_mc_stream") = false,
      py::arg("interaction_columns") = std::vector<int>{},
      py::arg("ed_bias_columns") = std::vector<int>{},
      py::arg("workers") = 1);

  m.def(
      "exact_permutation_test",
      [](const TrialDataset& data, const ExternalDataset& ext,
         const std::string& family, const std::string& kind,
         double prior_variance, std::uint64_t seed) {
        StatisticSpec spec = build_spec(family, kind, "positive", 0.0, 10000,
                                        prior_variance, 1.0, {}, false, {},
                                        {});
        FittedStatistic stat = FittedStatistic::make(spec, ext);
        return exact_permutation_test(data, stat, {seed, 0});
      },
      py::arg("data"), py::arg("external"), py::arg("family") = "binary",
      py::arg("kind") = "m", py::arg("prior_variance") = 100.0,
      py::arg("seed") = 1);

  m.def(
      "exact_pvalue_binary",
      [](long n1, long s1, long n0, long s0, long nE, long sE) {
        return exact_pvalue_binary(BinaryCounts{n1, s1, n0, s0, nE, sE});
      },
      py::arg("n1"), py::arg("s1"), py::arg("n0"), py::arg("s0"),
      py::arg("nE") = 0, py::arg("sE") = 0);

  m.def("approx_pvalue_binary", &approx_pvalue_binary, py::arg("s1"),
        py::arg("s"), py::arg("sE"), py::arg("n1"), py::arg("r"),
        py::arg("rE"));

  m.def(
      "wald_binary",
      [](long n1, long s1, long n0, long s0, long nE, long sE,
         const std::string& variant, double alpha, bool one_sided,
         double oracle_w0) {
        WaldVariant v = variant == "merged" ? WaldVariant::merged
                        : variant == "oracle" ? WaldVariant::oracle
                                              : WaldVariant::id_only;
        BaselineResult r = wald_binary(
            BinaryCounts{n1, s1, n0, s0, nE, sE}, v, alpha,
            one_sided ? Sidedness::one_sided : Sidedness::two_sided,
            oracle_w0);
        py::dict d;
        d["test_name"] = r.test_name;
        d["statistic"] = r.statistic;
        d["df"] = r.df;
        d["p_value"] = r.p_value;
        d["reject"] = r.reject;
        return d;
      },
      py::arg("n1"), py::arg("s1"), py::arg("n0"), py::arg("s0"),
      py::arg("nE") = 0, py::arg("sE") = 0, py::arg("variant") = "id_only",
      py::arg("alpha") = 0.05, py::arg("one_sided") = false,
      py::arg("oracle_w0") = 0.5);

  m.def(
      "limiting_power_binary",
      [](double r, double rE, double a, double b, double w0, double alpha,
         long n_mc, std::uint64_t seed, int workers) {
        auto est = limiting_power_binary({r, rE, a, b, w0, alpha}, n_mc,
                                         {seed, 0}, workers);
        return py::make_tuple(est.estimate, est.se);
      },
      py::arg("r") = 0.5, py::arg("rE") = 5.0, py::arg("a") = 0.0,
      py::arg("b") = 0.0, py::arg("w0") = 0.5, py::arg("alpha") = 0.05,
      py::arg("n_mc") = 100000, py::arg("seed") = 1, py::arg("workers") = 1);

  m.def(
      "limiting_power_binary_approx",
      [](double r, double rE, double a, double b, double w0, double alpha) {
        return limiting_power_binary_approx({r, rE, a, b, w0, alpha});
      },
      py::arg("r") = 0.5, py::arg("rE") = 5.0, py::arg("a") = 0.0,
      py::arg("b") = 0.0, py::arg("w0") = 0.5, py::arg("alpha") = 0.05);

  m.def(
      "limiting_power_binary_infinite_ed",
      [](double r, double a, double b, double w0, double alpha, long n_mc,
         std::uint64_t seed, int workers) {
        auto est = limiting_power_binary_infinite_ed(
            {r, 1.0, a, b, w0, alpha}, n_mc, {seed, 0}, workers);
        return py::make_tuple(est.estimate, est.se);
      },
      py::arg("r") = 0.5, py::arg("a") = 0.0, py::arg("b") = 0.0,
      py::arg("w0") = 0.5, py::arg("alpha") = 0.05, py::arg("n_mc") = 100000,
      py::arg("seed") = 1, py::arg("workers") = 1);

  m.def(
      "limiting_power_subgroups",
      [](std::vector<double> rho, std::vector<double> a, std::vector<double> b,
         double r, double rE, double alpha, std::vector<double> omega,
         const std::string& family, long n_mc_v, std::uint64_t seed,
         int workers) {
        SubgroupAsymptoticParams params;
        params.rho = std::move(rho);
        params.a = std::move(a);
        params.b = std::move(b);
        params.r = r;
        params.rE = rE;
        params.alpha = alpha;
        params.omega = std::move(omega);
        auto est = limiting_power_subgroups(
            params,
            family == "binary" ? SubgroupFamily::binary
                               : SubgroupFamily::gaussian,
            n_mc_v, {seed, 0}, workers);
        return py::make_tuple(est.estimate, est.se);
      },
      py::arg("rho"), py::arg("a"), py::arg("b"), py::arg("r") = 0.5,
      py::arg("rE") = 7.5, py::arg("alpha") = 0.05,
      py::arg("omega") = std::vector<double>{}, py::arg("family") = "gaussian",
      py::arg("n_mc_v") = 20000, py::arg("seed") = 1, py::arg("workers") = 1);

  m.def("lor_to_relabel_prob", &lor_to_relabel_prob, py::arg("h"),
        py::arg("lor"));

  m.def(
      "synthetic_gbm_source",
      [](const std::string& kind, long n, std::uint64_t seed) {
        return synthetic_gbm_source(kind == "dfci-like"
                                        ? GbmSourceKind::dfci_like
                                        : GbmSourceKind::avaglio_like,
                                    n, seed);
      },
      py::arg("kind") = "avaglio-like", py::arg("n") = 337,
      py::arg("seed") = 1);

  m.def("run_experiment_file", &run_experiment_file, py::arg("config_path"),
        py::arg("out_csv_path"), py::arg("workers_override") = 0,
        py::call_guard<py::gil_scoped_release>());
  m.def("run_experiment_json", &run_experiment_json, py::arg("config_json"),
        py::arg("out_csv_path"), py::arg("workers_override") = 0,
        py::call_guard<py::gil_scoped_release>());
}
