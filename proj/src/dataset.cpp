#include "edpt/dataset.hpp"

#include <algorithm>
#include <numeric>

#include "edpt/errors.hpp"

namespace edpt {

namespace {

bool is_binary_value(double y) { return y == 0.0 || y == 1.0; }

void check_lengths(std::size_t ny, std::size_t nx, std::size_t na, int d,
                   const char* what) {
  if (d < 0) throw DataError(std::string(what) + ": negative dimension");
  if (ny != na) {
    throw DataError(std::string(what) +
                    ": outcomes and assignments differ in length");
  }
  if (nx != ny * static_cast<std::size_t>(d)) {
    throw DataError(std::string(what) + ": covariate matrix is not n x d");
  }
}

}  // namespace

int TrialDataset::treated_count() const {
  return static_cast<int>(
      std::count(assignments.begin(), assignments.end(), 1));
}

TrialDataset TrialDataset::create(std::vector<double> outcomes,
                                  std::vector<double> covariates,
                                  std::vector<int> assignments, int d) {
  check_lengths(outcomes.size(), covariates.size(), assignments.size(), d,
                "TrialDataset");
  TrialDataset data;
  data.n = static_cast<int>(outcomes.size());
  data.d = d;
  if (data.n < 2) throw DataError("TrialDataset: needs at least 2 rows");
  bool has0 = false, has1 = false, binary = true;
  for (int i = 0; i < data.n; ++i) {
    int a = assignments[i];
    if (a != 0 && a != 1) {
      throw DataError("TrialDataset: assignments must be 0 or 1");
    }
    (a == 1 ? has1 : has0) = true;
    if (!is_binary_value(outcomes[i])) binary = false;
  }
  if (!has0 || !has1) {
    throw DataError("TrialDataset: both arms must be present");
  }
  data.outcome_kind = binary ? OutcomeKind::binary : OutcomeKind::continuous;
  data.outcomes = std::move(outcomes);
  data.covariates = std::move(covariates);
  data.assignments = std::move(assignments);
  return data;
}

bool ExternalDataset::all_control() const {
  return std::all_of(assignments.begin(), assignments.end(),
                     [](int a) { return a == 0; });
}

ExternalDataset ExternalDataset::create(std::vector<double> outcomes,
                                        std::vector<double> covariates,
                                        std::vector<int> assignments, int d) {
  check_lengths(outcomes.size(), covariates.size(), assignments.size(), d,
                "ExternalDataset");
  ExternalDataset data;
  data.n = static_cast<int>(outcomes.size());
  data.d = d;
  for (int a : assignments) {
    if (a != 0 && a != 1) {
      throw DataError("ExternalDataset: assignments must be 0 or 1");
    }
  }
  data.outcomes = std::move(outcomes);
  data.covariates = std::move(covariates);
  data.assignments = std::move(assignments);
  return data;
}

ExternalDataset ExternalDataset::empty(int d) {
  ExternalDataset data;
  data.d = d;
  return data;
}

PermutationIndex PermutationIndex::identity(int n) {
  PermutationIndex tau;
  tau.order.resize(n);
  std::iota(tau.order.begin(), tau.order.end(), 0);
  return tau;
}

PermutationIndex PermutationIndex::create(std::vector<int> order) {
  std::vector<char> seen(order.size(), 0);
  for (int v : order) {
    if (v < 0 || v >= static_cast<int>(order.size()) || seen[v]) {
      throw DataError("PermutationIndex: not a bijection on 0..n-1");
    }
    seen[v] = 1;
  }
  PermutationIndex tau;
  tau.order = std::move(order);
  return tau;
}

std::vector<int> permute_assignments(std::span<const int> assignments,
                                     const PermutationIndex& tau) {
  if (assignments.size() != tau.order.size()) {
    throw DataError("permute_assignments: length mismatch");
  }
  std::vector<int> out(assignments.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = assignments[tau.order[i]];
  }
  return out;
}

PermutationIndex random_permutation(int n, RngStream& stream) {
  if (n < 1) throw DataError("random_permutation: n must be >= 1");
  PermutationIndex tau = PermutationIndex::identity(n);
  stream.shuffle(tau.order);
  return tau;
}

}  // namespace edpt
