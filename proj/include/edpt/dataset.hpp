#pragma once

#include <span>
#include <string>
#include <vector>

#include "edpt/rng.hpp"

namespace edpt {

enum class OutcomeKind { binary, continuous };

// Randomized-trial data: outcomes y, covariate matrix x (n rows, d columns,
// row-major) and 0/1 treatment assignments. Immutable after construction;
// create() enforces the invariants (shared length n >= 2, both arms
// present, binary outcomes in {0,1}).
struct TrialDataset {
  std::vector<double> outcomes;
  std::vector<double> covariates;  // n x d, row-major
  std::vector<int> assignments;
  int n = 0;
  int d = 0;
  OutcomeKind outcome_kind = OutcomeKind::continuous;

  double covariate(int row, int col) const {
    return covariates[static_cast<std::size_t>(row) * d + col];
  }
  std::span<const double> covariate_row(int row) const {
    return {covariates.data() + static_cast<std::size_t>(row) * d,
            static_cast<std::size_t>(d)};
  }
  int treated_count() const;

  static TrialDataset create(std::vector<double> outcomes,
                             std::vector<double> covariates,
                             std::vector<int> assignments, int d);
};

// External cohort. May be empty (n = 0), in which case every statistic
// reduces to its trial-only form.
struct ExternalDataset {
  std::vector<double> outcomes;
  std::vector<double> covariates;  // n x d, row-major
  std::vector<int> assignments;
  int n = 0;
  int d = 0;

  double covariate(int row, int col) const {
    return covariates[static_cast<std::size_t>(row) * d + col];
  }
  std::span<const double> covariate_row(int row) const {
    return {covariates.data() + static_cast<std::size_t>(row) * d,
            static_cast<std::size_t>(d)};
  }
  bool all_control() const;

  static ExternalDataset create(std::vector<double> outcomes,
                                std::vector<double> covariates,
                                std::vector<int> assignments, int d);
  static ExternalDataset empty(int d);
};

// A bijection on {0, ..., n-1}.
struct PermutationIndex {
  std::vector<int> order;

  static PermutationIndex identity(int n);
  // Throws DataError unless order is a bijection.
  static PermutationIndex create(std::vector<int> order);
};

// output[i] = assignments[tau.order[i]]; the value multiset is preserved.
std::vector<int> permute_assignments(std::span<const int> assignments,
                                     const PermutationIndex& tau);

// Uniform draw over all n! orderings, deterministic given the stream.
PermutationIndex random_permutation(int n, RngStream& stream);

}  // namespace edpt
