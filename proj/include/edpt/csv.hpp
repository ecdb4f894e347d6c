#pragma once

#include <string>

#include "edpt/dataset.hpp"

namespace edpt {

// Column mapping for CSV ingestion. Covariate columns are the contiguous
// run x_prefix+"1", x_prefix+"2", ... present in the header.
struct CsvSchema {
  std::string outcome_column = "y";
  std::string assignment_column = "a";
  std::string covariate_prefix = "x";
};

enum class DatasetRole { internal, external };

struct LoadedDataset {
  TrialDataset internal;    // filled when role == internal
  ExternalDataset external; // filled when role == external
};

TrialDataset load_trial_dataset(const std::string& path,
                                const CsvSchema& schema = {});
ExternalDataset load_external_dataset(const std::string& path,
                                      const CsvSchema& schema = {});

// Writes header y,a,x1..xd and one row per observation; floats are printed
// with 17 significant digits so a reload reproduces the values exactly.
void write_dataset_csv(const std::string& path,
                       std::span<const double> outcomes,
                       std::span<const double> covariates, int d,
                       std::span<const int> assignments,
                       const CsvSchema& schema = {});

}  // namespace edpt
