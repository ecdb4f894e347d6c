#include "edpt/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "edpt/errors.hpp"

namespace edpt {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& raw, const std::string& path,
                    std::size_t line_no, const std::string& column) {
  std::string s = trim(raw);
  if (s.empty()) {
    throw DataError(path + ":" + std::to_string(line_no) +
                    ": missing value in column '" + column + "'");
  }
  std::size_t used = 0;
  double value = 0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) {
    throw DataError(path + ":" + std::to_string(line_no) +
                    ": non-numeric cell '" + s + "' in column '" + column +
                    "'");
  }
  return value;
}

struct RawTable {
  std::vector<double> outcomes;
  std::vector<double> covariates;
  std::vector<int> assignments;
  int d = 0;
};

RawTable read_table(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(path + ": empty file, header row required");
  }
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);

  int y_col = -1, a_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == schema.outcome_column) y_col = static_cast<int>(i);
    if (header[i] == schema.assignment_column) a_col = static_cast<int>(i);
  }
  if (y_col < 0) {
    throw DataError(path + ": missing column '" + schema.outcome_column + "'");
  }
  if (a_col < 0) {
    throw DataError(path + ": missing column '" + schema.assignment_column +
                    "'");
  }
  // Covariates: the contiguous run x1, x2, ...
  std::vector<int> x_cols;
  for (int j = 1;; ++j) {
    std::string name = schema.covariate_prefix + std::to_string(j);
    int found = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) found = static_cast<int>(i);
    }
    if (found < 0) break;
    x_cols.push_back(found);
  }

  RawTable table;
  table.d = static_cast<int>(x_cols.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": ragged row (expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()) + ")");
    }
    double y = parse_number(fields[y_col], path, line_no,
                            schema.outcome_column);
    double a = parse_number(fields[a_col], path, line_no,
                            schema.assignment_column);
    if (a != 0.0 && a != 1.0) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": assignment must be 0 or 1");
    }
    table.outcomes.push_back(y);
    table.assignments.push_back(static_cast<int>(a));
    for (int j = 0; j < table.d; ++j) {
      table.covariates.push_back(parse_number(
          fields[x_cols[j]], path, line_no,
          schema.covariate_prefix + std::to_string(j + 1)));
    }
  }
  return table;
}

}  // namespace

TrialDataset load_trial_dataset(const std::string& path,
                                const CsvSchema& schema) {
  RawTable t = read_table(path, schema);
  try {
    return TrialDataset::create(std::move(t.outcomes),
                                std::move(t.covariates),
                                std::move(t.assignments), t.d);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

ExternalDataset load_external_dataset(const std::string& path,
                                      const CsvSchema& schema) {
  RawTable t = read_table(path, schema);
  try {
    return ExternalDataset::create(std::move(t.outcomes),
                                   std::move(t.covariates),
                                   std::move(t.assignments), t.d);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_dataset_csv(const std::string& path,
                       std::span<const double> outcomes,
                       std::span<const double> covariates, int d,
                       std::span<const int> assignments,
                       const CsvSchema& schema) {
  std::FILE* out = std::fopen(path.c_str(), "w");
  if (!out) throw DataError("cannot open file for writing: " + path);
  std::fprintf(out, "%s,%s", schema.outcome_column.c_str(),
               schema.assignment_column.c_str());
  for (int j = 1; j <= d; ++j) {
    std::fprintf(out, ",%s%d", schema.covariate_prefix.c_str(), j);
  }
  std::fprintf(out, "\n");
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    std::fprintf(out, "%.17g,%d", outcomes[i], assignments[i]);
    for (int j = 0; j < d; ++j) {
      std::fprintf(out, ",%.17g", covariates[i * d + j]);
    }
    std::fprintf(out, "\n");
  }
  std::fclose(out);
}

}  // namespace edpt
