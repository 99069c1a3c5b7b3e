#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crrmisc/inference.hpp"
#include "crrmisc/predict.hpp"
#include "crrmisc/simulate.hpp"

namespace crrmisc {

using Json = nlohmann::ordered_json;

// input-format violation: file, line/field, and what was expected
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tabular data file: CSV with header columns `time`, `cause` (0 =
// censored, 1..k), and one numeric column per covariate.
struct DataTable {
  std::vector<std::string> covariate_names;
  std::vector<double> time;
  std::vector<int> cause;
  Eigen::MatrixXd covariates;  // n rows
  int k = 0;                   // largest cause value seen

  int n() const { return static_cast<int>(time.size()); }
};

DataTable read_data_csv(const std::string& path);
DataTable read_data_csv(std::istream& in, const std::string& name);
std::string format_data_csv(const DataTable& table);
DataTable table_from_generated(const GeneratedData& gen);

// gamma.json: externally estimated misclassification parameters plus the
// declarative design.  Covariates are referenced by column name.
struct GammaSpec {
  struct Term {
    std::string kind;  // intercept|time|log_time|time_squared|pwl_time|covariate
    std::vector<double> knots;  // pwl_time
    std::string name;           // covariate
  };
  struct Entry {
    int observed = 1;
    int true_cause = 1;
    std::string type;  // structural|logit|complement
    double value = 0.0;
    std::vector<Term> terms;
    std::vector<int> gamma_indices;
    bool eta_shift = false;
  };
  Eigen::VectorXd gamma;
  Eigen::MatrixXd omega;
  int k = 2;
  std::vector<Entry> entries;
};

GammaSpec read_gamma_json(const std::string& path);
GammaSpec parse_gamma_json(const std::string& text, const std::string& name);

// Resolved inputs ready for fitting.
struct ModelInputs {
  Dataset dataset;
  MisclassModel model;
  GammaEstimate gamma;
  std::vector<std::string> covariate_names;        // survival model
  std::vector<std::string> extra_covariate_names;  // misclassification only
};

// `survival_covariates` empty means: every covariate column.  Design
// covariates outside that set are carried separately per subject.
ModelInputs build_inputs(const DataTable& table, const GammaSpec& spec,
                         const std::vector<std::string>& survival_covariates);

// fit report, JSON schema "crrmisc/1"
Json fit_report(const ModelInputs& inputs, const FitResult& result,
                std::uint64_t seed, const std::string& command);
void attach_bootstrap(Json& report, const BootstrapResult& boot);

// reconstructs enough of a FitResult from a report to predict
struct LoadedFit {
  FitResult fit;
  std::vector<std::string> covariate_names;
};
LoadedFit load_fit_report(const std::string& path);

std::string format_cif_csv(const std::vector<CifCurve>& curves);

Json study_report(const Scenario& sc, int scenario_id, const StudySummary&,
                  int n, int n_boot, std::uint64_t seed);

// deterministic shortest round-trip double formatting for CSV output
std::string format_double(double v);

}  // namespace crrmisc
