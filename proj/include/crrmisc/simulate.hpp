#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crrmisc/estimator.hpp"
#include "crrmisc/rng.hpp"

namespace crrmisc {

// Two-cause competing-risks data-generating mechanism with unidirectional
// misclassification of cause 2 as cause 1:
//   lambda_1(t|z) = base1 * exp(beta1 * z)
//   lambda_2(t|z) = base2 * exp(growth2 * t) * exp(beta2 * z)
//   censoring  ~ Uniform(0, censor_hi)
//   covariate  ~ Normal(cov_mean, cov_sd)
//   logit P(C* = 1 | C = 2) = gamma0 + time_slope * g(t) + cov_slope * z
// with g(t) = t, log t, or t^2 depending on the time transform.
struct Scenario {
  enum class TimeTransform { Linear, Log, Quadratic };

  TimeTransform transform = TimeTransform::Linear;
  double gamma0 = -2.0;
  double time_slope = -0.7;
  double cov_slope = 0.8;

  double base1 = 0.5;
  double beta1 = 0.6;
  double base2 = 0.5;
  double growth2 = 2.0;
  double beta2 = 0.3;
  double censor_hi = 2.0;
  double cov_mean = 1.0;
  double cov_sd = 1.0;

  // standard scenarios 1..3 (linear, log, quadratic time)
  static Scenario standard(int id, double gamma0);
};

double hazard1(const Scenario& sc, double z, double t);
double hazard2(const Scenario& sc, double z, double t);
double total_cumulative_hazard(const Scenario& sc, double z, double t);

// Solves Lambda(t | z) = -log(u) by bisection-safeguarded Newton to
// absolute tolerance 1e-10.
double invert_total_hazard(const Scenario& sc, double z, double u);

// P(C = 1 | failure at t, z) = lambda_1 / (lambda_1 + lambda_2)
double cause1_probability(const Scenario& sc, double z, double t);
int assign_cause(const Scenario& sc, double z, double t, Rng& rng);

// flip probability for a true cause-2 failure
double misclassify_probability(const Scenario& sc, double t, double z);
int apply_misclassification(const Scenario& sc, int true_cause, double t,
                            double z, Rng& rng);

struct GeneratedData {
  Dataset data;
  std::vector<int> true_causes;  // latent cause per subject (1 or 2)
};

GeneratedData generate_dataset(const Scenario& sc, int n, std::uint64_t seed);

// The analysis-model classification map used throughout the study runner:
// logit P(C* = 1 | C = 2) = gamma_0 + gamma_1 t + gamma_2 z, always linear
// in time regardless of the generating scenario.
MisclassModel analysis_misclass_model();
Eigen::VectorXd analysis_gamma(const Scenario& sc);

struct StudySummary {
  struct Coefficient {
    int cause = 1;
    double true_value = 0.0;
    double mean = 0.0;
    double bias_pct = 0.0;
    std::optional<double> mcsd;
    std::optional<double> ase;
    std::optional<double> coverage;
    std::optional<double> relative_efficiency;  // no comparator: absent
  };
  std::vector<Coefficient> coefficients;
  int replications = 0;
  int converged = 0;
  int failed = 0;
  std::uint64_t seed = 0;
};

// Monte Carlo study: per replicate, generate a dataset, fit with the
// analysis misclassification model and the generating gamma held fixed,
// and (when n_boot > 0) bootstrap the standard errors.
StudySummary run_study(const Scenario& sc, int n, int replications,
                       int n_boot, const FitConfig& config,
                       std::uint64_t seed);

}  // namespace crrmisc
