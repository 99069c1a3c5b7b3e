#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crrmisc/likelihood.hpp"
#include "crrmisc/model.hpp"

namespace crrmisc {

struct FitConfig {
  int order = 4;
  std::optional<int> n_interior;  // default: ceil(n^(1/(1+2p)))
  std::optional<std::vector<int>> n_interior_per_cause;
  int smoothness_p = 2;
  double tol_rel_obj = 1e-12;
  double tol_grad = 1e-5;
  int max_iter = 500;
  double eta = 0.0;

  void validate() const;
};

struct FitResult {
  Theta theta;
  double loglik = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;  // max-norm at the solution
  bool converged = false;
  std::string stop_reason;  // gradient | objective | max_iter | line_search
  std::vector<KnotVector> knot_report;
  long floored_terms = 0;
  double tau = 0.0;
  double eta = 0.0;
  double min_phi_deriv = 0.0;  // post-check over a fine grid
  IdentifiabilityReport identifiability;
  std::vector<std::string> warnings;
  std::vector<double> objective_history;  // log-likelihood per iterate
};

// Number of interior knots at the optimal-rate default ceil(n^(1/(1+2p))).
int default_knot_count(long n, int p);

// Starting value: beta = 0 and spline coefficients least-squares matched
// to the log Nelson-Aalen estimate of each cumulative cause-specific
// hazard (observed causes treated as true).  Causes without events fall
// back to a flat low-hazard curve with a warning.
Theta initialize(const Dataset& dataset, const std::vector<KnotVector>& knots,
                 std::vector<std::string>* warnings = nullptr);

// Sieve maximum pseudo-likelihood fit (BFGS over the unconstrained
// parameterization with analytic gradients).  Deterministic given
// identical inputs.
FitResult fit(const Dataset& dataset, const FitConfig& config,
              const MisclassModel& model, const Eigen::VectorXd& gamma,
              const Theta* warm_start = nullptr);

// Same machinery with the misclassification layer bypassed (classical
// competing-risks likelihood).
FitResult fit_classical(const Dataset& dataset, const FitConfig& config,
                        const Theta* warm_start = nullptr);

// Knot vectors used by fit(): shared interior-knot count at the
// quantiles of the distinct uncensored event times.
std::vector<KnotVector> select_knots(const Dataset& dataset,
                                     const FitConfig& config);

}  // namespace crrmisc
