#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace crrmisc {

// Objective callback for minimization: returns f(x) (may be +inf for an
// infeasible point) and fills *grad when non-null.
using ObjectiveFn =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct OptimOptions {
  double tol_grad = 1e-5;     // stop when ||g||_inf <= tol_grad * (1 + |f|)
  double tol_rel_obj = 1e-12;  // stop when |df| <= tol_rel_obj * (1 + |f|)
  int max_iter = 500;
};

enum class StopReason { Gradient, Objective, MaxIter, LineSearch };

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  StopReason stop = StopReason::MaxIter;
  std::vector<double> objective_history;  // f at accepted iterates
};

// BFGS with a strong-Wolfe cubic line search.  On a line-search failure
// the inverse Hessian is reset once and the search restarts along the
// steepest-descent direction before the failure is reported.
OptimResult minimize_bfgs(const ObjectiveFn& fn, Eigen::VectorXd x0,
                          const OptimOptions& options);

}  // namespace crrmisc
