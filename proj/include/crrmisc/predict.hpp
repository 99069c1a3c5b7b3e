#pragma once

#include <vector>

#include "crrmisc/estimator.hpp"

namespace crrmisc {

struct CifCurve {
  int cause = 1;  // 1-based
  Eigen::VectorXd z;
  std::vector<double> grid;
  std::vector<double> values;
};

// exp(phi_j(t) + beta_j' z); throws std::domain_error outside [0, tau]
double cumulative_hazard(const FitResult& fit, int cause, double t,
                         const Eigen::VectorXd& z);

// Overall survival exp(-sum_j [Lambda_j(t; z) - Lambda_j(0; z)]).  The
// hazards are anchored at t = 0 so that S(0) = 1 and the probability
// decomposition sum_j F_j(t) + S(t) = 1 holds exactly.
double survival(const FitResult& fit, double t, const Eigen::VectorXd& z);

// Cumulative incidence by composite trapezoid on a uniform refinement of
// the requested grid with at least `min_panels` panels.
CifCurve cif(const FitResult& fit, int cause, const Eigen::VectorXd& z,
             const std::vector<double>& grid, int min_panels = 20000);

}  // namespace crrmisc
