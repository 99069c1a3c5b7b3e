#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crrmisc/estimator.hpp"
#include "crrmisc/rng.hpp"

namespace crrmisc {

struct BootstrapResult {
  Eigen::MatrixXd sigma_hat;        // (k*p) x (k*p), converged replicates
  Eigen::MatrixXd replicate_betas;  // B x (k*p); failed rows are NaN
  std::vector<bool> replicate_converged;
  int failures = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXd se;  // sqrt of diag(sigma_hat)
  std::vector<std::string> warnings;
};

// gamma_hat + L xi with L the Cholesky factor of the PSD-clipped omega;
// an exactly zero omega returns gamma_hat without consuming randomness.
Eigen::VectorXd draw_gamma(const GammaEstimate& gamma, Rng& rng);

// n subjects drawn uniformly with replacement; tau recomputed.
Dataset resample(const Dataset& dataset, Rng& rng);

// Two-level bootstrap: per replicate, draw gamma from its estimated
// sampling distribution, resample the data, refit.  Replicates use
// substreams keyed by (seed, b) and a warm start at `point`, so the
// result is independent of execution order.  Throws when more than 20%
// of replicates fail.
BootstrapResult bootstrap_variance(const Dataset& dataset,
                                   const FitConfig& config,
                                   const MisclassModel& model,
                                   const GammaEstimate& gamma, int n_boot,
                                   std::uint64_t seed,
                                   const Theta* point = nullptr);

// Nonparametric bootstrap with gamma held fixed; uses the same resample
// substreams as bootstrap_variance.
BootstrapResult plain_bootstrap(const Dataset& dataset,
                                const FitConfig& config,
                                const MisclassModel& model,
                                const Eigen::VectorXd& gamma, int n_boot,
                                std::uint64_t seed,
                                const Theta* point = nullptr);

// One replicate of the two-level bootstrap, fully determined by
// (seed, b); exposed so order independence is directly testable.
Eigen::VectorXd bootstrap_replicate(const Dataset& dataset,
                                    const FitConfig& config,
                                    const MisclassModel& model,
                                    const GammaEstimate& gamma,
                                    std::uint64_t seed, int b,
                                    const Theta* point, bool& converged);

// normal-theory interval:  estimate +/- 1.96 * se
std::pair<double, double> normal_interval(double estimate, double se);

// percentile interval from a column of replicate estimates
std::pair<double, double> percentile_interval(const Eigen::VectorXd& draws,
                                              double level = 0.95);

}  // namespace crrmisc
